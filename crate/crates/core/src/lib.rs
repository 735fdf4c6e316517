pub mod fem;
pub mod mesh;
pub mod random_field;
pub mod sparse;
pub mod doe;
pub mod metamodel;
pub mod screening;
pub mod stats;
pub mod collocation;
pub mod model;
pub mod pipeline;
