//! Build the L-shaped mesh and solve the nonlinear problem for a constant
//! coefficient and for one realization of the random coefficient.
//!
//! cargo run --release --example mesh_and_solve -- 0.05

use rbf_uq::fem::{solve_deterministic, BoundaryConditions, NewtonOptions};
use rbf_uq::mesh::{build_lshape_mesh, Subdomain};
use rbf_uq::model::{ModelProblem, Simulator};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h: f64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0.1);
    let mesh = build_lshape_mesh(h)?;
    println!("h = {h}: {} nodes, {} triangles, area {:.6}", mesh.num_nodes(), mesh.num_triangles(), mesh.area());

    for gamma in [0.0, 1.0, 100.0] {
        let rep = solve_deterministic(
            &mesh,
            &|_x, _s: Subdomain| 1.0,
            &BoundaryConditions::model_problem(),
            |_| 1.0,
            gamma,
            &NewtonOptions::default(),
        )?;
        let max = rep.solution.iter().cloned().fold(f64::MIN, f64::max);
        println!(
            "a = 1 + {gamma} u^2: {} Newton steps, residual {:.2e}, max u {max:.5}",
            rep.newton_iterations, rep.final_residual_norm
        );
    }

    let sim = Simulator::new(&ModelProblem::uniform_inputs(1.0, h))?;
    let y: Vec<f64> = (0..sim.dim()).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let u = sim.solve(&y)?;
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    println!("random coefficient, alternating y = +-1: nodal mean of u {mean:.5}");
    Ok(())
}
