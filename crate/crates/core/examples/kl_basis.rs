//! Karhunen-Loeve expansions of the three subdomain fields: eigenvalues,
//! captured variance, and a sample realization of the coefficient.

use rbf_uq::mesh::Subdomain;
use rbf_uq::model::ModelProblem;
use rbf_uq::random_field::{build_kl_basis, evaluate_coefficient, PiecewiseField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem = ModelProblem::uniform_inputs(1.0, 0.1);
    for spec in &problem.fields {
        let basis = build_kl_basis(spec)?;
        let lambdas = basis.eigenvalues();
        let (lo, hi) = spec.domain_box;
        let area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
        let captured: f64 = lambdas.iter().sum::<f64>() / (spec.variance * area);
        println!("{:?}: {} terms, captured variance {:.1}%", spec.subdomain, lambdas.len(), 100.0 * captured);
        for (n, (t, l)) in basis.terms().iter().zip(&lambdas).enumerate() {
            println!("  mode {n}: ({}, {})  lambda = {l:.5}", t.mode_x, t.mode_y);
        }
    }

    let field = PiecewiseField::new(&problem.fields)?;
    let y = vec![0.5; field.dim()];
    for (x, s) in [([0.5, 0.5], Subdomain::D1), ([1.5, 0.5], Subdomain::D2), ([1.5, 0.75], Subdomain::D3)] {
        let a = evaluate_coefficient(x, 0.5, &y, &field, problem.gamma)?;
        assert_eq!(a.subdomain, s);
        println!("a({x:?}, u = 0.5) = {:.4}  in {s:?}", a.value);
    }
    Ok(())
}
