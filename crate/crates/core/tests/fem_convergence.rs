mod common;

use std::f64::consts::PI;

use rbf_uq::fem::{l2_error, solve_deterministic, BoundaryConditions, FemSystem, NewtonOptions};
use rbf_uq::mesh::{build_lshape_mesh, BoundaryTag, Mesh, Point, Subdomain};

fn unit(_: Point, _: Subdomain) -> f64 {
    1.0
}

fn manufactured_error(n: usize) -> f64 {
    let mesh = Mesh::rectangle([0.0, 0.0], [1.0, 1.0], n, n, BoundaryTag::DirichletLeft).unwrap();
    let bc = BoundaryConditions::uniform(0.0);
    let src = |p: Point| 2.0 * PI * PI * (PI * p[0]).sin() * (PI * p[1]).sin();
    let rep = solve_deterministic(&mesh, &unit, &bc, src, 0.0, &NewtonOptions::default()).unwrap();
    l2_error(&mesh, &rep.solution, |p| (PI * p[0]).sin() * (PI * p[1]).sin())
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let errs: Vec<f64> = [8, 16, 32].iter().map(|&n| manufactured_error(n)).collect();
    for w in errs.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!((1.8..=2.2).contains(&rate), "rate {rate}, errors {errs:?}");
    }
}

#[test]
fn renumbering_does_not_change_the_solution() {
    let mesh = build_lshape_mesh(0.2).unwrap();
    let n = mesh.num_nodes();
    // a fixed scrambling permutation
    let perm: Vec<usize> = (0..n).map(|i| (i * 7919 + 13) % n).collect();
    let mut seen = vec![false; n];
    perm.iter().for_each(|&p| seen[p] = true);
    assert!(seen.iter().all(|&s| s), "not a permutation");
    let renum = mesh.renumbered(&perm);
    let bc = BoundaryConditions::model_problem();
    let coeff = |x: Point, s: Subdomain| 1.0 + x[0] + 0.5 * s.index() as f64;
    let a = solve_deterministic(&mesh, &coeff, &bc, |_| 1.0, 1.0, &NewtonOptions::default()).unwrap();
    let b = solve_deterministic(&renum, &coeff, &bc, |_| 1.0, 1.0, &NewtonOptions::default()).unwrap();
    for (old, &new) in perm.iter().enumerate() {
        assert!((a.solution[old] - b.solution[new]).abs() < 1e-10);
    }
}

#[test]
fn linear_problem_is_linear_in_the_data() {
    let sys = FemSystem::new(build_lshape_mesh(0.1).unwrap());
    let opts = NewtonOptions::default();
    let solve = |l: f64, r: f64, f: f64| sys.solve(&unit, &BoundaryConditions::dirichlet(l, r), |_| f, 0.0, &opts).unwrap().solution;
    let u1 = solve(1.0, 0.0, 0.0);
    let u2 = solve(0.0, 1.0, 0.0);
    let u3 = solve(0.0, 0.0, 1.0);
    let combo = solve(2.0, -0.5, 3.0);
    for i in 0..u1.len() {
        let expected = 2.0 * u1[i] - 0.5 * u2[i] + 3.0 * u3[i];
        assert!((combo[i] - expected).abs() < 1e-10);
    }
}

#[test]
fn newton_residual_decreases_monotonically() {
    let mesh = build_lshape_mesh(0.1).unwrap();
    for gamma in [1.0, 10.0] {
        let rep = solve_deterministic(&mesh, &unit, &BoundaryConditions::model_problem(), |_| 1.0, gamma, &NewtonOptions::default()).unwrap();
        assert!(rep.residual_history.windows(2).all(|w| w[1] <= w[0]), "{:?}", rep.residual_history);
        assert!(rep.final_residual_norm <= 1e-10);
    }
}

#[test]
fn strong_nonlinearity_converges() {
    let mesh = build_lshape_mesh(0.1).unwrap();
    let rep = solve_deterministic(&mesh, &unit, &BoundaryConditions::model_problem(), |_| 1.0, 100.0, &NewtonOptions::default()).unwrap();
    assert!(rep.final_residual_norm <= 1e-10);
}
