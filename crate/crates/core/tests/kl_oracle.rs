mod common;

use common::simpson;
use rbf_uq::random_field::kl_eigenpairs_1d;

/// `int_0^a sigma2 exp(-|x-s|/b) phi(s) ds`, split at the kink.
fn apply_kernel(sigma2: f64, b: f64, a: f64, phi: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let k = |s: f64| sigma2 * (-(x - s).abs() / b).exp() * phi(s);
    let n = 2000;
    simpson(k, 0.0, x, n) + simpson(k, x, a, n)
}

#[test]
fn eigenpairs_solve_the_integral_equation() {
    for &(sigma2, b, a) in &[(100.0, 1.0, 1.0), (2.25, 0.5, 1.0), (900.0, 1.5, 2.0), (1.0, 0.3, 2.0)] {
        let pairs = kl_eigenpairs_1d(sigma2, b, a, 8).unwrap();
        for p in &pairs {
            let phi = |s: f64| p.eval(s);
            let norm2 = simpson(|s| phi(s) * phi(s), 0.0, a, 4000);
            assert!((norm2 - 1.0).abs() < 1e-8, "norm {norm2}");
            for i in 0..=10 {
                let x = a * i as f64 / 10.0;
                let res = apply_kernel(sigma2, b, a, &phi, x) - p.eigenvalue * phi(x);
                assert!(res.abs() / p.eigenvalue < 1e-6, "sigma2 {sigma2}, b {b}: residual {res}");
            }
        }
        for w in pairs.windows(2) {
            let cross = simpson(|s| w[0].eval(s) * w[1].eval(s), 0.0, a, 4000);
            assert!(cross.abs() < 1e-8);
        }
    }
}

#[test]
fn truncated_trace_approaches_total_variance() {
    for &(sigma2, b, a) in &[(100.0, 1.0, 1.0), (2.25, 0.5, 1.0), (900.0, 1.5, 2.0), (100.0, 1.0, 2.0)] {
        let trace: f64 = kl_eigenpairs_1d(sigma2, b, a, 50).unwrap().iter().map(|p| p.eigenvalue).sum();
        let total = sigma2 * a;
        assert!(trace <= total * (1.0 + 1e-12));
        assert!((total - trace) / total < 0.02, "trace {trace} vs {total}");
    }
}
