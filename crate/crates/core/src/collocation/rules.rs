//! One-dimensional quadrature rules on probability measures, in
//! normalised coordinates (`[-1, 1]` for uniform, standard normal units
//! for Gaussian variables).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ClenshawCurtis,
    GaussLegendre,
    GaussHermite,
}

impl Rule {
    /// Points of the 1D rule at Smolyak level index `i >= 1`.
    ///
    /// Clenshaw-Curtis is nested with `1, 3, 5, 9, ...` points; the Gauss
    /// rules use `2^i - 1` points (`1, 3, 7, ...`).
    pub fn points_at(self, i: usize) -> usize {
        assert!(i >= 1);
        match self {
            Rule::ClenshawCurtis => {
                if i == 1 {
                    1
                } else {
                    (1 << (i - 1)) + 1
                }
            }
            Rule::GaussLegendre | Rule::GaussHermite => (1 << i) - 1,
        }
    }

    pub fn nested(self) -> bool {
        matches!(self, Rule::ClenshawCurtis)
    }

    /// Nodes (ascending) and probability weights of the level-`i` rule.
    pub fn nodes_weights(self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let m = self.points_at(i);
        let (x, w) = match self {
            Rule::ClenshawCurtis => clenshaw_curtis(m),
            Rule::GaussLegendre => golub_welsch(m, |k| {
                let k = k as f64;
                k * k / (4.0 * k * k - 1.0)
            }),
            Rule::GaussHermite => golub_welsch(m, |k| k as f64),
        };
        symmetrize(x, w)
    }
}

fn clenshaw_curtis(m: usize) -> (Vec<f64>, Vec<f64>) {
    if m == 1 {
        return (vec![0.0], vec![1.0]);
    }
    let x: Vec<f64> = (0..m).map(|j| -(std::f64::consts::PI * j as f64 / (m - 1) as f64).cos()).collect();
    // Moment equations sum_j w_j x_j^k = E[x^k] for the uniform measure on [-1, 1].
    let v = DMatrix::from_fn(m, m, |k, j| x[j].powi(k as i32));
    let b = DVector::from_fn(m, |k, _| if k % 2 == 0 { 1.0 / (k + 1) as f64 } else { 0.0 });
    let w = v.lu().solve(&b).expect("Chebyshev-extrema Vandermonde is nonsingular");
    (x, w.as_slice().to_vec())
}

/// Gauss rule from the Jacobi matrix of the monic recurrence with
/// coefficients `beta(k)`, `k = 1..m-1` (zero diagonal, symmetric measure).
fn golub_welsch(m: usize, beta: impl Fn(usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::zeros(m, m);
    for k in 1..m {
        let b = beta(k).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m).map(|c| (eig.eigenvalues[c], eig.eigenvectors[(0, c)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pairs.into_iter().unzip()
}

/// Enforces exact symmetry about 0 (the centre node becomes exactly 0)
/// and renormalises the weights to sum to 1.
fn symmetrize(mut x: Vec<f64>, mut w: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let m = x.len();
    for j in 0..m / 2 {
        let a = 0.5 * (x[m - 1 - j] - x[j]);
        x[j] = -a;
        x[m - 1 - j] = a;
        let ww = 0.5 * (w[j] + w[m - 1 - j]);
        w[j] = ww;
        w[m - 1 - j] = ww;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    (x, w)
}

/// Lagrange basis polynomial `l_k(t)` on `nodes`.
pub fn lagrange(nodes: &[f64], k: usize, t: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .map(|(_, &xj)| (t - xj) / (nodes[k] - xj))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moment(rule: Rule, i: usize, p: i32) -> f64 {
        let (x, w) = rule.nodes_weights(i);
        x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum()
    }

    #[test]
    fn sizes() {
        let cc: Vec<usize> = (1..=4).map(|i| Rule::ClenshawCurtis.points_at(i)).collect();
        assert_eq!(cc, vec![1, 3, 5, 9]);
        let g: Vec<usize> = (1..=3).map(|i| Rule::GaussHermite.points_at(i)).collect();
        assert_eq!(g, vec![1, 3, 7]);
    }

    #[test]
    fn legendre_three_point() {
        let (x, w) = Rule::GaussLegendre.nodes_weights(2);
        let a = (0.6f64).sqrt();
        assert!((x[0] + a).abs() < 1e-14 && x[1] == 0.0 && (x[2] - a).abs() < 1e-14);
        // 5/9, 8/9, 5/9 halved for the probability measure
        assert!((w[0] - 5.0 / 18.0).abs() < 1e-14 && (w[1] - 8.0 / 18.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_three_point() {
        let (x, w) = Rule::GaussHermite.nodes_weights(2);
        assert!((x[2] - 3f64.sqrt()).abs() < 1e-14);
        assert!((w[0] - 1.0 / 6.0).abs() < 1e-14 && (w[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cc_five_point_nodes() {
        let (x, w) = Rule::ClenshawCurtis.nodes_weights(3);
        assert_eq!(x[2], 0.0);
        assert!((x[1] + 0.5f64.sqrt()).abs() < 1e-15);
        // classical CC weights 1/15, 8/15, 12/15, 8/15, 1/15 on [-1,1], halved
        for (a, b) in w.iter().zip([1.0, 8.0, 12.0, 8.0, 1.0]) {
            assert!((a - b / 30.0).abs() < 1e-14, "{w:?}");
        }
    }

    #[test]
    fn exactness() {
        // uniform moments 1/(p+1); normal moments (p-1)!!
        for p in 0..=5 {
            let u = if p % 2 == 0 { 1.0 / (p + 1) as f64 } else { 0.0 };
            assert!((moment(Rule::GaussLegendre, 2, p) - u).abs() < 1e-14);
            assert!((moment(Rule::ClenshawCurtis, 3, p) - u).abs() < 1e-14);
        }
        let dfact = [1.0, 0.0, 1.0, 0.0, 3.0, 0.0, 15.0, 0.0, 105.0, 0.0, 945.0, 0.0, 10395.0, 0.0];
        for (p, &e) in dfact.iter().enumerate() {
            assert!((moment(Rule::GaussHermite, 3, p as i32) - e).abs() < 1e-9 * e.max(1.0), "p={p}");
        }
    }

    #[test]
    fn lagrange_delta() {
        let (x, _) = Rule::GaussHermite.nodes_weights(3);
        for k in 0..x.len() {
            for (m, &t) in x.iter().enumerate() {
                let want = if k == m { 1.0 } else { 0.0 };
                assert!((lagrange(&x, k, t) - want).abs() < 1e-12);
            }
        }
    }
}
