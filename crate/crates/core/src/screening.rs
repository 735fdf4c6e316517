//! Finite-difference parameter screening on star and cross designs.
//!
//! Central differences on the star design give the Jacobian and the
//! diagonal of the Hessian at every grid point; their column norms rank
//! the parameters. The optional cross design adds mixed second
//! derivatives for the global linearity measure `D`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::doe::{star_index, DesignMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScreeningError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("reduction policy retains no parameters")]
    EmptySelection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    /// `M x L` central-difference Jacobian.
    pub jacobian: DMatrix<f64>,
    /// `M x L` second differences along each axis.
    pub diag_hessian: DMatrix<f64>,
    /// Column norms of the Jacobian.
    pub s: Vec<f64>,
    /// Column norms of the diagonal Hessian.
    pub s2: Vec<f64>,
    /// Parameter indices by descending `s`, ties by ascending index.
    pub ranking: Vec<usize>,
    /// `s_j < c s2_j`
    pub nonlinear_global: Vec<bool>,
    /// `|J_ij| < c |diagH_ij|`
    pub nonlinear_local: DMatrix<bool>,
    pub c: f64,
}

impl SensitivityReport {
    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// 1-based rank of every parameter.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.dim()];
        for (r, &j) in self.ranking.iter().enumerate() {
            ranks[j] = r + 1;
        }
        ranks
    }

    /// Writes `parameter,S,S2,rank,nonlinear_global,nonlinear_local_fraction`.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let ranks = self.ranks();
        let m = self.nonlinear_local.nrows().max(1) as f64;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["parameter", "S", "S2", "rank", "nonlinear_global", "nonlinear_local_fraction"])?;
        for j in 0..self.dim() {
            let local = self.nonlinear_local.column(j).iter().filter(|&&b| b).count() as f64 / m;
            wtr.write_record(&[
                (j + 1).to_string(),
                format!("{:e}", self.s[j]),
                format!("{:e}", self.s2[j]),
                ranks[j].to_string(),
                self.nonlinear_global[j].to_string(),
                format!("{local:e}"),
            ])?;
        }
        wtr.flush()
    }
}

/// Central differences on a star design in its documented column order.
///
/// `step[j]` is the distance of the `+-e_j` points from the centre.
pub fn compute_jacobian_diaghessian(x: &DesignMatrix, step: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>), ScreeningError> {
    let n = x.sample_count();
    if n % 2 == 0 || n < 3 {
        return Err(ScreeningError::ShapeMismatch(format!("star design needs 2L+1 columns, got {n}")));
    }
    let dim = (n - 1) / 2;
    if step.len() != dim {
        return Err(ScreeningError::ShapeMismatch(format!("{} steps for {dim} parameters", step.len())));
    }
    let xs = &x.snapshots;
    let m = xs.nrows();
    let centre = xs.column(0);
    let mut jac = DMatrix::zeros(m, dim);
    let mut hess = DMatrix::zeros(m, dim);
    for j in 0..dim {
        let plus = xs.column(star_index(j, 1.0));
        let minus = xs.column(star_index(j, -1.0));
        let h = step[j];
        for i in 0..m {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            hess[(i, j)] = (plus[i] - 2.0 * centre[i] + minus[i]) / (h * h);
        }
    }
    Ok((jac, hess))
}

fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

/// Indices sorted by descending value, ties by ascending index.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// Global sensitivities, ranking and nonlinearity flags.
pub fn global_measures(jacobian: DMatrix<f64>, diag_hessian: DMatrix<f64>, c: f64) -> Result<SensitivityReport, ScreeningError> {
    if jacobian.shape() != diag_hessian.shape() {
        return Err(ScreeningError::ShapeMismatch(format!(
            "Jacobian {:?} vs diagonal Hessian {:?}",
            jacobian.shape(),
            diag_hessian.shape()
        )));
    }
    let s = column_norms(&jacobian);
    let s2 = column_norms(&diag_hessian);
    let ranking = rank_descending(&s);
    let nonlinear_global = s.iter().zip(&s2).map(|(a, b)| *a < c * b).collect();
    let nonlinear_local = DMatrix::from_fn(jacobian.nrows(), jacobian.ncols(), |i, j| {
        jacobian[(i, j)].abs() < c * diag_hessian[(i, j)].abs()
    });
    Ok(SensitivityReport { jacobian, diag_hessian, s, s2, ranking, nonlinear_global, nonlinear_local, c })
}

/// Screening of a star design with unit steps and `c = 1`.
pub fn screen(x: &DesignMatrix) -> Result<SensitivityReport, ScreeningError> {
    let dim = (x.sample_count().saturating_sub(1)) / 2;
    let (j, h) = compute_jacobian_diaghessian(x, &vec![1.0; dim])?;
    global_measures(j, h, 1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearityReport {
    /// `L x L` root-sum-of-squares aggregate of the pointwise Hessians.
    pub full_hessian_global: DMatrix<f64>,
    pub alpha_max: f64,
    pub d: f64,
    pub sigma: f64,
}

impl LinearityReport {
    /// `D >= 0` is read as linear dependence on all parameters.
    pub fn is_linear(&self) -> bool {
        self.d >= 0.0
    }
}

/// Largest-magnitude eigenvalue of a symmetric matrix with non-negative
/// entries (its Perron root), by power iteration on `G + sI`.
pub fn perron_root(g: &DMatrix<f64>, tol: f64) -> f64 {
    let n = g.nrows();
    if n == 0 || g.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    // The shift makes the Perron root strictly dominant in magnitude.
    let shift = g.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let shifted = g + DMatrix::identity(n, n) * shift;
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut rho = 0.0;
    for _ in 0..200_000 {
        let w = &shifted * &v;
        let next = v.dot(&w);
        let nrm = w.norm();
        v = w / nrm;
        let done = (next - rho).abs() <= tol * next.abs().max(1.0);
        rho = next;
        if done {
            break;
        }
    }
    (&v.transpose() * g * &v)[(0, 0)]
}

/// Mixed second differences from a cross design, aggregated into the
/// global Hessian `G`, its Perron root and `D = sqrt(sum S_j^2) - sigma/4 |alpha_max|`.
pub fn full_hessian_and_d(
    star: &DesignMatrix,
    cross: &DesignMatrix,
    step: &[f64],
    sigma: f64,
) -> Result<LinearityReport, ScreeningError> {
    let (jac, hdiag) = compute_jacobian_diaghessian(star, step)?;
    let dim = step.len();
    let expected = 2 * dim * dim.saturating_sub(1);
    if cross.sample_count() != expected {
        return Err(ScreeningError::ShapeMismatch(format!("cross design needs {expected} columns, got {}", cross.sample_count())));
    }
    if cross.spatial_size() != star.spatial_size() {
        return Err(ScreeningError::ShapeMismatch("star and cross designs have different spatial sizes".into()));
    }
    let s = column_norms(&jac);
    let s2 = column_norms(&hdiag);
    let xc = &cross.snapshots;
    let mut g = DMatrix::zeros(dim, dim);
    let mut col = 0;
    for j in 0..dim {
        g[(j, j)] = s2[j];
        for l in j + 1..dim {
            let denom = 4.0 * step[j] * step[l];
            let (pp, pm, mp, mm) = (xc.column(col), xc.column(col + 1), xc.column(col + 2), xc.column(col + 3));
            let sq: f64 = (0..xc.nrows()).map(|i| ((pp[i] - pm[i] - mp[i] + mm[i]) / denom).powi(2)).sum();
            g[(j, l)] = sq.sqrt();
            g[(l, j)] = g[(j, l)];
            col += 4;
        }
    }
    let alpha_max = perron_root(&g, 1e-10).abs();
    let d = s.iter().map(|v| v * v).sum::<f64>().sqrt() - sigma / 4.0 * alpha_max;
    Ok(LinearityReport { full_hessian_global: g, alpha_max, d, sigma })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ReductionPolicy {
    /// The `k` highest-ranked parameters.
    TopK(usize),
    /// The shortest ranking prefix whose `S` sum reaches this fraction of the total.
    CumulativeFraction(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    /// Retained full-space indices, ascending.
    pub retained: Vec<usize>,
    /// Value every dropped parameter is frozen at (its mean, `0`).
    pub frozen_value: f64,
    pub full_dim: usize,
}

impl Reduction {
    pub fn identity(dim: usize) -> Self {
        Self { retained: (0..dim).collect(), frozen_value: 0.0, full_dim: dim }
    }

    pub fn reduced_dim(&self) -> usize {
        self.retained.len()
    }

    /// Embeds a reduced point into the full space.
    pub fn expand(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![self.frozen_value; self.full_dim];
        for (&j, &v) in self.retained.iter().zip(reduced) {
            full[j] = v;
        }
        full
    }

    /// Projects a full point onto the retained coordinates.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.retained.iter().map(|&j| full[j]).collect()
    }
}

pub fn reduce_parameters(report: &SensitivityReport, policy: ReductionPolicy) -> Result<Reduction, ScreeningError> {
    let count = match policy {
        ReductionPolicy::TopK(k) => k.min(report.dim()),
        ReductionPolicy::CumulativeFraction(f) => {
            let total: f64 = report.s.iter().sum();
            if total <= 0.0 || f <= 0.0 {
                0
            } else {
                let mut acc = 0.0;
                let mut n = report.dim();
                for (r, &j) in report.ranking.iter().enumerate() {
                    acc += report.s[j];
                    if acc >= f * total {
                        n = r + 1;
                        break;
                    }
                }
                n
            }
        }
    };
    if count == 0 {
        return Err(ScreeningError::EmptySelection);
    }
    let mut retained = report.ranking[..count].to_vec();
    retained.sort_unstable();
    Ok(Reduction { retained, frozen_value: 0.0, full_dim: report.dim() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::{cross_doe, run_doe, star_doe, ParameterPoint};

    fn design<F: Fn(&[f64]) -> Vec<f64> + Sync>(pts: &[ParameterPoint], f: F) -> DesignMatrix {
        run_doe(pts, |p| Ok::<_, String>(f(&p.0))).unwrap()
    }

    #[test]
    fn linear_response_has_exact_jacobian() {
        let x = design(&star_doe(3), |y| vec![3.0 * y[1], 3.0 * y[1] + 1.0]);
        let (j, h) = compute_jacobian_diaghessian(&x, &[1.0; 3]).unwrap();
        for i in 0..2 {
            assert!((j[(i, 1)] - 3.0).abs() < 1e-10);
            assert!(j[(i, 0)].abs() < 1e-10 && j[(i, 2)].abs() < 1e-10);
        }
        assert!(h.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn quadratic_response_has_exact_diagonal_hessian() {
        let x = design(&star_doe(2), |y| vec![y[0] * y[0]]);
        let (j, h) = compute_jacobian_diaghessian(&x, &[1.0; 2]).unwrap();
        assert_eq!(h[(0, 0)], 2.0);
        assert_eq!(j[(0, 0)], 0.0);
    }

    #[test]
    fn non_star_shape_rejected() {
        let x = design(&star_doe(2)[..4], |y| vec![y[0]]);
        assert!(matches!(compute_jacobian_diaghessian(&x, &[1.0; 2]), Err(ScreeningError::ShapeMismatch(_))));
    }

    #[test]
    fn zero_columns_rank_last_by_index() {
        let jac = DMatrix::from_row_slice(2, 4, &[0.0, 4.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let rep = global_measures(jac, DMatrix::zeros(2, 4), 1.0).unwrap();
        assert_eq!(rep.s[1], 4.0);
        assert_eq!(rep.s[0], 0.0);
        assert_eq!(rep.ranking, vec![1, 3, 0, 2]);
    }

    #[test]
    fn zero_hessian_sets_no_global_flag() {
        let jac = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 2.0]);
        for c in [0.1, 1.0, 1e6] {
            let rep = global_measures(jac.clone(), DMatrix::zeros(1, 3), c).unwrap();
            assert!(rep.nonlinear_global.iter().all(|f| !f));
        }
    }

    #[test]
    fn flags_follow_both_criteria() {
        let jac = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 1.0, 0.1]);
        let hess = DMatrix::from_row_slice(2, 2, &[0.1, 1.0, 2.0, 0.0]);
        let rep = global_measures(jac, hess, 1.0).unwrap();
        assert_eq!(rep.nonlinear_global, vec![true, true]);
        assert!(!rep.nonlinear_local[(0, 0)] && rep.nonlinear_local[(1, 0)]);
        assert!(rep.nonlinear_local[(0, 1)] && !rep.nonlinear_local[(1, 1)]);
    }

    #[test]
    fn bilinear_response_is_flagged_nonlinear() {
        let f = |y: &[f64]| vec![y[0] * y[1]];
        let star = design(&star_doe(2), f);
        let cross = design(&cross_doe(2), f);
        let rep = full_hessian_and_d(&star, &cross, &[1.0; 2], 1.0).unwrap();
        assert_eq!(rep.full_hessian_global[(0, 1)], 1.0);
        assert!((rep.alpha_max - 1.0).abs() < 1e-9);
        assert!((rep.d + 0.25).abs() < 1e-9);
        assert!(!rep.is_linear());
    }

    #[test]
    fn linear_response_is_linear() {
        let f = |y: &[f64]| vec![y.iter().sum()];
        let star = design(&star_doe(3), f);
        let cross = design(&cross_doe(3), f);
        let rep = full_hessian_and_d(&star, &cross, &[1.0; 3], 3f64.sqrt()).unwrap();
        assert_eq!(rep.alpha_max, 0.0);
        assert!((rep.d - 3f64.sqrt()).abs() < 1e-12);
        assert!(rep.is_linear());
    }

    #[test]
    fn cross_shape_checked() {
        let f = |y: &[f64]| vec![y[0]];
        let star = design(&star_doe(3), f);
        let cross = design(&cross_doe(2), |y| vec![y[0]]);
        assert!(matches!(full_hessian_and_d(&star, &cross, &[1.0; 3], 1.0), Err(ScreeningError::ShapeMismatch(_))));
    }

    #[test]
    fn top_k_reduction() {
        let jac = DMatrix::from_row_slice(1, 4, &[0.5, 3.0, 0.1, 2.0]);
        let rep = global_measures(jac, DMatrix::zeros(1, 4), 1.0).unwrap();
        let red = reduce_parameters(&rep, ReductionPolicy::TopK(2)).unwrap();
        assert_eq!(red.retained, vec![1, 3]);
        assert_eq!(red.expand(&[7.0, 8.0]), vec![0.0, 7.0, 0.0, 8.0]);
        assert_eq!(red.restrict(&[1.0, 2.0, 3.0, 4.0]), vec![2.0, 4.0]);
        let all = reduce_parameters(&rep, ReductionPolicy::TopK(4)).unwrap();
        assert_eq!(all, Reduction::identity(4));
        assert_eq!(reduce_parameters(&rep, ReductionPolicy::TopK(0)), Err(ScreeningError::EmptySelection));
    }

    #[test]
    fn all_zero_sensitivity_fraction_is_empty() {
        let rep = global_measures(DMatrix::zeros(1, 3), DMatrix::zeros(1, 3), 1.0).unwrap();
        assert_eq!(reduce_parameters(&rep, ReductionPolicy::CumulativeFraction(0.99)), Err(ScreeningError::EmptySelection));
    }
}
