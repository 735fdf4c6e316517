use nalgebra::{DMatrix, DVector, LU, Dyn};
use serde::{Deserialize, Serialize};

use super::RbfError;
use crate::doe::ParameterPoint;

/// Radial basis function `phi(r)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RbfKernel {
    Linear,
    /// `r^2 log r`, with `phi(0) = 0`.
    ThinPlate,
    /// `exp(-gamma r^2)`
    Gaussian { gamma: f64 },
    /// `sqrt(r^2 + c^2)`
    Multiquadric { c: f64 },
    /// `r^3`
    Triharmonic,
    /// `1 / sqrt(r^2 + c^2)`
    InverseMultiquadric { c: f64 },
}

impl RbfKernel {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            RbfKernel::Linear => r,
            RbfKernel::ThinPlate => {
                if r == 0.0 {
                    0.0
                } else {
                    r * r * r.ln()
                }
            }
            RbfKernel::Gaussian { gamma } => (-gamma * r * r).exp(),
            RbfKernel::Multiquadric { c } => (r * r + c * c).sqrt(),
            RbfKernel::Triharmonic => r * r * r,
            RbfKernel::InverseMultiquadric { c } => 1.0 / (r * r + c * c).sqrt(),
        }
    }

    pub fn validate(&self) -> Result<(), RbfError> {
        let ok = match *self {
            RbfKernel::Gaussian { gamma } => gamma > 0.0,
            RbfKernel::Multiquadric { c } | RbfKernel::InverseMultiquadric { c } => c > 0.0,
            _ => true,
        };
        if ok {
            Ok(())
        } else {
            Err(RbfError::InvalidKernel(*self))
        }
    }
}

/// Mean distance from each center to its nearest neighbour; `1` for a
/// single center.
pub fn mean_nearest_neighbour_distance(centers: &[ParameterPoint]) -> f64 {
    if centers.len() < 2 {
        return 1.0;
    }
    let total: f64 = centers
        .iter()
        .enumerate()
        .map(|(i, a)| {
            centers
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| distance(a.coords(), b.coords()))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    total / centers.len() as f64
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Degree of the polynomial added to the RBF sum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detrend {
    None,
    Constant,
    Linear,
}

impl Detrend {
    fn terms(self, dim: usize) -> usize {
        match self {
            Detrend::None => 0,
            Detrend::Constant => 1,
            Detrend::Linear => dim + 1,
        }
    }

    fn basis(self, p: &[f64], out: &mut [f64]) {
        match self {
            Detrend::None => {}
            Detrend::Constant => out[0] = 1.0,
            Detrend::Linear => {
                out[0] = 1.0;
                out[1..].copy_from_slice(p);
            }
        }
    }
}

/// Above this condition number the fit succeeds with a warning.
pub const CONDITION_WARNING: f64 = 1e12;
/// Above this the interpolation matrix is treated as singular.
const CONDITION_LIMIT: f64 = 1e15;

/// Fitted interpolation system `[[Phi, P], [P^T, 0]]` over fixed centers.
#[derive(Clone, Debug)]
pub struct RbfModel {
    kernel: RbfKernel,
    centers: Vec<ParameterPoint>,
    detrend: Detrend,
    lu: LU<f64, Dyn, Dyn>,
    condition: f64,
}

impl RbfModel {
    pub fn kernel(&self) -> RbfKernel {
        self.kernel
    }

    pub fn centers(&self) -> &[ParameterPoint] {
        &self.centers
    }

    pub fn detrend(&self) -> Detrend {
        self.detrend
    }

    pub fn dim(&self) -> usize {
        self.centers[0].dim()
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// 1-norm condition number of the interpolation system.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    fn rhs(&self, query: &[f64]) -> DVector<f64> {
        let n = self.centers.len();
        let q = self.detrend.terms(self.dim());
        let mut b = DVector::zeros(n + q);
        for (j, c) in self.centers.iter().enumerate() {
            b[j] = self.kernel.eval(distance(query, c.coords()));
        }
        self.detrend.basis(query, &mut b.as_mut_slice()[n..]);
        b
    }

    /// Cardinal weights `w(query)`: the interpolant of any data `u_1..u_N`
    /// at `query` is `sum_i w_i u_i`, polynomial trend included.
    pub fn weights(&self, query: &ParameterPoint) -> Result<Vec<f64>, RbfError> {
        if query.dim() != self.dim() {
            return Err(RbfError::ShapeMismatch(format!("query has {} coordinates, model {}", query.dim(), self.dim())));
        }
        // The system matrix is symmetric, so A^{-T} b = A^{-1} b.
        let x = self.lu.solve(&self.rhs(query.coords())).ok_or(RbfError::SingularInterpolationMatrix)?;
        Ok(x.as_slice()[..self.centers.len()].to_vec())
    }

    /// Interpolates scalar data given at the centers.
    pub fn interpolate(&self, values: &[f64], query: &ParameterPoint) -> Result<f64, RbfError> {
        if values.len() != self.len() {
            return Err(RbfError::ShapeMismatch(format!("{} values for {} centers", values.len(), self.len())));
        }
        Ok(self.weights(query)?.iter().zip(values).map(|(w, u)| w * u).sum())
    }

    /// Expansion coefficients `(c, d)` of `sum_j phi(|z - z_j|) c_j + P(z)`
    /// for scalar data.
    pub fn coefficients(&self, values: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RbfError> {
        let n = self.len();
        if values.len() != n {
            return Err(RbfError::ShapeMismatch(format!("{} values for {} centers", values.len(), n)));
        }
        let q = self.detrend.terms(self.dim());
        let mut b = DVector::zeros(n + q);
        b.as_mut_slice()[..n].copy_from_slice(values);
        let x = self.lu.solve(&b).ok_or(RbfError::SingularInterpolationMatrix)?;
        Ok((x.as_slice()[..n].to_vec(), x.as_slice()[n..].to_vec()))
    }
}

/// Factorises the (optionally augmented) interpolation matrix.
pub fn fit_rbf(points: &[ParameterPoint], kernel: RbfKernel, detrend: Detrend) -> Result<RbfModel, RbfError> {
    kernel.validate()?;
    let n = points.len();
    if n == 0 {
        return Err(RbfError::NoCenters);
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(RbfError::ShapeMismatch("centers have differing dimensions".into()));
    }
    let q = detrend.terms(dim);
    if n < q {
        return Err(RbfError::SingularInterpolationMatrix);
    }
    let size = n + q;
    let mut a = DMatrix::zeros(size, size);
    let mut poly = vec![0.0; q];
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = kernel.eval(distance(points[i].coords(), points[j].coords()));
        }
        detrend.basis(points[i].coords(), &mut poly);
        for (k, &p) in poly.iter().enumerate() {
            a[(i, n + k)] = p;
            a[(n + k, i)] = p;
        }
    }
    let norm1 = |m: &DMatrix<f64>| m.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let anorm = norm1(&a);
    let lu = a.lu();
    let inv = lu.try_inverse().ok_or(RbfError::SingularInterpolationMatrix)?;
    let condition = anorm * norm1(&inv);
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(RbfError::SingularInterpolationMatrix);
    }
    if condition > CONDITION_WARNING {
        log::warn!("RBF interpolation matrix is ill-conditioned (cond_1 = {condition:e})");
    }
    Ok(RbfModel { kernel, centers: points.to_vec(), detrend, lu, condition })
}
