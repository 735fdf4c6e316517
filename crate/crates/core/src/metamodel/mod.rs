//! RBF interpolation over design points, SVD compression of snapshot
//! matrices and the accelerated evaluation that combines the two.

mod rbf;
mod svd;

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::doe::{read_matrix_csv, to_normalized, write_matrix_csv, DesignMatrix, DoeError, ParameterPoint};
use crate::screening::Reduction;

pub use rbf::{fit_rbf, mean_nearest_neighbour_distance, Detrend, RbfKernel, RbfModel, CONDITION_WARNING};
pub use svd::{fast_svd, GramAccumulator, SvdThreshold, TruncatedSvd, BLOCK_ROWS, RELATIVE_RANK_TOL};

#[derive(Debug, Error)]
pub enum RbfError {
    #[error("interpolation matrix is singular or numerically singular")]
    SingularInterpolationMatrix,
    #[error("invalid kernel parameters: {0:?}")]
    InvalidKernel(RbfKernel),
    #[error("no centers given")]
    NoCenters,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("Gram matrix has eigenvalue {0:e} below the negative tolerance")]
    NegativeEigenvalueBeyondTolerance(f64),
    #[error("bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Doe(#[from] DoeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `sum_i w_i(query) u_i` over the snapshot columns, evaluated as
/// `F (Lambda (V^T w))`.
pub fn accelerated_evaluate(svd: &TruncatedSvd, model: &RbfModel, query: &ParameterPoint) -> Result<Vec<f64>, RbfError> {
    if svd.sample_count() != model.len() {
        return Err(RbfError::ShapeMismatch(format!(
            "SVD built from {} samples, RBF model has {} centers",
            svd.sample_count(),
            model.len()
        )));
    }
    Ok(svd.apply(&model.weights(query)?))
}

/// Same interpolant without compression: `X w`.
pub fn direct_evaluate(x: &DMatrix<f64>, model: &RbfModel, query: &ParameterPoint) -> Result<Vec<f64>, RbfError> {
    if x.ncols() != model.len() {
        return Err(RbfError::ShapeMismatch(format!("{} columns for {} centers", x.ncols(), model.len())));
    }
    let w = model.weights(query)?;
    Ok((x * nalgebra::DVector::from_vec(w)).as_slice().to_vec())
}

/// A fitted RBF model together with the compressed snapshots and the
/// coordinate conventions needed to evaluate it on physical samples.
#[derive(Clone, Debug)]
pub struct AcceleratedMetamodel {
    pub rbf: RbfModel,
    pub svd: TruncatedSvd,
    /// Physical value of `+1` along each reduced coordinate.
    pub design_scales: Vec<f64>,
    pub reduction: Reduction,
}

impl AcceleratedMetamodel {
    pub fn build(
        design: &DesignMatrix,
        kernel: RbfKernel,
        detrend: Detrend,
        threshold: SvdThreshold,
        design_scales: Vec<f64>,
        reduction: Reduction,
    ) -> Result<Self, RbfError> {
        if design_scales.len() != design.dim() || reduction.reduced_dim() != design.dim() {
            return Err(RbfError::ShapeMismatch(format!(
                "design has {} coordinates, {} scales, {} retained parameters",
                design.dim(),
                design_scales.len(),
                reduction.reduced_dim()
            )));
        }
        let rbf = fit_rbf(&design.points, kernel, detrend)?;
        let svd = fast_svd(&design.snapshots, threshold)?;
        Ok(Self { rbf, svd, design_scales, reduction })
    }

    pub fn dim(&self) -> usize {
        self.rbf.dim()
    }

    pub fn spatial_size(&self) -> usize {
        self.svd.spatial_size()
    }

    /// Evaluates at a normalised point in the reduced space.
    pub fn evaluate_normalized(&self, z: &ParameterPoint) -> Result<Vec<f64>, RbfError> {
        accelerated_evaluate(&self.svd, &self.rbf, z)
    }

    /// Evaluates at a physical sample given in full-space coordinates;
    /// dropped coordinates are ignored.
    pub fn evaluate_physical_full(&self, y: &[f64]) -> Result<Vec<f64>, RbfError> {
        if y.len() != self.reduction.full_dim {
            return Err(RbfError::ShapeMismatch(format!("{} coordinates, expected {}", y.len(), self.reduction.full_dim)));
        }
        let reduced = ParameterPoint(self.reduction.restrict(y));
        self.evaluate_normalized(&to_normalized(&reduced, &self.design_scales))
    }

    /// Writes the model to `dir`. Loading refits the RBF system from the
    /// stored centers, which is cheap and needs no new PDE solves.
    pub fn save(&self, dir: &Path) -> Result<(), RbfError> {
        fs::create_dir_all(dir)?;
        let meta = BundleMeta {
            kernel: self.rbf.kernel(),
            detrend: self.rbf.detrend(),
            dim: self.dim(),
            centers: self.rbf.len(),
            rank: self.svd.rank(),
            spatial_size: self.spatial_size(),
            discarded_energy: self.svd.discarded_energy,
            design_scales: self.design_scales.clone(),
            retained: self.reduction.retained.clone(),
            full_dim: self.reduction.full_dim,
            frozen_value: self.reduction.frozen_value,
            spectrum: self.svd.spectrum.clone(),
        };
        let text = serde_json::to_string_pretty(&meta).map_err(|e| RbfError::Bundle(e.to_string()))?;
        fs::write(dir.join("model.json"), text)?;
        let centers = DMatrix::from_fn(self.rbf.len(), self.dim(), |i, j| self.rbf.centers()[i].0[j]);
        write_matrix_csv(&dir.join("centers.csv"), &centers, "z")?;
        write_matrix_csv(&dir.join("F.csv"), &self.svd.f, "f")?;
        let lambda = DMatrix::from_column_slice(self.svd.rank(), 1, &self.svd.singular_values);
        write_matrix_csv(&dir.join("singular_values.csv"), &lambda, "lambda")?;
        write_matrix_csv(&dir.join("Vt.csv"), &self.svd.vt, "v")?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, RbfError> {
        let text = fs::read_to_string(dir.join("model.json"))?;
        let meta: BundleMeta = serde_json::from_str(&text).map_err(|e| RbfError::Bundle(e.to_string()))?;
        let centers = read_matrix_csv(&dir.join("centers.csv"))?;
        let f = read_matrix_csv(&dir.join("F.csv"))?;
        let vt = read_matrix_csv(&dir.join("Vt.csv"))?;
        let lambda = read_matrix_csv(&dir.join("singular_values.csv"))?;
        // An empty CSV loses its column count, so rank 0 is rebuilt by shape.
        let (f, vt) = if meta.rank == 0 {
            (DMatrix::zeros(meta.spatial_size, 0), DMatrix::zeros(0, meta.centers))
        } else {
            (f, vt)
        };
        if centers.shape() != (meta.centers, meta.dim)
            || f.shape() != (meta.spatial_size, meta.rank)
            || vt.shape() != (meta.rank, meta.centers)
            || lambda.nrows() != meta.rank
            || meta.design_scales.len() != meta.dim
            || meta.retained.len() != meta.dim
        {
            return Err(RbfError::Bundle("stored arrays disagree with model.json".into()));
        }
        let points: Vec<ParameterPoint> = centers.row_iter().map(|r| ParameterPoint(r.iter().copied().collect())).collect();
        let rbf = fit_rbf(&points, meta.kernel, meta.detrend)?;
        let svd = TruncatedSvd {
            f,
            singular_values: lambda.column(0).iter().copied().collect(),
            vt,
            discarded_energy: meta.discarded_energy,
            spectrum: meta.spectrum,
        };
        let reduction = Reduction { retained: meta.retained, frozen_value: meta.frozen_value, full_dim: meta.full_dim };
        Ok(Self { rbf, svd, design_scales: meta.design_scales, reduction })
    }
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    kernel: RbfKernel,
    detrend: Detrend,
    dim: usize,
    centers: usize,
    rank: usize,
    spatial_size: usize,
    discarded_energy: f64,
    design_scales: Vec<f64>,
    retained: Vec<usize>,
    full_dim: usize,
    frozen_value: f64,
    spectrum: Vec<f64>,
}
