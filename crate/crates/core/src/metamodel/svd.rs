use nalgebra::{DMatrix, DMatrixView};

use super::RbfError;

/// Rule for choosing the retained rank `k`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SvdThreshold {
    /// Smallest `k` keeping at least this fraction of `sum lambda^2`.
    EnergyFraction(f64),
    /// Smallest `k` with `||X - X_k||_F <= err`.
    AbsoluteError(f64),
    /// Fixed rank, capped at the numerical rank.
    Rank(usize),
}

impl Default for SvdThreshold {
    fn default() -> Self {
        SvdThreshold::EnergyFraction(1.0 - 1e-10)
    }
}

/// Singular values at or below this fraction of the largest are always dropped.
pub const RELATIVE_RANK_TOL: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

/// Rank-`k` factors `X_k = F diag(lambda) V^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedSvd {
    /// `M x k`
    pub f: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// `k x N`
    pub vt: DMatrix<f64>,
    /// `sum_{l > k} lambda_l^2 = ||X - X_k||_F^2`
    pub discarded_energy: f64,
    /// All `N` singular values, descending.
    pub spectrum: Vec<f64>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    pub fn spatial_size(&self) -> usize {
        self.f.nrows()
    }

    pub fn sample_count(&self) -> usize {
        self.vt.ncols()
    }

    /// `X_k` as a dense matrix.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut fl = self.f.clone();
        for (mut c, s) in fl.column_iter_mut().zip(&self.singular_values) {
            c *= *s;
        }
        fl * &self.vt
    }

    /// `F (Lambda (V^T w))` for a weight vector over the `N` samples.
    pub fn apply(&self, weights: &[f64]) -> Vec<f64> {
        let k = self.rank();
        let mut coeff = vec![0.0; k];
        for (i, c) in coeff.iter_mut().enumerate() {
            *c = self.singular_values[i] * self.vt.row(i).iter().zip(weights).map(|(v, w)| v * w).sum::<f64>();
        }
        let m = self.f.nrows();
        let mut out = vec![0.0; m];
        for (i, &c) in coeff.iter().enumerate() {
            for (o, fv) in out.iter_mut().zip(self.f.column(i).iter()) {
                *o += fv * c;
            }
        }
        out
    }
}

/// Gram matrix `X^T X` accumulated one block of rows at a time.
#[derive(Clone, Debug)]
pub struct GramAccumulator {
    gram: DMatrix<f64>,
    rows: usize,
}

impl GramAccumulator {
    pub fn new(n: usize) -> Self {
        Self { gram: DMatrix::zeros(n, n), rows: 0 }
    }

    pub fn add_block(&mut self, block: DMatrixView<f64>) {
        assert_eq!(block.ncols(), self.gram.ncols());
        self.gram += block.transpose() * block;
        self.rows += block.nrows();
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

/// Rows per streamed block.
pub const BLOCK_ROWS: usize = 4096;

/// Truncated SVD of a tall snapshot matrix through the eigendecomposition
/// of its Gram matrix, touching `X` only in row blocks.
pub fn fast_svd(x: &DMatrix<f64>, threshold: SvdThreshold) -> Result<TruncatedSvd, RbfError> {
    let (m, n) = x.shape();
    if m < n {
        return Err(RbfError::ShapeMismatch(format!("fast SVD needs M >= N, got {m} x {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(RbfError::ShapeMismatch("snapshot matrix contains non-finite values".into()));
    }
    let mut acc = GramAccumulator::new(n);
    for start in (0..m).step_by(BLOCK_ROWS) {
        let rows = BLOCK_ROWS.min(m - start);
        acc.add_block(x.rows(start, rows));
    }

    let eig = acc.gram.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap().then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i]).max(0.0);
    let mut energies = Vec::with_capacity(n);
    for &i in &order {
        let e = eig.eigenvalues[i];
        if e < -NEGATIVE_EIGEN_TOL * top.max(f64::MIN_POSITIVE) {
            return Err(RbfError::NegativeEigenvalueBeyondTolerance(e));
        }
        energies.push(e.max(0.0));
    }
    // Gram eigenvalues carry absolute roundoff of order n eps lambda_1^2;
    // anything below that is not a resolvable singular value.
    let floor = n as f64 * f64::EPSILON * top;
    for e in energies.iter_mut() {
        if *e <= floor {
            *e = 0.0;
        }
    }
    let spectrum: Vec<f64> = energies.iter().map(|e| e.sqrt()).collect();
    let numeric_rank = spectrum.iter().take_while(|&&s| s > RELATIVE_RANK_TOL * spectrum[0] && s > 0.0).count();

    // tail[k] = sum_{l >= k} lambda_l^2
    let mut tail = vec![0.0; n + 1];
    for k in (0..n).rev() {
        tail[k] = tail[k + 1] + energies[k];
    }
    let policy_rank = match threshold {
        SvdThreshold::Rank(k) => k,
        SvdThreshold::EnergyFraction(f) => (0..=n).find(|&k| tail[k] <= (1.0 - f) * tail[0]).unwrap_or(n),
        SvdThreshold::AbsoluteError(err) => (0..=n).find(|&k| tail[k] <= err * err).unwrap_or(n),
    };
    let k = policy_rank.min(numeric_rank);

    let mut v = DMatrix::zeros(n, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        v.set_column(c, &eig.eigenvectors.column(i));
    }
    let mut f = DMatrix::zeros(m, k);
    for start in (0..m).step_by(BLOCK_ROWS) {
        let rows = BLOCK_ROWS.min(m - start);
        let block = x.rows(start, rows) * &v;
        f.rows_mut(start, rows).copy_from(&block);
    }
    for (c, mut col) in f.column_iter_mut().enumerate() {
        col /= spectrum[c];
    }
    Ok(TruncatedSvd {
        f,
        singular_values: spectrum[..k].to_vec(),
        vt: v.transpose(),
        discarded_energy: tail[k],
        spectrum,
    })
}
