//! Designs of experiments: the star design used for screening and
//! metamodel construction, the cross design for mixed second
//! derivatives, and Halton samples for quasi-Monte Carlo statistics.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::random_field::DistributionSpec;

#[derive(Debug, Error)]
pub enum DoeError {
    #[error("Halton sequences support at most {max} dimensions, got {got}")]
    DimensionTooLarge { got: usize, max: usize },
    #[error("solver failed at design point {index}: {message}")]
    SolverFailure { index: usize, message: String, failed: Vec<usize> },
    #[error("solver returned {got} values at point {index}, expected {expected}")]
    LengthMismatch { index: usize, expected: usize, got: usize },
    #[error("bundle format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A point of the parameter space.
///
/// Design points live in normalised coordinates, where `+-1` is the star
/// extreme of each variable; samples drawn from a distribution are in
/// physical coordinates. [`to_physical`] and [`to_normalized`] convert.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterPoint(pub Vec<f64>);

impl ParameterPoint {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

pub fn to_physical(p: &ParameterPoint, scales: &[f64]) -> ParameterPoint {
    ParameterPoint(p.0.iter().zip(scales).map(|(z, s)| z * s).collect())
}

pub fn to_normalized(p: &ParameterPoint, scales: &[f64]) -> ParameterPoint {
    ParameterPoint(p.0.iter().zip(scales).map(|(y, s)| y / s).collect())
}

/// Snapshot matrix `X` (`M x N`) whose column `j` is the solution at `points[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub points: Vec<ParameterPoint>,
    pub snapshots: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(points: Vec<ParameterPoint>, snapshots: DMatrix<f64>) -> Self {
        assert_eq!(points.len(), snapshots.ncols(), "one snapshot column per point");
        Self { points, snapshots }
    }

    /// Spatial size `M`.
    pub fn spatial_size(&self) -> usize {
        self.snapshots.nrows()
    }

    /// Number of samples `N`.
    pub fn sample_count(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.dim())
    }

    /// Writes `points.csv` and `snapshots.csv` into `dir`.
    pub fn write_bundle(&self, dir: &Path) -> Result<(), DoeError> {
        std::fs::create_dir_all(dir)?;
        let dim = self.dim();
        let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("points.csv"))?));
        wtr.write_record((1..=dim).map(|j| format!("p{j}"))).map_err(csv_err)?;
        for p in &self.points {
            wtr.write_record(p.0.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
        }
        wtr.flush()?;
        write_matrix_csv(&dir.join("snapshots.csv"), &self.snapshots, "s")
    }

    pub fn read_bundle(dir: &Path) -> Result<Self, DoeError> {
        let pts = read_matrix_csv(&dir.join("points.csv"))?;
        let snapshots = read_matrix_csv(&dir.join("snapshots.csv"))?;
        if pts.nrows() != snapshots.ncols() {
            return Err(DoeError::Format(format!("{} points but {} snapshot columns", pts.nrows(), snapshots.ncols())));
        }
        let points = pts.row_iter().map(|r| ParameterPoint(r.iter().copied().collect())).collect();
        Ok(Self { points, snapshots })
    }
}

fn csv_err(e: csv::Error) -> DoeError {
    DoeError::Io(std::io::Error::other(e))
}

/// Writes a dense matrix as CSV with header `{prefix}1..{prefix}n`.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<f64>, prefix: &str) -> Result<(), DoeError> {
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    wtr.write_record((1..=m.ncols()).map(|j| format!("{prefix}{j}"))).map_err(csv_err)?;
    for r in m.row_iter() {
        wtr.write_record(r.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, DoeError> {
    let mut rdr = csv::Reader::from_reader(BufReader::new(File::open(path)?));
    let ncols = rdr.headers().map_err(csv_err)?.len();
    let mut data = Vec::new();
    let mut nrows = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != ncols {
            return Err(DoeError::Format(format!("{}: ragged row {}", path.display(), nrows + 1)));
        }
        for v in rec.iter() {
            data.push(v.trim().parse::<f64>().map_err(|e| DoeError::Format(format!("{}: {e}", path.display())))?);
        }
        nrows += 1;
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &data))
}

/// Centre point followed by `+e_1, -e_1, +e_2, -e_2, ...`.
pub fn star_doe(dim: usize) -> Vec<ParameterPoint> {
    let mut pts = Vec::with_capacity(2 * dim + 1);
    pts.push(ParameterPoint::zeros(dim));
    for j in 0..dim {
        for s in [1.0, -1.0] {
            let mut p = ParameterPoint::zeros(dim);
            p.0[j] = s;
            pts.push(p);
        }
    }
    pts
}

/// Column of `+e_j` (`sign > 0`) or `-e_j` in a star design.
pub fn star_index(j: usize, sign: f64) -> usize {
    if sign > 0.0 {
        2 * j + 1
    } else {
        2 * j + 2
    }
}

/// Four corners `(+-e_j +- e_l)` for every pair `j < l`, pairs in
/// lexicographic order and signs `++, +-, -+, --`.
pub fn cross_doe(dim: usize) -> Vec<ParameterPoint> {
    let mut pts = Vec::with_capacity(2 * dim * dim.saturating_sub(1));
    for j in 0..dim {
        for l in j + 1..dim {
            for (sj, sl) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut p = ParameterPoint::zeros(dim);
                p.0[j] = sj;
                p.0[l] = sl;
                pts.push(p);
            }
        }
    }
    pts
}

pub const MAX_HALTON_DIM: usize = 100;

fn first_primes(n: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(n);
    let mut c = 2u64;
    while primes.len() < n {
        if primes.iter().take_while(|&&p| p * p <= c).all(|&p| c % p != 0) {
            primes.push(c);
        }
        c += 1;
    }
    primes
}

/// Van der Corput radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    r
}

/// `count` Halton points in `(0,1)^dim`, bases the first `dim` primes,
/// using sequence indices `skip + 1 ..= skip + count`.
pub fn halton(count: usize, dim: usize, skip: usize) -> Result<Vec<Vec<f64>>, DoeError> {
    if dim > MAX_HALTON_DIM {
        return Err(DoeError::DimensionTooLarge { got: dim, max: MAX_HALTON_DIM });
    }
    let primes = first_primes(dim);
    Ok((0..count)
        .map(|i| {
            let n = (skip + i + 1) as u64;
            primes.iter().map(|&b| radical_inverse(n, b)).collect()
        })
        .collect())
}

pub const DEFAULT_HALTON_SKIP: usize = 20;

/// Quasi-random samples in physical coordinates: Halton points pushed
/// through each marginal's inverse CDF.
pub fn low_discrepancy_samples(count: usize, dist: &DistributionSpec, skip: usize) -> Result<Vec<ParameterPoint>, DoeError> {
    let raw = halton(count, dist.dim(), skip)?;
    Ok(raw
        .into_iter()
        .map(|u| ParameterPoint(u.iter().zip(&dist.marginals).map(|(&p, m)| m.inverse_cdf(p)).collect()))
        .collect())
}

/// Evaluates `solver` at every point (in parallel) and stacks the results
/// column-wise in point order.
pub fn run_doe<F, E>(points: &[ParameterPoint], solver: F) -> Result<DesignMatrix, DoeError>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display + Send,
{
    let results: Vec<Result<Vec<f64>, E>> = points.par_iter().map(&solver).collect();
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, r)| r.is_err()).map(|(i, _)| i).collect();
    if let Some(&first) = failed.first() {
        let message = match &results[first] {
            Err(e) => e.to_string(),
            Ok(_) => unreachable!(),
        };
        return Err(DoeError::SolverFailure { index: first, message, failed });
    }
    let columns: Vec<Vec<f64>> = results.into_iter().map(|r| r.ok().unwrap()).collect();
    let m = columns.first().map_or(0, |c| c.len());
    for (i, c) in columns.iter().enumerate() {
        if c.len() != m {
            return Err(DoeError::LengthMismatch { index: i, expected: m, got: c.len() });
        }
    }
    let snapshots = DMatrix::from_fn(m, columns.len(), |i, j| columns[j][i]);
    Ok(DesignMatrix::new(points.to_vec(), snapshots))
}
