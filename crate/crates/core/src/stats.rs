//! Constant-memory quantile estimation (P^2) and the per-node difference
//! metrics used to compare statistic fields.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::doe::ParameterPoint;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("quantile requested from an empty estimator")]
    EmptyEstimator,
    #[error("length mismatch: {0}")]
    ShapeMismatch(String),
    #[error("evaluation failed at sample {index} after {processed} samples were streamed: {message}")]
    Evaluation { index: usize, processed: usize, message: String },
}

/// Streaming P^2 estimator of a single quantile.
///
/// Markers track the minimum, the `q/2`, `q` and `(1+q)/2` quantiles and
/// the maximum. Until five samples have arrived the samples are buffered.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantileEstimator {
    q: f64,
    heights: [f64; 5],
    positions: [f64; 5],
    desired: [f64; 5],
    increments: [f64; 5],
    count: usize,
}

impl QuantileEstimator {
    pub fn new(q: f64) -> Self {
        assert!((0.0..=1.0).contains(&q), "quantile level {q} outside [0, 1]");
        Self {
            q,
            heights: [0.0; 5],
            positions: [1.0, 2.0, 3.0, 4.0, 5.0],
            desired: [1.0, 1.0 + 2.0 * q, 1.0 + 4.0 * q, 3.0 + 2.0 * q, 5.0],
            increments: [0.0, q / 2.0, q, (1.0 + q) / 2.0, 1.0],
            count: 0,
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Marker heights; only meaningful once five samples were seen.
    pub fn markers(&self) -> &[f64; 5] {
        &self.heights
    }

    pub fn positions(&self) -> &[f64; 5] {
        &self.positions
    }

    pub fn update(&mut self, x: f64) {
        assert!(x.is_finite(), "P2 sample must be finite, got {x}");
        if self.count < 5 {
            self.heights[self.count] = x;
            self.count += 1;
            if self.count == 5 {
                self.heights.sort_by(|a, b| a.partial_cmp(b).unwrap());
            }
            return;
        }
        self.count += 1;
        let h = &mut self.heights;
        let k = if x < h[0] {
            h[0] = x;
            0
        } else if x >= h[4] {
            h[4] = x;
            3
        } else {
            (1..5).find(|&i| x < h[i]).unwrap() - 1
        };
        for p in &mut self.positions[k + 1..] {
            *p += 1.0;
        }
        for (d, inc) in self.desired.iter_mut().zip(&self.increments) {
            *d += inc;
        }
        for i in 1..4 {
            let n = &self.positions;
            let d = self.desired[i] - n[i];
            if (d >= 1.0 && n[i + 1] - n[i] > 1.0) || (d <= -1.0 && n[i - 1] - n[i] < -1.0) {
                let s = d.signum();
                let hp = self.parabolic(i, s);
                let h = &self.heights;
                self.heights[i] = if h[i - 1] < hp && hp < h[i + 1] { hp } else { self.linear(i, s) };
                self.positions[i] += s;
            }
        }
    }

    fn parabolic(&self, i: usize, s: f64) -> f64 {
        let (h, n) = (&self.heights, &self.positions);
        h[i] + s / (n[i + 1] - n[i - 1])
            * ((n[i] - n[i - 1] + s) * (h[i + 1] - h[i]) / (n[i + 1] - n[i])
                + (n[i + 1] - n[i] - s) * (h[i] - h[i - 1]) / (n[i] - n[i - 1]))
    }

    fn linear(&self, i: usize, s: f64) -> f64 {
        let j = if s > 0.0 { i + 1 } else { i - 1 };
        let (h, n) = (&self.heights, &self.positions);
        h[i] + s * (h[j] - h[i]) / (n[j] - n[i])
    }

    /// Current estimate: the central marker, or below five samples the
    /// lower order statistic at 1-based index `ceil(q n)`.
    pub fn estimate(&self) -> Result<f64, StatsError> {
        match self.count {
            0 => Err(StatsError::EmptyEstimator),
            n if n < 5 => {
                let mut buf = self.heights[..n].to_vec();
                buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let idx = ((self.q * n as f64).ceil() as usize).clamp(1, n);
                Ok(buf[idx - 1])
            }
            _ => Ok(self.heights[2]),
        }
    }
}

/// Running mean and variance (Welford), one per node.
#[derive(Clone, Debug)]
pub struct FieldMoments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl FieldMoments {
    pub fn new(m: usize) -> Self {
        Self { count: 0, mean: vec![0.0; m], m2: vec![0.0; m] }
    }

    pub fn update(&mut self, u: &[f64]) {
        self.count += 1;
        let n = self.count as f64;
        for ((mu, m2), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(u) {
            let d = x - *mu;
            *mu += d / n;
            *m2 += d * (x - *mu);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population variance `1/n sum (u - mean)^2`.
    pub fn variance(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.m2.iter().map(|v| v / n).collect()
    }
}

/// Quantile, mean and variance fields from a sample stream.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldStatistics {
    pub qs: Vec<f64>,
    /// `quantiles[j][node]` is the `qs[j]` quantile.
    pub quantiles: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub samples: usize,
}

impl FieldStatistics {
    pub fn quantile(&self, q: f64) -> Option<&[f64]> {
        self.qs.iter().position(|&p| p == q).map(|j| self.quantiles[j].as_slice())
    }
}

/// Samples evaluated per parallel batch; streaming is sequential in sample order.
const BATCH: usize = 64;

/// Streams `evaluator(sample)` for every sample, in order, through one
/// P^2 estimator per node and per `q`. Evaluations run in parallel, the
/// streaming itself is sequential, so results are deterministic.
pub fn field_quantiles<F, E>(evaluator: F, samples: &[ParameterPoint], qs: &[f64]) -> Result<FieldStatistics, StatsError>
where
    F: Fn(&ParameterPoint) -> Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display + Send,
{
    let mut estimators: Vec<Vec<QuantileEstimator>> = Vec::new();
    let mut moments: Option<FieldMoments> = None;
    let mut m = 0;
    for (b, chunk) in samples.chunks(BATCH).enumerate() {
        let results: Vec<Result<Vec<f64>, E>> = chunk.par_iter().map(&evaluator).collect();
        for (i, r) in results.into_iter().enumerate() {
            let index = b * BATCH + i;
            let u = r.map_err(|e| StatsError::Evaluation { index, processed: index, message: e.to_string() })?;
            if index == 0 {
                m = u.len();
                estimators = qs.iter().map(|&q| vec![QuantileEstimator::new(q); m]).collect();
                moments = Some(FieldMoments::new(m));
            } else if u.len() != m {
                return Err(StatsError::ShapeMismatch(format!("sample {index} gave {} values, expected {m}", u.len())));
            }
            for est in estimators.iter_mut() {
                for (e, &x) in est.iter_mut().zip(&u) {
                    e.update(x);
                }
            }
            moments.as_mut().unwrap().update(&u);
        }
    }
    let moments = moments.ok_or(StatsError::EmptyEstimator)?;
    let quantiles = estimators
        .iter()
        .map(|est| est.iter().map(|e| e.estimate()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FieldStatistics {
        qs: qs.to_vec(),
        quantiles,
        mean: moments.mean().to_vec(),
        variance: moments.variance(),
        samples: samples.len(),
    })
}

/// Default mask floor: nodes where `|u_ref|` is below 1% of its maximum are
/// left out of the relative difference.
pub const DEFAULT_FLOOR_FRACTION: f64 = 0.01;

/// Pointwise absolute and relative differences between two fields.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldDiff {
    pub abs_diff: Vec<f64>,
    /// `NaN` outside the mask.
    pub rel_diff: Vec<f64>,
    pub mask: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiffSummary {
    pub max_abs: f64,
    pub mean_abs: f64,
    pub max_rel: f64,
    pub mean_rel: f64,
    pub compared_nodes: usize,
}

pub fn field_diff(u_test: &[f64], u_ref: &[f64], floor_fraction: f64) -> Result<FieldDiff, StatsError> {
    if u_test.len() != u_ref.len() {
        return Err(StatsError::ShapeMismatch(format!("{} vs {} nodes", u_test.len(), u_ref.len())));
    }
    let top = u_ref.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = floor_fraction * top;
    let abs_diff: Vec<f64> = u_test.iter().zip(u_ref).map(|(a, b)| (a - b).abs()).collect();
    let mask: Vec<bool> = u_ref.iter().map(|v| top > 0.0 && v.abs() >= floor).collect();
    let rel_diff = abs_diff
        .iter()
        .zip(u_ref)
        .zip(&mask)
        .map(|((d, r), &m)| if m { d / r.abs() } else { f64::NAN })
        .collect();
    Ok(FieldDiff { abs_diff, rel_diff, mask })
}

impl FieldDiff {
    pub fn summary(&self) -> DiffSummary {
        let n = self.abs_diff.len().max(1) as f64;
        let rel: Vec<f64> = self.rel_diff.iter().zip(&self.mask).filter(|(_, &m)| m).map(|(r, _)| *r).collect();
        DiffSummary {
            max_abs: self.abs_diff.iter().fold(0.0, |a, &b| a.max(b)),
            mean_abs: self.abs_diff.iter().sum::<f64>() / n,
            max_rel: rel.iter().fold(0.0, |a, &b| a.max(b)),
            mean_rel: if rel.is_empty() { 0.0 } else { rel.iter().sum::<f64>() / rel.len() as f64 },
            compared_nodes: rel.len(),
        }
    }
}
