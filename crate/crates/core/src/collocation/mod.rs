//! Smolyak sparse-grid stochastic collocation: point sets, cubature
//! weights, the combination-formula Lagrange interpolant and the
//! statistics computed from it.

mod rules;

use std::collections::HashMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::doe::{to_normalized, ParameterPoint};
use crate::random_field::{DistributionSpec, Marginal};
use crate::stats::{field_quantiles, FieldStatistics, StatsError};

pub use rules::{lagrange, Rule};

#[derive(Debug, Error)]
pub enum CollocationError {
    #[error("sparse-grid level {0} is not supported (use 1 or 2)")]
    UnsupportedLevel(usize),
    #[error("rule {rule:?} does not match the distribution of parameter {index}")]
    RuleDistributionMismatch { rule: Rule, index: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One tensor-product term of the combination formula.
#[derive(Clone, Debug)]
struct SmolyakTerm {
    coeff: f64,
    /// Dimensions whose level exceeds 1, with their 1D nodes.
    active: Vec<(usize, Vec<f64>)>,
    /// Grid point index of every tensor node, first active dim slowest.
    point_ids: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SparseGrid {
    dim: usize,
    level: usize,
    rule: Rule,
    /// Normalised coordinates.
    points: Vec<ParameterPoint>,
    weights: Vec<f64>,
    /// Physical value of one normalised unit per coordinate.
    scales: Vec<f64>,
    terms: Vec<SmolyakTerm>,
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Sparse excess vectors `e = i - 1` with `lo <= |e| <= hi`, as
/// `(dim, e_d)` lists, ordered by `|e|` then lexicographically.
fn excess_vectors(dim: usize, lo: usize, hi: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(d: usize, dim: usize, left: usize, cur: &mut Vec<(usize, usize)>, out: &mut Vec<Vec<(usize, usize)>>) {
        out.push(cur.clone());
        for dd in d..dim {
            for e in 1..=left {
                cur.push((dd, e));
                rec(dd + 1, dim, left - e, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(0, dim, hi, &mut Vec::new(), &mut out);
    let norm = |v: &Vec<(usize, usize)>| v.iter().map(|x| x.1).sum::<usize>();
    out.retain(|v| norm(v) >= lo);
    out.sort_by(|a, b| norm(a).cmp(&norm(b)).then_with(|| a.cmp(b)));
    out
}

fn check_rule(rule: Rule, dist: &DistributionSpec) -> Result<(), CollocationError> {
    for (index, m) in dist.marginals.iter().enumerate() {
        let ok = match rule {
            Rule::GaussHermite => *m == Marginal::StandardNormal,
            Rule::ClenshawCurtis | Rule::GaussLegendre => *m == Marginal::UniformSym,
        };
        if !ok {
            return Err(CollocationError::RuleDistributionMismatch { rule, index });
        }
    }
    Ok(())
}

/// Isotropic Smolyak grid with multi-indices `|i| <= dim + level`.
pub fn build_sparse_grid(dim: usize, level: usize, rule: Rule, dist: &DistributionSpec) -> Result<SparseGrid, CollocationError> {
    if !(1..=2).contains(&level) {
        return Err(CollocationError::UnsupportedLevel(level));
    }
    if dist.dim() != dim || dim == 0 {
        return Err(CollocationError::ShapeMismatch(format!("grid dimension {dim}, distribution dimension {}", dist.dim())));
    }
    check_rule(rule, dist)?;

    let lo = (level + 1).saturating_sub(dim);
    let mut lookup: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut terms = Vec::new();
    for e in excess_vectors(dim, lo, level) {
        let norm: usize = e.iter().map(|x| x.1).sum();
        let k = level - norm;
        let coeff = if k % 2 == 0 { 1.0 } else { -1.0 } * binomial(dim - 1, k);
        let active: Vec<(usize, Vec<f64>, Vec<f64>)> = e
            .iter()
            .map(|&(d, ed)| {
                let (x, w) = rule.nodes_weights(ed + 1);
                (d, x, w)
            })
            .collect();
        let mut point_ids = Vec::new();
        for_each_tensor(&active.iter().map(|a| a.1.len()).collect::<Vec<_>>(), |idx| {
            let mut z = vec![0.0; dim];
            let mut w = coeff;
            for (a, &j) in active.iter().zip(idx) {
                z[a.0] = a.1[j];
                w *= a.2[j];
            }
            let key: Vec<u64> = z.iter().map(|v| v.to_bits()).collect();
            let id = *lookup.entry(key).or_insert_with(|| {
                points.push(ParameterPoint(z));
                weights.push(0.0);
                points.len() - 1
            });
            weights[id] += w;
            point_ids.push(id);
        });
        terms.push(SmolyakTerm { coeff, active: active.into_iter().map(|(d, x, _)| (d, x)).collect(), point_ids });
    }
    Ok(SparseGrid { dim, level, rule, points, weights, scales: dist.design_scales(), terms })
}

/// Calls `f` with every multi-index of the given extents, last index fastest.
fn for_each_tensor(extents: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0; extents.len()];
    loop {
        f(&idx);
        let mut d = extents.len();
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < extents[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

impl SparseGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points in normalised coordinates.
    pub fn points(&self) -> &[ParameterPoint] {
        &self.points
    }

    pub fn physical_points(&self) -> Vec<ParameterPoint> {
        self.points.iter().map(|p| crate::doe::to_physical(p, &self.scales)).collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// Coefficients `l_k(z)` such that the interpolant is `sum_k u_k l_k(z)`.
    pub fn interpolation_weights(&self, z: &ParameterPoint) -> Result<Vec<f64>, CollocationError> {
        if z.dim() != self.dim {
            return Err(CollocationError::ShapeMismatch(format!("query has {} coordinates, grid {}", z.dim(), self.dim)));
        }
        let mut out = vec![0.0; self.len()];
        for t in &self.terms {
            let basis: Vec<Vec<f64>> = t
                .active
                .iter()
                .map(|(d, nodes)| (0..nodes.len()).map(|k| lagrange(nodes, k, z.0[*d])).collect())
                .collect();
            let mut n = 0;
            for_each_tensor(&basis.iter().map(Vec::len).collect::<Vec<_>>(), |idx| {
                let v: f64 = basis.iter().zip(idx).map(|(b, &j)| b[j]).product();
                out[t.point_ids[n]] += t.coeff * v;
                n += 1;
            });
        }
        Ok(out)
    }

    /// Writes `point_id,weight,z1..zL` in normalised coordinates.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["point_id".to_string(), "weight".to_string()];
        header.extend((1..=self.dim).map(|j| format!("z{j}")));
        wtr.write_record(&header)?;
        for (i, (p, w)) in self.points.iter().zip(&self.weights).enumerate() {
            let mut rec = vec![i.to_string(), format!("{w:e}")];
            rec.extend(p.0.iter().map(|v| format!("{v:e}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()
    }
}

/// Closed-form grid sizes for the rules and levels offered here.
pub fn expected_point_count(dim: usize, level: usize, rule: Rule) -> usize {
    let l = dim;
    match (rule.nested(), level) {
        (_, 1) => 2 * l + 1,
        // only the 7-point term survives in one dimension
        (false, 2) if l == 1 => 7,
        (true, 2) => 2 * l * l + 2 * l + 1,
        (false, 2) => 2 * l * l + 6 * l + 1,
        _ => panic!("level {level} not supported"),
    }
}

/// Snapshots at every grid point, column `k` at `grid.points()[k]`.
#[derive(Clone, Debug)]
pub struct CollocationSolution {
    pub grid: SparseGrid,
    pub snapshots: DMatrix<f64>,
}

impl CollocationSolution {
    pub fn new(grid: SparseGrid, snapshots: DMatrix<f64>) -> Result<Self, CollocationError> {
        if snapshots.ncols() != grid.len() {
            return Err(CollocationError::ShapeMismatch(format!("{} snapshots for {} grid points", snapshots.ncols(), grid.len())));
        }
        Ok(Self { grid, snapshots })
    }

    /// Interpolant at a normalised point.
    pub fn interpolate(&self, z: &ParameterPoint) -> Result<Vec<f64>, CollocationError> {
        let w = self.grid.interpolation_weights(z)?;
        Ok((&self.snapshots * DVector::from_vec(w)).as_slice().to_vec())
    }

    /// Interpolant at a physical sample.
    pub fn interpolate_physical(&self, y: &ParameterPoint) -> Result<Vec<f64>, CollocationError> {
        self.interpolate(&to_normalized(y, &self.grid.scales))
    }
}

/// Cubature mean and variance per node; tiny negative variances from
/// cancellation are clamped to 0.
pub fn cubature_stats(sol: &CollocationSolution) -> (Vec<f64>, Vec<f64>) {
    let w = &sol.grid.weights;
    let mut mean = Vec::with_capacity(sol.snapshots.nrows());
    let mut var = Vec::with_capacity(sol.snapshots.nrows());
    for row in sol.snapshots.row_iter() {
        let m: f64 = row.iter().zip(w).map(|(u, w)| u * w).sum();
        let s2: f64 = row.iter().zip(w).map(|(u, w)| u * u * w).sum();
        mean.push(m);
        var.push((s2 - m * m).max(0.0));
    }
    (mean, var)
}

/// Streams the interpolant at the given physical samples through the
/// shared P^2 estimators.
pub fn collocation_quantiles(sol: &CollocationSolution, samples: &[ParameterPoint], qs: &[f64]) -> Result<FieldStatistics, CollocationError> {
    Ok(field_quantiles(|y: &ParameterPoint| sol.interpolate_physical(y), samples, qs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doe::low_discrepancy_samples;

    fn uniform(l: usize) -> DistributionSpec {
        DistributionSpec::iid(Marginal::UniformSym, l)
    }

    fn normal(l: usize) -> DistributionSpec {
        DistributionSpec::iid(Marginal::StandardNormal, l)
    }

    #[test]
    fn table_counts() {
        let want = [(3, [7, 25, 7, 37]), (6, [13, 85, 13, 109]), (18, [37, 685, 37, 757])];
        for (l, counts) in want {
            let got = [
                build_sparse_grid(l, 1, Rule::ClenshawCurtis, &uniform(l)).unwrap().len(),
                build_sparse_grid(l, 2, Rule::ClenshawCurtis, &uniform(l)).unwrap().len(),
                build_sparse_grid(l, 1, Rule::GaussHermite, &normal(l)).unwrap().len(),
                build_sparse_grid(l, 2, Rule::GaussHermite, &normal(l)).unwrap().len(),
            ];
            assert_eq!(got, counts, "L = {l}");
        }
    }

    #[test]
    fn closed_forms_and_weight_sums() {
        for l in 1..=8 {
            for level in 1..=2 {
                // see expected_point_count for l = 1
                for (rule, dist) in [
                    (Rule::ClenshawCurtis, uniform(l)),
                    (Rule::GaussLegendre, uniform(l)),
                    (Rule::GaussHermite, normal(l)),
                ] {
                    let g = build_sparse_grid(l, level, rule, &dist).unwrap();
                    assert_eq!(g.len(), expected_point_count(l, level, rule), "{rule:?} L={l} level={level}");
                    assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(build_sparse_grid(3, 3, Rule::ClenshawCurtis, &uniform(3)), Err(CollocationError::UnsupportedLevel(3))));
        assert!(matches!(
            build_sparse_grid(3, 1, Rule::ClenshawCurtis, &normal(3)),
            Err(CollocationError::RuleDistributionMismatch { .. })
        ));
        assert!(matches!(
            build_sparse_grid(2, 1, Rule::GaussHermite, &uniform(2)),
            Err(CollocationError::RuleDistributionMismatch { .. })
        ));
    }

    #[test]
    fn cc_levels_are_nested() {
        for l in [1, 3, 6] {
            let g1 = build_sparse_grid(l, 1, Rule::ClenshawCurtis, &uniform(l)).unwrap();
            let g2 = build_sparse_grid(l, 2, Rule::ClenshawCurtis, &uniform(l)).unwrap();
            for p in g1.points() {
                assert!(g2.points().contains(p));
            }
        }
    }

    fn solution(grid: SparseGrid, f: impl Fn(&[f64]) -> f64) -> CollocationSolution {
        let phys = grid.physical_points();
        let x = DMatrix::from_fn(1, grid.len(), |_, k| f(phys[k].coords()));
        CollocationSolution::new(grid, x).unwrap()
    }

    fn assert_delta(g: &SparseGrid) {
        for (m, p) in g.points().iter().enumerate() {
            let w = g.interpolation_weights(p).unwrap();
            for (k, wk) in w.iter().enumerate() {
                let want = if k == m { 1.0 } else { 0.0 };
                assert!((wk - want).abs() < 1e-9, "{:?} level {}", g.rule(), g.level());
            }
        }
    }

    #[test]
    fn delta_property_and_partition_of_unity() {
        assert_delta(&build_sparse_grid(4, 2, Rule::ClenshawCurtis, &uniform(4)).unwrap());
        assert_delta(&build_sparse_grid(4, 1, Rule::GaussHermite, &normal(4)).unwrap());
        assert_delta(&build_sparse_grid(1, 2, Rule::GaussLegendre, &uniform(1)).unwrap());
        let g = build_sparse_grid(3, 2, Rule::GaussHermite, &normal(3)).unwrap();
        let s = solution(g, |_| 5.0);
        let v = s.interpolate(&ParameterPoint(vec![0.3, -1.7, 2.2])).unwrap();
        assert!((v[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn level2_reproduces_quadratics() {
        let f = |y: &[f64]| 1.0 + y[0] - 2.0 * y[2] + 0.5 * y[0] * y[1] - y[1] * y[1] + 3.0 * y[3] * y[2];
        for (rule, dist) in [(Rule::ClenshawCurtis, uniform(4)), (Rule::GaussLegendre, uniform(4)), (Rule::GaussHermite, normal(4))] {
            let g = build_sparse_grid(4, 2, rule, &dist).unwrap();
            let s = solution(g, f);
            for y in low_discrepancy_samples(10, &dist, 5).unwrap() {
                let got = s.interpolate_physical(&y).unwrap()[0];
                assert!((got - f(y.coords())).abs() < 1e-8, "{rule:?}");
            }
        }
    }

    #[test]
    fn level1_reproduces_affine() {
        let f = |y: &[f64]| 2.0 - y[0] + 4.0 * y[1];
        let g = build_sparse_grid(2, 1, Rule::ClenshawCurtis, &uniform(2)).unwrap();
        let s = solution(g, f);
        let y = ParameterPoint(vec![0.4, -1.1]);
        assert!((s.interpolate_physical(&y).unwrap()[0] - f(y.coords())).abs() < 1e-12);
    }

    #[test]
    fn cubature_moments() {
        let g = build_sparse_grid(1, 1, Rule::ClenshawCurtis, &uniform(1)).unwrap();
        let (m, v) = cubature_stats(&solution(g, |y| y[0]));
        assert!(m[0].abs() < 1e-12 && (v[0] - 1.0).abs() < 1e-10);

        let g = build_sparse_grid(1, 2, Rule::GaussHermite, &normal(1)).unwrap();
        let (m, _) = cubature_stats(&solution(g, |y| y[0] * y[0]));
        assert!((m[0] - 1.0).abs() < 1e-12);

        let g = build_sparse_grid(5, 2, Rule::GaussLegendre, &uniform(5)).unwrap();
        let (m, v) = cubature_stats(&solution(g, |_| 3.0));
        assert!((m[0] - 3.0).abs() < 1e-12 && v[0] < 1e-12);
    }

    #[test]
    fn median_of_uniform_line() {
        let dist = uniform(1);
        let g = build_sparse_grid(1, 1, Rule::ClenshawCurtis, &dist).unwrap();
        let s = solution(g, |y| y[0]);
        let samples = low_discrepancy_samples(2000, &dist, 20).unwrap();
        let st = collocation_quantiles(&s, &samples, &[0.5]).unwrap();
        assert!(st.quantiles[0][0].abs() < 0.02);
    }
}
