//! Truncated Karhunen-Loève expansions of exponential-covariance random
//! fields and the piecewise diffusion coefficient built from them.
//!
//! The covariance `s^2 exp(-|x - x'|_1 / l)` factorises over the two
//! coordinates, so each 2D eigenpair is a product of 1D eigenpairs of the
//! kernel `exp(-|x - x'| / l)` on an interval `[0, a]`. Those are known in
//! closed form up to the positive roots `w` of
//!
//! ```text
//! (l^2 w^2 - 1) sin(w a) = 2 l w cos(w a),
//! ```
//!
//! with eigenvalue `2 l s^2 / (l^2 w^2 + 1)` and eigenfunction
//! proportional to `l w cos(w x) + sin(w x)`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::fem::Coefficient;
use crate::mesh::{Point, Subdomain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("could not bracket eigenvalue root {index} on ({lo}, {hi})")]
    RootBracketingFailure { index: usize, lo: f64, hi: f64 },
    #[error("invalid field specification: {0}")]
    InvalidSpec(String),
    #[error("point ({0}, {1}) lies outside the L-shaped domain")]
    OutOfDomain(f64, f64),
    #[error("parameter vector has {got} entries, expected {expected}")]
    ParameterLength { expected: usize, got: usize },
}

/// One 1D eigenpair of the exponential kernel on `[0, length]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenpair1d {
    pub root: f64,
    pub eigenvalue: f64,
    corr_length: f64,
    norm: f64,
}

impl Eigenpair1d {
    /// Normalised eigenfunction at local coordinate `x` in `[0, length]`.
    pub fn eval(&self, x: f64) -> f64 {
        let w = self.root;
        (self.corr_length * w * (w * x).cos() + (w * x).sin()) / self.norm
    }
}

fn characteristic(w: f64, l: f64, a: f64) -> f64 {
    (l * l * w * w - 1.0) * (w * a).sin() - 2.0 * l * w * (w * a).cos()
}

/// First `n` eigenpairs of `variance * exp(-|x - x'| / corr_length)` on
/// `[0, interval_length]`, eigenvalues strictly decreasing.
pub fn kl_eigenpairs_1d(variance: f64, corr_length: f64, interval_length: f64, n: usize) -> Result<Vec<Eigenpair1d>, FieldError> {
    if !(variance > 0.0 && corr_length > 0.0 && interval_length > 0.0) {
        return Err(FieldError::InvalidSpec("variance, correlation length and interval length must be positive".into()));
    }
    let (l, a) = (corr_length, interval_length);
    let mut pairs = Vec::with_capacity(n);
    for k in 1..=n {
        let mut lo = (k - 1) as f64 * PI / a;
        let mut hi = k as f64 * PI / a;
        if k == 1 {
            // w = 0 is a spurious root of the characteristic function.
            lo = hi * 1e-9;
        }
        let (mut glo, ghi) = (characteristic(lo, l, a), characteristic(hi, l, a));
        if glo == 0.0 || glo.signum() == ghi.signum() {
            return Err(FieldError::RootBracketingFailure { index: k, lo, hi });
        }
        while hi - lo > 1e-13 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            let gm = characteristic(mid, l, a);
            if gm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if gm.signum() == glo.signum() {
                lo = mid;
                glo = gm;
            } else {
                hi = mid;
            }
        }
        let w = 0.5 * (lo + hi);
        let s2 = (2.0 * w * a).sin() / (4.0 * w);
        let norm2 = l * l * w * w * (a / 2.0 + s2) + (a / 2.0 - s2) + l * (1.0 - (2.0 * w * a).cos()) / 2.0;
        pairs.push(Eigenpair1d {
            root: w,
            eigenvalue: 2.0 * l * variance / (l * l * w * w + 1.0),
            corr_length: l,
            norm: norm2.sqrt(),
        });
    }
    Ok(pairs)
}

/// Description of one piecewise component `a_i` of the coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlFieldSpec {
    pub mean: f64,
    pub variance: f64,
    pub corr_length: f64,
    pub term_count: usize,
    pub subdomain: Subdomain,
    /// Rectangle `(min, max)` on which the eigenfunctions live.
    pub domain_box: (Point, Point),
}

impl KlFieldSpec {
    /// Spec whose eigenfunctions live on the subdomain's bounding box.
    pub fn on_subdomain(subdomain: Subdomain, mean: f64, variance: f64, corr_length: f64, term_count: usize) -> Self {
        Self { mean, variance, corr_length, term_count, subdomain, domain_box: subdomain.bounding_box() }
    }

    pub fn validate(&self) -> Result<(), FieldError> {
        let (lo, hi) = self.domain_box;
        if !(self.variance > 0.0) {
            return Err(FieldError::InvalidSpec(format!("variance must be positive, got {}", self.variance)));
        }
        if !(self.corr_length > 0.0) {
            return Err(FieldError::InvalidSpec(format!("correlation length must be positive, got {}", self.corr_length)));
        }
        if self.term_count == 0 {
            return Err(FieldError::InvalidSpec("term count must be at least 1".into()));
        }
        if !(hi[0] > lo[0] && hi[1] > lo[1]) {
            return Err(FieldError::InvalidSpec("domain box must have positive extent".into()));
        }
        Ok(())
    }
}

/// One retained 2D term: `eigenvalue = variance * lambda_x * lambda_y`
/// with unit-variance 1D factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KlTerm {
    pub eigenvalue: f64,
    pub mode_x: usize,
    pub mode_y: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KlBasis {
    spec: KlFieldSpec,
    modes_x: Vec<Eigenpair1d>,
    modes_y: Vec<Eigenpair1d>,
    terms: Vec<KlTerm>,
}

impl KlBasis {
    pub fn spec(&self) -> &KlFieldSpec {
        &self.spec
    }

    pub fn terms(&self) -> &[KlTerm] {
        &self.terms
    }

    pub fn modes_x(&self) -> &[Eigenpair1d] {
        &self.modes_x
    }

    pub fn modes_y(&self) -> &[Eigenpair1d] {
        &self.modes_y
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.eigenvalue).collect()
    }

    /// Value of eigenfunction `n` at global point `x`.
    pub fn eigenfunction(&self, n: usize, x: Point) -> f64 {
        let t = self.terms[n];
        let lo = self.spec.domain_box.0;
        self.modes_x[t.mode_x].eval(x[0] - lo[0]) * self.modes_y[t.mode_y].eval(x[1] - lo[1])
    }

    /// `sum_n sqrt(lambda_n) phi_n(x) y_n`.
    pub fn fluctuation(&self, x: Point, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.terms.len());
        let lo = self.spec.domain_box.0;
        let (dx, dy) = (x[0] - lo[0], x[1] - lo[1]);
        self.terms
            .iter()
            .zip(y)
            .map(|(t, yn)| t.eigenvalue.sqrt() * self.modes_x[t.mode_x].eval(dx) * self.modes_y[t.mode_y].eval(dy) * yn)
            .sum()
    }

    /// Pointwise variance `sum_n lambda_n phi_n(x)^2` of the truncated field
    /// under unit-variance coefficients.
    pub fn pointwise_variance(&self, x: Point) -> f64 {
        (0..self.terms.len()).map(|n| self.terms[n].eigenvalue * self.eigenfunction(n, x).powi(2)).sum()
    }

    /// Writes `term,eigenvalue,mode_x,mode_y,root_x,root_y` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["term", "eigenvalue", "mode_x", "mode_y", "root_x", "root_y"])?;
        for (n, t) in self.terms.iter().enumerate() {
            wtr.write_record(&[
                (n + 1).to_string(),
                format!("{:e}", t.eigenvalue),
                (t.mode_x + 1).to_string(),
                (t.mode_y + 1).to_string(),
                format!("{:e}", self.modes_x[t.mode_x].root),
                format!("{:e}", self.modes_y[t.mode_y].root),
            ])?;
        }
        wtr.flush()
    }
}

/// Tensor-product basis keeping the `term_count` largest products,
/// ties broken by `(mode_x, mode_y)`.
pub fn build_kl_basis(spec: &KlFieldSpec) -> Result<KlBasis, FieldError> {
    spec.validate()?;
    let (lo, hi) = spec.domain_box;
    let k = spec.term_count;
    // A retained (i, j) implies (i', 0) is retained for all i' <= i, so k
    // modes per direction suffice.
    let modes_x = kl_eigenpairs_1d(1.0, spec.corr_length, hi[0] - lo[0], k)?;
    let modes_y = kl_eigenpairs_1d(1.0, spec.corr_length, hi[1] - lo[1], k)?;
    let mut terms: Vec<KlTerm> = (0..k)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .map(|(i, j)| KlTerm {
            eigenvalue: spec.variance * (modes_x[i].eigenvalue * modes_y[j].eigenvalue),
            mode_x: i,
            mode_y: j,
        })
        .collect();
    terms.sort_by(|a, b| {
        b.eigenvalue
            .partial_cmp(&a.eigenvalue)
            .unwrap()
            .then((a.mode_x, a.mode_y).cmp(&(b.mode_x, b.mode_y)))
    });
    terms.truncate(k);
    Ok(KlBasis { spec: spec.clone(), modes_x, modes_y, terms })
}

/// Marginal law of one random input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Marginal {
    /// Uniform on `[-sqrt 3, sqrt 3]`.
    UniformSym,
    StandardNormal,
}

impl Marginal {
    /// Physical value of the normalised design coordinate `+1`.
    pub fn design_scale(self) -> f64 {
        match self {
            Marginal::UniformSym => 3f64.sqrt(),
            Marginal::StandardNormal => 1.0,
        }
    }

    pub fn inverse_cdf(self, p: f64) -> f64 {
        match self {
            Marginal::UniformSym => 3f64.sqrt() * (2.0 * p - 1.0),
            Marginal::StandardNormal => Normal::standard().inverse_cdf(p),
        }
    }
}

/// Independent marginals, one per random input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub marginals: Vec<Marginal>,
}

impl DistributionSpec {
    pub fn iid(kind: Marginal, dim: usize) -> Self {
        Self { marginals: vec![kind; dim] }
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    /// Restriction to the listed coordinates.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self { marginals: indices.iter().map(|&i| self.marginals[i]).collect() }
    }

    pub fn design_scales(&self) -> Vec<f64> {
        self.marginals.iter().map(|m| m.design_scale()).collect()
    }
}

/// The three-region coefficient `a_i(x, y) + gamma u^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseField {
    bases: Vec<KlBasis>,
    offsets: Vec<usize>,
}

impl PiecewiseField {
    /// One spec per subdomain, in `D1, D2, D3` order.
    pub fn new(specs: &[KlFieldSpec]) -> Result<Self, FieldError> {
        if specs.len() != 3 {
            return Err(FieldError::InvalidSpec(format!("expected 3 field specs, got {}", specs.len())));
        }
        for (s, sub) in specs.iter().zip(Subdomain::ALL) {
            if s.subdomain != sub {
                return Err(FieldError::InvalidSpec(format!("spec for {:?} listed in position of {:?}", s.subdomain, sub)));
            }
        }
        let bases = specs.iter().map(build_kl_basis).collect::<Result<Vec<_>, _>>()?;
        let mut offsets = vec![0];
        for b in &bases {
            offsets.push(offsets.last().unwrap() + b.terms().len());
        }
        Ok(Self { bases, offsets })
    }

    /// Total number of random variables `L`.
    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn basis(&self, sub: Subdomain) -> &KlBasis {
        &self.bases[sub.index()]
    }

    /// Global parameter indices belonging to `sub`.
    pub fn parameter_range(&self, sub: Subdomain) -> std::ops::Range<usize> {
        self.offsets[sub.index()]..self.offsets[sub.index() + 1]
    }

    /// `a_i(x, y)` for the region containing `x`, without the `gamma u^2` part.
    pub fn base_value(&self, x: Point, sub: Subdomain, y: &[f64]) -> f64 {
        let b = &self.bases[sub.index()];
        b.spec().mean + b.fluctuation(x, &y[self.parameter_range(sub)])
    }

    /// Borrow the field at a fixed parameter vector as a solver coefficient.
    pub fn realization<'a>(&'a self, y: &'a [f64]) -> Result<Realization<'a>, FieldError> {
        if y.len() != self.dim() {
            return Err(FieldError::ParameterLength { expected: self.dim(), got: y.len() });
        }
        Ok(Realization { field: self, y })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Realization<'a> {
    field: &'a PiecewiseField,
    y: &'a [f64],
}

impl Coefficient for Realization<'_> {
    fn base(&self, x: Point, subdomain: Subdomain) -> f64 {
        self.field.base_value(x, subdomain, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientSample {
    pub value: f64,
    pub subdomain: Subdomain,
    /// Set when the total coefficient is `<= 0`; the solver rejects such values.
    pub non_positive: bool,
}

/// `a(x, u, y) = mean_i + sum_n sqrt(lambda_n) phi_n(x) y_{i,n} + gamma u^2`.
pub fn evaluate_coefficient(x: Point, u: f64, y: &[f64], field: &PiecewiseField, gamma: f64) -> Result<CoefficientSample, FieldError> {
    if y.len() != field.dim() {
        return Err(FieldError::ParameterLength { expected: field.dim(), got: y.len() });
    }
    let sub = Subdomain::locate(x).ok_or(FieldError::OutOfDomain(x[0], x[1]))?;
    let value = field.base_value(x, sub, y) + gamma * u * u;
    Ok(CoefficientSample { value, subdomain: sub, non_positive: value <= 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model_specs() -> Vec<KlFieldSpec> {
        vec![
            KlFieldSpec::on_subdomain(Subdomain::D1, 30.0, 100.0, 1.0, 6),
            KlFieldSpec::on_subdomain(Subdomain::D2, 5.0, 2.25, 0.5, 7),
            KlFieldSpec::on_subdomain(Subdomain::D3, 100.0, 900.0, 1.5, 5),
        ]
    }

    #[test]
    fn eigenvalues_strictly_decrease() {
        let pairs = kl_eigenpairs_1d(1.0, 1.0, 1.0, 30).unwrap();
        assert!(pairs.windows(2).all(|w| w[0].eigenvalue > w[1].eigenvalue));
    }

    #[test]
    fn eigenfunctions_have_unit_norm() {
        for pair in kl_eigenpairs_1d(2.0, 0.5, 1.7, 8).unwrap() {
            // Composite Simpson with 4000 panels.
            let (a, n) = (1.7, 4000);
            let h = a / n as f64;
            let s: f64 = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * pair.eval(i as f64 * h).powi(2)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((s - 1.0).abs() < 1e-8, "norm {s}");
        }
    }

    #[test]
    fn basis_has_requested_term_count() {
        let b = build_kl_basis(&model_specs()[0]).unwrap();
        assert_eq!(b.terms().len(), 6);
        assert!(b.terms().windows(2).all(|w| w[0].eigenvalue >= w[1].eigenvalue));
    }

    #[test]
    fn basis_eigenvalue_is_product_of_1d_eigenvalues() {
        let spec = KlFieldSpec::on_subdomain(Subdomain::D1, 30.0, 100.0, 1.0, 6);
        let b = build_kl_basis(&spec).unwrap();
        let px = kl_eigenpairs_1d(100.0, 1.0, 1.0, 6).unwrap();
        let py = kl_eigenpairs_1d(1.0, 1.0, 2.0, 6).unwrap();
        for t in b.terms() {
            let prod = px[t.mode_x].eigenvalue * py[t.mode_y].eigenvalue;
            assert!((t.eigenvalue - prod).abs() <= 1e-12 * prod);
        }
    }

    #[test]
    fn eigenvalues_scale_linearly_with_variance() {
        let s1 = KlFieldSpec::on_subdomain(Subdomain::D1, 0.0, 1.0, 1.0, 6);
        let s100 = KlFieldSpec { variance: 100.0, ..s1.clone() };
        let (b1, b100) = (build_kl_basis(&s1).unwrap(), build_kl_basis(&s100).unwrap());
        for (t1, t100) in b1.terms().iter().zip(b100.terms()) {
            assert!((t100.eigenvalue - 100.0 * t1.eigenvalue).abs() <= 1e-12 * t100.eigenvalue);
            assert_eq!((t1.mode_x, t1.mode_y), (t100.mode_x, t100.mode_y));
        }
    }

    #[test]
    fn square_box_ties_break_lexicographically() {
        let spec = KlFieldSpec { domain_box: ([0.0, 0.0], [1.0, 1.0]), ..KlFieldSpec::on_subdomain(Subdomain::D1, 0.0, 1.0, 1.0, 3) };
        let b = build_kl_basis(&spec).unwrap();
        let modes: Vec<_> = b.terms().iter().map(|t| (t.mode_x, t.mode_y)).collect();
        assert_eq!(modes, vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn coefficient_at_mean_parameters() {
        let field = PiecewiseField::new(&model_specs()).unwrap();
        let y = vec![0.0; 18];
        let a = evaluate_coefficient([0.5, 1.5], 0.0, &y, &field, 1.0).unwrap();
        assert_eq!(a.value, 30.0);
        assert_eq!(a.subdomain, Subdomain::D1);
        let a = evaluate_coefficient([1.5, 0.25], 2.0, &y, &field, 1.0).unwrap();
        assert_eq!(a.value, 9.0);
    }

    #[test]
    fn coefficient_is_linear_in_single_variable() {
        let field = PiecewiseField::new(&model_specs()).unwrap();
        let eps = 0.37;
        let mut y = vec![0.0; 18];
        y[0] = eps;
        let x = [0.3, 1.1];
        let a = evaluate_coefficient(x, 0.0, &y, &field, 0.0).unwrap().value;
        let b = field.basis(Subdomain::D1);
        let expected = 30.0 + eps * b.terms()[0].eigenvalue.sqrt() * b.eigenfunction(0, x);
        assert!((a - expected).abs() < 1e-12);
    }

    #[test]
    fn coefficient_outside_domain_errors() {
        let field = PiecewiseField::new(&model_specs()).unwrap();
        let err = evaluate_coefficient([1.5, 1.5], 0.0, &[0.0; 18], &field, 0.0).unwrap_err();
        assert!(matches!(err, FieldError::OutOfDomain(..)));
    }

    #[test]
    fn negative_coefficient_is_flagged() {
        let specs = vec![
            KlFieldSpec::on_subdomain(Subdomain::D1, 1.0, 100.0, 1.0, 1),
            KlFieldSpec::on_subdomain(Subdomain::D2, 1.0, 1.0, 1.0, 1),
            KlFieldSpec::on_subdomain(Subdomain::D3, 1.0, 1.0, 1.0, 1),
        ];
        let field = PiecewiseField::new(&specs).unwrap();
        let a = evaluate_coefficient([0.5, 1.0], 0.0, &[-10.0, 0.0, 0.0], &field, 0.0).unwrap();
        assert!(a.non_positive);
    }

    #[test]
    fn invalid_spec_rejected() {
        let bad = KlFieldSpec { term_count: 0, ..model_specs()[0].clone() };
        assert!(matches!(build_kl_basis(&bad), Err(FieldError::InvalidSpec(_))));
        let bad = KlFieldSpec { variance: -1.0, ..model_specs()[0].clone() };
        assert!(build_kl_basis(&bad).is_err());
    }
}
