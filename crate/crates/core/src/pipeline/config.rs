//! Pipeline configuration: a sectioned TOML file (`mesh.h`,
//! `field1.variance`, ...) with every key overridable from the
//! environment as `RBFUQ_<SECTION>__<KEY>`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collocation::Rule;
use crate::fem::{BoundaryConditions, LinearSolver, NewtonOptions};
use crate::metamodel::{Detrend, RbfKernel, SvdThreshold};
use crate::model::ModelProblem;
use crate::random_field::{KlFieldSpec, Marginal};
use crate::screening::ReductionPolicy;

pub const ENV_PREFIX: &str = "RBFUQ_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("environment override {var}: {msg}")]
    Env { var: String, msg: String },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionKind {
    Uniform,
    Normal,
}

impl DistributionKind {
    pub fn marginal(self) -> Marginal {
        match self {
            DistributionKind::Uniform => Marginal::UniformSym,
            DistributionKind::Normal => Marginal::StandardNormal,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub h: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { h: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub gamma: f64,
    pub distribution: DistributionKind,
    pub source: f64,
    pub dirichlet_left: f64,
    pub dirichlet_right: f64,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self { gamma: 1.0, distribution: DistributionKind::Uniform, source: 1.0, dirichlet_left: 1.0, dirichlet_right: 0.0 }
    }
}

/// Unset entries take the preset value for the configured distribution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub mean: Option<f64>,
    pub variance: Option<f64>,
    pub corr_length: Option<f64>,
    pub terms: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Banded LU up to this many nodes, BiCGSTAB above.
    pub direct_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, direct_limit: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreeningConfig {
    /// Keep this many top-ranked parameters.
    pub top_k: Option<usize>,
    /// Or keep the shortest ranking prefix reaching this fraction of `sum S`.
    pub fraction: Option<f64>,
    pub c: f64,
    /// Also run the cross design and report `alpha_max` and `D`.
    pub full_hessian: bool,
    /// Defaults to the standard deviation of a unit design step.
    pub sigma: Option<f64>,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self { top_k: None, fraction: None, c: 1.0, full_hessian: false, sigma: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Linear,
    ThinPlate,
    Gaussian,
    Multiquadric,
    Triharmonic,
    InverseMultiquadric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetamodelConfig {
    pub kernel: KernelKind,
    /// `c` for (inverse) multiquadrics, `gamma` for the Gaussian. Defaults
    /// to the mean nearest-neighbour distance of the centers (its inverse
    /// square for the Gaussian).
    pub shape: Option<f64>,
    pub detrend: Detrend,
    pub svd_energy: Option<f64>,
    pub svd_error: Option<f64>,
    pub svd_rank: Option<usize>,
}

impl Default for MetamodelConfig {
    fn default() -> Self {
        Self { kernel: KernelKind::Multiquadric, shape: None, detrend: Detrend::Linear, svd_energy: None, svd_error: None, svd_rank: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub samples: usize,
    pub quantiles: Vec<f64>,
    /// Halton burn-in; `--seed` adds to it.
    pub skip: usize,
    /// Scenario distribution; defaults to `problem.distribution`.
    pub distribution: Option<DistributionKind>,
    /// Evaluate a saved metamodel instead of building one.
    pub model_dir: Option<PathBuf>,
    pub vtk: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            samples: 2000,
            quantiles: vec![0.5, 0.68, 0.9],
            skip: crate::doe::DEFAULT_HALTON_SKIP,
            distribution: None,
            model_dir: None,
            vtk: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    /// Gauss-Hermite for normal inputs, Clenshaw-Curtis for uniform ones.
    Auto,
    ClenshawCurtis,
    Gauss,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub rule: RuleKind,
    /// Levels run in order; later levels reuse earlier solves where points coincide.
    pub levels: Vec<usize>,
    /// Build the grid on the screened parameter set.
    pub reduced: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { rule: RuleKind::Auto, levels: vec![2], reduced: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mesh: MeshConfig,
    pub problem: ProblemConfig,
    pub field1: FieldConfig,
    pub field2: FieldConfig,
    pub field3: FieldConfig,
    pub solver: SolverConfig,
    pub screening: ScreeningConfig,
    pub metamodel: MetamodelConfig,
    pub evaluation: EvaluationConfig,
    pub baseline: BaselineConfig,
}

impl PipelineConfig {
    /// Parses TOML text, then applies `RBFUQ_*` overrides from `env`.
    pub fn from_toml_with_env<I>(text: &str, env: I) -> Result<Self, ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        let mut overrides: Vec<(String, String)> = env.into_iter().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        overrides.sort();
        for (var, raw) in overrides {
            apply_override(&mut table, &var, &raw)?;
        }
        let cfg: PipelineConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.resolved()
    }

    /// Reads `path` (or starts from defaults) and applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?,
            None => String::new(),
        };
        Self::from_toml_with_env(&text, std::env::vars())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises")
    }

    /// Fills preset field values and validates.
    pub fn resolved(mut self) -> Result<Self, ConfigError> {
        let preset = match self.problem.distribution {
            DistributionKind::Uniform => ModelProblem::uniform_inputs(self.problem.gamma, self.mesh.h),
            DistributionKind::Normal => ModelProblem::normal_inputs(self.problem.gamma, self.mesh.h),
        };
        for (f, p) in [&mut self.field1, &mut self.field2, &mut self.field3].into_iter().zip(&preset.fields) {
            f.mean.get_or_insert(p.mean);
            f.variance.get_or_insert(p.variance);
            f.corr_length.get_or_insert(p.corr_length);
            f.terms.get_or_insert(p.term_count);
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.mesh.h > 0.0 && self.mesh.h <= 1.0) {
            return bad(format!("mesh.h must be in (0, 1], got {}", self.mesh.h));
        }
        if !(self.problem.gamma >= 0.0) {
            return bad("problem.gamma must be non-negative".into());
        }
        for (i, f) in [&self.field1, &self.field2, &self.field3].iter().enumerate() {
            if !(f.variance.unwrap() > 0.0) || !(f.corr_length.unwrap() > 0.0) || f.terms.unwrap() == 0 {
                return bad(format!("field{}: variance and corr_length must be positive, terms at least 1", i + 1));
            }
        }
        let dim = self.dim();
        if self.screening.top_k.is_some() && self.screening.fraction.is_some() {
            return bad("set at most one of screening.top_k and screening.fraction".into());
        }
        if let Some(k) = self.screening.top_k {
            if k == 0 || k > dim {
                return bad(format!("screening.top_k must be in 1..={dim}"));
            }
        }
        if let Some(f) = self.screening.fraction {
            if !(f > 0.0 && f <= 1.0) {
                return bad("screening.fraction must be in (0, 1]".into());
            }
        }
        if self.evaluation.samples < 100 {
            return bad(format!("evaluation.samples must be at least 100, got {}", self.evaluation.samples));
        }
        if self.evaluation.quantiles.is_empty() || self.evaluation.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return bad("evaluation.quantiles must be a non-empty list of values in (0, 1)".into());
        }
        if self.baseline.levels.is_empty() || self.baseline.levels.iter().any(|l| !(1..=2).contains(l)) {
            return bad("baseline.levels must list levels 1 or 2".into());
        }
        if self.rule() == Rule::ClenshawCurtis && self.problem.distribution == DistributionKind::Normal {
            return bad("Clenshaw-Curtis grids are only offered for uniform inputs".into());
        }
        let n_set = [self.metamodel.svd_energy.is_some(), self.metamodel.svd_error.is_some(), self.metamodel.svd_rank.is_some()]
            .iter()
            .filter(|b| **b)
            .count();
        if n_set > 1 {
            return bad("set at most one of metamodel.svd_energy, svd_error, svd_rank".into());
        }
        if let Some(s) = self.metamodel.shape {
            if !(s > 0.0) {
                return bad("metamodel.shape must be positive".into());
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        [&self.field1, &self.field2, &self.field3].iter().map(|f| f.terms.unwrap_or(0)).sum()
    }

    pub fn problem(&self) -> ModelProblem {
        let mut p = match self.problem.distribution {
            DistributionKind::Uniform => ModelProblem::uniform_inputs(self.problem.gamma, self.mesh.h),
            DistributionKind::Normal => ModelProblem::normal_inputs(self.problem.gamma, self.mesh.h),
        };
        for (spec, f) in p.fields.iter_mut().zip([&self.field1, &self.field2, &self.field3]) {
            *spec = KlFieldSpec::on_subdomain(
                spec.subdomain,
                f.mean.unwrap_or(spec.mean),
                f.variance.unwrap_or(spec.variance),
                f.corr_length.unwrap_or(spec.corr_length),
                f.terms.unwrap_or(spec.term_count),
            );
        }
        p.source = self.problem.source;
        p.bc = BoundaryConditions::dirichlet(self.problem.dirichlet_left, self.problem.dirichlet_right);
        p.newton = NewtonOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            linear_solver: LinearSolver::Auto { direct_limit: self.solver.direct_limit },
        };
        p
    }

    pub fn reduction_policy(&self) -> Option<ReductionPolicy> {
        match (self.screening.top_k, self.screening.fraction) {
            (Some(k), _) => Some(ReductionPolicy::TopK(k)),
            (None, Some(f)) => Some(ReductionPolicy::CumulativeFraction(f)),
            _ => None,
        }
    }

    pub fn screening_sigma(&self) -> f64 {
        self.screening.sigma.unwrap_or_else(|| self.problem.distribution.marginal().design_scale())
    }

    pub fn svd_threshold(&self) -> SvdThreshold {
        let m = &self.metamodel;
        match (m.svd_energy, m.svd_error, m.svd_rank) {
            (Some(f), _, _) => SvdThreshold::EnergyFraction(f),
            (_, Some(e), _) => SvdThreshold::AbsoluteError(e),
            (_, _, Some(k)) => SvdThreshold::Rank(k),
            _ => SvdThreshold::default(),
        }
    }

    /// Kernel with the shape parameter resolved against the centers' spacing.
    pub fn kernel(&self, mean_spacing: f64) -> RbfKernel {
        let c = self.metamodel.shape.unwrap_or(mean_spacing);
        match self.metamodel.kernel {
            KernelKind::Linear => RbfKernel::Linear,
            KernelKind::ThinPlate => RbfKernel::ThinPlate,
            KernelKind::Triharmonic => RbfKernel::Triharmonic,
            KernelKind::Multiquadric => RbfKernel::Multiquadric { c },
            KernelKind::InverseMultiquadric => RbfKernel::InverseMultiquadric { c },
            KernelKind::Gaussian => RbfKernel::Gaussian { gamma: self.metamodel.shape.unwrap_or(1.0 / (mean_spacing * mean_spacing)) },
        }
    }

    pub fn evaluation_distribution(&self) -> DistributionKind {
        self.evaluation.distribution.unwrap_or(self.problem.distribution)
    }

    pub fn rule(&self) -> Rule {
        match (self.baseline.rule, self.problem.distribution) {
            (RuleKind::ClenshawCurtis, _) => Rule::ClenshawCurtis,
            (RuleKind::Gauss, DistributionKind::Uniform) => Rule::GaussLegendre,
            (RuleKind::Auto, DistributionKind::Uniform) => Rule::ClenshawCurtis,
            (_, DistributionKind::Normal) => Rule::GaussHermite,
        }
    }
}

fn apply_override(table: &mut toml::Table, var: &str, raw: &str) -> Result<(), ConfigError> {
    let env_err = |msg: &str| ConfigError::Env { var: var.to_string(), msg: msg.to_string() };
    let path = &var[ENV_PREFIX.len()..];
    let (section, key) = path.split_once("__").ok_or_else(|| env_err("expected RBFUQ_<SECTION>__<KEY>"))?;
    if section.is_empty() || key.is_empty() {
        return Err(env_err("empty section or key"));
    }
    // Values are read as TOML literals; anything that does not parse is a string.
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let sec = table
        .entry(section.to_ascii_lowercase())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()))
        .as_table_mut()
        .ok_or_else(|| env_err("section is not a table"))?;
    sec.insert(key.to_ascii_lowercase(), value);
    Ok(())
}
