//! The stochastic model problem: L-shaped domain, three-region KL
//! coefficient plus `gamma u^2`, and a simulator that caches solves by
//! parameter point and counts how many PDE solves were actually run.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::doe::{run_doe, to_physical, DesignMatrix, DoeError, ParameterPoint};
use crate::fem::{BoundaryConditions, FemSystem, NewtonOptions, SolveError};
use crate::mesh::{build_lshape_mesh, Mesh, MeshError, Subdomain};
use crate::random_field::{DistributionSpec, FieldError, KlFieldSpec, Marginal, PiecewiseField};
use crate::screening::Reduction;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Doe(#[from] DoeError),
    #[error("parameter vector has {got} entries, expected {expected}")]
    ParameterLength { expected: usize, got: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelProblem {
    /// Target mesh spacing.
    pub h: f64,
    /// `D1, D2, D3` in that order.
    pub fields: [KlFieldSpec; 3],
    pub gamma: f64,
    pub marginal: Marginal,
    /// Constant source term `b`.
    pub source: f64,
    pub bc: BoundaryConditions,
    pub newton: NewtonOptions,
}

impl ModelProblem {
    fn with(marginal: Marginal, variances: [f64; 3], gamma: f64, h: f64) -> Self {
        let means = [30.0, 5.0, 100.0];
        let corr = [1.0, 0.5, 1.5];
        let terms = [6, 7, 5];
        let fields = std::array::from_fn(|i| {
            KlFieldSpec::on_subdomain(Subdomain::ALL[i], means[i], variances[i], corr[i], terms[i])
        });
        Self {
            h,
            fields,
            gamma,
            marginal,
            source: 1.0,
            bc: BoundaryConditions::model_problem(),
            newton: NewtonOptions::default(),
        }
    }

    /// Uniform inputs, variances 100, 2.25, 900.
    pub fn uniform_inputs(gamma: f64, h: f64) -> Self {
        Self::with(Marginal::UniformSym, [100.0, 2.25, 900.0], gamma, h)
    }

    /// Gaussian inputs, variances 9, 0.25, 100.
    pub fn normal_inputs(gamma: f64, h: f64) -> Self {
        Self::with(Marginal::StandardNormal, [9.0, 0.25, 100.0], gamma, h)
    }

    pub fn dim(&self) -> usize {
        self.fields.iter().map(|f| f.term_count).sum()
    }

    pub fn distribution(&self) -> DistributionSpec {
        DistributionSpec::iid(self.marginal, self.dim())
    }
}

fn key(y: &[f64]) -> Vec<u64> {
    // -0.0 and 0.0 are the same parameter point
    y.iter().map(|v| if *v == 0.0 { 0 } else { v.to_bits() }).collect()
}

/// Solver for one model problem with a solution cache keyed by the exact
/// full-space physical parameter vector.
pub struct Simulator {
    system: FemSystem,
    field: PiecewiseField,
    gamma: f64,
    source: f64,
    bc: BoundaryConditions,
    newton: NewtonOptions,
    cache: Mutex<HashMap<Vec<u64>, Vec<f64>>>,
    solves: AtomicUsize,
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulator").field("nodes", &self.mesh().num_nodes()).field("solves", &self.solve_count()).finish()
    }
}

impl Simulator {
    pub fn new(problem: &ModelProblem) -> Result<Self, ModelError> {
        let mesh = build_lshape_mesh(problem.h)?;
        Self::with_mesh(problem, mesh)
    }

    pub fn with_mesh(problem: &ModelProblem, mesh: Mesh) -> Result<Self, ModelError> {
        let field = PiecewiseField::new(&problem.fields)?;
        Ok(Self {
            system: FemSystem::new(mesh),
            field,
            gamma: problem.gamma,
            source: problem.source,
            bc: problem.bc.clone(),
            newton: problem.newton,
            cache: Mutex::new(HashMap::new()),
            solves: AtomicUsize::new(0),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        self.system.mesh()
    }

    pub fn field(&self) -> &PiecewiseField {
        &self.field
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }

    /// PDE solves performed so far (cache hits excluded).
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Fresh solve at a physical parameter vector, bypassing the cache.
    pub fn solve_uncached(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        if y.len() != self.dim() {
            return Err(ModelError::ParameterLength { expected: self.dim(), got: y.len() });
        }
        let coeff = self.field.realization(y)?;
        let s = self.source;
        self.solves.fetch_add(1, Ordering::Relaxed);
        let rep = self.system.solve(&coeff, &self.bc, |_| s, self.gamma, &self.newton)?;
        Ok(rep.solution)
    }

    /// Solve at a physical parameter vector, reusing a cached result.
    pub fn solve(&self, y: &[f64]) -> Result<Vec<f64>, ModelError> {
        if let Some(u) = self.cache.lock().unwrap().get(&key(y)) {
            return Ok(u.clone());
        }
        let u = self.solve_uncached(y)?;
        self.cache.lock().unwrap().insert(key(y), u.clone());
        Ok(u)
    }

    /// Solves at normalised design points of the reduced space. Points
    /// already in the cache (or repeated in `points`) are not re-solved.
    pub fn run_design(&self, points: &[ParameterPoint], scales: &[f64], reduction: &Reduction) -> Result<DesignMatrix, ModelError> {
        let full: Vec<Vec<f64>> = points.iter().map(|p| reduction.expand(&to_physical(p, scales).0)).collect();
        let mut missing: Vec<ParameterPoint> = Vec::new();
        {
            let cache = self.cache.lock().unwrap();
            let mut seen = std::collections::HashSet::new();
            for y in &full {
                let k = key(y);
                if !cache.contains_key(&k) && seen.insert(k) {
                    missing.push(ParameterPoint(y.clone()));
                }
            }
        }
        let solved = run_doe(&missing, |y| self.solve_uncached(y.coords()))?;
        {
            let mut cache = self.cache.lock().unwrap();
            for (p, col) in solved.points.iter().zip(solved.snapshots.column_iter()) {
                cache.insert(key(p.coords()), col.iter().copied().collect());
            }
        }
        let cache = self.cache.lock().unwrap();
        let m = self.mesh().num_nodes();
        let mut x = DMatrix::zeros(m, points.len());
        for (j, y) in full.iter().enumerate() {
            x.set_column(j, &nalgebra::DVector::from_column_slice(&cache[&key(y)]));
        }
        Ok(DesignMatrix::new(points.to_vec(), x))
    }
}
