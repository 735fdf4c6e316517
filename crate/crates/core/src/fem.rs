//! Piecewise-linear finite elements for the nonlinear diffusion problem
//! `-div((k(x) + gamma u^2) grad u) = b(x)` with Dirichlet and flux
//! boundary data, solved by Newton's method.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mesh::{BoundaryTag, Mesh, Point, Subdomain};
use crate::sparse::{bicgstab, BandLu, BandOrdering, CsrMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("Newton iteration did not converge in {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular system: {0}")]
    SingularSystem(String),
    #[error("no Dirichlet value given for boundary tag {0:?}")]
    MissingDirichletValue(BoundaryTag),
}

/// Solution-independent part `k(x)` of the diffusion coefficient.
///
/// Evaluated once per triangle at its centroid and frozen there.
pub trait Coefficient: Sync {
    fn base(&self, x: Point, subdomain: Subdomain) -> f64;
}

impl<F> Coefficient for F
where
    F: Fn(Point, Subdomain) -> f64 + Sync,
{
    fn base(&self, x: Point, subdomain: Subdomain) -> f64 {
        self(x, subdomain)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryConditions {
    pub dirichlet_values: BTreeMap<BoundaryTag, f64>,
    /// Prescribed conormal flux `a du/dn` on `Neumann` edges.
    pub neumann_flux: f64,
}

impl BoundaryConditions {
    /// `u = 1` on the upper-left edge, `u = 0` on the right edge, no flux elsewhere.
    pub fn model_problem() -> Self {
        Self::dirichlet(1.0, 0.0)
    }

    pub fn dirichlet(left: f64, right: f64) -> Self {
        let dirichlet_values = BTreeMap::from([(BoundaryTag::DirichletLeft, left), (BoundaryTag::DirichletRight, right)]);
        Self { dirichlet_values, neumann_flux: 0.0 }
    }

    /// Same value on every Dirichlet tag.
    pub fn uniform(value: f64) -> Self {
        Self::dirichlet(value, value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LinearSolver {
    /// Banded LU up to `direct_limit` unknowns, BiCGSTAB above.
    Auto { direct_limit: usize },
    Direct,
    Iterative,
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Auto { direct_limit: 20_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub linear_solver: LinearSolver,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50, linear_solver: LinearSolver::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub newton_iterations: usize,
    pub final_residual_norm: f64,
    /// Residual norm before the first step and after every accepted step.
    pub residual_history: Vec<f64>,
}

const MAX_HALVINGS: usize = 30;

/// Mesh-dependent data shared by all solves on one mesh.
#[derive(Clone, Debug)]
pub struct FemSystem {
    mesh: Mesh,
    stiffness: Vec<[[f64; 3]; 3]>,
    slots: Vec<[[usize; 3]; 3]>,
    pattern: CsrMatrix,
    ordering: BandOrdering,
    dirichlet: Vec<Option<BoundaryTag>>,
    neumann_weight: Vec<f64>,
}

impl FemSystem {
    pub fn new(mesh: Mesh) -> Self {
        let pattern = CsrMatrix::from_triangles(mesh.num_nodes(), mesh.triangles());
        let ordering = BandOrdering::new(&pattern);
        let mut stiffness = Vec::with_capacity(mesh.num_triangles());
        let mut slots = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let p = tri.map(|n| mesh.nodes()[n]);
            let area = mesh.triangle_area(t);
            let b: [f64; 3] = std::array::from_fn(|k| p[(k + 1) % 3][1] - p[(k + 2) % 3][1]);
            let c: [f64; 3] = std::array::from_fn(|k| p[(k + 2) % 3][0] - p[(k + 1) % 3][0]);
            stiffness.push(std::array::from_fn(|k| std::array::from_fn(|l| (b[k] * b[l] + c[k] * c[l]) / (4.0 * area))));
            slots.push(std::array::from_fn(|k| std::array::from_fn(|l| pattern.slot(tri[k], tri[l]))));
        }
        let mut neumann_weight = vec![0.0; mesh.num_nodes()];
        for e in mesh.boundary().iter().filter(|e| e.tag == BoundaryTag::Neumann) {
            let (a, b) = (mesh.nodes()[e.nodes[0]], mesh.nodes()[e.nodes[1]]);
            let len = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
            neumann_weight[e.nodes[0]] += 0.5 * len;
            neumann_weight[e.nodes[1]] += 0.5 * len;
        }
        let dirichlet = mesh.dirichlet_tags();
        Self { mesh, stiffness, slots, pattern, ordering, dirichlet, neumann_weight }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    /// Half-bandwidth of the reordered system matrix.
    pub fn bandwidth(&self) -> usize {
        self.ordering.bandwidth()
    }

    /// Newton solve; see [`solve_deterministic`].
    pub fn solve<C, S>(
        &self,
        coefficient: &C,
        bc: &BoundaryConditions,
        source: S,
        gamma: f64,
        opts: &NewtonOptions,
    ) -> Result<SolveReport, SolveError>
    where
        C: Coefficient + ?Sized,
        S: Fn(Point) -> f64,
    {
        let mesh = &self.mesh;
        for tag in mesh.boundary_tags_present().into_iter().filter(|t| t.is_dirichlet()) {
            if !bc.dirichlet_values.contains_key(&tag) {
                return Err(SolveError::MissingDirichletValue(tag));
            }
        }

        let nt = mesh.num_triangles();
        let mut base = Vec::with_capacity(nt);
        let mut load = vec![0.0; mesh.num_nodes()];
        for t in 0..nt {
            let c = mesh.centroid(t);
            base.push(coefficient.base(c, mesh.subdomains()[t]));
            let f = source(c) * mesh.triangle_area(t) / 3.0;
            for &n in &mesh.triangles()[t] {
                load[n] += f;
            }
        }
        for (l, w) in load.iter_mut().zip(&self.neumann_weight) {
            *l += bc.neumann_flux * w;
        }

        let mut u: Vec<f64> = self.dirichlet.iter().map(|d| d.map_or(0.0, |tag| bc.dirichlet_values[&tag])).collect();
        let mut r = self.residual(&u, &base, &load, gamma)?;
        let mut rn = norm(&r);
        let mut history = vec![rn];
        let mut iterations = 0;
        let mut jac = self.pattern.clone();

        while rn > opts.tol {
            if iterations == opts.max_iter {
                return Err(SolveError::NonConvergence { iterations, residual: rn });
            }
            self.jacobian(&u, &base, gamma, true, &mut jac);
            let rhs: Vec<f64> = r.iter().map(|v| -v).collect();
            let delta = self.linear_solve(&jac, &rhs, opts)?;

            let mut step = 1.0;
            let mut halvings = 0;
            let newton = loop {
                let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + step * d).collect();
                if let Ok(rt) = self.residual(&trial, &base, &load, gamma) {
                    let rtn = norm(&rt);
                    if rtn < rn {
                        break Some((trial, rt, rtn));
                    }
                }
                if halvings == MAX_HALVINGS {
                    break None;
                }
                step *= 0.5;
                halvings += 1;
            };
            let (u_new, r_new, rn_new) = match newton {
                Some(v) => v,
                None => {
                    // far from the solution: one fixed-point step with the
                    // coefficient frozen at the current iterate
                    self.jacobian(&u, &base, gamma, false, &mut jac);
                    let delta = self.linear_solve(&jac, &rhs, opts)?;
                    let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + d).collect();
                    let rt = self.residual(&trial, &base, &load, gamma)?;
                    let rtn = norm(&rt);
                    (trial, rt, rtn)
                }
            };
            u = u_new;
            r = r_new;
            rn = rn_new;
            history.push(rn);
            iterations += 1;
        }

        Ok(SolveReport { solution: u, newton_iterations: iterations, final_residual_norm: rn, residual_history: history })
    }

    fn frozen_coefficient(&self, t: usize, u: &[f64], base: &[f64], gamma: f64) -> Result<(f64, f64), SolveError> {
        let tri = self.mesh.triangles()[t];
        let uc = (u[tri[0]] + u[tri[1]] + u[tri[2]]) / 3.0;
        let a = base[t] + gamma * uc * uc;
        if !(a > 0.0) {
            return Err(SolveError::SingularSystem(format!("non-positive coefficient {a:e} in triangle {t}")));
        }
        Ok((a, uc))
    }

    fn residual(&self, u: &[f64], base: &[f64], load: &[f64], gamma: f64) -> Result<Vec<f64>, SolveError> {
        let mut r: Vec<f64> = load.iter().map(|l| -l).collect();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let (a, _) = self.frozen_coefficient(t, u, base, gamma)?;
            let k = &self.stiffness[t];
            for i in 0..3 {
                r[tri[i]] += a * (0..3).map(|j| k[i][j] * u[tri[j]]).sum::<f64>();
            }
        }
        for (ri, d) in r.iter_mut().zip(&self.dirichlet) {
            if d.is_some() {
                *ri = 0.0;
            }
        }
        Ok(r)
    }

    /// Newton Jacobian, or the frozen-coefficient matrix when `newton` is false.
    fn jacobian(&self, u: &[f64], base: &[f64], gamma: f64, newton: bool, jac: &mut CsrMatrix) {
        jac.clear();
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            // Positivity was checked by the preceding residual evaluation.
            let (a, uc) = self.frozen_coefficient(t, u, base, gamma).expect("coefficient checked in residual");
            let k = &self.stiffness[t];
            let slots = &self.slots[t];
            let da = if newton { 2.0 * gamma * uc / 3.0 } else { 0.0 };
            for i in 0..3 {
                let ku: f64 = (0..3).map(|j| k[i][j] * u[tri[j]]).sum();
                for j in 0..3 {
                    jac.add(slots[i][j], a * k[i][j] + da * ku);
                }
            }
        }
        for (i, d) in self.dirichlet.iter().enumerate() {
            if d.is_some() {
                jac.set_identity_row(i);
            }
        }
    }

    fn linear_solve(&self, jac: &CsrMatrix, rhs: &[f64], opts: &NewtonOptions) -> Result<Vec<f64>, SolveError> {
        let direct = match opts.linear_solver {
            LinearSolver::Direct => true,
            LinearSolver::Iterative => false,
            LinearSolver::Auto { direct_limit } => jac.dim() <= direct_limit,
        };
        if direct {
            let lu = BandLu::factor(jac, &self.ordering)
                .map_err(|_| SolveError::SingularSystem("zero pivot in banded LU".into()))?;
            Ok(lu.solve(rhs))
        } else {
            let tol = (opts.tol * 1e-3).max(1e-14);
            bicgstab(jac, rhs, tol, 20 * jac.dim().max(100))
                .map_err(|f| SolveError::SingularSystem(format!("BiCGSTAB stalled at relative residual {:e}", f.residual)))
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// One-shot solve of the nonlinear diffusion problem on `mesh`.
///
/// Builds a [`FemSystem`]; reuse one directly when solving many times on
/// the same mesh.
pub fn solve_deterministic<C, S>(
    mesh: &Mesh,
    coefficient: &C,
    bc: &BoundaryConditions,
    source: S,
    gamma: f64,
    opts: &NewtonOptions,
) -> Result<SolveReport, SolveError>
where
    C: Coefficient + ?Sized,
    S: Fn(Point) -> f64,
{
    FemSystem::new(mesh.clone()).solve(coefficient, bc, source, gamma, opts)
}

/// L2 norm of `u_h - exact`, integrated with the edge-midpoint rule.
pub fn l2_error<F: Fn(Point) -> f64>(mesh: &Mesh, u: &[f64], exact: F) -> f64 {
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(t);
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let (pa, pb) = (mesh.nodes()[a], mesh.nodes()[b]);
            let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
            let uh = (u[a] + u[b]) / 2.0;
            sum += area / 3.0 * (uh - exact(mid)).powi(2);
        }
    }
    sum.sqrt()
}
