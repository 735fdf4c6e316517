//! End-to-end runs: screening, the accelerated metamodel, the sparse-grid
//! baseline and field comparison, each writing CSV outputs and a JSON
//! run report.

pub mod config;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::collocation::{build_sparse_grid, collocation_quantiles, cubature_stats, CollocationSolution};
use crate::doe::{cross_doe, low_discrepancy_samples, star_doe, DesignMatrix, ParameterPoint};
use crate::mesh::{write_mesh, write_vtk, Mesh};
use crate::metamodel::{mean_nearest_neighbour_distance, AcceleratedMetamodel, RbfKernel};
use crate::model::Simulator;
use crate::random_field::DistributionSpec;
use crate::screening::{
    compute_jacobian_diaghessian, full_hessian_and_d, global_measures, reduce_parameters, LinearityReport, Reduction,
    SensitivityReport,
};
use crate::stats::{field_diff, DiffSummary, FieldStatistics, DEFAULT_FLOOR_FRACTION};

pub use config::{ConfigError, DistributionKind, PipelineConfig};

/// Pipeline stage, used for error reporting and process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Mesh,
    Solve,
    Screening,
    Metamodel,
    Evaluation,
    Collocation,
    Compare,
    Io,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        match self {
            Stage::Config => 2,
            Stage::Mesh => 3,
            Stage::Solve => 4,
            Stage::Screening => 5,
            Stage::Metamodel => 6,
            Stage::Evaluation => 7,
            Stage::Collocation => 8,
            Stage::Compare => 9,
            Stage::Io => 10,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, e: impl fmt::Display) -> Self {
        Self { stage, message: e.to_string() }
    }
}

trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: fmt::Display> StageExt<T> for Result<T, E> {
    fn stage(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageReport {
    pub name: String,
    pub seconds: f64,
    /// Design points the stage needed.
    pub design_points: usize,
    /// PDE solves actually run; the rest were reused from earlier stages.
    pub solves: usize,
    pub reused: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LinearitySummary {
    pub alpha_max: f64,
    pub d: f64,
    pub sigma: f64,
    pub linear: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: PipelineConfig,
    pub mesh_nodes: usize,
    pub mesh_triangles: usize,
    pub stages: Vec<StageReport>,
    pub total_solves: usize,
    /// 1-based parameter numbers kept after screening.
    pub retained_parameters: Vec<usize>,
    pub ranking: Vec<usize>,
    pub linearity: Option<LinearitySummary>,
    pub kernel: Option<RbfKernel>,
    pub rbf_condition: Option<f64>,
    pub svd_rank: Option<usize>,
    pub discarded_energy: Option<f64>,
    pub grid_points: Vec<usize>,
    pub evaluation_samples: usize,
    pub files: Vec<String>,
}

impl RunReport {
    fn new(command: &str, config: &PipelineConfig, mesh: &Mesh) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            mesh_nodes: mesh.num_nodes(),
            mesh_triangles: mesh.num_triangles(),
            stages: Vec::new(),
            total_solves: 0,
            retained_parameters: Vec::new(),
            ranking: Vec::new(),
            linearity: None,
            kernel: None,
            rbf_condition: None,
            svd_rank: None,
            discarded_energy: None,
            grid_points: Vec::new(),
            evaluation_samples: 0,
            files: Vec::new(),
        }
    }

    fn stage(&mut self, name: &str, start: Instant, design_points: usize, solves: usize) {
        self.stages.push(StageReport {
            name: name.into(),
            seconds: start.elapsed().as_secs_f64(),
            design_points,
            solves,
            reused: design_points.saturating_sub(solves),
        });
        self.total_solves += solves;
    }

    fn write(&mut self, out: &Path) -> Result<(), PipelineError> {
        self.files.push("report.json".into());
        let text = serde_json::to_string_pretty(self).stage(Stage::Io)?;
        fs::write(out.join("report.json"), text).stage(Stage::Io)
    }
}

/// Outcome of the screening stage.
#[derive(Clone, Debug)]
pub struct ScreeningOutcome {
    pub star: DesignMatrix,
    pub sensitivity: SensitivityReport,
    pub linearity: Option<LinearityReport>,
    pub reduction: Reduction,
}

/// Outcome of an accelerated-metamodel run.
#[derive(Debug)]
pub struct MetaOutcome {
    pub report: RunReport,
    pub model: AcceleratedMetamodel,
    pub statistics: FieldStatistics,
    pub screening: Option<ScreeningOutcome>,
    pub simulator: Simulator,
}

/// Outcome of a collocation run, one entry per level.
#[derive(Debug)]
pub struct CollocationOutcome {
    pub report: RunReport,
    pub levels: Vec<CollocationLevel>,
    pub screening: Option<ScreeningOutcome>,
    pub simulator: Simulator,
}

#[derive(Debug)]
pub struct CollocationLevel {
    pub level: usize,
    pub solution: CollocationSolution,
    pub cubature_mean: Vec<f64>,
    pub cubature_variance: Vec<f64>,
    pub statistics: FieldStatistics,
}

fn prepare(config: &PipelineConfig, out: Option<&Path>) -> Result<Simulator, PipelineError> {
    if let Some(out) = out {
        fs::create_dir_all(out).stage(Stage::Io)?;
        fs::write(out.join("config.toml"), config.to_toml()).stage(Stage::Io)?;
    }
    Simulator::new(&config.problem()).stage(Stage::Mesh)
}

/// Full star design, screening measures, optional full Hessian and the
/// reduction chosen by the configured policy.
pub fn run_screening_stage(sim: &Simulator, config: &PipelineConfig, report: &mut RunReport) -> Result<ScreeningOutcome, PipelineError> {
    let dim = sim.dim();
    let dist = config.problem().distribution();
    let full = Reduction::identity(dim);
    let start = Instant::now();
    let before = sim.solve_count();
    let points = star_doe(dim);
    let star = sim.run_design(&points, &dist.design_scales(), &full).stage(Stage::Solve)?;
    report.stage("star_design", start, points.len(), sim.solve_count() - before);

    let start = Instant::now();
    let steps = vec![1.0; dim];
    let (jac, hess) = compute_jacobian_diaghessian(&star, &steps).stage(Stage::Screening)?;
    let sensitivity = global_measures(jac, hess, config.screening.c).stage(Stage::Screening)?;
    let reduction = match config.reduction_policy() {
        Some(policy) => reduce_parameters(&sensitivity, policy).stage(Stage::Screening)?,
        None => full.clone(),
    };
    report.stage("screening", start, 0, 0);
    report.ranking = sensitivity.ranking.iter().map(|j| j + 1).collect();
    report.retained_parameters = reduction.retained.iter().map(|j| j + 1).collect();

    let linearity = if config.screening.full_hessian && dim >= 2 {
        let start = Instant::now();
        let before = sim.solve_count();
        let cross_points = cross_doe(dim);
        let cross = sim.run_design(&cross_points, &dist.design_scales(), &full).stage(Stage::Solve)?;
        report.stage("cross_design", start, cross_points.len(), sim.solve_count() - before);
        let lin = full_hessian_and_d(&star, &cross, &steps, config.screening_sigma()).stage(Stage::Screening)?;
        report.linearity = Some(LinearitySummary { alpha_max: lin.alpha_max, d: lin.d, sigma: lin.sigma, linear: lin.is_linear() });
        Some(lin)
    } else {
        None
    };
    Ok(ScreeningOutcome { star, sensitivity, linearity, reduction })
}

/// Halton samples under `dist` over the retained coordinates, embedded in
/// the full space with dropped parameters at their mean. Shared by the
/// metamodel and collocation runs so both see identical samples.
pub fn evaluation_samples(dist: &DistributionSpec, reduction: &Reduction, count: usize, skip: usize) -> Result<Vec<Vec<f64>>, PipelineError> {
    let reduced = dist.select(&reduction.retained);
    let pts = low_discrepancy_samples(count, &reduced, skip).stage(Stage::Evaluation)?;
    Ok(pts.iter().map(|p| reduction.expand(p.coords())).collect())
}

fn scenario_distribution(config: &PipelineConfig) -> DistributionSpec {
    DistributionSpec::iid(config.evaluation_distribution().marginal(), config.dim())
}

fn write_screening(out: &Path, s: &ScreeningOutcome, report: &mut RunReport) -> Result<(), PipelineError> {
    s.sensitivity.write_csv(BufWriter::new(File::create(out.join("screening.csv")).stage(Stage::Io)?)).stage(Stage::Io)?;
    report.files.push("screening.csv".into());
    s.star.write_bundle(&out.join("star")).stage(Stage::Io)?;
    report.files.push("star/".into());
    Ok(())
}

/// Nodal statistics as `node_id,x,y,mean,variance,q<q>...`.
pub fn write_statistics_csv(path: &Path, mesh: &Mesh, mean: &[f64], variance: &[f64], stats: &FieldStatistics) -> Result<(), PipelineError> {
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(path).stage(Stage::Io)?));
    let mut header = vec!["node_id".to_string(), "x".into(), "y".into(), "mean".into(), "variance".into()];
    header.extend(stats.qs.iter().map(|q| format!("q{q}")));
    wtr.write_record(&header).stage(Stage::Io)?;
    for (i, p) in mesh.nodes().iter().enumerate() {
        let mut rec = vec![i.to_string(), format!("{:e}", p[0]), format!("{:e}", p[1]), format!("{:e}", mean[i]), format!("{:e}", variance[i])];
        rec.extend(stats.quantiles.iter().map(|q| format!("{:e}", q[i])));
        wtr.write_record(&rec).stage(Stage::Io)?;
    }
    wtr.flush().stage(Stage::Io)
}

fn write_vtk_file(path: &Path, mesh: &Mesh, mean: &[f64], variance: &[f64], stats: &FieldStatistics) -> Result<(), PipelineError> {
    let names: Vec<String> = stats.qs.iter().map(|q| format!("q{q}")).collect();
    let mut fields: Vec<(&str, &[f64])> = vec![("mean", mean), ("variance", variance)];
    for (n, q) in names.iter().zip(&stats.quantiles) {
        fields.push((n.as_str(), q.as_slice()));
    }
    write_vtk(mesh, &fields, BufWriter::new(File::create(path).stage(Stage::Io)?)).stage(Stage::Io)
}

/// Star design over all parameters, screening, reduced star design,
/// RBF + truncated SVD metamodel, then P^2 quantile fields from Halton
/// samples. With `evaluation.model_dir` set, a saved metamodel is
/// evaluated instead and nothing is solved.
pub fn run_accelerated_pipeline(config: &PipelineConfig, out: Option<&Path>) -> Result<MetaOutcome, PipelineError> {
    let sim = prepare(config, out)?;
    let mut report = RunReport::new("run-meta", config, sim.mesh());

    let (model, screening) = match &config.evaluation.model_dir {
        Some(dir) => {
            let start = Instant::now();
            let model = AcceleratedMetamodel::load(dir).stage(Stage::Metamodel)?;
            if model.reduction.full_dim != sim.dim() || model.spatial_size() != sim.mesh().num_nodes() {
                return Err(PipelineError::new(Stage::Metamodel, "saved metamodel does not match the configured problem and mesh"));
            }
            report.stage("load_metamodel", start, 0, 0);
            report.retained_parameters = model.reduction.retained.iter().map(|j| j + 1).collect();
            (model, None)
        }
        None => {
            let scr = run_screening_stage(&sim, config, &mut report)?;
            let reduction = scr.reduction.clone();
            let scales = config.problem().distribution().select(&reduction.retained).design_scales();

            let start = Instant::now();
            let before = sim.solve_count();
            let points = star_doe(reduction.reduced_dim());
            let design = sim.run_design(&points, &scales, &reduction).stage(Stage::Solve)?;
            report.stage("reduced_star_design", start, points.len(), sim.solve_count() - before);

            let start = Instant::now();
            let kernel = config.kernel(mean_nearest_neighbour_distance(&design.points));
            let model = AcceleratedMetamodel::build(&design, kernel, config.metamodel.detrend, config.svd_threshold(), scales, reduction)
                .stage(Stage::Metamodel)?;
            report.stage("metamodel", start, 0, 0);
            (model, Some(scr))
        }
    };
    report.kernel = Some(model.rbf.kernel());
    report.rbf_condition = Some(model.rbf.condition());
    report.svd_rank = Some(model.svd.rank());
    report.discarded_energy = Some(model.svd.discarded_energy);

    let start = Instant::now();
    let samples = evaluation_samples(&scenario_distribution(config), &model.reduction, config.evaluation.samples, config.evaluation.skip)?;
    let points: Vec<ParameterPoint> = samples.into_iter().map(ParameterPoint).collect();
    let statistics = crate::stats::field_quantiles(|y: &ParameterPoint| model.evaluate_physical_full(y.coords()), &points, &config.evaluation.quantiles)
        .stage(Stage::Evaluation)?;
    report.stage("evaluation", start, 0, 0);
    report.evaluation_samples = points.len();

    if let Some(out) = out {
        if let Some(scr) = &screening {
            write_screening(out, scr, &mut report)?;
        }
        if config.evaluation.model_dir.is_none() {
            model.save(&out.join("model")).stage(Stage::Io)?;
            report.files.push("model/".into());
        }
        write_mesh(sim.mesh(), BufWriter::new(File::create(out.join("mesh.txt")).stage(Stage::Io)?)).stage(Stage::Io)?;
        report.files.push("mesh.txt".into());
        write_statistics_csv(&out.join("quantiles.csv"), sim.mesh(), &statistics.mean, &statistics.variance, &statistics)?;
        report.files.push("quantiles.csv".into());
        if config.evaluation.vtk {
            write_vtk_file(&out.join("quantiles.vtk"), sim.mesh(), &statistics.mean, &statistics.variance, &statistics)?;
            report.files.push("quantiles.vtk".into());
        }
        report.write(out)?;
    }
    Ok(MetaOutcome { report, model, statistics, screening, simulator: sim })
}

/// Sparse-grid collocation at every configured level, optionally on the
/// screened parameters, with cubature moments and P^2 quantiles from the
/// same Halton stream as the metamodel run.
pub fn run_collocation_baseline(config: &PipelineConfig, out: Option<&Path>) -> Result<CollocationOutcome, PipelineError> {
    let sim = prepare(config, out)?;
    let mut report = RunReport::new("run-colloc", config, sim.mesh());
    let dist = config.problem().distribution();

    let screening = if config.baseline.reduced && config.reduction_policy().is_some() {
        Some(run_screening_stage(&sim, config, &mut report)?)
    } else {
        None
    };
    let reduction = screening.as_ref().map_or_else(|| Reduction::identity(sim.dim()), |s| s.reduction.clone());
    report.retained_parameters = reduction.retained.iter().map(|j| j + 1).collect();
    let reduced_dist = dist.select(&reduction.retained);

    let samples: Vec<ParameterPoint> =
        evaluation_samples(&scenario_distribution(config), &reduction, config.evaluation.samples, config.evaluation.skip)?
            .into_iter()
            .map(|y| ParameterPoint(reduction.restrict(&y)))
            .collect();
    report.evaluation_samples = samples.len();

    let mut levels = Vec::new();
    for &level in &config.baseline.levels {
        let start = Instant::now();
        let grid = build_sparse_grid(reduction.reduced_dim(), level, config.rule(), &reduced_dist).stage(Stage::Collocation)?;
        let before = sim.solve_count();
        let design = sim.run_design(grid.points(), grid.scales(), &reduction).stage(Stage::Solve)?;
        report.stage(&format!("collocation_level{level}"), start, grid.len(), sim.solve_count() - before);
        report.grid_points.push(grid.len());

        let start = Instant::now();
        let solution = CollocationSolution::new(grid, design.snapshots).stage(Stage::Collocation)?;
        let (cubature_mean, cubature_variance) = cubature_stats(&solution);
        let statistics = collocation_quantiles(&solution, &samples, &config.evaluation.quantiles).stage(Stage::Evaluation)?;
        report.stage(&format!("collocation_level{level}_statistics"), start, 0, 0);

        if let Some(out) = out {
            let name = format!("quantiles_level{level}.csv");
            write_statistics_csv(&out.join(&name), sim.mesh(), &cubature_mean, &cubature_variance, &statistics)?;
            report.files.push(name);
            let grid_name = format!("grid_level{level}.csv");
            solution.grid.write_csv(BufWriter::new(File::create(out.join(&grid_name)).stage(Stage::Io)?)).stage(Stage::Io)?;
            report.files.push(grid_name);
            if config.evaluation.vtk {
                let vtk = format!("quantiles_level{level}.vtk");
                write_vtk_file(&out.join(&vtk), sim.mesh(), &cubature_mean, &cubature_variance, &statistics)?;
                report.files.push(vtk);
            }
        }
        levels.push(CollocationLevel { level, solution, cubature_mean, cubature_variance, statistics });
    }
    if let Some(out) = out {
        if let Some(scr) = &screening {
            write_screening(out, scr, &mut report)?;
        }
        write_mesh(sim.mesh(), BufWriter::new(File::create(out.join("mesh.txt")).stage(Stage::Io)?)).stage(Stage::Io)?;
        report.files.push("mesh.txt".into());
        report.write(out)?;
    }
    Ok(CollocationOutcome { report, levels, screening, simulator: sim })
}

/// Screening only: star design, measures, optional full Hessian.
pub fn run_screen(config: &PipelineConfig, out: Option<&Path>) -> Result<(RunReport, ScreeningOutcome), PipelineError> {
    let sim = prepare(config, out)?;
    let mut report = RunReport::new("screen", config, sim.mesh());
    let scr = run_screening_stage(&sim, config, &mut report)?;
    if let Some(out) = out {
        write_screening(out, &scr, &mut report)?;
        if let Some(lin) = &scr.linearity {
            crate::doe::write_matrix_csv(&out.join("full_hessian.csv"), &lin.full_hessian_global, "p").stage(Stage::Io)?;
            report.files.push("full_hessian.csv".into());
        }
        report.write(out)?;
    }
    Ok((report, scr))
}

/// One column of a statistics CSV read back for comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct StatisticsTable {
    pub points: Vec<[f64; 2]>,
    pub columns: Vec<(String, Vec<f64>)>,
}

pub fn read_statistics_csv(path: &Path) -> Result<StatisticsTable, PipelineError> {
    let file = File::open(path).map_err(|e| PipelineError::new(Stage::Io, format!("{}: {e}", path.display())))?;
    let mut rdr = csv::Reader::from_reader(BufReader::new(file));
    let header: Vec<String> = rdr.headers().stage(Stage::Io)?.iter().map(str::to_owned).collect();
    if header.len() < 4 || header[..3] != ["node_id", "x", "y"] {
        return Err(PipelineError::new(Stage::Io, format!("{}: not a nodal statistics file", path.display())));
    }
    let mut points = Vec::new();
    let mut columns: Vec<(String, Vec<f64>)> = header[3..].iter().map(|h| (h.clone(), Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec.stage(Stage::Io)?;
        let vals: Vec<f64> = rec.iter().map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().stage(Stage::Io)?;
        points.push([vals[1], vals[2]]);
        for (c, v) in columns.iter_mut().zip(&vals[3..]) {
            c.1.push(*v);
        }
    }
    Ok(StatisticsTable { points, columns })
}

#[derive(Clone, Debug, Serialize)]
pub struct ColumnComparison {
    pub column: String,
    pub summary: DiffSummary,
}

/// Pointwise differences of every statistic present in both files, with
/// `b` as the reference.
pub fn compare(a: &Path, b: &Path, out: Option<&Path>, floor_fraction: Option<f64>) -> Result<Vec<ColumnComparison>, PipelineError> {
    let ta = read_statistics_csv(a)?;
    let tb = read_statistics_csv(b)?;
    if ta.points.len() != tb.points.len() || ta.points.iter().zip(&tb.points).any(|(p, q)| (p[0] - q[0]).abs() > 1e-12 || (p[1] - q[1]).abs() > 1e-12) {
        return Err(PipelineError::new(Stage::Compare, "mesh mismatch: node coordinates differ"));
    }
    let floor = floor_fraction.unwrap_or(DEFAULT_FLOOR_FRACTION);
    let mut result = Vec::new();
    let mut diff_cols: Vec<(String, Vec<f64>)> = Vec::new();
    for (name, va) in &ta.columns {
        let Some((_, vb)) = tb.columns.iter().find(|(n, _)| n == name) else { continue };
        let d = field_diff(va, vb, floor).stage(Stage::Compare)?;
        result.push(ColumnComparison { column: name.clone(), summary: d.summary() });
        diff_cols.push((format!("abs_{name}"), d.abs_diff));
        diff_cols.push((format!("rel_{name}"), d.rel_diff));
    }
    if result.is_empty() {
        return Err(PipelineError::new(Stage::Compare, "the two files share no statistic columns"));
    }
    if let Some(out) = out {
        fs::create_dir_all(out).stage(Stage::Io)?;
        let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(out.join("diff.csv")).stage(Stage::Io)?));
        let mut header = vec!["node_id".to_string(), "x".into(), "y".into()];
        header.extend(diff_cols.iter().map(|c| c.0.clone()));
        wtr.write_record(&header).stage(Stage::Io)?;
        for (i, p) in ta.points.iter().enumerate() {
            let mut rec = vec![i.to_string(), format!("{:e}", p[0]), format!("{:e}", p[1])];
            rec.extend(diff_cols.iter().map(|c| format!("{:e}", c.1[i])));
            wtr.write_record(&rec).stage(Stage::Io)?;
        }
        wtr.flush().stage(Stage::Io)?;
        #[derive(Serialize)]
        struct Summary<'a> {
            test: &'a Path,
            reference: &'a Path,
            floor_fraction: f64,
            columns: &'a [ColumnComparison],
        }
        let s = Summary { test: a, reference: b, floor_fraction: floor, columns: &result };
        fs::write(out.join("compare.json"), serde_json::to_string_pretty(&s).stage(Stage::Io)?).stage(Stage::Io)?;
    }
    Ok(result)
}

#[derive(Clone, Debug, Serialize)]
pub struct MeshInfo {
    pub h: f64,
    pub nodes: usize,
    pub triangles: usize,
    pub boundary_edges: usize,
    pub area: f64,
    pub bandwidth: usize,
    pub triangles_per_subdomain: [usize; 3],
}

pub fn mesh_info(config: &PipelineConfig, out: Option<&Path>) -> Result<MeshInfo, PipelineError> {
    let mesh = crate::mesh::build_lshape_mesh(config.mesh.h).stage(Stage::Mesh)?;
    let mut per = [0; 3];
    for s in mesh.subdomains() {
        per[s.index()] += 1;
    }
    let sys = crate::fem::FemSystem::new(mesh.clone());
    let info = MeshInfo {
        h: config.mesh.h,
        nodes: mesh.num_nodes(),
        triangles: mesh.num_triangles(),
        boundary_edges: mesh.boundary().len(),
        area: mesh.area(),
        bandwidth: sys.bandwidth(),
        triangles_per_subdomain: per,
    };
    if let Some(out) = out {
        fs::create_dir_all(out).stage(Stage::Io)?;
        write_mesh(&mesh, BufWriter::new(File::create(out.join("mesh.txt")).stage(Stage::Io)?)).stage(Stage::Io)?;
        fs::write(out.join("mesh_info.json"), serde_json::to_string_pretty(&info).stage(Stage::Io)?).stage(Stage::Io)?;
    }
    Ok(info)
}

/// `runs/<command>` under the working directory.
pub fn default_out_dir(command: &str) -> PathBuf {
    PathBuf::from("runs").join(command)
}
