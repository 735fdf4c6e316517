use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};
use rbf_uq::pipeline::{self, PipelineConfig, PipelineError, Stage};

#[derive(Parser)]
#[command(name = "rbf-uq", version, about = "RBF + truncated-SVD metamodels for a nonlinear stochastic diffusion problem")]
struct Cli {
    /// TOML configuration file; `RBFUQ_<SECTION>__<KEY>` variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for design solves and sampling (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Offset added to the Halton skip, to draw a different sample stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screening, RBF + SVD metamodel and quantile fields.
    RunMeta {
        /// Evaluate a saved metamodel bundle instead of building one.
        #[arg(long)]
        reuse_model: Option<PathBuf>,
    },
    /// Sparse-grid collocation baseline.
    RunColloc,
    /// Pointwise differences between two statistics CSV files (second is the reference).
    Compare {
        test: PathBuf,
        reference: PathBuf,
        /// Relative-error mask as a fraction of max |reference|.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Sensitivity screening only.
    Screen,
    /// Build the mesh and print its statistics.
    MeshInfo,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref()).map_err(|e| PipelineError::new(Stage::Config, e))?;
    if let Some(seed) = cli.seed {
        cfg.evaluation.skip += seed as usize;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| PipelineError::new(Stage::Config, e))?;
    }
    let out = |name: &str| cli.out.clone().unwrap_or_else(|| pipeline::default_out_dir(name));
    match &cli.command {
        Command::RunMeta { reuse_model } => {
            let mut cfg = load_config(&cli)?;
            if reuse_model.is_some() {
                cfg.evaluation.model_dir = reuse_model.clone();
            }
            let dir = out("meta");
            let run = pipeline::run_accelerated_pipeline(&cfg, Some(&dir))?;
            let r = &run.report;
            info!(
                "retained parameters {:?}, svd rank {:?}, {} PDE solves",
                r.retained_parameters, r.svd_rank, r.total_solves
            );
            if let Some(c) = r.rbf_condition.filter(|c| *c > rbf_uq::metamodel::CONDITION_WARNING) {
                warn!("RBF interpolation matrix is ill-conditioned (cond1 = {c:.3e})");
            }
            println!("{}", dir.join("report.json").display());
        }
        Command::RunColloc => {
            let cfg = load_config(&cli)?;
            let dir = out("colloc");
            let run = pipeline::run_collocation_baseline(&cfg, Some(&dir))?;
            info!("grid sizes {:?}, {} PDE solves", run.report.grid_points, run.report.total_solves);
            println!("{}", dir.join("report.json").display());
        }
        Command::Compare { test, reference, floor } => {
            let dir = out("compare");
            let res = pipeline::compare(test, reference, Some(&dir), *floor)?;
            for c in &res {
                let s = &c.summary;
                println!(
                    "{:<10} max_abs {:.4e}  mean_abs {:.4e}  max_rel {:.4e}  mean_rel {:.4e}  compared {}",
                    c.column, s.max_abs, s.mean_abs, s.max_rel, s.mean_rel, s.compared_nodes
                );
            }
        }
        Command::Screen => {
            let cfg = load_config(&cli)?;
            let dir = out("screen");
            let (report, scr) = pipeline::run_screen(&cfg, Some(&dir))?;
            println!("ranking (1-based): {:?}", report.ranking);
            println!("retained: {:?}", report.retained_parameters);
            if let Some(lin) = &scr.linearity {
                println!("alpha_max {:.4e}  D {:.4e}  linear {}", lin.alpha_max, lin.d, lin.is_linear());
            }
        }
        Command::MeshInfo => {
            let cfg = load_config(&cli)?;
            let info = pipeline::mesh_info(&cfg, cli.out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&info).map_err(|e| PipelineError::new(Stage::Io, e))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.stage.exit_code() as u8)
        }
    }
}
