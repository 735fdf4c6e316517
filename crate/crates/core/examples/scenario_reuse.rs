//! Build a metamodel once, save it, then evaluate a new input
//! distribution from the saved bundle without any PDE solve.

use rbf_uq::pipeline::{run_accelerated_pipeline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("rbf_uq_scenario_reuse");
    let base = "[mesh]\nh = 0.1\n[problem]\ndistribution = \"normal\"\n[screening]\ntop_k = 4\n[evaluation]\nsamples = 1000\n";
    let cfg = PipelineConfig::from_toml_with_env(base, std::env::vars())?;
    let first = run_accelerated_pipeline(&cfg, Some(&dir))?;
    println!("build: {} PDE solves, rank {:?}", first.report.total_solves, first.report.svd_rank);

    let mut reuse = cfg.clone();
    reuse.evaluation.model_dir = Some(dir.join("model"));
    // same model, inputs now treated as uniform on [-sqrt 3, sqrt 3]
    reuse.evaluation.distribution = Some(rbf_uq::pipeline::DistributionKind::Uniform);
    let second = run_accelerated_pipeline(&reuse, None)?;
    println!("reuse: {} PDE solves", second.report.total_solves);

    let a = first.statistics.quantile(0.9).unwrap();
    let b = second.statistics.quantile(0.9).unwrap();
    let shift = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    println!("max change of the 0.9-quantile field between scenarios: {shift:.3e}");
    Ok(())
}
