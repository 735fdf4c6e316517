//! Sparse-grid collocation at levels 1 and 2 on the screened parameters,
//! with nested-point reuse and cubature moments.

use rbf_uq::pipeline::{run_collocation_baseline, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = PipelineConfig::from_toml_with_env(
        "[problem]\ngamma = 1.0\n[screening]\ntop_k = 3\n[baseline]\nlevels = [1, 2]\n[evaluation]\nsamples = 1000\n",
        std::env::vars(),
    )?;
    let run = run_collocation_baseline(&cfg, None)?;
    println!("rule {:?}, retained {:?}", cfg.rule(), run.report.retained_parameters);
    for st in &run.report.stages {
        println!("  {:<32} points {:>3}  solves {:>3}  reused {:>3}", st.name, st.design_points, st.solves, st.reused);
    }
    for lvl in &run.levels {
        let mean = &lvl.cubature_mean;
        let var = &lvl.cubature_variance;
        let node = mean.len() / 2;
        println!(
            "level {}: {} points, node {node}: mean {:.5}, std {:.3e}, median {:.5}",
            lvl.level,
            lvl.solution.grid.len(),
            mean[node],
            var[node].sqrt(),
            lvl.statistics.quantile(0.5).unwrap()[node]
        );
    }
    Ok(())
}
