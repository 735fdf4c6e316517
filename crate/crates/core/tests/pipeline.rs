use std::process::Command;

use rbf_uq::collocation::{build_sparse_grid, Rule};
use rbf_uq::doe::star_doe;
use rbf_uq::model::{ModelProblem, Simulator};
use rbf_uq::pipeline::{run_accelerated_pipeline, run_collocation_baseline, PipelineConfig};
use rbf_uq::screening::Reduction;

const SMALL: &str = "[mesh]\nh = 0.2\n[problem]\ndistribution = \"normal\"\n[screening]\ntop_k = 3\n[evaluation]\nsamples = 300\n";

fn cfg(extra: &[(&str, &str)]) -> PipelineConfig {
    let env = extra.iter().map(|(k, v)| (k.to_string(), v.to_string()));
    PipelineConfig::from_toml_with_env(SMALL, env).unwrap()
}

#[test]
fn runs_are_deterministic() {
    let a = run_accelerated_pipeline(&cfg(&[]), None).unwrap();
    let b = run_accelerated_pipeline(&cfg(&[]), None).unwrap();
    assert_eq!(a.statistics.quantiles, b.statistics.quantiles);
    assert_eq!(a.statistics.mean, b.statistics.mean);
    assert_eq!(a.report.retained_parameters, b.report.retained_parameters);
}

#[test]
fn env_override_changes_the_run() {
    let base = cfg(&[]);
    let over = cfg(&[("RBFUQ_SCREENING__TOP_K", "5"), ("RBFUQ_EVALUATION__QUANTILES", "[0.25, 0.75]"), ("OTHER_VAR", "x")]);
    assert_eq!(base.screening.top_k, Some(3));
    assert_eq!(over.screening.top_k, Some(5));
    let run = run_accelerated_pipeline(&over, None).unwrap();
    assert_eq!(run.report.retained_parameters.len(), 5);
    assert_eq!(run.statistics.qs, vec![0.25, 0.75]);
}

#[test]
fn saved_model_is_reused_without_solves() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_accelerated_pipeline(&cfg(&[]), Some(dir.path())).unwrap();
    assert!(first.report.total_solves > 0);
    let mut again = cfg(&[]);
    again.evaluation.model_dir = Some(dir.path().join("model"));
    let second = run_accelerated_pipeline(&again, None).unwrap();
    assert_eq!(second.report.total_solves, 0);
    assert_eq!(second.simulator.solve_count(), 0);
    for (x, y) in first.statistics.mean.iter().zip(&second.statistics.mean) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn clenshaw_curtis_level2_reuses_level1_snapshots() {
    let problem = ModelProblem::uniform_inputs(1.0, 0.25);
    let sim = Simulator::new(&problem).unwrap();
    let red = Reduction { retained: vec![0, 1, 13], frozen_value: 0.0, full_dim: 18 };
    let dist = problem.distribution().select(&red.retained);
    let g1 = build_sparse_grid(3, 1, Rule::ClenshawCurtis, &dist).unwrap();
    let g2 = build_sparse_grid(3, 2, Rule::ClenshawCurtis, &dist).unwrap();
    sim.run_design(g1.points(), g1.scales(), &red).unwrap();
    assert_eq!(sim.solve_count(), 7);
    sim.run_design(g2.points(), g2.scales(), &red).unwrap();
    assert_eq!(sim.solve_count(), 25);
    // the level-1 grid is the reduced star design
    let star = star_doe(3);
    assert!(star.iter().all(|p| g1.points().contains(p)));
}

#[test]
fn collocation_report_counts_reuse() {
    let c = cfg(&[("RBFUQ_BASELINE__LEVELS", "[1, 2]"), ("RBFUQ_PROBLEM__DISTRIBUTION", "\"uniform\"")]);
    let run = run_collocation_baseline(&c, None).unwrap();
    // 37 screening solves cover the level-1 grid entirely
    let l1 = run.report.stages.iter().find(|s| s.name == "collocation_level1").unwrap();
    assert_eq!((l1.design_points, l1.solves), (7, 0));
    let l2 = run.report.stages.iter().find(|s| s.name == "collocation_level2").unwrap();
    assert_eq!((l2.design_points, l2.solves), (25, 18));
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rbf-uq"))
}

#[test]
fn cli_exit_codes_are_stage_specific() {
    let dir = tempfile::tempdir().unwrap();
    let ok = cli().args(["mesh-info", "--out"]).arg(dir.path()).env("RBFUQ_MESH__H", "0.5").output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("\"nodes\""));

    let bad_cfg = cli().arg("mesh-info").env("RBFUQ_MESH__H", "-1").output().unwrap();
    assert_eq!(bad_cfg.status.code(), Some(2));

    let missing = cli().args(["compare", "no-such-a.csv", "no-such-b.csv", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(missing.status.code(), Some(10));
}

#[test]
fn cli_meta_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let meta = dir.path().join("meta");
    let colloc = dir.path().join("colloc");
    let env = [("RBFUQ_MESH__H", "0.25"), ("RBFUQ_SCREENING__TOP_K", "3"), ("RBFUQ_EVALUATION__SAMPLES", "200")];
    let run = |args: &[&str], out: &std::path::Path| {
        let mut c = cli();
        c.args(args).arg("--out").arg(out).args(["--workers", "2", "--seed", "1"]);
        for (k, v) in env {
            c.env(k, v);
        }
        c.output().unwrap()
    };
    assert!(run(&["run-meta"], &meta).status.success());
    assert!(run(&["run-colloc"], &colloc).status.success());
    let cmp = run(&["compare", meta.join("quantiles.csv").to_str().unwrap(), colloc.join("quantiles_level2.csv").to_str().unwrap()], &dir.path().join("cmp"));
    assert!(cmp.status.success(), "{}", String::from_utf8_lossy(&cmp.stderr));
    assert!(String::from_utf8_lossy(&cmp.stdout).contains("q0.68"));
    assert!(dir.path().join("cmp/compare.json").exists());
}
