use std::process::Command;

use hapnet::config::{Baseline, Config, SweepVariable};
use hapnet::harness::{
    read_results_csv, run_pipeline, summarize, sweep, write_results_csv, ExperimentSpec, Metrics, SweepOptions,
};

fn small() -> Config {
    let mut cfg = Config::default();
    cfg.counts.users = 60;
    cfg.placement.enabled = false;
    cfg
}

#[test]
fn no_users_gives_zero_metrics() {
    let mut cfg = small();
    cfg.counts.users = 0;
    let run = run_pipeline(&cfg, 1, None).unwrap();
    assert_eq!(run.metrics, Metrics::default());
}

#[test]
fn pipeline_is_deterministic() {
    let mut cfg = small();
    cfg.placement.enabled = true;
    let a = run_pipeline(&cfg, 9, None).unwrap();
    let b = run_pipeline(&cfg, 9, None).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.association, b.association);
    assert_eq!(a.power, b.power);
}

#[test]
fn summary_recomputes_from_results_file() {
    let mut cfg = small();
    cfg.experiment.seeds = vec![1, 2, 3];
    cfg.experiment.sweep_variable = SweepVariable::Users;
    cfg.experiment.sweep_values = vec![20.0, 40.0];
    let out = sweep(&ExperimentSpec::from_config(cfg), SweepOptions { workers: 2, keep_traces: false }).unwrap();
    assert!(out.all_ok());
    let mut buf = Vec::new();
    write_results_csv(&out.rows, &mut buf).unwrap();
    let rows = read_results_csv(buf.as_slice()).unwrap();
    let again = summarize(&rows);
    assert_eq!(again.len(), out.summary.len());
    for (a, b) in again.iter().zip(&out.summary) {
        assert_eq!((a.sweep_value, a.ok, a.failed), (b.sweep_value, b.ok, b.failed));
        for (x, y) in a.mean.iter().chain(&a.std).zip(b.mean.iter().chain(&b.std)) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0), "{x} vs {y}");
        }
    }
}

#[test]
fn random_association_does_not_beat_proposed() {
    for seed in 1..=5 {
        let cfg = small();
        let proposed = run_pipeline(&cfg, seed, None).unwrap().metrics;
        let mut rnd = cfg.clone();
        rnd.solver.baseline = Baseline::RandomAssociation;
        let random = run_pipeline(&rnd, seed, None).unwrap().metrics;
        assert!(proposed.sum_rate_bps >= random.sum_rate_bps, "seed {seed}");
    }
}

fn hapnet(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_hapnet")).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = |s: &str| dir.path().join(s).to_string_lossy().into_owned();

    assert_eq!(hapnet(&["default-config"]), 0);
    let ok = ["sweep", "--users", "10", "--seeds", "1-2", "--no-placement", "-o", &path("ok")];
    assert_eq!(hapnet(&ok), 0);

    // Five HAPs against a single back-haul slot: every row fails.
    let mut cfg = Config::default();
    cfg.counts.gateways = 0;
    cfg.backhaul.satellite_capacity = 1;
    std::fs::write(path("bad.toml"), cfg.to_toml_string()).unwrap();
    let rows = ["sweep", "-c", &path("bad.toml"), "--seeds", "1", "--no-placement", "-o", &path("rows")];
    assert_eq!(hapnet(&rows), 1);

    assert_eq!(hapnet(&["solve", "-c", &path("missing.toml"), "-o", &path("x")]), 2);
    let grid = ["sweep", "--variable", "hap-power", "--values=-1", "-o", &path("y")];
    assert_eq!(hapnet(&grid), 2);
}
