use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hapnet::config::{Baseline, Config, SolverPath, SweepVariable, UtilityKind};
use hapnet::error::{Error, Result};
use hapnet::harness::{
    self, write_manifest, write_results_csv, write_summary_csv, ExperimentSpec, Manifest, SweepOptions,
};

#[derive(Parser)]
#[command(name = "hapnet", version, about = "Satellite-HAP-terrestrial downlink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a scenario (node positions and parameters) as JSON.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run the long-term HAP placement stage only.
    Place {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Solve one short-term instance (placement first when enabled).
    Solve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Run a parameter sweep over seeds.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverArgs,
        /// Seeds, e.g. `1,2,3` or `1-20`.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<String>>,
        #[arg(long, value_enum)]
        variable: Option<SweepVariable>,
        /// Grid values in config units (users, MHz, W).
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// Worker threads (default: available cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Also write placement and SCA traces per row.
        #[arg(long)]
        traces: bool,
    },
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Args)]
struct Common {
    /// Configuration file or run manifest (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short, default_value = "out")]
    out: PathBuf,
    /// Override the number of users.
    #[arg(long)]
    users: Option<usize>,
    /// Disable the placement stage.
    #[arg(long)]
    no_placement: bool,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum)]
    path: Option<SolverPath>,
    #[arg(long, value_enum)]
    utility: Option<UtilityKind>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::from_path(p)?,
            None => Config::default(),
        };
        if let Some(u) = self.users {
            cfg.counts.users = u;
        }
        if self.no_placement {
            cfg.placement.enabled = false;
        }
        fs::create_dir_all(&self.out)?;
        Ok(cfg)
    }
}

impl SolverArgs {
    fn apply(&self, cfg: &mut Config) {
        if let Some(p) = self.path {
            cfg.solver.path = p;
        }
        if let Some(u) = self.utility {
            cfg.solver.utility = u;
        }
        if let Some(b) = self.baseline {
            cfg.solver.baseline = b;
        }
    }
}

fn parse_seeds(items: &[String]) -> Result<Vec<u64>> {
    let bad = |s: &str| Error::InvalidArgument(format!("bad seed {s:?}"));
    let mut seeds = Vec::new();
    for item in items {
        match item.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad(item))?;
                let b: u64 = b.trim().parse().map_err(|_| bad(item))?;
                seeds.extend(a..=b);
            }
            None => seeds.push(item.trim().parse().map_err(|_| bad(item))?),
        }
    }
    Ok(seeds)
}

/// Writes `bytes` to `dir/name` and records its hash in the manifest.
fn emit(dir: &Path, name: &str, bytes: Vec<u8>, manifest: &mut Manifest) -> Result<()> {
    fs::write(dir.join(name), &bytes)?;
    manifest.add_output(name, &bytes);
    Ok(())
}

fn finish(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut buf = Vec::new();
    write_manifest(manifest, &mut buf)?;
    fs::write(dir.join("manifest.toml"), buf)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::DefaultConfig => {
            print!("{}", Config::default().to_toml_string());
            Ok(true)
        }
        Command::Generate { common, seed } => {
            let cfg = common.load()?;
            let scenario = cfg.scenario(seed)?;
            let mut m = Manifest::new(&format!("generate --seed {seed}"), &cfg);
            emit(&common.out, "scenario.json", serde_json::to_vec_pretty(&scenario)?, &mut m)?;
            finish(&common.out, &m)?;
            Ok(true)
        }
        Command::Place { common, seed } => {
            let cfg = common.load()?;
            let (scenario, trace) = harness::place(&cfg, seed)?;
            let mut m = Manifest::new(&format!("place --seed {seed}"), &cfg);
            let mut buf = Vec::new();
            trace.write_csv(&mut buf)?;
            emit(&common.out, "placement.csv", buf, &mut m)?;
            let mut buf = Vec::new();
            trace.write_evaluations_csv(&mut buf)?;
            emit(&common.out, "placement_candidates.csv", buf, &mut m)?;
            emit(&common.out, "scenario.json", serde_json::to_vec_pretty(&scenario)?, &mut m)?;
            finish(&common.out, &m)?;
            eprintln!(
                "placement: {} -> {} HAP users in {} iterations",
                trace.initial_objective,
                trace.final_objective(),
                trace.iterations.len()
            );
            Ok(true)
        }
        Command::Solve { common, solver, seed } => {
            let mut cfg = common.load()?;
            solver.apply(&mut cfg);
            let run = harness::run_pipeline(&cfg, seed, None)?;
            let mut m = Manifest::new(&format!("solve --seed {seed}"), &cfg);
            let mut buf = Vec::new();
            run.report.write_csv(&mut buf)?;
            emit(&common.out, "users.csv", buf, &mut m)?;
            let mut buf = Vec::new();
            run.report.write_summary(cfg.solver.utility, &mut buf)?;
            emit(&common.out, "summary.csv", buf, &mut m)?;
            let mut buf = Vec::new();
            run.association.write_csv(&mut buf)?;
            emit(&common.out, "association.csv", buf, &mut m)?;
            if let Some(sca) = &run.sca {
                let mut buf = Vec::new();
                sca.write_csv(&mut buf)?;
                emit(&common.out, "sca.csv", buf, &mut m)?;
            }
            if let Some(trace) = &run.placement {
                let mut buf = Vec::new();
                trace.write_csv(&mut buf)?;
                emit(&common.out, "placement.csv", buf, &mut m)?;
            }
            finish(&common.out, &m)?;
            eprintln!(
                "utility {:e}, mean rate {:e} bit/s, {} of {} users served",
                run.metrics.utility,
                run.metrics.mean_rate_bps,
                run.metrics.served,
                run.scenario.user_count()
            );
            Ok(true)
        }
        Command::Sweep { common, solver, seeds, variable, values, workers, traces } => {
            let mut cfg = common.load()?;
            solver.apply(&mut cfg);
            if let Some(s) = seeds {
                cfg.experiment.seeds = parse_seeds(&s)?;
            }
            if let Some(v) = variable {
                cfg.experiment.sweep_variable = v;
            }
            if let Some(v) = values {
                cfg.experiment.sweep_values = v;
            }
            let spec = ExperimentSpec::from_config(cfg.clone());
            let mut opts = SweepOptions { keep_traces: traces, ..SweepOptions::default() };
            if let Some(w) = workers {
                opts.workers = w;
            }
            let out = harness::sweep(&spec, opts)?;
            let mut m = Manifest::new("sweep", &cfg);
            let mut buf = Vec::new();
            write_results_csv(&out.rows, &mut buf)?;
            emit(&common.out, "results.csv", buf, &mut m)?;
            let mut buf = Vec::new();
            write_summary_csv(&out.summary, &mut buf)?;
            emit(&common.out, "summary.csv", buf, &mut m)?;
            if traces {
                let dir = common.out.join("traces");
                fs::create_dir_all(&dir)?;
                for (row, t) in out.rows.iter().zip(&out.traces) {
                    let stem = format!("v{}_s{}", row.sweep_value, row.seed);
                    if let Some(p) = &t.placement {
                        let mut buf = Vec::new();
                        p.write_csv(&mut buf)?;
                        emit(&dir, &format!("placement_{stem}.csv"), buf, &mut m)?;
                    }
                    if let Some(s) = &t.sca {
                        let mut buf = Vec::new();
                        s.write_csv(&mut buf)?;
                        emit(&dir, &format!("sca_{stem}.csv"), buf, &mut m)?;
                    }
                }
            }
            finish(&common.out, &m)?;
            for r in &out.rows {
                if let Err(e) = &r.outcome {
                    eprintln!("row value={} seed={} failed: {e}", r.sweep_value, r.seed);
                }
            }
            Ok(out.all_ok())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
