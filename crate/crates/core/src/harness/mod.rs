//! Experiment runner: placement, fading draw, association, power allocation
//! and evaluation for every sweep point and seed.

mod output;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

pub use output::{
    blob_hash, metric_columns, read_results_csv, summarize, write_manifest, write_results_csv, write_summary_csv, Manifest,
    SummaryRow, RESULTS_HEADER, SUMMARY_HEADER,
};

use crate::association::{random_association, solve_bh, solve_fh_fp, solve_fh_near_optimal, CenterEdgeSplit};
use crate::channel::ChannelRealization;
use crate::config::{Baseline, Config, SolverPath, SweepVariable, UtilityKind};
use crate::error::{Error, Result};
use crate::placement::{sr_optimize, SrConfig, SrTrace};
use crate::power::{mmu_power, msu_power, uniform_power, PowerConfig, ScaState};
use crate::rates::{evaluate, Association, PowerAllocation, RateReport};
use crate::rng::{stream, Stream};
use crate::scenario::{Position3D, Scenario, Tier};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: Config,
    pub seeds: Vec<u64>,
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl ExperimentSpec {
    pub fn from_config(config: Config) -> Self {
        Self {
            seeds: config.experiment.seeds.clone(),
            variable: config.experiment.sweep_variable,
            values: config.experiment.sweep_values.clone(),
            config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "must not be empty"));
        }
        if self.values.is_empty() {
            return Err(Error::config("experiment.sweep_values", "must not be empty"));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::config("experiment.seeds", "must be distinct"));
        }
        for (i, &v) in self.values.iter().enumerate() {
            self.point_config(v)
                .validate()
                .map_err(|e| Error::config(&format!("experiment.sweep_values[{i}]"), &e.to_string()))?;
        }
        Ok(())
    }

    /// Configuration at one grid value.
    pub fn point_config(&self, value: f64) -> Config {
        let mut cfg = self.config.clone();
        cfg.apply_sweep(self.variable, value);
        cfg
    }
}

/// Min, mean and max of a tier's served users.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TierStats {
    pub users: usize,
    pub mean_rate_bps: f64,
    pub max_rate_bps: f64,
    pub min_rate_bps: f64,
    pub max_power_w: f64,
    pub min_power_w: f64,
}

impl TierStats {
    fn from_report(report: &RateReport, tier: Tier) -> Self {
        let rates = report.tier_rates(tier);
        let powers = report.tier_powers(tier);
        if rates.is_empty() {
            return Self::default();
        }
        Self {
            users: rates.len(),
            mean_rate_bps: rates.iter().sum::<f64>() / rates.len() as f64,
            max_rate_bps: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_rate_bps: rates.iter().copied().fold(f64::INFINITY, f64::min),
            max_power_w: powers.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min_power_w: powers.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Metrics {
    pub utility: f64,
    pub sum_rate_bps: f64,
    pub mean_rate_bps: f64,
    pub min_rate_bps: f64,
    pub max_rate_bps: f64,
    pub served: usize,
    /// Users served by HAPs under average statistics after placement.
    pub placement_objective: usize,
    pub tiers: [TierStats; 3],
}

impl Metrics {
    fn from_report(report: &RateReport, kind: UtilityKind, placement_objective: usize) -> Result<Self> {
        let rates = &report.user_rates;
        if rates.is_empty() {
            return Ok(Self::default());
        }
        let sum: f64 = rates.iter().sum();
        Ok(Self {
            utility: report.utility(kind)?,
            sum_rate_bps: sum,
            mean_rate_bps: sum / rates.len() as f64,
            min_rate_bps: rates.iter().copied().fold(f64::INFINITY, f64::min),
            max_rate_bps: rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            served: report.serving.iter().filter(|s| s.is_some()).count(),
            placement_objective,
            tiers: Tier::ALL.map(|t| TierStats::from_report(report, t)),
        })
    }

    /// Values in [`output::metric_columns`] order.
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.utility,
            self.sum_rate_bps,
            self.mean_rate_bps,
            self.min_rate_bps,
            self.max_rate_bps,
            self.served as f64,
            self.placement_objective as f64,
        ];
        for t in &self.tiers {
            v.extend([
                t.users as f64,
                t.mean_rate_bps,
                t.max_rate_bps,
                t.min_rate_bps,
                t.max_power_w,
                t.min_power_w,
            ]);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub seed: u64,
    /// Metrics, or the error that stopped this row.
    pub outcome: std::result::Result<Metrics, String>,
}

/// Everything one pipeline run produced.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub scenario: Scenario,
    pub gains: ChannelRealization,
    pub association: Association,
    pub power: PowerAllocation,
    pub report: RateReport,
    pub metrics: Metrics,
    pub placement: Option<SrTrace>,
    pub sca: Option<ScaState>,
    /// Per-round utilities of the near-optimal association.
    pub association_rounds: Option<Vec<f64>>,
    pub r_min: Option<f64>,
}

/// Cached long-term stage outputs keyed by seed and placement inputs.
#[derive(Debug, Default)]
pub struct PlacementCache {
    entries: Mutex<BTreeMap<(u64, String), (Vec<Position3D>, SrTrace)>>,
}

impl PlacementCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Only the fields that change the placement result.
fn placement_key(cfg: &Config) -> String {
    let mut c = cfg.clone();
    c.experiment = Default::default();
    if !c.placement.full_power {
        c.solver = Default::default();
        c.backhaul = Default::default();
    }
    c.to_toml_string()
}

/// Long-term stage: places the HAPs of the seed's scenario on average gains.
pub fn place(cfg: &Config, seed: u64) -> Result<(Scenario, SrTrace)> {
    let scenario = cfg.scenario(seed)?;
    let sr = SrConfig::from_placement(&cfg.placement, PowerConfig::from_solver(&cfg.solver));
    sr_optimize(&scenario, &sr)
}

fn place_cached(cfg: &Config, seed: u64, cache: Option<&PlacementCache>) -> Result<(Scenario, SrTrace)> {
    let Some(cache) = cache else {
        return place(cfg, seed);
    };
    let key = (seed, placement_key(cfg));
    let hit = cache.entries.lock().expect("cache lock").get(&key).cloned();
    if let Some((haps, trace)) = hit {
        // Only HAP positions are reused; other parameters may differ.
        return Ok((cfg.scenario(seed)?.with_haps(haps), trace));
    }
    let (scenario, trace) = place(cfg, seed)?;
    cache
        .entries
        .lock()
        .expect("cache lock")
        .insert(key, (scenario.haps.clone(), trace.clone()));
    Ok((scenario, trace))
}

/// Short-term stage on a given (already placed) scenario.
pub fn solve_instance(cfg: &Config, scenario: &Scenario, placement_objective: usize) -> Result<PipelineRun> {
    let seed = scenario.seed;
    let gains = ChannelRealization::sample(scenario, &mut stream(seed, Stream::Fading(0)))?;
    let solver = &cfg.solver;
    let power_cfg = PowerConfig::from_solver(solver);

    let mut rounds = None;
    let association = if solver.baseline == Baseline::RandomAssociation {
        random_association(scenario, &mut stream(seed, Stream::RandomAssociation))?
    } else {
        let fh = match solver.path {
            SolverPath::FrequencyPartitioning => {
                solve_fh_fp(scenario, &gains, &CenterEdgeSplit::compute(scenario))?
            }
            SolverPath::NearOptimal => {
                let out =
                    solve_fh_near_optimal(scenario, &gains, solver.max_rounds, solver.local_search_passes)?;
                rounds = Some(out.round_utilities);
                out.fh
            }
        };
        Association { fh, bh: solve_bh(scenario, &gains)? }
    };

    let (power, sca, r_min) = match (solver.baseline, solver.utility) {
        (Baseline::UniformPower | Baseline::RandomAssociation, _) => {
            (uniform_power(scenario, &gains, &association), None, None)
        }
        (Baseline::None, UtilityKind::Msu) => {
            let out = msu_power(scenario, &gains, &association, &power_cfg)?;
            (out.power, out.sca, None)
        }
        (Baseline::None, UtilityKind::Mmu) => {
            let out = mmu_power(scenario, &gains, &association, &power_cfg)?;
            (out.power, None, out.r_min)
        }
    };

    let report = evaluate(scenario, &gains, &association, &power);
    if !report.is_feasible() {
        let list: Vec<String> = report.violations.iter().take(3).map(|v| v.to_string()).collect();
        return Err(Error::Infeasible(format!(
            "{} constraint violation(s): {}",
            report.violations.len(),
            list.join("; ")
        )));
    }
    let metrics = Metrics::from_report(&report, solver.utility, placement_objective)?;
    Ok(PipelineRun {
        scenario: scenario.clone(),
        gains,
        association,
        power,
        report,
        metrics,
        placement: None,
        sca,
        association_rounds: rounds,
        r_min,
    })
}

/// Full two-stage pipeline for one configuration and seed.
pub fn run_pipeline(cfg: &Config, seed: u64, cache: Option<&PlacementCache>) -> Result<PipelineRun> {
    cfg.validate()?;
    if cfg.counts.users == 0 {
        let scenario = cfg.scenario(seed)?;
        let gains = ChannelRealization::mean(&scenario)?;
        let report = evaluate(&scenario, &gains, &Association::default(), &PowerAllocation::default());
        return Ok(PipelineRun {
            scenario,
            gains,
            association: Association::default(),
            power: PowerAllocation::default(),
            report,
            metrics: Metrics::default(),
            placement: None,
            sca: None,
            association_rounds: None,
            r_min: None,
        });
    }
    let (scenario, trace) = if cfg.placement.enabled {
        let (s, t) = place_cached(cfg, seed, cache)?;
        (s, Some(t))
    } else {
        (cfg.scenario(seed)?, None)
    };
    let objective = match &trace {
        Some(t) => t.final_objective(),
        None => 0,
    };
    let mut run = solve_instance(cfg, &scenario, objective)?;
    run.placement = trace;
    Ok(run)
}

/// Applies `f` to every item on up to `workers` threads; results keep the
/// input order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("result lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result lock")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

/// Per-row side outputs kept when traces are requested.
#[derive(Debug, Clone, Default)]
pub struct RowTraces {
    pub placement: Option<SrTrace>,
    pub sca: Option<ScaState>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
    /// Parallel to `rows` when traces were requested.
    pub traces: Vec<RowTraces>,
}

impl SweepOutput {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.outcome.is_ok())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub workers: usize,
    pub keep_traces: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            keep_traces: false,
        }
    }
}

/// Runs the grid × seed product. Row failures are recorded, not fatal.
pub fn sweep(spec: &ExperimentSpec, opts: SweepOptions) -> Result<SweepOutput> {
    spec.validate()?;
    let tasks: Vec<(f64, u64)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let cache = PlacementCache::new();
    let results = parallel_map(&tasks, opts.workers, |&(value, seed)| {
        let cfg = spec.point_config(value);
        match run_pipeline(&cfg, seed, Some(&cache)) {
            Ok(run) => {
                let traces = if opts.keep_traces {
                    RowTraces { placement: run.placement, sca: run.sca }
                } else {
                    RowTraces::default()
                };
                (ResultRow { sweep_value: value, seed, outcome: Ok(run.metrics) }, traces)
            }
            Err(e) => (
                ResultRow { sweep_value: value, seed, outcome: Err(e.to_string()) },
                RowTraces::default(),
            ),
        }
    });
    let (rows, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = summarize(&rows);
    Ok(SweepOutput {
        rows,
        summary,
        traces: if opts.keep_traces { traces } else { Vec::new() },
    })
}
