//! Long-term HAP placement by shrink-and-realign search.
//!
//! Each iteration places `T` candidates on a ring around every HAP's current
//! position (plus the position itself), scores them by the number of users
//! the HAPs serve under average statistics, adopts the winners and halves
//! the ring radius.

use std::io::Write;

use serde::Serialize;

use crate::association::{solve_bh, solve_fh_fp, CenterEdgeSplit};
use crate::channel::{bh_link_gain, fh_link_gain, ChannelRealization};
use crate::config::{PlacementConfig, SearchMode};
use crate::error::{Error, Result};
use crate::power::{msu_power, PowerConfig};
use crate::rates::{Association, BhStation};
use crate::scenario::{Position3D, Scenario, Tier};

/// Largest HAP count accepted by the exhaustive mode.
pub const EXHAUSTIVE_MAX_HAPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrConfig {
    /// Ring points per HAP per iteration (the current position is always added).
    pub candidates: usize,
    pub initial_radius_m: f64,
    pub max_iterations: usize,
    /// Stop once the ring radius would fall below this.
    pub min_radius_m: f64,
    pub mode: SearchMode,
    /// Score candidates after sum-rate power allocation instead of uniform power.
    pub full_power: bool,
    pub power: PowerConfig,
}

impl Default for SrConfig {
    fn default() -> Self {
        Self::from_placement(&PlacementConfig::default(), PowerConfig::default())
    }
}

impl SrConfig {
    pub fn from_placement(cfg: &PlacementConfig, power: PowerConfig) -> Self {
        Self {
            candidates: cfg.candidates,
            initial_radius_m: cfg.initial_radius_km * 1e3,
            max_iterations: cfg.max_iterations,
            min_radius_m: cfg.min_radius_m,
            mode: cfg.mode,
            full_power: cfg.full_power,
            power,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_radius_m > 0.0) || !self.initial_radius_m.is_finite() {
            return Err(Error::config("placement.initial_radius_km", "must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("placement.max_iterations", "must be at least 1"));
        }
        if !(self.min_radius_m >= 0.0) {
            return Err(Error::config("placement.min_radius_m", "must be non-negative"));
        }
        Ok(())
    }

    /// Ring radius of iteration `i` (1-based).
    pub fn radius(&self, i: usize) -> f64 {
        self.initial_radius_m / 2f64.powi(i as i32 - 1)
    }
}

/// Candidate 0 is `center`; candidates `1..=t` sit on the circle of radius
/// `r` at bearings `2 pi k / t`, clipped to `[0, side]^2`.
pub fn candidate_ring(center: Position3D, r: f64, t: usize, side: f64) -> Vec<Position3D> {
    let mut out = Vec::with_capacity(t + 1);
    out.push(center);
    for k in 0..t {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / t as f64;
        out.push(Position3D::new(
            (center.x + r * theta.cos()).clamp(0.0, side),
            (center.y + r * theta.sin()).clamp(0.0, side),
            center.z,
        ));
    }
    out
}

/// Number of users the HAPs serve when the front-haul is associated on
/// `gains` with frequency partitioning. Under `full`, only HAP links that
/// keep positive power after sum-rate allocation count.
pub fn coverage_objective(
    scenario: &Scenario,
    gains: &ChannelRealization,
    split: &CenterEdgeSplit,
    full: Option<&PowerConfig>,
) -> Result<usize> {
    if scenario.haps.is_empty() || scenario.users.is_empty() {
        return Ok(0);
    }
    let fh = solve_fh_fp(scenario, gains, split)?;
    match full {
        None => Ok(fh.iter().filter(|l| l.tier == Tier::Air).count()),
        Some(cfg) => {
            let assoc = Association { fh, bh: solve_bh(scenario, gains)? };
            let out = msu_power(scenario, gains, &assoc, cfg)?;
            Ok(assoc
                .fh
                .iter()
                .filter(|l| l.tier == Tier::Air && out.power.get(l) > 0.0)
                .count())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrIteration {
    pub iteration: usize,
    pub radius_m: f64,
    /// Winning candidate index per HAP (0 = stayed).
    pub best_candidate: Vec<usize>,
    pub positions: Vec<Position3D>,
    /// Objective after this iteration's adoptions.
    pub objective: usize,
    /// Best objective seen so far.
    pub best: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrEvaluation {
    pub iteration: usize,
    /// HAP being moved; `None` for joint (exhaustive) candidates.
    pub hap: Option<usize>,
    pub candidate: usize,
    pub objective: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SrStop {
    /// An iteration adopted no improving candidate.
    NoImprovement,
    MaxIterations,
    MinRadius,
    /// Nothing to place.
    NoHaps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrTrace {
    pub initial_positions: Vec<Position3D>,
    pub initial_objective: usize,
    pub iterations: Vec<SrIteration>,
    pub evaluations: Vec<SrEvaluation>,
    pub stop: SrStop,
}

impl SrTrace {
    pub fn final_objective(&self) -> usize {
        self.iterations.last().map_or(self.initial_objective, |it| it.best)
    }

    /// `iteration,radius_m,hap,candidate,x_m,y_m,objective,best`; iteration 0
    /// holds the starting positions.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "radius_m", "hap", "candidate", "x_m", "y_m", "objective", "best"])?;
        for (l, p) in self.initial_positions.iter().enumerate() {
            let obj = self.initial_objective.to_string();
            w.write_record([
                "0".into(),
                String::new(),
                l.to_string(),
                "0".into(),
                p.x.to_string(),
                p.y.to_string(),
                obj.clone(),
                obj,
            ])?;
        }
        for it in &self.iterations {
            for (l, p) in it.positions.iter().enumerate() {
                w.write_record([
                    it.iteration.to_string(),
                    it.radius_m.to_string(),
                    l.to_string(),
                    it.best_candidate[l].to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    it.objective.to_string(),
                    it.best.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `iteration,hap,candidate,objective` for every scored candidate.
    pub fn write_evaluations_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "hap", "candidate", "objective"])?;
        for e in &self.evaluations {
            w.write_record([
                e.iteration.to_string(),
                e.hap.map(|h| h.to_string()).unwrap_or_default(),
                e.candidate.to_string(),
                e.objective.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Average-statistics gains kept in sync with moving HAPs.
struct Evaluator<'a> {
    scenario: Scenario,
    gains: ChannelRealization,
    split: CenterEdgeSplit,
    full: Option<&'a PowerConfig>,
}

impl<'a> Evaluator<'a> {
    fn new(scenario: &Scenario, cfg: &'a SrConfig) -> Result<Self> {
        Ok(Self {
            scenario: scenario.clone(),
            gains: ChannelRealization::mean(scenario)?,
            split: CenterEdgeSplit::compute(scenario),
            full: cfg.full_power.then_some(&cfg.power),
        })
    }

    fn move_hap(&mut self, hap: usize, pos: Position3D) -> Result<()> {
        if self.scenario.haps[hap] == pos {
            return Ok(());
        }
        self.scenario.haps[hap] = pos;
        let fading = self.scenario.tier(Tier::Air).fading.mean();
        for u in 0..self.scenario.user_count() {
            *self.gains.fh_mut(Tier::Air, hap, u, 0) = fh_link_gain(&self.scenario, Tier::Air, hap, u)? * fading;
        }
        for w in BhStation::all(self.scenario.gateways.len()) {
            *self.gains.bh_mut(w, hap) = bh_link_gain(&self.scenario, w, hap)?;
        }
        Ok(())
    }

    fn objective(&self) -> Result<usize> {
        coverage_objective(&self.scenario, &self.gains, &self.split, self.full)
    }
}

fn displacement(a: &[Position3D], b: &[Position3D]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.horizontal_distance(q)).sum()
}

/// Shrink-and-realign search; returns the scenario with the final HAP
/// positions and the full trace.
pub fn sr_optimize(scenario: &Scenario, cfg: &SrConfig) -> Result<(Scenario, SrTrace)> {
    cfg.validate()?;
    let l_count = scenario.haps.len();
    if cfg.mode == SearchMode::Exhaustive && l_count > EXHAUSTIVE_MAX_HAPS {
        return Err(Error::InvalidArgument(format!(
            "exhaustive placement supports at most {EXHAUSTIVE_MAX_HAPS} HAPs, got {l_count}"
        )));
    }
    let mut eval = Evaluator::new(scenario, cfg)?;
    let side = scenario.params.area_side_m;
    let mut current = eval.objective()?;
    let mut trace = SrTrace {
        initial_positions: scenario.haps.clone(),
        initial_objective: current,
        iterations: Vec::new(),
        evaluations: Vec::new(),
        stop: SrStop::NoHaps,
    };
    if l_count == 0 {
        return Ok((scenario.clone(), trace));
    }

    trace.stop = SrStop::MaxIterations;
    for i in 1..=cfg.max_iterations {
        let r = cfg.radius(i);
        if i > 1 && r < cfg.min_radius_m {
            trace.stop = SrStop::MinRadius;
            break;
        }
        let rings: Vec<Vec<Position3D>> = eval
            .scenario
            .haps
            .iter()
            .map(|&c| candidate_ring(c, r, cfg.candidates, side))
            .collect();
        let mut chosen = vec![0usize; l_count];
        let mut improved = false;
        match cfg.mode {
            SearchMode::Sweep => {
                for l in 0..l_count {
                    let origin = eval.scenario.haps[l];
                    let mut best = (current, 0.0, 0usize);
                    for (c, &pos) in rings[l].iter().enumerate() {
                        eval.move_hap(l, pos)?;
                        let obj = if c == 0 { current } else { eval.objective()? };
                        trace.evaluations.push(SrEvaluation { iteration: i, hap: Some(l), candidate: c, objective: obj });
                        let d = pos.horizontal_distance(&origin);
                        if obj > best.0 || (obj == best.0 && d < best.1) {
                            best = (obj, d, c);
                        }
                    }
                    eval.move_hap(l, rings[l][best.2])?;
                    if best.0 > current {
                        improved = true;
                    }
                    chosen[l] = best.2;
                    current = best.0;
                }
            }
            SearchMode::Exhaustive => {
                let origin = eval.scenario.haps.clone();
                let per = cfg.candidates + 1;
                let combos = per.pow(l_count as u32);
                let mut best = (current, 0.0, 0usize);
                for combo in 0..combos {
                    let mut idx = combo;
                    let mut pos = Vec::with_capacity(l_count);
                    for ring in rings.iter().take(l_count) {
                        pos.push(ring[idx % per]);
                        idx /= per;
                    }
                    for (l, &p) in pos.iter().enumerate() {
                        eval.move_hap(l, p)?;
                    }
                    let obj = if combo == 0 { current } else { eval.objective()? };
                    trace.evaluations.push(SrEvaluation { iteration: i, hap: None, candidate: combo, objective: obj });
                    let d = displacement(&pos, &origin);
                    if obj > best.0 || (obj == best.0 && d < best.1) {
                        best = (obj, d, combo);
                    }
                }
                let mut idx = best.2;
                for (l, ring) in rings.iter().enumerate() {
                    chosen[l] = idx % per;
                    idx /= per;
                    eval.move_hap(l, ring[chosen[l]])?;
                }
                improved = best.0 > current;
                current = best.0;
            }
        }
        let prev_best = trace.iterations.last().map_or(trace.initial_objective, |it| it.best);
        trace.iterations.push(SrIteration {
            iteration: i,
            radius_m: r,
            best_candidate: chosen,
            positions: eval.scenario.haps.clone(),
            objective: current,
            best: prev_best.max(current),
        });
        if !improved {
            trace.stop = SrStop::NoImprovement;
            break;
        }
    }
    let out = scenario.with_haps(eval.scenario.haps.clone());
    Ok((out, trace))
}
