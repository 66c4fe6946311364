//! Max-min power allocation by bisection on the common rate target.
//!
//! For a target `R` each link needs `(2^(R/B) - 1)(I + N0 B) / h` watts.
//! HAP and satellite links have no interference, so their demands are
//! closed-form; TBS demands are coupled and are found by the standard
//! fixed-point iteration, which rises monotonically to the minimal
//! supporting powers or overshoots a budget when the target is infeasible.

use std::collections::BTreeMap;

use crate::channel::ChannelRealization;
use crate::error::Result;
use crate::rates::{hap_bh_rates, Association, FhLink, PowerAllocation};
use crate::scenario::{Scenario, Tier};

use super::sca::TbsProblem;
use super::{bh_cap, tbs_problem, PowerConfig, PowerOutcome, DEGENERATE_GAIN};

const MAX_FIXED_POINT_ITERATIONS: usize = 10_000;

struct Instance {
    links: Vec<FhLink>,
    gain: Vec<f64>,
    bandwidth: Vec<f64>,
    noise: Vec<f64>,
    /// Per-link power cap from the approximated back-haul constraint.
    cap: Vec<f64>,
    ground: Vec<usize>,
    tbs: Option<TbsProblem>,
    /// `(HAP back-haul rate, link indices)`.
    haps: Vec<(f64, Vec<usize>)>,
    satellite: Vec<usize>,
    budgets: [f64; 3],
}

fn demand(rate: f64, bandwidth: f64, interference_noise: f64, gain: f64) -> f64 {
    (2f64.powf(rate / bandwidth) - 1.0) * interference_noise / gain
}

impl Instance {
    fn feasible(&self, rate: f64) -> Option<Vec<f64>> {
        let mut p = vec![0.0; self.links.len()];
        for (bh, links) in &self.haps {
            if links.len() as f64 * rate > *bh {
                return None;
            }
            let mut total = 0.0;
            for &k in links {
                p[k] = demand(rate, self.bandwidth[k], self.noise[k], self.gain[k]);
                if p[k] > self.cap[k] {
                    return None;
                }
                total += p[k];
            }
            if total > self.budgets[Tier::Air.index()] {
                return None;
            }
        }
        let mut total = 0.0;
        for &k in &self.satellite {
            p[k] = demand(rate, self.bandwidth[k], self.noise[k], self.gain[k]);
            total += p[k];
        }
        if total > self.budgets[Tier::Space.index()] {
            return None;
        }
        if let Some(tbs) = &self.tbs {
            let q = self.ground_fixed_point(tbs, rate)?;
            for (i, &k) in self.ground.iter().enumerate() {
                p[k] = q[i];
            }
        }
        Some(p)
    }

    fn ground_fixed_point(&self, tbs: &TbsProblem, rate: f64) -> Option<Vec<f64>> {
        let n = self.ground.len();
        let factor: Vec<f64> = self
            .ground
            .iter()
            .map(|&k| 2f64.powf(rate / self.bandwidth[k]) - 1.0)
            .collect();
        let budget = tbs.budget();
        let mut p = vec![0.0; n];
        let mut next = vec![0.0; n];
        let stations = (0..n).map(|k| tbs.tbs_of(k)).max().map_or(0, |m| m + 1);
        for _ in 0..MAX_FIXED_POINT_ITERATIONS {
            let psi = tbs.psi(&p);
            for k in 0..n {
                next[k] = factor[k] * psi[k] / self.gain[self.ground[k]];
            }
            for m in 0..stations {
                let total: f64 = tbs.links_of(m).iter().map(|&k| next[k]).sum();
                if total > budget {
                    return None;
                }
            }
            let scale = next.iter().fold(0.0f64, |a, &b| a.max(b));
            let change = next
                .iter()
                .zip(&p)
                .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            std::mem::swap(&mut p, &mut next);
            if change <= 1e-13 * scale {
                return Some(p);
            }
        }
        None
    }

    /// Rate each link reaches alone at full budget, capped by its HAP share.
    fn upper_bound(&self) -> f64 {
        let mut hi = f64::INFINITY;
        for k in 0..self.links.len() {
            let t = self.links[k].tier.index();
            let r = self.bandwidth[k] * (1.0 + self.budgets[t] * self.gain[k] / self.noise[k]).log2();
            hi = hi.min(r);
        }
        for (bh, links) in &self.haps {
            if !links.is_empty() {
                hi = hi.min(bh / links.len() as f64);
            }
        }
        hi
    }
}

/// Largest common rate all served links can reach, with the powers that
/// support it. Links with degenerate gains are left at zero power.
pub fn mmu_power(
    scenario: &Scenario,
    gains: &ChannelRealization,
    assoc: &Association,
    cfg: &PowerConfig,
) -> Result<PowerOutcome> {
    let n0 = scenario.params.noise_psd_w_hz;
    let links: Vec<FhLink> = assoc
        .fh
        .iter()
        .copied()
        .filter(|l| gains.fh(l.tier, l.station, l.user, l.rb) >= DEGENERATE_GAIN)
        .collect();
    let mut power = PowerAllocation::default();
    for l in &assoc.fh {
        power.set(*l, 0.0);
    }
    if links.is_empty() {
        return Ok(PowerOutcome { power, sca: None, r_min: Some(0.0) });
    }

    let caps = bh_cap(scenario, gains, assoc, cfg.bh_cap_tier);
    let bh = hap_bh_rates(scenario, gains, assoc);
    let mut haps: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut satellite = Vec::new();
    let mut ground_links = Vec::new();
    let mut ground = Vec::new();
    for (k, l) in links.iter().enumerate() {
        match l.tier {
            Tier::Air => haps.entry(l.station).or_default().push(k),
            Tier::Space => satellite.push(k),
            Tier::Ground => {
                ground.push(k);
                ground_links.push(*l);
            }
        }
    }
    let tbs = (!ground_links.is_empty()).then(|| tbs_problem(scenario, gains, &ground_links));
    let inst = Instance {
        gain: links.iter().map(|l| gains.fh(l.tier, l.station, l.user, l.rb)).collect(),
        bandwidth: links.iter().map(|l| scenario.tier(l.tier).rb_bandwidth_hz).collect(),
        noise: links.iter().map(|l| n0 * scenario.tier(l.tier).rb_bandwidth_hz).collect(),
        cap: links
            .iter()
            .map(|l| caps.caps.get(l).copied().unwrap_or(f64::INFINITY))
            .collect(),
        links,
        ground,
        tbs,
        haps: haps.into_iter().map(|(l, v)| (bh[l], v)).collect(),
        satellite,
        budgets: [
            scenario.tier(Tier::Ground).peak_power_w,
            scenario.tier(Tier::Air).peak_power_w,
            scenario.tier(Tier::Space).peak_power_w,
        ],
    };

    let mut hi = inst.upper_bound();
    let mut lo = 0.0;
    let mut best = vec![0.0; inst.links.len()];
    if hi > 0.0 && hi.is_finite() {
        if let Some(p) = inst.feasible(hi) {
            lo = hi;
            best = p;
        } else {
            for _ in 0..200 {
                if hi - lo <= cfg.mmu_rel_tol * hi {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                match inst.feasible(mid) {
                    Some(p) => {
                        lo = mid;
                        best = p;
                    }
                    None => hi = mid,
                }
            }
        }
    }
    for (l, p) in inst.links.iter().zip(best) {
        power.set(*l, p);
    }
    Ok(PowerOutcome { power, sca: None, r_min: Some(lo) })
}
