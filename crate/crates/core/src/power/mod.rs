//! Power allocation for a fixed association.
//!
//! * [`msu_power`]: sum-rate. HAPs and the satellite waterfill independently
//!   (HAPs under the back-haul cap and their exact back-haul rate limit);
//!   TBSs run SCA when links share an RB across cells.
//! * [`mmu_power`]: max-min rate by bisection.
//! * [`uniform_power`]: `P_S / N_S` per link, scaled down per HAP until its
//!   front-haul load fits the back-haul.

pub mod mmu;
pub mod sca;
pub mod waterfill;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::channel::ChannelRealization;
use crate::config::{BhCapBandwidth, SolverConfig};
use crate::error::Result;
use crate::rates::{hap_bh_rates, shannon, Association, FhLink, PowerAllocation};
use crate::scenario::{Scenario, Tier};

pub use mmu::mmu_power;
pub use sca::{sca_msu, solve_tbs_msu, taylor_bound, ScaConfig, ScaRecord, ScaState, TbsProblem};
pub use waterfill::{waterfill, waterfill_rate_limited, waterfill_uncapped};

/// Links weaker than this get zero power.
pub const DEGENERATE_GAIN: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerConfig {
    pub sca: ScaConfig,
    pub mmu_rel_tol: f64,
    /// Tier whose RB bandwidth sets the back-haul cap exponent.
    pub bh_cap_tier: Tier,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            sca: ScaConfig::default(),
            mmu_rel_tol: 1e-6,
            bh_cap_tier: Tier::Air,
        }
    }
}

impl PowerConfig {
    pub fn from_solver(cfg: &SolverConfig) -> Self {
        Self {
            sca: ScaConfig {
                tol: cfg.sca_tol,
                max_iter: cfg.sca_max_iter,
                inner_max_steps: cfg.inner_max_steps,
            },
            mmu_rel_tol: cfg.mmu_rel_tol,
            bh_cap_tier: match cfg.bh_cap_bandwidth {
                BhCapBandwidth::Ground => Tier::Ground,
                BhCapBandwidth::Air => Tier::Air,
                BhCapBandwidth::Space => Tier::Space,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerOutcome {
    pub power: PowerAllocation,
    /// SCA trace of the TBS block, when it was coupled.
    pub sca: Option<ScaState>,
    /// Common rate target reached by the max-min allocation.
    pub r_min: Option<f64>,
}

/// `omega = 2^(R / B)` for a HAP with back-haul rate `R`.
pub fn omega(bh_rate: f64, bandwidth: f64) -> f64 {
    2f64.powf(bh_rate / bandwidth)
}

/// Approximated back-haul cap: with one RB per user, each HAP link obeys
/// `P <= (omega - 1) N0 B / h`.
#[derive(Debug, Clone, PartialEq)]
pub struct BhCap {
    pub omega: Vec<f64>,
    pub caps: BTreeMap<FhLink, f64>,
}

pub fn bh_cap(scenario: &Scenario, gains: &ChannelRealization, assoc: &Association, tier: Tier) -> BhCap {
    let bandwidth = scenario.tier(tier).rb_bandwidth_hz;
    let omega: Vec<f64> = hap_bh_rates(scenario, gains, assoc)
        .into_iter()
        .map(|r| self::omega(r, bandwidth))
        .collect();
    let n0 = scenario.params.noise_psd_w_hz;
    let b_air = scenario.tier(Tier::Air).rb_bandwidth_hz;
    let caps = assoc
        .fh
        .iter()
        .filter(|l| l.tier == Tier::Air)
        .map(|l| {
            let h = gains.fh(Tier::Air, l.station, l.user, l.rb);
            let w = omega[l.station];
            let cap = if w <= 1.0 { 0.0 } else { (w - 1.0) * n0 * b_air / h };
            (*l, cap)
        })
        .collect();
    BhCap { omega, caps }
}

/// Coupled TBS problem over `links` (all ground links).
pub fn tbs_problem(scenario: &Scenario, gains: &ChannelRealization, links: &[FhLink]) -> TbsProblem {
    let t = scenario.tier(Tier::Ground);
    TbsProblem::new(
        links.iter().map(|l| l.station).collect(),
        links.iter().map(|l| l.rb).collect(),
        |j, k| gains.fh(Tier::Ground, links[j].station, links[k].user, links[k].rb),
        t.peak_power_w,
        t.rb_bandwidth_hz,
        scenario.params.noise_psd_w_hz,
    )
}

fn normalized(scenario: &Scenario, gains: &ChannelRealization, l: &FhLink) -> f64 {
    let h = gains.fh(l.tier, l.station, l.user, l.rb);
    if h < DEGENERATE_GAIN {
        0.0
    } else {
        h / (scenario.params.noise_psd_w_hz * scenario.tier(l.tier).rb_bandwidth_hz)
    }
}

/// Sum-rate power allocation.
pub fn msu_power(
    scenario: &Scenario,
    gains: &ChannelRealization,
    assoc: &Association,
    cfg: &PowerConfig,
) -> Result<PowerOutcome> {
    let mut power = PowerAllocation::default();
    let bh = hap_bh_rates(scenario, gains, assoc);
    let caps = bh_cap(scenario, gains, assoc, cfg.bh_cap_tier);

    let air = scenario.tier(Tier::Air);
    for (l, links) in assoc.hap_links(scenario.haps.len()).iter().enumerate() {
        let a: Vec<f64> = links.iter().map(|k| normalized(scenario, gains, k)).collect();
        let c: Vec<f64> = links.iter().map(|k| caps.caps[k]).collect();
        let p = waterfill_rate_limited(&a, air.peak_power_w, &c, air.rb_bandwidth_hz, bh[l]);
        for (k, x) in links.iter().zip(p) {
            power.set(*k, x);
        }
    }

    let sat: Vec<FhLink> = assoc.fh.iter().copied().filter(|l| l.tier == Tier::Space).collect();
    let a: Vec<f64> = sat.iter().map(|k| normalized(scenario, gains, k)).collect();
    for (k, x) in sat.iter().zip(waterfill_uncapped(&a, scenario.tier(Tier::Space).peak_power_w)) {
        power.set(*k, x);
    }

    let ground: Vec<FhLink> = assoc
        .fh
        .iter()
        .copied()
        .filter(|l| l.tier == Tier::Ground)
        .collect();
    let mut sca = None;
    if !ground.is_empty() {
        let problem = tbs_problem(scenario, gains, &ground);
        let (p, state) = solve_tbs_msu(&problem, scenario.tier(Tier::Ground).rb_count, &cfg.sca);
        for (k, x) in ground.iter().zip(p) {
            let x = if gains.fh(Tier::Ground, k.station, k.user, k.rb) < DEGENERATE_GAIN { 0.0 } else { x };
            power.set(*k, x);
        }
        sca = state;
    }
    Ok(PowerOutcome { power, sca, r_min: None })
}

/// Uniform power `P_S / N_S` on every link; each HAP's powers are scaled by a
/// common factor when its front-haul load would exceed its back-haul rate.
pub fn uniform_power(scenario: &Scenario, gains: &ChannelRealization, assoc: &Association) -> PowerAllocation {
    let mut power = PowerAllocation::default();
    for l in &assoc.fh {
        power.set(*l, scenario.tier(l.tier).uniform_power());
    }
    let bh = hap_bh_rates(scenario, gains, assoc);
    let air = scenario.tier(Tier::Air);
    let n0 = scenario.params.noise_psd_w_hz;
    for (l, links) in assoc.hap_links(scenario.haps.len()).iter().enumerate() {
        let load = |scale: f64| -> f64 {
            links
                .iter()
                .map(|k| {
                    shannon(
                        air.rb_bandwidth_hz,
                        scale * air.uniform_power(),
                        gains.fh(Tier::Air, k.station, k.user, k.rb),
                        0.0,
                        n0,
                    )
                })
                .sum()
        };
        if load(1.0) <= bh[l] {
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if load(mid) > bh[l] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        for k in links {
            power.set(*k, lo * air.uniform_power());
        }
    }
    power
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::rates::{check_feasibility, evaluate, BhStation};
    use crate::scenario::Position3D;

    #[test]
    fn omega_examples() {
        assert_eq!(omega(1e6, 1e6), 2.0);
        assert_eq!(omega(0.0, 1e6), 1.0);
        let w4 = omega(3e6, 1e6);
        assert_eq!(omega(6e6, 1e6), w4 * w4);
    }

    fn hap_scenario(users: usize) -> (Scenario, ChannelRealization) {
        let mut cfg = Config::default();
        cfg.counts.users = users;
        cfg.counts.haps = 1;
        let mut s = cfg.scenario(1).unwrap();
        for (i, u) in s.users.iter_mut().enumerate() {
            *u = Position3D::ground(s.haps[0].x + 100.0 * i as f64, s.haps[0].y);
        }
        let g = ChannelRealization::pinned(&s).unwrap();
        (s, g)
    }

    #[test]
    fn equal_gain_hap_users_split_power_evenly() {
        let (mut s, _) = hap_scenario(4);
        for u in s.users.iter_mut() {
            *u = Position3D::ground(s.haps[0].x, s.haps[0].y);
        }
        s.params.backhaul.bandwidth_hz = 1e12;
        let g = ChannelRealization::pinned(&s).unwrap();
        let assoc = Association {
            fh: (0..4).map(|u| FhLink::new(Tier::Air, 0, u, u)).collect(),
            bh: [(0, BhStation::Gateway(0))].into_iter().collect(),
        };
        let out = msu_power(&s, &g, &assoc, &PowerConfig::default()).unwrap();
        for l in &assoc.fh {
            assert!((out.power.get(l) - 25.0).abs() < 1e-9, "{}", out.power.get(l));
        }
    }

    #[test]
    fn hap_load_respects_backhaul() {
        let (s, g) = hap_scenario(20);
        let assoc = Association {
            fh: (0..20).map(|u| FhLink::new(Tier::Air, 0, u, u)).collect(),
            bh: [(0, BhStation::Gateway(0))].into_iter().collect(),
        };
        for p in [
            msu_power(&s, &g, &assoc, &PowerConfig::default()).unwrap().power,
            uniform_power(&s, &g, &assoc),
            mmu_power(&s, &g, &assoc, &PowerConfig::default()).unwrap().power,
        ] {
            let v = check_feasibility(&s, &g, &assoc, &p);
            assert!(v.is_empty(), "{v:?}");
        }
    }

    #[test]
    fn mmu_equalizes_identical_users() {
        let (mut s, _) = hap_scenario(2);
        s.users[1] = s.users[0];
        s.params.backhaul.bandwidth_hz = 1e12;
        let g = ChannelRealization::pinned(&s).unwrap();
        let assoc = Association {
            fh: (0..2).map(|u| FhLink::new(Tier::Air, 0, u, u)).collect(),
            bh: [(0, BhStation::Gateway(0))].into_iter().collect(),
        };
        let out = mmu_power(&s, &g, &assoc, &PowerConfig::default()).unwrap();
        let r = evaluate(&s, &g, &assoc, &out.power);
        assert!((r.user_rates[0] - r.user_rates[1]).abs() < 1e-9 * r.user_rates[0]);
        assert!((out.power.get(&FhLink::new(Tier::Air, 0, 0, 0)) - 50.0).abs() < 1e-3);
    }
}
