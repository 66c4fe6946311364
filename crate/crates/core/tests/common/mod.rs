//! Instance builders and brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use hapnet::channel::ChannelRealization;
use hapnet::config::Config;
use hapnet::rates::FhLink;
use hapnet::rng::{stream, Stream};
use hapnet::scenario::{Position3D, Scenario, Tier};
use rand::Rng;

pub const CENTER: f64 = 90e3;

fn around<R: Rng>(rng: &mut R, radius: f64) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    (CENTER + r * t.cos(), CENTER + r * t.sin())
}

/// Scenario with hand-placed nodes near the area center, so users see TBSs,
/// the HAP and the satellite with comparable value.
pub fn custom_scenario(seed: u64, users: usize, tbs: usize, haps: usize, rbs: [usize; 3], spread_m: f64) -> Scenario {
    let mut cfg = Config::default();
    cfg.counts.users = users;
    cfg.ground.rb_count = rbs[0];
    cfg.air.rb_count = rbs[1];
    cfg.space.rb_count = rbs[2];
    let mut s = cfg.scenario(seed).expect("default-derived config");
    let mut rng = stream(seed, Stream::Aux(7));
    s.tbs = (0..tbs)
        .map(|_| {
            let (x, y) = around(&mut rng, spread_m);
            Position3D::new(x, y, 25.0)
        })
        .collect();
    s.haps = (0..haps)
        .map(|_| {
            let (x, y) = around(&mut rng, spread_m);
            Position3D::new(x, y, 18e3)
        })
        .collect();
    s.users = (0..users)
        .map(|_| {
            let (x, y) = around(&mut rng, spread_m);
            Position3D::ground(x, y)
        })
        .collect();
    s.validate().expect("valid custom scenario");
    s
}

/// Tiny instance: U <= 4, M <= 2, L <= 1, two RBs per tier.
pub fn tiny(seed: u64) -> (Scenario, ChannelRealization) {
    let mut rng = stream(seed, Stream::Aux(1));
    let users = rng.random_range(1..=4);
    let tbs = rng.random_range(1..=2);
    let haps = rng.random_range(0..=1);
    let s = custom_scenario(seed, users, tbs, haps, [2, 2, 2], 6e3);
    let g = ChannelRealization::sample(&s, &mut stream(seed, Stream::Fading(0))).unwrap();
    (s, g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleSlot {
    pub tier: Tier,
    pub station: usize,
    pub rb: usize,
}

pub fn all_slots(s: &Scenario) -> Vec<OracleSlot> {
    let mut v = Vec::new();
    for tier in Tier::ALL {
        let stations = match tier {
            Tier::Ground => s.tbs.len(),
            Tier::Air => s.haps.len(),
            Tier::Space => 1,
        };
        for station in 0..stations {
            for rb in 0..s.params.tiers.get(tier).rb_count {
                v.push(OracleSlot { tier, station, rb });
            }
        }
    }
    v
}

pub fn covered(s: &Scenario, slot: OracleSlot, u: usize) -> bool {
    if slot.tier != Tier::Air {
        return true;
    }
    let h = s.haps[slot.station];
    let d = ((h.x - s.users[u].x).powi(2) + (h.y - s.users[u].y).powi(2)).sqrt();
    d <= s.params.hap_coverage_radius_m
}

pub fn is_center(s: &Scenario, u: usize) -> bool {
    let th = s.params.tbs_cell_radius_m * s.params.center_fraction;
    s.tbs
        .iter()
        .any(|m| ((m.x - s.users[u].x).powi(2) + (m.y - s.users[u].y).powi(2)).sqrt() <= th)
}

fn shannon(b: f64, p: f64, h: f64, i: f64, n0: f64) -> f64 {
    b * (1.0 + p * h / (i + n0 * b)).log2()
}

/// Uniform-power rate of every assigned user, with inter-cell interference
/// when `interference` is set. Summed in user order.
pub fn uniform_value(s: &Scenario, g: &ChannelRealization, choice: &[Option<OracleSlot>], interference: bool) -> f64 {
    let n0 = s.params.noise_psd_w_hz;
    let mut total = 0.0;
    for (u, c) in choice.iter().enumerate() {
        let Some(slot) = c else { continue };
        let t = s.params.tiers.get(slot.tier);
        let p = t.peak_power_w / t.rb_count as f64;
        let mut i = 0.0;
        if interference && slot.tier == Tier::Ground {
            for (v, other) in choice.iter().enumerate() {
                if let Some(o) = other {
                    if v != u && o.tier == Tier::Ground && o.rb == slot.rb && o.station != slot.station {
                        i += p * g.fh(Tier::Ground, o.station, u, slot.rb);
                    }
                }
            }
        }
        total += shannon(t.rb_bandwidth_hz, p, g.fh(slot.tier, slot.station, u, slot.rb), i, n0);
    }
    total
}

/// Best value over every exclusive assignment of users to allowed slots
/// (users may stay unassigned).
pub fn exhaustive(
    s: &Scenario,
    allowed: impl Fn(usize, OracleSlot) -> bool,
    value: impl Fn(&[Option<OracleSlot>]) -> f64,
) -> (f64, Vec<Option<OracleSlot>>) {
    let slots = all_slots(s);
    let users = s.users.len();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut choice: Vec<Option<OracleSlot>> = vec![None; users];
    fn rec(
        u: usize,
        slots: &[OracleSlot],
        used: &mut Vec<bool>,
        choice: &mut Vec<Option<OracleSlot>>,
        allowed: &dyn Fn(usize, OracleSlot) -> bool,
        value: &dyn Fn(&[Option<OracleSlot>]) -> f64,
        best: &mut (f64, Vec<Option<OracleSlot>>),
    ) {
        if u == choice.len() {
            let v = value(choice);
            if v > best.0 {
                *best = (v, choice.clone());
            }
            return;
        }
        choice[u] = None;
        rec(u + 1, slots, used, choice, allowed, value, best);
        for (k, &slot) in slots.iter().enumerate() {
            if !used[k] && allowed(u, slot) {
                used[k] = true;
                choice[u] = Some(slot);
                rec(u + 1, slots, used, choice, allowed, value, best);
                used[k] = false;
            }
        }
        choice[u] = None;
    }
    let mut used = vec![false; slots.len()];
    rec(0, &slots, &mut used, &mut choice, &allowed, &value, &mut best);
    best
}

pub fn to_choice(users: usize, fh: &BTreeSet<FhLink>) -> Vec<Option<OracleSlot>> {
    let mut c = vec![None; users];
    for l in fh {
        assert!(c[l.user].is_none(), "user {} has two links", l.user);
        c[l.user] = Some(OracleSlot { tier: l.tier, station: l.station, rb: l.rb });
    }
    c
}

/// Random mid-size instance for constraint fuzzing.
pub fn fuzz(seed: u64) -> (Scenario, ChannelRealization) {
    let mut rng = stream(seed, Stream::Aux(2));
    let users = rng.random_range(0..=24);
    let tbs = rng.random_range(0..=4);
    let haps = rng.random_range(0..=3);
    let rbs = [rng.random_range(1..=4), rng.random_range(1..=6), rng.random_range(1..=4)];
    let mut s = custom_scenario(seed, users, tbs, haps, rbs, rng.random_range(2e3..40e3));
    s.params.backhaul.bandwidth_hz = 10f64.powf(rng.random_range(4.0..8.0));
    s.params.backhaul.power_w = 10f64.powf(rng.random_range(-2.0..2.0));
    s.params.tiers.get_mut(Tier::Air).peak_power_w = 10f64.powf(rng.random_range(-2.0..2.5));
    s.params.tiers.get_mut(Tier::Ground).peak_power_w = 10f64.powf(rng.random_range(-1.0..2.0));
    let g = ChannelRealization::sample(&s, &mut stream(seed, Stream::Fading(0))).unwrap();
    (s, g)
}
