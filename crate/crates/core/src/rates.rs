//! Rates, utilities and constraint checks.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::config::UtilityKind;
use crate::error::{Error, Result};
use crate::scenario::{Scenario, Tier};

/// Absolute tolerance on powers (W).
pub const POWER_TOL_W: f64 = 1e-9;
/// Relative tolerance on rates.
pub const RATE_REL_TOL: f64 = 1e-9;

/// One front-haul assignment: `station` of `tier` serves `user` on RB `rb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FhLink {
    pub tier: Tier,
    pub station: usize,
    pub user: usize,
    pub rb: usize,
}

impl FhLink {
    pub const fn new(tier: Tier, station: usize, user: usize, rb: usize) -> Self {
        Self { tier, station, user, rb }
    }
}

/// Back-haul transmitter: the satellite (index 0) or gateway `w` (index w + 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BhStation {
    Satellite,
    Gateway(usize),
}

impl BhStation {
    pub fn index(self) -> usize {
        match self {
            BhStation::Satellite => 0,
            BhStation::Gateway(w) => w + 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            BhStation::Satellite
        } else {
            BhStation::Gateway(i - 1)
        }
    }

    /// The satellite followed by `gateways` gateways.
    pub fn all(gateways: usize) -> impl Iterator<Item = BhStation> {
        (0..=gateways).map(BhStation::from_index)
    }

    pub fn capacity(self, scenario: &Scenario) -> usize {
        let bh = &scenario.params.backhaul;
        match self {
            BhStation::Satellite => bh.satellite_capacity,
            BhStation::Gateway(w) => bh.gateway_capacity.get(w).copied().unwrap_or(0),
        }
    }
}

impl std::fmt::Display for BhStation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BhStation::Satellite => f.write_str("satellite"),
            BhStation::Gateway(w) => write!(f, "gateway{w}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Association {
    pub fh: BTreeSet<FhLink>,
    /// HAP index to its back-haul station.
    pub bh: BTreeMap<usize, BhStation>,
}

impl Association {
    /// Serving link of every user (the first one if a user has several).
    pub fn serving(&self, users: usize) -> Vec<Option<FhLink>> {
        let mut out = vec![None; users];
        for link in &self.fh {
            if let Some(slot) = out.get_mut(link.user) {
                slot.get_or_insert(*link);
            }
        }
        out
    }

    /// Users served by each HAP.
    pub fn hap_links(&self, haps: usize) -> Vec<Vec<FhLink>> {
        let mut out = vec![Vec::new(); haps];
        for link in self.fh.iter().filter(|l| l.tier == Tier::Air) {
            if let Some(v) = out.get_mut(link.station) {
                v.push(*link);
            }
        }
        out
    }

    pub fn count(&self, tier: Tier) -> usize {
        self.fh.iter().filter(|l| l.tier == tier).count()
    }

    /// `user,tier,station,rb` rows followed by `hap,bh_station` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
        w.write_record(["user", "tier", "station", "rb"])?;
        for l in &self.fh {
            w.write_record([
                l.user.to_string(),
                l.tier.name().to_string(),
                l.station.to_string(),
                l.rb.to_string(),
            ])?;
        }
        w.write_record(["hap", "bh_station"])?;
        for (l, s) in &self.bh {
            w.write_record([l.to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Transmit power per front-haul link (W). Missing entries are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub p: BTreeMap<FhLink, f64>,
}

impl PowerAllocation {
    pub fn get(&self, link: &FhLink) -> f64 {
        self.p.get(link).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, link: FhLink, watts: f64) {
        self.p.insert(link, watts);
    }

    /// Total power radiated by one station.
    pub fn station_total(&self, tier: Tier, station: usize) -> f64 {
        self.p
            .iter()
            .filter(|(l, _)| l.tier == tier && l.station == station)
            .map(|(_, p)| *p)
            .sum()
    }
}

/// `[tbs][rb]` power actually radiated on each TBS resource block.
#[derive(Debug, Clone, PartialEq)]
pub struct TbsLoad {
    rbs: usize,
    power: Vec<f64>,
}

impl TbsLoad {
    pub fn new(scenario: &Scenario, assoc: &Association, power: &PowerAllocation) -> Self {
        let rbs = scenario.tier(Tier::Ground).rb_count;
        let mut load = vec![0.0; scenario.tbs.len() * rbs];
        for l in assoc.fh.iter().filter(|l| l.tier == Tier::Ground) {
            if l.station < scenario.tbs.len() && l.rb < rbs {
                load[l.station * rbs + l.rb] += power.get(l);
            }
        }
        Self { rbs, power: load }
    }

    pub fn get(&self, tbs: usize, rb: usize) -> f64 {
        self.power[tbs * self.rbs + rb]
    }
}

/// Co-channel power received by `user` on RB `rb` from every TBS other than
/// `serving`. Air and space links see no inter-cell interference.
pub fn intercell_interference(
    gains: &ChannelRealization,
    load: &TbsLoad,
    tier: Tier,
    serving: usize,
    user: usize,
    rb: usize,
) -> f64 {
    if tier != Tier::Ground {
        return 0.0;
    }
    (0..gains.station_count(Tier::Ground))
        .filter(|&m| m != serving)
        .map(|m| load.get(m, rb) * gains.fh(Tier::Ground, m, user, rb))
        .sum()
}

/// Shannon rate `B log2(1 + P h / (I + N0 B))`.
pub fn shannon(bandwidth: f64, power: f64, gain: f64, interference: f64, noise_psd: f64) -> f64 {
    bandwidth * (1.0 + power * gain / (interference + noise_psd * bandwidth)).log2()
}

/// Front-haul rate of `link` (zero when the link is not associated).
pub fn fh_rate(
    scenario: &Scenario,
    gains: &ChannelRealization,
    assoc: &Association,
    power: &PowerAllocation,
    load: &TbsLoad,
    link: &FhLink,
) -> f64 {
    if !assoc.fh.contains(link) {
        return 0.0;
    }
    let b = scenario.tier(link.tier).rb_bandwidth_hz;
    let h = gains.fh(link.tier, link.station, link.user, link.rb);
    let i = intercell_interference(gains, load, link.tier, link.station, link.user, link.rb);
    shannon(b, power.get(link), h, i, scenario.params.noise_psd_w_hz)
}

/// Back-haul capacity from `station` to HAP `hap` if that link is active.
pub fn bh_link_rate(scenario: &Scenario, gains: &ChannelRealization, station: BhStation, hap: usize) -> f64 {
    let bh = &scenario.params.backhaul;
    shannon(
        bh.bandwidth_hz,
        bh.power_w,
        gains.bh(station, hap),
        0.0,
        scenario.params.noise_psd_w_hz,
    )
}

/// Back-haul rate with the association indicator applied.
pub fn bh_rate(
    scenario: &Scenario,
    gains: &ChannelRealization,
    assoc: &Association,
    station: BhStation,
    hap: usize,
) -> f64 {
    match assoc.bh.get(&hap) {
        Some(&s) if s == station => bh_link_rate(scenario, gains, station, hap),
        _ => 0.0,
    }
}

/// Active back-haul rate of every HAP (zero when unassigned).
pub fn hap_bh_rates(scenario: &Scenario, gains: &ChannelRealization, assoc: &Association) -> Vec<f64> {
    (0..scenario.haps.len())
        .map(|l| match assoc.bh.get(&l) {
            Some(&s) => bh_link_rate(scenario, gains, s, l),
            None => 0.0,
        })
        .collect()
}

pub fn utility(rates: &[f64], kind: UtilityKind) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::EmptyUserSet);
    }
    Ok(match kind {
        UtilityKind::Msu => rates.iter().sum(),
        UtilityKind::Mmu => rates.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    StationPower { tier: Tier, station: usize, total: f64, budget: f64 },
    BackhaulRate { hap: usize, load: f64, capacity: f64 },
    UserExclusivity { user: usize, links: usize },
    RbExclusivity { tier: Tier, station: usize, rb: usize, users: usize },
    BhMissing { hap: usize },
    BhCapacity { station: BhStation, haps: usize, capacity: usize },
    PowerCoupling { link: FhLink, power: f64 },
    NegativePower { link: FhLink, power: f64 },
    InvalidIndex(String),
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::StationPower { tier, station, total, budget } => {
                write!(f, "{tier} station {station} radiates {total} W over budget {budget} W")
            }
            Violation::BackhaulRate { hap, load, capacity } => {
                write!(f, "HAP {hap} front-haul load {load} bit/s exceeds back-haul {capacity} bit/s")
            }
            Violation::UserExclusivity { user, links } => write!(f, "user {user} holds {links} links"),
            Violation::RbExclusivity { tier, station, rb, users } => {
                write!(f, "{tier} station {station} RB {rb} shared by {users} users")
            }
            Violation::BhMissing { hap } => write!(f, "HAP {hap} has no back-haul station"),
            Violation::BhCapacity { station, haps, capacity } => {
                write!(f, "{station} serves {haps} HAPs, capacity {capacity}")
            }
            Violation::PowerCoupling { link, power } => {
                write!(f, "{power} W on unassociated link {link:?}")
            }
            Violation::NegativePower { link, power } => write!(f, "negative power {power} W on {link:?}"),
            Violation::InvalidIndex(s) => write!(f, "invalid index: {s}"),
        }
    }
}

fn link_in_range(scenario: &Scenario, l: &FhLink) -> bool {
    l.user < scenario.user_count()
        && l.station < scenario.station_count(l.tier)
        && l.rb < scenario.tier(l.tier).rb_count
}

/// Every constraint of the downlink problem; an empty list means feasible.
pub fn check_feasibility(
    scenario: &Scenario,
    gains: &ChannelRealization,
    assoc: &Association,
    power: &PowerAllocation,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for l in &assoc.fh {
        if !link_in_range(scenario, l) {
            out.push(Violation::InvalidIndex(format!("{l:?}")));
        }
    }
    for l in power.p.keys() {
        if !link_in_range(scenario, l) {
            out.push(Violation::InvalidIndex(format!("power on {l:?}")));
        }
    }
    for (&hap, &s) in &assoc.bh {
        let bad_station = match s {
            BhStation::Satellite => false,
            BhStation::Gateway(w) => w >= scenario.gateways.len(),
        };
        if hap >= scenario.haps.len() || bad_station {
            out.push(Violation::InvalidIndex(format!("back-haul {hap} -> {s}")));
        }
    }
    if !out.is_empty() {
        return out;
    }

    for (&link, &p) in &power.p {
        if p < -POWER_TOL_W || p.is_nan() {
            out.push(Violation::NegativePower { link, power: p });
        }
        if p > POWER_TOL_W && !assoc.fh.contains(&link) {
            out.push(Violation::PowerCoupling { link, power: p });
        }
    }

    for tier in Tier::ALL {
        let budget = scenario.tier(tier).peak_power_w;
        for s in 0..scenario.station_count(tier) {
            let total: f64 = assoc
                .fh
                .iter()
                .filter(|l| l.tier == tier && l.station == s)
                .map(|l| power.get(l))
                .sum();
            if total > budget + POWER_TOL_W {
                out.push(Violation::StationPower { tier, station: s, total, budget });
            }
        }
    }

    let mut per_user = vec![0usize; scenario.user_count()];
    let mut per_rb: BTreeMap<(Tier, usize, usize), usize> = BTreeMap::new();
    for l in &assoc.fh {
        per_user[l.user] += 1;
        *per_rb.entry((l.tier, l.station, l.rb)).or_default() += 1;
    }
    for (user, &links) in per_user.iter().enumerate() {
        if links > 1 {
            out.push(Violation::UserExclusivity { user, links });
        }
    }
    for (&(tier, station, rb), &users) in &per_rb {
        if users > 1 {
            out.push(Violation::RbExclusivity { tier, station, rb, users });
        }
    }

    let mut per_station = vec![0usize; scenario.gateways.len() + 1];
    for hap in 0..scenario.haps.len() {
        match assoc.bh.get(&hap) {
            Some(s) => per_station[s.index()] += 1,
            None => out.push(Violation::BhMissing { hap }),
        }
    }
    for (i, &haps) in per_station.iter().enumerate() {
        let station = BhStation::from_index(i);
        let capacity = station.capacity(scenario);
        if haps > capacity {
            out.push(Violation::BhCapacity { station, haps, capacity });
        }
    }

    let load = TbsLoad::new(scenario, assoc, power);
    let bh = hap_bh_rates(scenario, gains, assoc);
    let mut hap_load = vec![0.0; scenario.haps.len()];
    for l in assoc.fh.iter().filter(|l| l.tier == Tier::Air) {
        hap_load[l.station] += fh_rate(scenario, gains, assoc, power, &load, l);
    }
    for (hap, (&load, &capacity)) in hap_load.iter().zip(&bh).enumerate() {
        if load > capacity * (1.0 + RATE_REL_TOL) + RATE_REL_TOL {
            out.push(Violation::BackhaulRate { hap, load, capacity });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub user_rates: Vec<f64>,
    pub serving: Vec<Option<FhLink>>,
    pub user_power: Vec<f64>,
    /// Front-haul sum-rate through each HAP.
    pub hap_load: Vec<f64>,
    /// Active back-haul capacity of each HAP.
    pub hap_backhaul: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl RateReport {
    pub fn utility(&self, kind: UtilityKind) -> Result<f64> {
        utility(&self.user_rates, kind)
    }

    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn tier_rates(&self, tier: Tier) -> Vec<f64> {
        self.serving
            .iter()
            .zip(&self.user_rates)
            .filter(|(s, _)| s.is_some_and(|l| l.tier == tier))
            .map(|(_, r)| *r)
            .collect()
    }

    pub fn tier_powers(&self, tier: Tier) -> Vec<f64> {
        self.serving
            .iter()
            .zip(&self.user_power)
            .filter(|(s, _)| s.is_some_and(|l| l.tier == tier))
            .map(|(_, p)| *p)
            .collect()
    }

    /// Per-user table: `user,tier,station,rb,power_w,rate_bps`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["user", "tier", "station", "rb", "power_w", "rate_bps"])?;
        for (u, s) in self.serving.iter().enumerate() {
            let (tier, station, rb) = match s {
                Some(l) => (l.tier.name().to_string(), l.station.to_string(), l.rb.to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                u.to_string(),
                tier,
                station,
                rb,
                format!("{:e}", self.user_power[u]),
                format!("{:e}", self.user_rates[u]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// One summary line: `utility,value,min_rate,max_rate,mean_rate`.
    pub fn write_summary<W: Write>(&self, kind: UtilityKind, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["utility", "value", "min_rate_bps", "max_rate_bps", "mean_rate_bps"])?;
        let n = self.user_rates.len();
        let (min, max, mean) = if n == 0 {
            (0.0, 0.0, 0.0)
        } else {
            (
                self.user_rates.iter().copied().fold(f64::INFINITY, f64::min),
                self.user_rates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                self.user_rates.iter().sum::<f64>() / n as f64,
            )
        };
        let value = if n == 0 { 0.0 } else { self.utility(kind)? };
        let name = match kind {
            UtilityKind::Msu => "msu",
            UtilityKind::Mmu => "mmu",
        };
        w.write_record([
            name.to_string(),
            format!("{value:e}"),
            format!("{min:e}"),
            format!("{max:e}"),
            format!("{mean:e}"),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Rates of every user plus the full constraint check.
pub fn evaluate(
    scenario: &Scenario,
    gains: &ChannelRealization,
    assoc: &Association,
    power: &PowerAllocation,
) -> RateReport {
    let users = scenario.user_count();
    let serving = assoc.serving(users);
    let violations = check_feasibility(scenario, gains, assoc, power);
    let mut user_rates = vec![0.0; users];
    let mut user_power = vec![0.0; users];
    let mut hap_load = vec![0.0; scenario.haps.len()];
    let sane = !violations.iter().any(|v| matches!(v, Violation::InvalidIndex(_)));
    if sane {
        let load = TbsLoad::new(scenario, assoc, power);
        for l in &assoc.fh {
            let r = fh_rate(scenario, gains, assoc, power, &load, l);
            user_rates[l.user] += r;
            user_power[l.user] += power.get(l);
            if l.tier == Tier::Air {
                hap_load[l.station] += r;
            }
        }
    }
    let hap_backhaul = if sane {
        hap_bh_rates(scenario, gains, assoc)
    } else {
        vec![0.0; scenario.haps.len()]
    };
    RateReport {
        user_rates,
        serving,
        user_power,
        hap_load,
        hap_backhaul,
        violations,
    }
}
