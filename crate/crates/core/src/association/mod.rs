//! Front-haul and back-haul association under uniform power.
//!
//! Two front-haul paths are provided:
//!
//! * frequency partitioning ([`solve_fh_fp`]): center users may only use TBS
//!   slots and edge users only HAP or satellite slots, so no two TBS links
//!   can interfere and the problem is a linear assignment;
//! * near-optimal ([`solve_fh_near_optimal`]): every user may use every
//!   slot. Slot values start from worst-case interference, are refreshed
//!   from the previous round's co-channel occupancy, and the best round is
//!   polished by a move/swap local search on the true sum-rate.
//!
//! HAP slots are only offered to users inside the HAP's coverage radius.

pub mod hungarian;
pub mod transport;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::rates::{bh_link_rate, shannon, Association, BhStation, FhLink};
use crate::scenario::{Scenario, Tier};

pub use hungarian::{hungarian, Matching, ValueMatrix};
pub use transport::{assign_capacitated, TransportProblem, TransportSolution};

/// A (station, RB) column of the assignment problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Slot {
    pub tier: Tier,
    pub station: usize,
    pub rb: usize,
}

impl Slot {
    pub fn link(self, user: usize) -> FhLink {
        FhLink::new(self.tier, self.station, user, self.rb)
    }
}

/// Flat indexing of every (tier, station, RB) slot: ground first, then air,
/// then space; station-major within a tier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotLayout {
    stations: [usize; 3],
    rbs: [usize; 3],
    offsets: [usize; 4],
}

impl SlotLayout {
    pub fn new(scenario: &Scenario) -> Self {
        let mut stations = [0; 3];
        let mut rbs = [0; 3];
        let mut offsets = [0; 4];
        for tier in Tier::ALL {
            let t = tier.index();
            stations[t] = scenario.station_count(tier);
            rbs[t] = scenario.tier(tier).rb_count;
            offsets[t + 1] = offsets[t] + stations[t] * rbs[t];
        }
        Self { stations, rbs, offsets }
    }

    pub fn len(&self) -> usize {
        self.offsets[3]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn tier_range(&self, tier: Tier) -> Range<usize> {
        let t = tier.index();
        self.offsets[t]..self.offsets[t + 1]
    }

    #[inline]
    pub fn index(&self, tier: Tier, station: usize, rb: usize) -> usize {
        let t = tier.index();
        self.offsets[t] + station * self.rbs[t] + rb
    }

    #[inline]
    pub fn slot(&self, i: usize) -> Slot {
        let t = if i < self.offsets[1] {
            0
        } else if i < self.offsets[2] {
            1
        } else {
            2
        };
        let local = i - self.offsets[t];
        Slot {
            tier: Tier::ALL[t],
            station: local / self.rbs[t],
            rb: local % self.rbs[t],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserClass {
    Center,
    Edge,
}

/// Center users lie within `threshold_m` (horizontal) of some TBS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterEdgeSplit {
    pub labels: Vec<UserClass>,
    pub threshold_m: f64,
}

impl CenterEdgeSplit {
    pub fn compute(scenario: &Scenario) -> Self {
        Self::with_threshold(scenario, scenario.params.center_threshold_m())
    }

    pub fn with_threshold(scenario: &Scenario, threshold_m: f64) -> Self {
        let labels = scenario
            .users
            .iter()
            .map(|u| {
                if scenario.tbs.iter().any(|m| m.horizontal_distance(u) <= threshold_m) {
                    UserClass::Center
                } else {
                    UserClass::Edge
                }
            })
            .collect();
        Self { labels, threshold_m }
    }

    pub fn count(&self, class: UserClass) -> usize {
        self.labels.iter().filter(|&&c| c == class).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Eligibility<'a> {
    /// Every slot, subject to HAP coverage.
    All,
    /// Center users on TBSs, edge users on HAPs and the satellite.
    Partitioned(&'a CenterEdgeSplit),
}

pub fn eligible(scenario: &Scenario, rule: Eligibility<'_>, user: usize, tier: Tier, station: usize) -> bool {
    if tier == Tier::Air && !scenario.hap_covers(station, user) {
        return false;
    }
    match rule {
        Eligibility::All => true,
        Eligibility::Partitioned(split) => match split.labels[user] {
            UserClass::Center => tier == Tier::Ground,
            UserClass::Edge => tier != Tier::Ground,
        },
    }
}

/// Rate of `user` on `slot` at the tier's uniform power `P_S / N_S`.
pub fn uniform_rate(scenario: &Scenario, gains: &ChannelRealization, slot: Slot, user: usize, interference: f64) -> f64 {
    let t = scenario.tier(slot.tier);
    shannon(
        t.rb_bandwidth_hz,
        t.uniform_power(),
        gains.fh(slot.tier, slot.station, user, slot.rb),
        interference,
        scenario.params.noise_psd_w_hz,
    )
}

/// Users x slots value matrix over a subset of users and slots.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentProblem {
    pub users: Vec<usize>,
    pub slots: Vec<usize>,
    pub values: ValueMatrix,
}

impl AssignmentProblem {
    /// Ineligible pairs get value 0, which is the same as leaving the user
    /// unserved.
    pub fn build(
        layout: &SlotLayout,
        users: Vec<usize>,
        slots: Vec<usize>,
        mut value: impl FnMut(usize, Slot) -> Option<f64>,
    ) -> Self {
        let mut values = ValueMatrix::zeros(users.len(), slots.len());
        for (r, &u) in users.iter().enumerate() {
            for (c, &i) in slots.iter().enumerate() {
                if let Some(v) = value(u, layout.slot(i)) {
                    values.set(r, c, v);
                }
            }
        }
        Self { users, slots, values }
    }

    /// Solves the assignment and drops zero-value pairs.
    pub fn solve(&self, layout: &SlotLayout) -> Result<Vec<FhLink>> {
        let m = hungarian(&self.values)?;
        Ok(m.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(r, c)| {
                let c = (*c)?;
                (self.values.get(r, c) > 0.0).then(|| layout.slot(self.slots[c]).link(self.users[r]))
            })
            .collect())
    }
}

/// Interference-free assignment (every TBS link assumed alone on its RB).
pub fn solve_fh_interference_free(
    scenario: &Scenario,
    gains: &ChannelRealization,
    rule: Eligibility<'_>,
) -> Result<BTreeSet<FhLink>> {
    if !gains.is_per_rb() {
        return solve_fh_stations(scenario, gains, rule);
    }
    let layout = SlotLayout::new(scenario);
    let value = |u: usize, s: Slot| {
        eligible(scenario, rule, u, s.tier, s.station).then(|| uniform_rate(scenario, gains, s, u, 0.0))
    };
    // Partitioned eligibility splits into two independent problems.
    let groups: Vec<(Vec<usize>, Vec<usize>)> = match rule {
        Eligibility::All => vec![((0..scenario.user_count()).collect(), (0..layout.len()).collect())],
        Eligibility::Partitioned(split) => {
            let of = |class| {
                (0..scenario.user_count())
                    .filter(|&u| split.labels[u] == class)
                    .collect::<Vec<_>>()
            };
            vec![
                (of(UserClass::Center), layout.tier_range(Tier::Ground).collect()),
                (
                    of(UserClass::Edge),
                    layout.tier_range(Tier::Air).chain(layout.tier_range(Tier::Space)).collect(),
                ),
            ]
        }
    };
    let mut fh = BTreeSet::new();
    for (users, slots) in groups {
        let p = AssignmentProblem::build(&layout, users, slots, value);
        fh.extend(p.solve(&layout)?);
    }
    Ok(fh)
}

/// Average-statistics shortcut: all RBs of a station are identical, so the
/// assignment is a transport problem over stations with RB-count capacities.
fn solve_fh_stations(
    scenario: &Scenario,
    gains: &ChannelRealization,
    rule: Eligibility<'_>,
) -> Result<BTreeSet<FhLink>> {
    let mut stations = Vec::new();
    for tier in Tier::ALL {
        for s in 0..scenario.station_count(tier) {
            stations.push((tier, s));
        }
    }
    let capacity = stations.iter().map(|&(t, _)| scenario.tier(t).rb_count).collect();
    let mut p = TransportProblem::new(scenario.user_count(), capacity);
    for u in 0..scenario.user_count() {
        for (k, &(tier, s)) in stations.iter().enumerate() {
            if eligible(scenario, rule, u, tier, s) {
                let v = uniform_rate(scenario, gains, Slot { tier, station: s, rb: 0 }, u, 0.0);
                if v > 0.0 {
                    p.set(u, k, v);
                }
            }
        }
    }
    let sol = assign_capacitated(&p)?;
    let mut next_rb = vec![0usize; stations.len()];
    let mut fh = BTreeSet::new();
    for (u, k) in sol.station_of.iter().enumerate() {
        if let Some(k) = *k {
            let (tier, s) = stations[k];
            fh.insert(FhLink::new(tier, s, u, next_rb[k]));
            next_rb[k] += 1;
        }
    }
    Ok(fh)
}

/// Frequency-partitioning association (front-haul only).
pub fn solve_fh_fp(
    scenario: &Scenario,
    gains: &ChannelRealization,
    split: &CenterEdgeSplit,
) -> Result<BTreeSet<FhLink>> {
    solve_fh_interference_free(scenario, gains, Eligibility::Partitioned(split))
}

/// Interference-free objective of a front-haul set (sum of uniform-power
/// rates with zero inter-cell interference).
pub fn interference_free_value(scenario: &Scenario, gains: &ChannelRealization, fh: &BTreeSet<FhLink>) -> f64 {
    fh.iter()
        .map(|l| {
            uniform_rate(scenario, gains, Slot { tier: l.tier, station: l.station, rb: l.rb }, l.user, 0.0)
        })
        .sum()
}

/// Occupancy of every slot with uniform-power, interference-aware rates.
#[derive(Debug, Clone)]
pub struct UniformState<'a> {
    scenario: &'a Scenario,
    gains: &'a ChannelRealization,
    layout: SlotLayout,
    pub user_slot: Vec<Option<usize>>,
    pub slot_user: Vec<Option<usize>>,
}

impl<'a> UniformState<'a> {
    pub fn new(scenario: &'a Scenario, gains: &'a ChannelRealization, fh: &BTreeSet<FhLink>) -> Self {
        let layout = SlotLayout::new(scenario);
        let mut user_slot = vec![None; scenario.user_count()];
        let mut slot_user = vec![None; layout.len()];
        for l in fh {
            let i = layout.index(l.tier, l.station, l.rb);
            user_slot[l.user] = Some(i);
            slot_user[i] = Some(l.user);
        }
        Self { scenario, gains, layout, user_slot, slot_user }
    }

    pub fn layout(&self) -> &SlotLayout {
        &self.layout
    }

    pub fn links(&self) -> BTreeSet<FhLink> {
        self.user_slot
            .iter()
            .enumerate()
            .filter_map(|(u, s)| s.map(|i| self.layout.slot(i).link(u)))
            .collect()
    }

    fn ground_interference(&self, user: usize, tbs: usize, rb: usize) -> f64 {
        let p = self.scenario.tier(Tier::Ground).uniform_power();
        (0..self.scenario.tbs.len())
            .filter(|&m| m != tbs && self.slot_user[self.layout.index(Tier::Ground, m, rb)].is_some())
            .map(|m| p * self.gains.fh(Tier::Ground, m, user, rb))
            .sum()
    }

    pub fn rate(&self, user: usize) -> f64 {
        match self.user_slot[user] {
            None => 0.0,
            Some(i) => {
                let s = self.layout.slot(i);
                let interference = if s.tier == Tier::Ground {
                    self.ground_interference(user, s.station, s.rb)
                } else {
                    0.0
                };
                uniform_rate(self.scenario, self.gains, s, user, interference)
            }
        }
    }

    pub fn total(&self) -> f64 {
        (0..self.user_slot.len()).map(|u| self.rate(u)).sum()
    }

    /// Users whose rate depends on the occupancy of slot `i`.
    fn push_coupled(&self, i: Option<usize>, out: &mut Vec<usize>) {
        let Some(i) = i else { return };
        let s = self.layout.slot(i);
        if s.tier != Tier::Ground {
            return;
        }
        for m in 0..self.scenario.tbs.len() {
            if let Some(u) = self.slot_user[self.layout.index(Tier::Ground, m, s.rb)] {
                out.push(u);
            }
        }
    }

    fn local_value(&self, users: &mut Vec<usize>) -> f64 {
        users.sort_unstable();
        users.dedup();
        users.iter().map(|&u| self.rate(u)).sum()
    }

    fn place(&mut self, user: usize, slot: Option<usize>) {
        if let Some(old) = self.user_slot[user] {
            self.slot_user[old] = None;
        }
        self.user_slot[user] = slot;
        if let Some(i) = slot {
            self.slot_user[i] = Some(user);
        }
    }

    /// Objective change of moving `user` to a free `slot` (or out).
    fn move_gain(&mut self, user: usize, slot: Option<usize>) -> f64 {
        let from = self.user_slot[user];
        let mut set = vec![user];
        self.push_coupled(from, &mut set);
        self.push_coupled(slot, &mut set);
        let before = self.local_value(&mut set);
        self.place(user, slot);
        let mut set_after = set.clone();
        self.push_coupled(slot, &mut set_after);
        let after = self.local_value(&mut set_after);
        self.place(user, from);
        after - before
    }

    fn swap(&mut self, a: usize, b: usize) {
        let (sa, sb) = (self.user_slot[a], self.user_slot[b]);
        self.user_slot[a] = sb;
        self.user_slot[b] = sa;
        if let Some(i) = sb {
            self.slot_user[i] = Some(a);
        }
        if let Some(i) = sa {
            self.slot_user[i] = Some(b);
        }
    }

    fn swap_gain(&mut self, a: usize, b: usize) -> f64 {
        let mut set = vec![a, b];
        self.push_coupled(self.user_slot[a], &mut set);
        self.push_coupled(self.user_slot[b], &mut set);
        let before = self.local_value(&mut set);
        self.swap(a, b);
        let after = self.local_value(&mut set);
        self.swap(a, b);
        after - before
    }
}

/// Move and swap local search on the true uniform-power sum-rate. Returns
/// the number of accepted changes.
pub fn local_search(state: &mut UniformState<'_>, rule: Eligibility<'_>, passes: usize) -> usize {
    let scenario = state.scenario;
    let users = scenario.user_count();
    let slots = state.layout.len();
    let mut accepted = 0;
    for _ in 0..passes {
        let eps = 1e-9 * state.total().max(1e-300);
        let mut improved = false;
        for u in 0..users {
            let mut best = (eps, None::<Option<usize>>);
            if state.user_slot[u].is_some() {
                let g = state.move_gain(u, None);
                if g > best.0 {
                    best = (g, Some(None));
                }
            }
            for i in 0..slots {
                if state.slot_user[i].is_some() {
                    continue;
                }
                let s = state.layout.slot(i);
                if !eligible(scenario, rule, u, s.tier, s.station) {
                    continue;
                }
                let g = state.move_gain(u, Some(i));
                if g > best.0 {
                    best = (g, Some(Some(i)));
                }
            }
            if let (_, Some(target)) = best {
                state.place(u, target);
                accepted += 1;
                improved = true;
            }
        }
        for a in 0..users {
            for b in a + 1..users {
                let (Some(sa), Some(sb)) = (state.user_slot[a], state.user_slot[b]) else {
                    continue;
                };
                let (x, y) = (state.layout.slot(sa), state.layout.slot(sb));
                if !eligible(scenario, rule, a, y.tier, y.station) || !eligible(scenario, rule, b, x.tier, x.station) {
                    continue;
                }
                if state.swap_gain(a, b) > eps {
                    state.swap(a, b);
                    accepted += 1;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    accepted
}

#[derive(Debug, Clone, PartialEq)]
pub struct NearOptimalOutcome {
    pub fh: BTreeSet<FhLink>,
    /// True uniform-power sum-rate of each fixed-point round.
    pub round_utilities: Vec<f64>,
    /// Sum-rate of the returned association.
    pub utility: f64,
    pub local_moves: usize,
}

/// Interference-aware association by fixed-point re-solves plus local search.
pub fn solve_fh_near_optimal(
    scenario: &Scenario,
    gains: &ChannelRealization,
    max_rounds: usize,
    local_search_passes: usize,
) -> Result<NearOptimalOutcome> {
    let layout = SlotLayout::new(scenario);
    let users: Vec<usize> = (0..scenario.user_count()).collect();
    let slots: Vec<usize> = (0..layout.len()).collect();
    let p_ground = scenario.tier(Tier::Ground).uniform_power();
    let m_count = scenario.tbs.len();

    let mut previous: Option<UniformState<'_>> = None;
    let mut seen: Vec<BTreeSet<FhLink>> = Vec::new();
    let mut round_utilities = Vec::new();
    let mut best: Option<(f64, BTreeSet<FhLink>)> = None;
    for _ in 0..max_rounds.max(1) {
        let prev = previous.as_ref();
        let value = |u: usize, s: Slot| -> Option<f64> {
            if !eligible(scenario, Eligibility::All, u, s.tier, s.station) {
                return None;
            }
            let interference = if s.tier == Tier::Ground {
                (0..m_count)
                    .filter(|&m| m != s.station)
                    .filter(|&m| match prev {
                        None => true,
                        Some(st) => {
                            let occ = st.slot_user[layout.index(Tier::Ground, m, s.rb)];
                            occ.is_some_and(|x| x != u)
                        }
                    })
                    .map(|m| p_ground * gains.fh(Tier::Ground, m, u, s.rb))
                    .sum()
            } else {
                0.0
            };
            Some(uniform_rate(scenario, gains, s, u, interference))
        };
        let p = AssignmentProblem::build(&layout, users.clone(), slots.clone(), value);
        let fh: BTreeSet<FhLink> = p.solve(&layout)?.into_iter().collect();
        let state = UniformState::new(scenario, gains, &fh);
        let utility = state.total();
        round_utilities.push(utility);
        if best.as_ref().is_none_or(|(b, _)| utility > *b) {
            best = Some((utility, fh.clone()));
        }
        let repeated = seen.contains(&fh);
        seen.push(fh);
        previous = Some(state);
        if repeated || m_count <= 1 {
            break;
        }
    }
    let (_, fh) = best.expect("at least one round");
    let mut state = UniformState::new(scenario, gains, &fh);
    let local_moves = local_search(&mut state, Eligibility::All, local_search_passes);
    let fh = state.links();
    let utility = state.total();
    Ok(NearOptimalOutcome { fh, round_utilities, utility, local_moves })
}

/// Exact back-haul association maximizing the total back-haul rate under
/// per-station capacities.
pub fn solve_bh(scenario: &Scenario, gains: &ChannelRealization) -> Result<BTreeMap<usize, BhStation>> {
    let l_count = scenario.haps.len();
    let stations: Vec<BhStation> = BhStation::all(scenario.gateways.len()).collect();
    let capacity: Vec<usize> = stations.iter().map(|s| s.capacity(scenario)).collect();
    let total: usize = capacity.iter().sum();
    if total < l_count {
        return Err(Error::BackhaulCapacity { haps: l_count, capacity: total });
    }
    let rate: Vec<Vec<f64>> = (0..l_count)
        .map(|l| stations.iter().map(|&s| bh_link_rate(scenario, gains, s, l)).collect())
        .collect();

    let choice: Vec<usize> = if l_count <= 8 {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        let mut current = Vec::with_capacity(l_count);
        let mut load = vec![0usize; stations.len()];
        enumerate_bh(&rate, &capacity, &mut current, &mut load, 0.0, &mut best);
        best.1
    } else {
        let cols: Vec<usize> = (0..stations.len())
            .flat_map(|w| std::iter::repeat(w).take(capacity[w].min(l_count)))
            .collect();
        let mut m = ValueMatrix::zeros(l_count, cols.len());
        // Shift values so that every HAP prefers some station to none.
        let shift = 1.0 + rate.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        for l in 0..l_count {
            for (c, &w) in cols.iter().enumerate() {
                m.set(l, c, rate[l][w] + shift);
            }
        }
        let r = hungarian(&m)?;
        r.row_to_col
            .iter()
            .map(|c| cols[c.expect("capacity covers every HAP")])
            .collect()
    };
    Ok(choice.into_iter().enumerate().map(|(l, w)| (l, stations[w])).collect())
}

fn enumerate_bh(
    rate: &[Vec<f64>],
    capacity: &[usize],
    current: &mut Vec<usize>,
    load: &mut [usize],
    value: f64,
    best: &mut (f64, Vec<usize>),
) {
    let l = current.len();
    if l == rate.len() {
        if value > best.0 {
            *best = (value, current.clone());
        }
        return;
    }
    for w in 0..capacity.len() {
        if load[w] < capacity[w] {
            load[w] += 1;
            current.push(w);
            enumerate_bh(rate, capacity, current, load, value + rate[l][w], best);
            current.pop();
            load[w] -= 1;
        }
    }
}

/// Random feasible association: each user (in index order) takes a uniformly
/// chosen free eligible slot; each HAP takes a uniformly chosen back-haul
/// station with spare capacity.
pub fn random_association<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Association> {
    let layout = SlotLayout::new(scenario);
    let mut free = vec![true; layout.len()];
    let mut fh = BTreeSet::new();
    let mut options = Vec::with_capacity(layout.len());
    for u in 0..scenario.user_count() {
        options.clear();
        for i in 0..layout.len() {
            if free[i] {
                let s = layout.slot(i);
                if eligible(scenario, Eligibility::All, u, s.tier, s.station) {
                    options.push(i);
                }
            }
        }
        if options.is_empty() {
            continue;
        }
        let i = options[rng.random_range(0..options.len())];
        free[i] = false;
        fh.insert(layout.slot(i).link(u));
    }

    let stations: Vec<BhStation> = BhStation::all(scenario.gateways.len()).collect();
    let mut spare: Vec<usize> = stations.iter().map(|s| s.capacity(scenario)).collect();
    let total: usize = spare.iter().sum();
    if total < scenario.haps.len() {
        return Err(Error::BackhaulCapacity { haps: scenario.haps.len(), capacity: total });
    }
    let mut bh = BTreeMap::new();
    for l in 0..scenario.haps.len() {
        let open: Vec<usize> = (0..stations.len()).filter(|&w| spare[w] > 0).collect();
        let w = open[rng.random_range(0..open.len())];
        spare[w] -= 1;
        bh.insert(l, stations[w]);
    }
    Ok(Association { fh, bh })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::rng::{stream, Stream};
    use crate::scenario::Position3D;

    fn tiny(users: usize, tbs: usize, seed: u64) -> (Scenario, ChannelRealization) {
        let mut cfg = Config::default();
        cfg.counts.users = users;
        cfg.counts.tbs = tbs;
        cfg.counts.haps = 1;
        cfg.ground.rb_count = 2;
        cfg.air.rb_count = 2;
        cfg.space.rb_count = 2;
        let s = cfg.scenario(seed).unwrap();
        let g = ChannelRealization::sample(&s, &mut stream(seed, Stream::Fading(0))).unwrap();
        (s, g)
    }

    #[test]
    fn slot_layout_round_trip() {
        let (s, _) = tiny(3, 2, 1);
        let layout = SlotLayout::new(&s);
        assert_eq!(layout.len(), 2 * 2 + 2 + 2);
        for i in 0..layout.len() {
            let sl = layout.slot(i);
            assert_eq!(layout.index(sl.tier, sl.station, sl.rb), i);
        }
    }

    #[test]
    fn center_user_takes_only_tbs() {
        let (mut s, _) = tiny(1, 1, 1);
        s.users[0] = Position3D::ground(s.tbs[0].x + 100.0, s.tbs[0].y);
        s.params.tiers.ground.rb_count = 1;
        let g = ChannelRealization::sample(&s, &mut stream(1, Stream::Fading(0))).unwrap();
        let split = CenterEdgeSplit::compute(&s);
        assert_eq!(split.labels, vec![UserClass::Center]);
        let fh = solve_fh_fp(&s, &g, &split).unwrap();
        assert_eq!(fh.into_iter().collect::<Vec<_>>(), vec![FhLink::new(Tier::Ground, 0, 0, 0)]);
    }

    #[test]
    fn edge_user_prefers_hap() {
        let (mut s, _) = tiny(1, 1, 1);
        s.users[0] = Position3D::ground(s.haps[0].x + 1000.0, s.haps[0].y);
        let g = ChannelRealization::pinned(&s).unwrap();
        let split = CenterEdgeSplit::compute(&s);
        assert_eq!(split.labels, vec![UserClass::Edge]);
        let fh = solve_fh_fp(&s, &g, &split).unwrap();
        assert_eq!(fh.iter().next().unwrap().tier, Tier::Air);
    }

    #[test]
    fn mean_gain_path_matches_slot_matrix() {
        let mut cfg = Config::default();
        cfg.counts.users = 30;
        cfg.ground.rb_count = 3;
        cfg.air.rb_count = 4;
        cfg.space.rb_count = 5;
        for seed in 0..5 {
            let s = cfg.scenario(seed).unwrap();
            let mean = ChannelRealization::mean(&s).unwrap();
            let split = CenterEdgeSplit::compute(&s);
            let fast = solve_fh_fp(&s, &mean, &split).unwrap();
            // Same problem through the per-RB Hungarian path.
            let mut expanded = ChannelRealization::pinned(&s).unwrap();
            for tier in Tier::ALL {
                for st in 0..s.station_count(tier) {
                    for u in 0..30 {
                        for n in 0..s.tier(tier).rb_count {
                            *expanded.fh_mut(tier, st, u, n) = mean.fh(tier, st, u, 0);
                        }
                    }
                }
            }
            let slow = solve_fh_fp(&s, &expanded, &split).unwrap();
            let a = interference_free_value(&s, &mean, &fast);
            let b = interference_free_value(&s, &expanded, &slow);
            assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn near_optimal_with_one_tbs_equals_interference_free() {
        for seed in 0..10 {
            let (s, g) = tiny(4, 1, seed);
            let free = solve_fh_interference_free(&s, &g, Eligibility::All).unwrap();
            let near = solve_fh_near_optimal(&s, &g, 10, 20).unwrap();
            assert_eq!(near.fh, free);
        }
    }

    #[test]
    fn near_optimal_is_deterministic_and_not_worse_than_round_zero() {
        let (s, g) = tiny(4, 2, 3);
        let a = solve_fh_near_optimal(&s, &g, 10, 20).unwrap();
        let b = solve_fh_near_optimal(&s, &g, 10, 20).unwrap();
        assert_eq!(a, b);
        assert!(a.utility >= a.round_utilities[0]);
    }

    #[test]
    fn bh_examples() {
        let mut cfg = Config::default();
        cfg.counts.haps = 2;
        cfg.backhaul.gateway_capacity = 1;
        let mut s = cfg.scenario(1).unwrap();
        // Gateway 0 right below both HAPs dominates.
        s.haps[0] = Position3D::new(10_000.0, 0.0, 18_000.0);
        s.haps[1] = Position3D::new(0.0, 10_000.0, 18_000.0);
        let g = ChannelRealization::pinned(&s).unwrap();
        let bh = solve_bh(&s, &g).unwrap();
        // Oracle: enumerate every assignment.
        let stations: Vec<BhStation> = BhStation::all(4).collect();
        let mut best = (f64::NEG_INFINITY, (0, 0));
        for a in 0..5 {
            for b in 0..5 {
                let cap = |w: usize| stations[w].capacity(&s);
                let used = |w: usize| usize::from(a == w) + usize::from(b == w);
                if (0..5).any(|w| used(w) > cap(w)) {
                    continue;
                }
                let v = bh_link_rate(&s, &g, stations[a], 0) + bh_link_rate(&s, &g, stations[b], 1);
                if v > best.0 {
                    best = (v, (a, b));
                }
            }
        }
        assert_eq!(bh[&0], stations[best.1 .0]);
        assert_eq!(bh[&1], stations[best.1 .1]);
        assert_ne!(bh[&0], bh[&1]);

        s.params.backhaul.gateway_capacity = vec![0; 4];
        s.params.backhaul.satellite_capacity = 2;
        let bh = solve_bh(&s, &g).unwrap();
        assert!(bh.values().all(|&w| w == BhStation::Satellite));

        s.params.backhaul.satellite_capacity = 1;
        assert!(matches!(solve_bh(&s, &g), Err(Error::BackhaulCapacity { .. })));
    }

    #[test]
    fn random_association_is_feasible() {
        let mut cfg = Config::default();
        cfg.counts.users = 60;
        let s = cfg.scenario(4).unwrap();
        let g = ChannelRealization::pinned(&s).unwrap();
        let mut rng = stream(4, Stream::RandomAssociation);
        let a = random_association(&s, &mut rng).unwrap();
        assert_eq!(a.fh.len(), 60);
        let v = crate::rates::check_feasibility(&s, &g, &a, &crate::rates::PowerAllocation::default());
        assert!(v.is_empty(), "{v:?}");
        for l in a.fh.iter().filter(|l| l.tier == Tier::Air) {
            assert!(s.hap_covers(l.station, l.user));
        }
    }
}
