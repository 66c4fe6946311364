//! Link budgets and fading.
//!
//! A front-haul gain is `path_loss(d, f_c) * attenuation * fading`; back-haul
//! gains use the same product with Rician fading. Fading is drawn once per
//! resource block and reused across its subcarriers.

use std::f64::consts::PI;
use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rates::BhStation;
use crate::scenario::{distance, Scenario, Tier};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Links shorter than this are treated as this long.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FadingModel {
    /// Exponential power gain with unit mean.
    Rayleigh,
    /// Unit-mean Rician power gain with LoS-to-scatter ratio `kappa`.
    Rician { kappa: f64 },
    /// Nakagami-m line of sight (average power `omega0`, shape `omega2`)
    /// plus complex Gaussian scatter of average power `2 * omega1`.
    ShadowedRician { omega0: f64, omega1: f64, omega2: f64 },
}

impl FadingModel {
    pub fn validate(&self) -> std::result::Result<(), String> {
        match *self {
            FadingModel::Rayleigh => Ok(()),
            FadingModel::Rician { kappa } if kappa >= 0.0 && kappa.is_finite() => Ok(()),
            FadingModel::Rician { kappa } => Err(format!("kappa must be >= 0, got {kappa}")),
            FadingModel::ShadowedRician { omega0, omega1, omega2 } => {
                if omega0 > 0.0 && omega1 > 0.0 && omega2 > 0.0 {
                    Ok(())
                } else {
                    Err("shadowed-Rician parameters must all be positive".into())
                }
            }
        }
    }

    /// Analytic mean of the power gain.
    pub fn mean(&self) -> f64 {
        match *self {
            FadingModel::Rayleigh | FadingModel::Rician { .. } => 1.0,
            FadingModel::ShadowedRician { omega0, omega1, .. } => omega0 + 2.0 * omega1,
        }
    }
}

/// One draw of the fading power gain.
pub fn sample_fading<R: Rng + ?Sized>(model: &FadingModel, rng: &mut R) -> f64 {
    match *model {
        FadingModel::Rayleigh => Exp1.sample(rng),
        FadingModel::Rician { kappa } => {
            let los = (kappa / (kappa + 1.0)).sqrt();
            let sigma = (0.5 / (kappa + 1.0)).sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let a = los + sigma * re;
            let b = sigma * im;
            a * a + b * b
        }
        FadingModel::ShadowedRician { omega0, omega1, omega2 } => {
            let los_power = Gamma::new(omega2, omega0 / omega2)
                .expect("validated shadowed-Rician parameters")
                .sample(rng);
            let phase = rng.random_range(0.0..2.0 * PI);
            let sigma = omega1.sqrt();
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let amp = los_power.sqrt();
            let a = amp * phase.cos() + sigma * re;
            let b = amp * phase.sin() + sigma * im;
            a * a + b * b
        }
    }
}

/// Free-space path gain `(c / (4 pi d f))^2`.
pub fn path_loss(d: f64, f: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::SingularLink(d));
    }
    if !(f > 0.0) {
        return Err(Error::Frequency(f));
    }
    let g = SPEED_OF_LIGHT / (4.0 * PI * d * f);
    Ok(g * g)
}

/// Environmental attenuation gain. Ground links are unattenuated; air and
/// space links use `10^(3 d chi / (10 z))` with `z` the transmitter altitude.
pub fn attenuation_gain(tier: Tier, d: f64, z: f64, chi: f64) -> Result<f64> {
    match tier {
        Tier::Ground => Ok(1.0),
        Tier::Air | Tier::Space => {
            if !(z > 0.0) {
                return Err(Error::Altitude { tier, z });
            }
            Ok(10f64.powf(3.0 * d * chi / (10.0 * z)))
        }
    }
}

/// Deterministic part of the front-haul gain (path loss times attenuation).
pub fn fh_link_gain(scenario: &Scenario, tier: Tier, station: usize, user: usize) -> Result<f64> {
    let tx = scenario.station_position(tier, station);
    let d = distance(&tx, &scenario.users[user]).max(MIN_LINK_DISTANCE_M);
    let params = scenario.tier(tier);
    let a = attenuation_gain(tier, d, tx.z, scenario.params.attenuation_factor)?;
    Ok(path_loss(d, params.carrier_hz)? * a)
}

/// Front-haul gain with a fresh fading draw.
pub fn fh_gain<R: Rng + ?Sized>(
    scenario: &Scenario,
    tier: Tier,
    station: usize,
    user: usize,
    rng: &mut R,
) -> Result<f64> {
    let fading = sample_fading(&scenario.tier(tier).fading, rng);
    Ok(fh_link_gain(scenario, tier, station, user)? * fading)
}

/// Deterministic part of a back-haul gain. Gateway links use the air-tier
/// attenuation at the HAP altitude, satellite links the space-tier one.
pub fn bh_link_gain(scenario: &Scenario, station: BhStation, hap: usize) -> Result<f64> {
    let rx = scenario.haps[hap];
    let (tx, tier, z) = match station {
        BhStation::Satellite => (scenario.satellite, Tier::Space, scenario.satellite.z),
        BhStation::Gateway(w) => (scenario.gateways[w], Tier::Air, rx.z),
    };
    let d = distance(&tx, &rx).max(MIN_LINK_DISTANCE_M);
    let a = attenuation_gain(tier, d, z, scenario.params.attenuation_factor)?;
    Ok(path_loss(d, scenario.params.backhaul.carrier_hz)? * a)
}

pub fn bh_fading(scenario: &Scenario, station: BhStation) -> FadingModel {
    let bh = &scenario.params.backhaul;
    let kappa = match station {
        BhStation::Satellite => bh.satellite_kappa,
        BhStation::Gateway(_) => bh.gateway_kappa,
    };
    FadingModel::Rician { kappa }
}

pub fn bh_gain<R: Rng + ?Sized>(
    scenario: &Scenario,
    station: BhStation,
    hap: usize,
    rng: &mut R,
) -> Result<f64> {
    let fading = sample_fading(&bh_fading(scenario, station), rng);
    Ok(bh_link_gain(scenario, station, hap)? * fading)
}

/// Gain tables for one fading draw (or for average statistics).
///
/// Front-haul gains are stored per tier as `[station][user][rb]`. Average
/// tables keep a single entry per link that every RB shares.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    users: usize,
    stations: [usize; 3],
    rb_counts: [usize; 3],
    per_rb: bool,
    fh: [Vec<f64>; 3],
    /// `[bh station index][hap]`, satellite first.
    bh: Vec<f64>,
    haps: usize,
}

impl ChannelRealization {
    fn build(
        scenario: &Scenario,
        per_rb: bool,
        mut fh_factor: impl FnMut(Tier) -> f64,
        mut bh_factor: impl FnMut(BhStation) -> f64,
    ) -> Result<Self> {
        let users = scenario.user_count();
        let mut stations = [0; 3];
        let mut rb_counts = [0; 3];
        let mut fh: [Vec<f64>; 3] = Default::default();
        for tier in Tier::ALL {
            let t = tier.index();
            stations[t] = scenario.station_count(tier);
            rb_counts[t] = scenario.tier(tier).rb_count;
            let stored = if per_rb { rb_counts[t] } else { 1 };
            let mut table = Vec::with_capacity(stations[t] * users * stored);
            for s in 0..stations[t] {
                for u in 0..users {
                    let base = fh_link_gain(scenario, tier, s, u)?;
                    for _ in 0..stored {
                        table.push(base * fh_factor(tier));
                    }
                }
            }
            fh[t] = table;
        }
        let haps = scenario.haps.len();
        let mut bh = Vec::with_capacity((scenario.gateways.len() + 1) * haps);
        for w in BhStation::all(scenario.gateways.len()) {
            for l in 0..haps {
                bh.push(bh_link_gain(scenario, w, l)? * bh_factor(w));
            }
        }
        Ok(Self {
            users,
            stations,
            rb_counts,
            per_rb,
            fh,
            bh,
            haps,
        })
    }

    /// Draws every front-haul (per RB) and back-haul fading coefficient.
    pub fn sample<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<Self> {
        let tiers = scenario.params.tiers;
        // Draw order is part of the reproducibility contract: tiers, stations,
        // users, RBs, then back-haul stations and HAPs.
        let mut fh_draws = Vec::new();
        for tier in Tier::ALL {
            let n = scenario.station_count(tier) * scenario.user_count() * tiers.get(tier).rb_count;
            let model = tiers.get(tier).fading;
            fh_draws.push((0..n).map(|_| sample_fading(&model, rng)).collect::<Vec<f64>>());
        }
        let mut bh_draws = Vec::new();
        for w in BhStation::all(scenario.gateways.len()) {
            let model = bh_fading(scenario, w);
            for _ in 0..scenario.haps.len() {
                bh_draws.push(sample_fading(&model, rng));
            }
        }
        let mut cursors = [0usize; 3];
        let mut bh_cursor = 0;
        Self::build(
            scenario,
            true,
            |tier| {
                let t = tier.index();
                let v = fh_draws[t][cursors[t]];
                cursors[t] += 1;
                v
            },
            |_| {
                let v = bh_draws[bh_cursor];
                bh_cursor += 1;
                v
            },
        )
    }

    /// Average statistics: fading replaced by its analytic mean.
    pub fn mean(scenario: &Scenario) -> Result<Self> {
        let tiers = scenario.params.tiers;
        Self::build(
            scenario,
            false,
            |tier| tiers.get(tier).fading.mean(),
            |_| 1.0,
        )
    }

    /// Geometry only: every fading coefficient pinned to one.
    pub fn pinned(scenario: &Scenario) -> Result<Self> {
        Self::build(scenario, true, |_| 1.0, |_| 1.0)
    }

    pub fn is_per_rb(&self) -> bool {
        self.per_rb
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn station_count(&self, tier: Tier) -> usize {
        self.stations[tier.index()]
    }

    pub fn rb_count(&self, tier: Tier) -> usize {
        self.rb_counts[tier.index()]
    }

    #[inline]
    pub fn fh(&self, tier: Tier, station: usize, user: usize, rb: usize) -> f64 {
        let t = tier.index();
        if self.per_rb {
            self.fh[t][(station * self.users + user) * self.rb_counts[t] + rb]
        } else {
            self.fh[t][station * self.users + user]
        }
    }

    pub fn fh_mut(&mut self, tier: Tier, station: usize, user: usize, rb: usize) -> &mut f64 {
        let t = tier.index();
        let idx = if self.per_rb {
            (station * self.users + user) * self.rb_counts[t] + rb
        } else {
            station * self.users + user
        };
        &mut self.fh[t][idx]
    }

    #[inline]
    pub fn bh(&self, station: BhStation, hap: usize) -> f64 {
        self.bh[station.index() * self.haps + hap]
    }

    pub fn bh_mut(&mut self, station: BhStation, hap: usize) -> &mut f64 {
        &mut self.bh[station.index() * self.haps + hap]
    }

    /// Flat dump: `tier,station,user,rb,gain` then `backhaul,w,hap,,gain`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tier", "station", "user", "rb", "gain"])?;
        for tier in Tier::ALL {
            let rbs = if self.per_rb { self.rb_count(tier) } else { 1 };
            for s in 0..self.station_count(tier) {
                for u in 0..self.users {
                    for n in 0..rbs {
                        w.write_record([
                            tier.name().to_string(),
                            s.to_string(),
                            u.to_string(),
                            n.to_string(),
                            format!("{:e}", self.fh(tier, s, u, n)),
                        ])?;
                    }
                }
            }
        }
        let gateways = if self.haps == 0 { 0 } else { self.bh.len() / self.haps - 1 };
        for st in BhStation::all(gateways) {
            for l in 0..self.haps {
                w.write_record([
                    "backhaul".to_string(),
                    st.index().to_string(),
                    l.to_string(),
                    String::new(),
                    format!("{:e}", self.bh(st, l)),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::rng::{stream, Stream};

    /// Independent evaluation of the free-space formula.
    fn friis(d: f64, f: f64) -> f64 {
        let lambda = 299_792_458.0 / f;
        (lambda / (4.0 * std::f64::consts::PI * d)).powi(2)
    }

    #[test]
    fn path_loss_reference_value() {
        let g = path_loss(1000.0, 1.8e9).unwrap();
        // Independent evaluation: 1.7566153262788431e-10
        assert!((g - 1.756_615_326_278_843e-10).abs() / g < 1e-12, "{g:e}");
        assert!((g - 1.758e-10).abs() / g < 1e-3);
        assert!((g - friis(1000.0, 1.8e9)).abs() / g < 1e-12);
    }

    #[test]
    fn path_loss_inverse_square() {
        let a = path_loss(1234.0, 2.0e9).unwrap();
        let b = path_loss(2468.0, 2.0e9).unwrap();
        let c = path_loss(1234.0, 4.0e9).unwrap();
        assert!((a / b - 4.0).abs() < 1e-12);
        assert!((a / c - 4.0).abs() < 1e-12);
    }

    #[test]
    fn path_loss_rejects_zero_distance() {
        assert!(matches!(path_loss(0.0, 1e9), Err(Error::SingularLink(_))));
        assert!(path_loss(1.0, 0.0).is_err());
    }

    #[test]
    fn attenuation_examples() {
        assert_eq!(attenuation_gain(Tier::Ground, 12345.0, 25.0, 2.0).unwrap(), 1.0);
        let nadir = attenuation_gain(Tier::Air, 18_000.0, 18_000.0, 2.0).unwrap();
        assert!((nadir - 10f64.powf(0.6)).abs() < 1e-12);
        assert!((nadir - 3.981_071_705_5).abs() < 1e-9);
        assert_eq!(attenuation_gain(Tier::Air, 30_000.0, 18_000.0, 0.0).unwrap(), 1.0);
        assert!(matches!(
            attenuation_gain(Tier::Space, 1.0, 0.0, 2.0),
            Err(Error::Altitude { .. })
        ));
    }

    fn moments(model: FadingModel, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = stream(seed, Stream::Aux(0));
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..n {
            let x = sample_fading(&model, &mut rng);
            sum += x;
            sq += x * x;
        }
        let mean = sum / n as f64;
        (mean, sq / n as f64 - mean * mean)
    }

    #[test]
    fn rayleigh_unit_mean() {
        let (mean, _) = moments(FadingModel::Rayleigh, 1_000_000, 1);
        assert!((mean - 1.0).abs() < 0.005, "{mean}");
    }

    #[test]
    fn rician_pure_los_limit() {
        let (mean, var) = moments(FadingModel::Rician { kappa: 1e9 }, 10_000, 2);
        assert!((mean - 1.0).abs() < 1e-3);
        assert!(var < 1e-6, "{var}");
    }

    #[test]
    fn rician_unit_mean() {
        let (mean, _) = moments(FadingModel::Rician { kappa: 10.0 }, 1_000_000, 3);
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn shadowed_rician_mean_matches_moment_identity() {
        let model = FadingModel::ShadowedRician { omega0: 0.372, omega1: 0.0129, omega2: 7.64 };
        let (mean, _) = moments(model, 1_000_000, 4);
        let expected: f64 = 0.372 + 2.0 * 0.0129;
        assert!((expected - 0.3978).abs() < 1e-12);
        assert!((mean - expected).abs() / expected < 0.02, "{mean}");
        assert_eq!(model.mean(), expected);
    }

    fn scenario() -> Scenario {
        let cfg = Config::default();
        let mut s = cfg.scenario(1).unwrap();
        s.users = vec![crate::scenario::Position3D::ground(90_000.0, 90_000.0)];
        s
    }

    #[test]
    fn pinned_ground_gain_is_path_loss() {
        let mut s = scenario();
        s.users[0] = crate::scenario::Position3D::ground(s.tbs[0].x + 1000.0, s.tbs[0].y);
        let d = distance(&s.tbs[0], &s.users[0]);
        let g = fh_link_gain(&s, Tier::Ground, 0, 0).unwrap();
        assert_eq!(g, path_loss(d, 1.8e9).unwrap());
    }

    #[test]
    fn pinned_air_gain_at_nadir() {
        let s = scenario();
        // HAP 0 sits right above the user at 18 km.
        let g = fh_link_gain(&s, Tier::Air, 0, 0).unwrap();
        let expected = friis(18_000.0, 3.0e9) * 10f64.powf(0.6);
        assert!((g - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn backhaul_gateway_below_hap() {
        let mut s = scenario();
        s.gateways[0] = crate::scenario::Position3D::ground(s.haps[0].x, s.haps[0].y);
        let g = bh_link_gain(&s, BhStation::Gateway(0), 0).unwrap();
        let expected = friis(18_000.0, 3.4e9) * 3.981_071_705_534_973;
        assert!((g - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn backhaul_satellite_vs_gateway_ratio() {
        let mut s = scenario();
        s.gateways[0] = crate::scenario::Position3D::ground(s.haps[0].x, s.haps[0].y);
        let sat = bh_link_gain(&s, BhStation::Satellite, 0).unwrap();
        let gw = bh_link_gain(&s, BhStation::Gateway(0), 0).unwrap();
        let d_sat = 2_000_000.0 - 18_000.0;
        let a_sat = 10f64.powf(0.6 * d_sat / 2_000_000.0);
        let a_gw = 10f64.powf(0.6);
        let expected = (18_000.0 / d_sat).powi(2) * a_sat / a_gw;
        assert!((sat / gw - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn realization_is_positive_and_fresh_per_rb() {
        let cfg = Config::default();
        let mut c = cfg.clone();
        c.counts.users = 20;
        let s = c.scenario(5).unwrap();
        let mut rng = stream(5, Stream::Fading(0));
        let real = ChannelRealization::sample(&s, &mut rng).unwrap();
        for tier in Tier::ALL {
            for st in 0..s.station_count(tier) {
                for u in 0..20 {
                    for n in 0..s.tier(tier).rb_count {
                        let g = real.fh(tier, st, u, n);
                        assert!(g > 0.0 && g.is_finite());
                    }
                }
            }
        }
        assert_ne!(real.fh(Tier::Ground, 0, 0, 0), real.fh(Tier::Ground, 0, 0, 1));
        for w in BhStation::all(4) {
            for l in 0..5 {
                assert!(real.bh(w, l) > 0.0);
            }
        }
        let mut rng = stream(5, Stream::Fading(0));
        assert_eq!(real, ChannelRealization::sample(&s, &mut rng).unwrap());
    }

    #[test]
    fn rb_draws_are_uncorrelated() {
        let s = scenario();
        let mut rng = stream(9, Stream::Aux(1));
        let model = s.tier(Tier::Ground).fading;
        let n = 100_000;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|_| (sample_fading(&model, &mut rng), sample_fading(&model, &mut rng)))
            .collect();
        let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
        let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
        let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n as f64;
        let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n as f64;
        let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n as f64;
        let corr = cov / (va * vb).sqrt();
        assert!(corr.abs() < 0.02, "{corr}");
    }

    #[test]
    fn mean_table_uses_analytic_means() {
        let s = scenario();
        let mean = ChannelRealization::mean(&s).unwrap();
        assert!(!mean.is_per_rb());
        let base = fh_link_gain(&s, Tier::Space, 0, 0).unwrap();
        assert_eq!(mean.fh(Tier::Space, 0, 0, 17), base * 0.3978);
    }
}
