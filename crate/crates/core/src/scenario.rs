//! Network topology: node positions, tier constants and the random user drop.
//!
//! All quantities are SI (meters, hertz, watts). Unit conversion from the
//! human-friendly configuration file happens in [`crate::config`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::FadingModel;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub const fn ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    pub fn horizontal_distance(&self, other: &Position3D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Euclidean distance in meters.
pub fn distance(a: &Position3D, b: &Position3D) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Ground,
    Air,
    Space,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Ground, Tier::Air, Tier::Space];

    pub fn index(self) -> usize {
        match self {
            Tier::Ground => 0,
            Tier::Air => 1,
            Tier::Space => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tier::Ground => "ground",
            Tier::Air => "air",
            Tier::Space => "space",
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-tier radio constants. The three tiers occupy disjoint spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    pub carrier_hz: f64,
    pub rb_bandwidth_hz: f64,
    pub rb_count: usize,
    pub peak_power_w: f64,
    pub fading: FadingModel,
}

impl TierParams {
    pub fn uniform_power(&self) -> f64 {
        self.peak_power_w / self.rb_count as f64
    }

    fn validate(&self, tier: Tier) -> Result<()> {
        let key = |k: &str| format!("{}.{}", tier.name(), k);
        if self.rb_count == 0 {
            return Err(Error::config(key("rb_count"), "must be at least 1"));
        }
        if !(self.rb_bandwidth_hz > 0.0) {
            return Err(Error::config(key("rb_bandwidth"), "must be positive"));
        }
        if !(self.peak_power_w > 0.0) {
            return Err(Error::config(key("peak_power_w"), "must be positive"));
        }
        if !(self.carrier_hz > 0.0) {
            return Err(Error::config(key("carrier"), "must be positive"));
        }
        self.fading
            .validate()
            .map_err(|reason| Error::config(key("fading"), reason))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tiers {
    pub ground: TierParams,
    pub air: TierParams,
    pub space: TierParams,
}

impl Tiers {
    pub fn get(&self, tier: Tier) -> &TierParams {
        match tier {
            Tier::Ground => &self.ground,
            Tier::Air => &self.air,
            Tier::Space => &self.space,
        }
    }

    pub fn get_mut(&mut self, tier: Tier) -> &mut TierParams {
        match tier {
            Tier::Ground => &mut self.ground,
            Tier::Air => &mut self.air,
            Tier::Space => &mut self.space,
        }
    }
}

/// Feeder links from gateways (and the satellite) to the HAPs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Backhaul {
    pub bandwidth_hz: f64,
    pub power_w: f64,
    pub carrier_hz: f64,
    pub gateway_kappa: f64,
    pub satellite_kappa: f64,
    /// Maximum number of HAPs per gateway, one entry per gateway.
    pub gateway_capacity: Vec<usize>,
    pub satellite_capacity: usize,
}

/// Everything about the network that is not a node position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub tiers: Tiers,
    pub backhaul: Backhaul,
    /// Thermal noise power spectral density (W/Hz).
    pub noise_psd_w_hz: f64,
    /// Environmental attenuation factor chi.
    pub attenuation_factor: f64,
    /// Ground radius within which a HAP can serve a user.
    pub hap_coverage_radius_m: f64,
    pub tbs_cell_radius_m: f64,
    /// Users within `center_fraction * tbs_cell_radius_m` of a TBS are center users.
    pub center_fraction: f64,
    pub area_side_m: f64,
}

impl NetworkParams {
    pub fn validate(&self) -> Result<()> {
        for tier in Tier::ALL {
            self.tiers.get(tier).validate(tier)?;
        }
        let bh = &self.backhaul;
        if !(bh.bandwidth_hz > 0.0) {
            return Err(Error::config("backhaul.bandwidth_mhz", "must be positive"));
        }
        if !(bh.power_w >= 0.0) {
            return Err(Error::config("backhaul.power_w", "must be non-negative"));
        }
        if !(bh.carrier_hz > 0.0) {
            return Err(Error::config("backhaul.carrier_ghz", "must be positive"));
        }
        if !(bh.gateway_kappa >= 0.0) {
            return Err(Error::config("backhaul.gateway_kappa", "must be non-negative"));
        }
        if !(bh.satellite_kappa >= 0.0) {
            return Err(Error::config("backhaul.satellite_kappa", "must be non-negative"));
        }
        if !(self.noise_psd_w_hz > 0.0) {
            return Err(Error::config("link.noise_psd_dbm_hz", "must be finite"));
        }
        if !(self.attenuation_factor >= 0.0) {
            return Err(Error::config("link.attenuation_factor", "must be non-negative"));
        }
        if !(self.hap_coverage_radius_m > 0.0) {
            return Err(Error::config("link.hap_coverage_radius_km", "must be positive"));
        }
        if !(self.tbs_cell_radius_m > 0.0) {
            return Err(Error::config("link.tbs_cell_radius_km", "must be positive"));
        }
        if !(self.center_fraction >= 0.0) {
            return Err(Error::config("link.center_fraction", "must be non-negative"));
        }
        if !(self.area_side_m > 0.0) {
            return Err(Error::config("area.side_km", "must be positive"));
        }
        Ok(())
    }

    pub fn center_threshold_m(&self) -> f64 {
        self.center_fraction * self.tbs_cell_radius_m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub users: Vec<Position3D>,
    pub tbs: Vec<Position3D>,
    pub haps: Vec<Position3D>,
    pub satellite: Position3D,
    pub gateways: Vec<Position3D>,
    pub params: NetworkParams,
    pub seed: u64,
}

impl Scenario {
    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn station_count(&self, tier: Tier) -> usize {
        match tier {
            Tier::Ground => self.tbs.len(),
            Tier::Air => self.haps.len(),
            Tier::Space => 1,
        }
    }

    pub fn station_position(&self, tier: Tier, station: usize) -> Position3D {
        match tier {
            Tier::Ground => self.tbs[station],
            Tier::Air => self.haps[station],
            Tier::Space => self.satellite,
        }
    }

    pub fn tier(&self, tier: Tier) -> &TierParams {
        self.params.tiers.get(tier)
    }

    /// Copy of this scenario with the HAPs moved.
    pub fn with_haps(&self, haps: Vec<Position3D>) -> Scenario {
        Scenario {
            haps,
            ..self.clone()
        }
    }

    /// Whether `user` lies inside the ground footprint of HAP `hap`.
    pub fn hap_covers(&self, hap: usize, user: usize) -> bool {
        self.haps[hap].horizontal_distance(&self.users[user]) <= self.params.hap_coverage_radius_m
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let w = self.gateways.len();
        if self.params.backhaul.gateway_capacity.len() != w {
            return Err(Error::config(
                "backhaul.gateway_capacity",
                format!("expected {w} entries, one per gateway"),
            ));
        }
        let capacity: usize = self.params.backhaul.gateway_capacity.iter().sum::<usize>()
            + self.params.backhaul.satellite_capacity;
        if capacity < self.haps.len() {
            return Err(Error::BackhaulCapacity {
                haps: self.haps.len(),
                capacity,
            });
        }
        let all = self
            .users
            .iter()
            .chain(&self.tbs)
            .chain(&self.haps)
            .chain(&self.gateways)
            .chain(std::iter::once(&self.satellite));
        for p in all {
            if !(p.x.is_finite() && p.y.is_finite() && p.z >= 0.0 && p.z.is_finite()) {
                return Err(Error::Geometry(format!("invalid node position {p:?}")));
            }
        }
        if self.users.iter().any(|u| u.z != 0.0) {
            return Err(Error::Geometry("users must be on the ground (z = 0)".into()));
        }
        if self.haps.iter().any(|h| h.z >= self.satellite.z) {
            return Err(Error::Geometry("satellite must fly above every HAP".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subarea {
    pub rect: Rect,
    pub fraction: f64,
    /// Sample only the part of `rect` not covered by the other subareas.
    pub remainder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubareaLayout {
    pub area_side_m: f64,
    pub subareas: Vec<Subarea>,
    /// Index of the subarea hosting the TBS grid.
    pub tbs_subarea: usize,
    pub tbs_height_m: f64,
    pub hap_initial: Vec<Position3D>,
    pub satellite: Position3D,
}

impl SubareaLayout {
    pub fn validate(&self) -> Result<()> {
        if self.subareas.is_empty() {
            return Err(Error::config("area.subarea", "at least one subarea is required"));
        }
        let total: f64 = self.subareas.iter().map(|s| s.fraction).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config(
                "area.subarea.fraction",
                format!("fractions sum to {total}, expected 1"),
            ));
        }
        let side = self.area_side_m;
        for (i, s) in self.subareas.iter().enumerate() {
            let key = format!("area.subarea[{i}]");
            let r = &s.rect;
            if !(r.x_max > r.x_min && r.y_max > r.y_min) {
                return Err(Error::config(key, "rectangle has zero area"));
            }
            if r.x_min < 0.0 || r.y_min < 0.0 || r.x_max > side || r.y_max > side {
                return Err(Error::config(key, "rectangle leaves the simulation area"));
            }
            if !(s.fraction >= 0.0) {
                return Err(Error::config(key, "fraction must be non-negative"));
            }
        }
        if self.tbs_subarea >= self.subareas.len() {
            return Err(Error::config("nodes.tbs_subarea", "no such subarea"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub users: usize,
    pub tbs: usize,
    pub haps: usize,
    pub gateways: usize,
}

/// Largest-remainder apportionment of `total` items over `fractions`.
///
/// Ties in the fractional parts go to the lower index.
pub fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(total.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// TBS positions on a `k x k` grid (k = ceil(sqrt(m))) with half-cell
/// margins, filled row by row.
pub fn tbs_grid(rect: &Rect, count: usize, height: f64) -> Vec<Position3D> {
    if count == 0 {
        return Vec::new();
    }
    let k = (count as f64).sqrt().ceil() as usize;
    let w = (rect.x_max - rect.x_min) / k as f64;
    let h = (rect.y_max - rect.y_min) / k as f64;
    (0..count)
        .map(|i| {
            let (row, col) = (i / k, i % k);
            Position3D::new(
                rect.x_min + (col as f64 + 0.5) * w,
                rect.y_min + (row as f64 + 0.5) * h,
                height,
            )
        })
        .collect()
}

pub fn generate_scenario(
    params: &NetworkParams,
    layout: &SubareaLayout,
    counts: Counts,
    seed: u64,
) -> Result<Scenario> {
    params.validate()?;
    layout.validate()?;
    if counts.haps > layout.hap_initial.len() {
        return Err(Error::config(
            "counts.haps",
            format!("only {} initial HAP positions configured", layout.hap_initial.len()),
        ));
    }
    if counts.gateways > 4 {
        return Err(Error::config("counts.gateways", "gateways sit on the four area corners"));
    }

    let fractions: Vec<f64> = layout.subareas.iter().map(|s| s.fraction).collect();
    let per_subarea = apportion(counts.users, &fractions);
    let mut rng = rng::stream(seed, Stream::UserDrop);
    let mut users = Vec::with_capacity(counts.users);
    for (i, (sub, &n)) in layout.subareas.iter().zip(&per_subarea).enumerate() {
        let r = sub.rect;
        let others: Vec<Rect> = layout
            .subareas
            .iter()
            .enumerate()
            .filter(|&(j, s)| j != i && !s.remainder)
            .map(|(_, s)| s.rect)
            .collect();
        let mut placed = 0;
        let mut attempts = 0usize;
        while placed < n {
            let x = rng.random_range(r.x_min..r.x_max);
            let y = rng.random_range(r.y_min..r.y_max);
            attempts += 1;
            if sub.remainder && others.iter().any(|o| o.contains(x, y)) {
                if attempts > 1000 * (n + 1) {
                    return Err(Error::config(
                        format!("area.subarea[{i}]"),
                        "remainder region is (almost) empty",
                    ));
                }
                continue;
            }
            users.push(Position3D::ground(x, y));
            placed += 1;
        }
    }

    let tbs_rect = layout.subareas[layout.tbs_subarea].rect;
    let side = layout.area_side_m;
    let corners = [
        Position3D::ground(0.0, 0.0),
        Position3D::ground(side, 0.0),
        Position3D::ground(0.0, side),
        Position3D::ground(side, side),
    ];
    let mut params = params.clone();
    params.area_side_m = side;
    if params.backhaul.gateway_capacity.len() != counts.gateways {
        let per = params.backhaul.gateway_capacity.first().copied().unwrap_or(0);
        params.backhaul.gateway_capacity = vec![per; counts.gateways];
    }
    let scenario = Scenario {
        users,
        tbs: tbs_grid(&tbs_rect, counts.tbs, layout.tbs_height_m),
        haps: layout.hap_initial[..counts.haps].to_vec(),
        satellite: layout.satellite,
        gateways: corners[..counts.gateways].to_vec(),
        params,
        seed,
    };
    scenario.validate()?;
    Ok(scenario)
}
