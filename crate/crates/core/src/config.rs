//! TOML configuration.
//!
//! The file uses engineering units (km, GHz, kHz, dBm/Hz); everything is
//! converted to SI when the scenario is built. Unknown keys are rejected and
//! every range error names the offending key.

use serde::{Deserialize, Serialize};

use crate::channel::FadingModel;
use crate::error::{Error, Result};
use crate::scenario::{
    generate_scenario, Backhaul, Counts, NetworkParams, Position3D, Rect, Scenario, Subarea,
    SubareaLayout, TierParams, Tiers,
};

const KM: f64 = 1e3;
const GHZ: f64 = 1e9;
const KHZ: f64 = 1e3;
const MHZ: f64 = 1e6;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub area: AreaConfig,
    pub counts: CountsConfig,
    pub nodes: NodesConfig,
    pub ground: TierConfig,
    pub air: TierConfig,
    pub space: TierConfig,
    pub backhaul: BackhaulConfig,
    pub link: LinkConfig,
    pub placement: PlacementConfig,
    pub solver: SolverConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AreaConfig {
    pub side_km: f64,
    pub subarea: Vec<SubareaConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubareaConfig {
    pub x_km: [f64; 2],
    pub y_km: [f64; 2],
    pub fraction: f64,
    #[serde(default)]
    pub remainder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountsConfig {
    pub users: usize,
    pub tbs: usize,
    pub haps: usize,
    pub gateways: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NodesConfig {
    pub tbs_subarea: usize,
    pub tbs_height_m: f64,
    pub hap_initial_km: Vec<[f64; 3]>,
    pub satellite_km: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierConfig {
    pub carrier_ghz: f64,
    pub rb_bandwidth_khz: f64,
    pub rb_count: usize,
    pub peak_power_w: f64,
    pub fading: FadingModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackhaulConfig {
    pub bandwidth_mhz: f64,
    pub power_w: f64,
    pub carrier_ghz: f64,
    pub gateway_kappa: f64,
    pub satellite_kappa: f64,
    /// HAPs per gateway; one value applies to every gateway.
    pub gateway_capacity: usize,
    pub satellite_capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkConfig {
    pub noise_psd_dbm_hz: f64,
    pub attenuation_factor: f64,
    pub hap_coverage_radius_km: f64,
    pub tbs_cell_radius_km: f64,
    pub center_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Sweep,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub enabled: bool,
    pub candidates: usize,
    pub initial_radius_km: f64,
    pub max_iterations: usize,
    pub min_radius_m: f64,
    pub mode: SearchMode,
    /// Re-optimize powers for every candidate instead of using uniform power.
    pub full_power: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverPath {
    NearOptimal,
    FrequencyPartitioning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Msu,
    Mmu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    None,
    UniformPower,
    RandomAssociation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BhCapBandwidth {
    Ground,
    Air,
    Space,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub path: SolverPath,
    pub utility: UtilityKind,
    pub baseline: Baseline,
    pub max_rounds: usize,
    pub local_search_passes: usize,
    pub sca_tol: f64,
    pub sca_max_iter: usize,
    pub inner_max_steps: usize,
    pub mmu_rel_tol: f64,
    /// Which tier's RB bandwidth enters the approximated backhaul cap.
    pub bh_cap_bandwidth: BhCapBandwidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    Users,
    BackhaulBandwidth,
    HapPower,
    BackhaulPower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub sweep_variable: SweepVariable,
    /// Grid values in config units (users, MHz, W, W).
    pub sweep_values: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            area: AreaConfig::default(),
            counts: CountsConfig::default(),
            nodes: NodesConfig::default(),
            ground: TierConfig {
                carrier_ghz: 1.8,
                // Literal table value; 180 kHz (an LTE RB) is the likely intent.
                rb_bandwidth_khz: 1.8,
                rb_count: 50,
                peak_power_w: 40.0,
                fading: FadingModel::Rayleigh,
            },
            air: TierConfig {
                carrier_ghz: 3.0,
                rb_bandwidth_khz: 1000.0,
                rb_count: 100,
                peak_power_w: 100.0,
                fading: FadingModel::Rician { kappa: 10.0 },
            },
            space: TierConfig {
                carrier_ghz: 5.0,
                rb_bandwidth_khz: 2000.0,
                rb_count: 200,
                peak_power_w: 250.0,
                fading: FadingModel::ShadowedRician {
                    omega0: 0.372,
                    omega1: 0.0129,
                    omega2: 7.64,
                },
            },
            backhaul: BackhaulConfig::default(),
            link: LinkConfig::default(),
            placement: PlacementConfig::default(),
            solver: SolverConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl Default for AreaConfig {
    fn default() -> Self {
        Self {
            side_km: 180.0,
            subarea: vec![
                SubareaConfig {
                    x_km: [75.0, 105.0],
                    y_km: [0.0, 30.0],
                    fraction: 0.4,
                    remainder: false,
                },
                SubareaConfig {
                    x_km: [75.0, 105.0],
                    y_km: [150.0, 180.0],
                    fraction: 0.3,
                    remainder: false,
                },
                SubareaConfig {
                    x_km: [0.0, 180.0],
                    y_km: [0.0, 180.0],
                    fraction: 0.3,
                    remainder: true,
                },
            ],
        }
    }
}

impl Default for CountsConfig {
    fn default() -> Self {
        Self {
            users: 400,
            tbs: 9,
            haps: 5,
            gateways: 4,
        }
    }
}

impl Default for NodesConfig {
    fn default() -> Self {
        Self {
            tbs_subarea: 0,
            tbs_height_m: 25.0,
            hap_initial_km: vec![
                [90.0, 90.0, 18.0],
                [30.0, 30.0, 18.0],
                [150.0, 30.0, 18.0],
                [30.0, 150.0, 18.0],
                [150.0, 150.0, 18.0],
            ],
            satellite_km: [90.0, 90.0, 2000.0],
        }
    }
}

impl Default for BackhaulConfig {
    fn default() -> Self {
        Self {
            bandwidth_mhz: 4.0,
            power_w: 40.0,
            carrier_ghz: 3.4,
            gateway_kappa: 10.0,
            satellite_kappa: 10.0,
            gateway_capacity: 2,
            satellite_capacity: 5,
        }
    }
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self {
            noise_psd_dbm_hz: -174.0,
            attenuation_factor: 2.0,
            hap_coverage_radius_km: 30.0,
            tbs_cell_radius_km: 5.0,
            center_fraction: 0.8,
        }
    }
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            candidates: 8,
            initial_radius_km: 45.0,
            max_iterations: 15,
            min_radius_m: 0.0,
            mode: SearchMode::Sweep,
            full_power: false,
        }
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            path: SolverPath::FrequencyPartitioning,
            utility: UtilityKind::Msu,
            baseline: Baseline::None,
            max_rounds: 10,
            local_search_passes: 20,
            sca_tol: 1e-6,
            sca_max_iter: 50,
            inner_max_steps: 500,
            mmu_rel_tol: 1e-6,
            bh_cap_bandwidth: BhCapBandwidth::Air,
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: (1..=20).collect(),
            sweep_variable: SweepVariable::Users,
            sweep_values: vec![100.0, 200.0, 400.0],
        }
    }
}

fn km3(p: [f64; 3]) -> Position3D {
    Position3D::new(p[0] * KM, p[1] * KM, p[2] * KM)
}

impl TierConfig {
    fn to_params(&self) -> TierParams {
        TierParams {
            carrier_hz: self.carrier_ghz * GHZ,
            rb_bandwidth_hz: self.rb_bandwidth_khz * KHZ,
            rb_count: self.rb_count,
            peak_power_w: self.peak_power_w,
            fading: self.fading,
        }
    }
}

#[derive(Deserialize)]
struct ManifestShape {
    config: Config,
}

impl Config {
    /// Parses a configuration file, or a run manifest that embeds one under
    /// its `[config]` table.
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let cfg = if value.contains_key("config") && value.contains_key("run") {
            let shape: ManifestShape =
                toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
            shape.config
        } else {
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be positive and finite, got {v}")))
            }
        };
        positive("area.side_km", self.area.side_km)?;
        for (name, t) in [("ground", &self.ground), ("air", &self.air), ("space", &self.space)] {
            positive(&format!("{name}.carrier_ghz"), t.carrier_ghz)?;
            positive(&format!("{name}.rb_bandwidth_khz"), t.rb_bandwidth_khz)?;
            positive(&format!("{name}.peak_power_w"), t.peak_power_w)?;
            if t.rb_count == 0 {
                return Err(Error::config(format!("{name}.rb_count"), "must be at least 1"));
            }
            t.fading
                .validate()
                .map_err(|r| Error::config(format!("{name}.fading"), r))?;
        }
        positive("backhaul.bandwidth_mhz", self.backhaul.bandwidth_mhz)?;
        positive("backhaul.carrier_ghz", self.backhaul.carrier_ghz)?;
        if !(self.backhaul.power_w >= 0.0) {
            return Err(Error::config("backhaul.power_w", "must be non-negative"));
        }
        if !self.link.noise_psd_dbm_hz.is_finite() {
            return Err(Error::config("link.noise_psd_dbm_hz", "must be finite"));
        }
        if !(self.link.attenuation_factor >= 0.0) {
            return Err(Error::config("link.attenuation_factor", "must be non-negative"));
        }
        positive("link.hap_coverage_radius_km", self.link.hap_coverage_radius_km)?;
        positive("link.tbs_cell_radius_km", self.link.tbs_cell_radius_km)?;
        positive("placement.initial_radius_km", self.placement.initial_radius_km)?;
        if self.placement.candidates == 0 {
            return Err(Error::config("placement.candidates", "must be at least 1"));
        }
        if self.placement.max_iterations == 0 {
            return Err(Error::config("placement.max_iterations", "must be at least 1"));
        }
        positive("solver.sca_tol", self.solver.sca_tol)?;
        positive("solver.mmu_rel_tol", self.solver.mmu_rel_tol)?;
        if self.solver.sca_max_iter == 0 {
            return Err(Error::config("solver.sca_max_iter", "must be at least 1"));
        }
        if self.experiment.seeds.is_empty() {
            return Err(Error::config("experiment.seeds", "must not be empty"));
        }
        let mut seeds = self.experiment.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("experiment.seeds", "seeds must be distinct"));
        }
        if self.experiment.sweep_values.is_empty() {
            return Err(Error::config("experiment.sweep_values", "grid must not be empty"));
        }
        if self.experiment.sweep_values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::config("experiment.sweep_values", "values must be non-negative"));
        }
        self.network_params()?.validate()?;
        self.layout()?.validate()?;
        Ok(())
    }

    pub fn network_params(&self) -> Result<NetworkParams> {
        Ok(NetworkParams {
            tiers: Tiers {
                ground: self.ground.to_params(),
                air: self.air.to_params(),
                space: self.space.to_params(),
            },
            backhaul: Backhaul {
                bandwidth_hz: self.backhaul.bandwidth_mhz * MHZ,
                power_w: self.backhaul.power_w,
                carrier_hz: self.backhaul.carrier_ghz * GHZ,
                gateway_kappa: self.backhaul.gateway_kappa,
                satellite_kappa: self.backhaul.satellite_kappa,
                gateway_capacity: vec![self.backhaul.gateway_capacity; self.counts.gateways],
                satellite_capacity: self.backhaul.satellite_capacity,
            },
            noise_psd_w_hz: dbm_to_watts(self.link.noise_psd_dbm_hz),
            attenuation_factor: self.link.attenuation_factor,
            hap_coverage_radius_m: self.link.hap_coverage_radius_km * KM,
            tbs_cell_radius_m: self.link.tbs_cell_radius_km * KM,
            center_fraction: self.link.center_fraction,
            area_side_m: self.area.side_km * KM,
        })
    }

    pub fn layout(&self) -> Result<SubareaLayout> {
        Ok(SubareaLayout {
            area_side_m: self.area.side_km * KM,
            subareas: self
                .area
                .subarea
                .iter()
                .map(|s| Subarea {
                    rect: Rect {
                        x_min: s.x_km[0] * KM,
                        x_max: s.x_km[1] * KM,
                        y_min: s.y_km[0] * KM,
                        y_max: s.y_km[1] * KM,
                    },
                    fraction: s.fraction,
                    remainder: s.remainder,
                })
                .collect(),
            tbs_subarea: self.nodes.tbs_subarea,
            tbs_height_m: self.nodes.tbs_height_m,
            hap_initial: self.nodes.hap_initial_km.iter().copied().map(km3).collect(),
            satellite: km3(self.nodes.satellite_km),
        })
    }

    pub fn counts(&self) -> Counts {
        Counts {
            users: self.counts.users,
            tbs: self.counts.tbs,
            haps: self.counts.haps,
            gateways: self.counts.gateways,
        }
    }

    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        generate_scenario(&self.network_params()?, &self.layout()?, self.counts(), seed)
    }

    /// Applies one sweep grid value (in config units).
    pub fn apply_sweep(&mut self, variable: SweepVariable, value: f64) {
        match variable {
            SweepVariable::Users => self.counts.users = value.round() as usize,
            SweepVariable::BackhaulBandwidth => self.backhaul.bandwidth_mhz = value,
            SweepVariable::HapPower => self.air.peak_power_w = value,
            SweepVariable::BackhaulPower => self.backhaul.power_w = value,
        }
    }
}
