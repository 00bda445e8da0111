//! Declarative scenario configuration: TOML parsing with strict key
//! checking, validation, and the named presets for the three standard
//! topologies (plus desk-scale variants that finish in minutes).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelParams, FadingModel};
use crate::filters::DynamicsParams;
use crate::ftm::MeasurementNoiseModel;
use crate::phy::{FrameOverhead, PhyConfig};
use crate::rate_control::{ControllerParams, Policy};
use crate::sim::mac::MacParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Validation(String),
}

/// Topology / mobility shape of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// All stations parked at the same distance from the AP.
    EqualDistance,
    /// Station(s) moving away from the AP at constant speed, from 0 m.
    MovingStation,
    /// Random waypoint walks in a square field around the AP.
    RwpmField,
}

/// One experiment: topology, PHY/channel/noise models, controllers, seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub n_stations: u32,
    /// Station distance for `equal-distance`, in meters.
    pub distance_m: f64,
    /// Station speed for `moving-station`, in m/s.
    pub velocity_mps: f64,
    /// Field edge length for `rwpm-field`, in meters (AP at the center).
    pub area_m: f64,
    pub rwpm_max_speed_mps: f64,
    pub rwpm_max_pause_s: f64,
    /// Simulated time per run, whole seconds recommended (metrics use 1 s
    /// intervals; a trailing partial interval is dropped).
    pub duration_s: f64,
    pub seeds: Vec<u64>,
    pub controllers: Vec<Policy>,
    /// FTM probe cadence.
    pub ftm_period_s: f64,
    /// Optional +/- fractional jitter on the probe cadence. Must stay 0 when
    /// exponential smoothing runs: its trend has no meaning off-cadence.
    pub ftm_jitter_frac: f64,
    /// Evaluation aid: flip every success bit reported to controllers.
    /// Distance-driven policies must not care; feedback-driven ones will.
    pub invert_feedback: bool,
    /// Path to a fitted success-model file; bundled parameters when absent.
    pub success_model_path: Option<std::path::PathBuf>,
    pub phy: PhyConfig,
    pub overhead: FrameOverhead,
    pub channel: ChannelParams,
    pub fading: FadingModel,
    pub noise: MeasurementNoiseModel,
    pub dynamics: DynamicsParams,
    pub controller: ControllerParams,
    pub mac: MacParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: ScenarioKind::EqualDistance,
            n_stations: 10,
            distance_m: 20.0,
            velocity_mps: 1.0,
            area_m: 40.0,
            rwpm_max_speed_mps: 1.4,
            rwpm_max_pause_s: 20.0,
            duration_s: 60.0,
            seeds: (0..10).collect(),
            controllers: Policy::all().to_vec(),
            ftm_period_s: 0.5,
            ftm_jitter_frac: 0.0,
            invert_feedback: false,
            success_model_path: None,
            phy: PhyConfig::default(),
            overhead: FrameOverhead::default(),
            channel: ChannelParams::default(),
            fading: FadingModel::default(),
            noise: MeasurementNoiseModel::default(),
            dynamics: DynamicsParams::default(),
            controller: ControllerParams::default(),
            mac: MacParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Validation(msg));
        if self.n_stations == 0 {
            return fail("n_stations must be >= 1".into());
        }
        if !(self.duration_s >= 1.0 && self.duration_s.is_finite()) {
            return fail(format!("duration_s must be >= 1, got {}", self.duration_s));
        }
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.controllers.is_empty() {
            return fail("at least one controller is required".into());
        }
        if self.distance_m.is_nan() || self.distance_m < 0.0 {
            return fail(format!("distance_m must be >= 0, got {}", self.distance_m));
        }
        if self.velocity_mps.is_nan() || self.velocity_mps < 0.0 {
            return fail(format!(
                "velocity_mps must be >= 0, got {}",
                self.velocity_mps
            ));
        }
        if self.area_m.is_nan() || self.area_m <= 0.0 {
            return fail(format!("area_m must be > 0, got {}", self.area_m));
        }
        if self.rwpm_max_speed_mps.is_nan() || self.rwpm_max_speed_mps < 0.0 {
            return fail("rwpm_max_speed_mps must be >= 0".into());
        }
        if self.rwpm_max_pause_s.is_nan() || self.rwpm_max_pause_s < 0.0 {
            return fail("rwpm_max_pause_s must be >= 0".into());
        }
        if self.ftm_period_s.is_nan() || self.ftm_period_s <= 0.0 {
            return fail(format!(
                "ftm_period_s must be > 0, got {}",
                self.ftm_period_s
            ));
        }
        if !(0.0..=0.5).contains(&self.ftm_jitter_frac) {
            return fail("ftm_jitter_frac must be in [0, 0.5]".into());
        }
        if self.ftm_jitter_frac > 0.0 && self.controllers.contains(&Policy::FtmrateEs) {
            return fail(
                "exponential smoothing requires a constant probe cadence; \
                 remove ftmrate-es or set ftm_jitter_frac = 0"
                    .into(),
            );
        }
        if self.controllers.contains(&Policy::FtmrateKf)
            && matches!(self.noise, MeasurementNoiseModel::ExpGaussian { .. })
        {
            return fail(
                "the Kalman filter assumes Gaussian measurement noise; \
                 use ftmrate-pf with exp-gaussian noise"
                    .into(),
            );
        }
        if self.phy.spatial_streams != 1 {
            return fail("only single-stream operation is supported".into());
        }
        if self.phy.payload_bytes == 0 {
            return fail("payload_bytes must be positive".into());
        }
        self.noise.validate().map_err(ConfigError::Validation)?;
        self.channel
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.fading
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.dynamics
            .validate()
            .map_err(|e| ConfigError::Validation(e.to_string()))?;
        self.controller
            .validate()
            .map_err(ConfigError::Validation)?;
        self.mac.validate().map_err(ConfigError::Validation)?;
        Ok(())
    }

    /// Number of whole metrics intervals a run will emit.
    pub fn n_intervals(&self) -> usize {
        self.duration_s.floor() as usize
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses and validates a TOML scenario document. Unknown keys are rejected;
/// missing keys take the defaults above (an empty document is the default
/// 20 m equal-distance scenario with ten seeds).
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig =
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Named presets: the three standard topologies at full scale, plus
/// `-desk` variants small enough for a laptop run.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    let base = ScenarioConfig::default();
    let cfg = match name {
        "paper/equal-distance-0m" => ScenarioConfig {
            scenario: ScenarioKind::EqualDistance,
            n_stations: 10,
            distance_m: 0.0,
            duration_s: 150.0,
            seeds: (0..10).collect(),
            ..base
        },
        "paper/equal-distance-20m" => ScenarioConfig {
            scenario: ScenarioKind::EqualDistance,
            n_stations: 10,
            distance_m: 20.0,
            duration_s: 150.0,
            seeds: (0..10).collect(),
            ..base
        },
        "paper/moving-station-1ms" => ScenarioConfig {
            scenario: ScenarioKind::MovingStation,
            n_stations: 1,
            velocity_mps: 1.0,
            duration_s: 50.0,
            seeds: (0..15).collect(),
            ..base
        },
        "paper/moving-station-2ms" => ScenarioConfig {
            scenario: ScenarioKind::MovingStation,
            n_stations: 1,
            velocity_mps: 2.0,
            duration_s: 25.0,
            seeds: (0..15).collect(),
            ..base
        },
        "paper/rwpm" => ScenarioConfig {
            scenario: ScenarioKind::RwpmField,
            n_stations: 10,
            duration_s: 1000.0,
            seeds: (0..40).collect(),
            ..base
        },
        "paper/equal-distance-0m-desk" => ScenarioConfig {
            scenario: ScenarioKind::EqualDistance,
            n_stations: 10,
            distance_m: 0.0,
            duration_s: 60.0,
            seeds: (0..10).collect(),
            ..base
        },
        "paper/equal-distance-20m-desk" => ScenarioConfig {
            scenario: ScenarioKind::EqualDistance,
            n_stations: 10,
            distance_m: 20.0,
            duration_s: 60.0,
            seeds: (0..10).collect(),
            ..base
        },
        "paper/moving-station-2ms-desk" => ScenarioConfig {
            scenario: ScenarioKind::MovingStation,
            n_stations: 1,
            velocity_mps: 2.0,
            duration_s: 25.0,
            seeds: (0..10).collect(),
            ..base
        },
        "paper/rwpm-desk" => ScenarioConfig {
            scenario: ScenarioKind::RwpmField,
            n_stations: 10,
            duration_s: 100.0,
            seeds: (0..20).collect(),
            ..base
        },
        _ => return None,
    };
    debug_assert!(cfg.validate().is_ok());
    Some(cfg)
}

/// Preset names with one-line summaries, in display order.
pub fn preset_catalog() -> Vec<(&'static str, &'static str)> {
    vec![
        (
            "paper/equal-distance-0m",
            "10 co-located stations, 150 s, 10 seeds",
        ),
        (
            "paper/equal-distance-20m",
            "10 stations at 20 m, 150 s, 10 seeds",
        ),
        (
            "paper/moving-station-1ms",
            "1 station departing at 1 m/s, 50 s, 15 seeds",
        ),
        (
            "paper/moving-station-2ms",
            "1 station departing at 2 m/s, 25 s, 15 seeds",
        ),
        (
            "paper/rwpm",
            "10 random-waypoint stations in 40x40 m, 1000 s, 40 seeds",
        ),
        (
            "paper/equal-distance-0m-desk",
            "desk scale: 10 co-located stations, 60 s, 10 seeds",
        ),
        (
            "paper/equal-distance-20m-desk",
            "desk scale: 10 stations at 20 m, 60 s, 10 seeds",
        ),
        (
            "paper/moving-station-2ms-desk",
            "desk scale: 1 station at 2 m/s, 25 s, 10 seeds",
        ),
        (
            "paper/rwpm-desk",
            "desk scale: 10 RWPM stations, 100 s, 20 seeds",
        ),
    ]
}
