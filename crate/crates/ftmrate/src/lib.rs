//! Distance-based IEEE 802.11 data-rate selection.
//!
//! Stations estimate their distance from the AP using fine timing
//! measurement, track it with a state-space filter (Kalman, particle, or
//! double exponential smoothing), map the posterior through a known channel
//! model to per-MCS expected rates, and pick the argmax. Because the
//! controller never consumes transmission feedback, collisions cannot be
//! mistaken for poor channel conditions.
//!
//! The crate also ships a discrete-event single-BSS link simulator with a
//! simplified DCF, feedback-driven baseline controllers (Thompson sampling
//! and a Minstrel-like sampler), an oracle upper bound, and an experiment
//! harness that sweeps seeds and emits CSV metrics.

pub mod channel;
pub mod config;
pub mod experiment;
pub mod filters;
pub mod ftm;
pub mod phy;
pub mod rate_control;
pub mod sim;
pub mod stats;

pub use channel::{ChannelParams, FadingModel, SuccessModelParams};
pub use config::{parse_config, preset, preset_catalog, ScenarioConfig, ScenarioKind};
pub use ftm::{FtmBurstSpec, MeasurementNoiseModel};
pub use phy::{ChannelWidth, GuardInterval, PhyConfig};
pub use rate_control::Policy;
pub use sim::{run_scenario, SimOptions};
