//! Rate controllers: the distance-driven expected-rate argmax in its three
//! filter variants, plus an oracle upper bound and two feedback-driven
//! baselines (Thompson sampling and a Minstrel-like sampler).
//!
//! The distance-driven controllers never read transmission feedback, so
//! collisions cannot bias them toward lower rates; the baselines exist to
//! show exactly that failure mode.

use std::sync::Arc;

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{snr_from_distance, ChannelParams, SuccessModelParams};
use crate::filters::{DistanceFilter, DynamicsParams, FilterError};
use crate::ftm::MeasurementNoiseModel;
use crate::phy::NUM_MCS;

#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("measurement at t={t_s}s precedes the previous one at t={last_s}s")]
    OutOfOrderMeasurement { t_s: f64, last_s: f64 },
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Which selection policy a station runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    FtmrateEs,
    FtmrateKf,
    FtmratePf,
    Oracle,
    ThompsonSampling,
    MinstrelLike,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::FtmrateEs => "ftmrate-es",
            Policy::FtmrateKf => "ftmrate-kf",
            Policy::FtmratePf => "ftmrate-pf",
            Policy::Oracle => "oracle",
            Policy::ThompsonSampling => "thompson-sampling",
            Policy::MinstrelLike => "minstrel-like",
        }
    }

    pub fn all() -> [Policy; 6] {
        [
            Policy::FtmrateEs,
            Policy::FtmrateKf,
            Policy::FtmratePf,
            Policy::Oracle,
            Policy::ThompsonSampling,
            Policy::MinstrelLike,
        ]
    }

    /// Distance-driven policies ignore transmission feedback entirely.
    pub fn uses_feedback(self) -> bool {
        matches!(self, Policy::ThompsonSampling | Policy::MinstrelLike)
    }
}

/// Outcome of one transmission, as reported back to a controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TxFeedback {
    pub mcs: u32,
    pub success: bool,
    pub time_s: f64,
}

/// Everything a controller may consult when picking an MCS. Only the oracle
/// reads the true distance.
#[derive(Debug, Clone, Copy)]
pub struct SelectContext {
    pub now_s: f64,
    pub true_distance_m: f64,
}

fn argmax_lowest_tie(values: &[f64; NUM_MCS]) -> u32 {
    let mut best = 0usize;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best as u32
}

/// Expected-rate argmax over posterior distance samples: for each MCS,
/// average `rate * success_probability(snr(sample), mcs)` over the samples
/// and return the index of the best mean. Ties break toward the lower MCS.
///
/// Samples may be negative or zero; the SNR mapping clamps them.
pub fn select_mcs_from_samples(
    distance_samples: &[f64],
    channel: &ChannelParams,
    success: &SuccessModelParams,
    rates: &[f64; NUM_MCS],
) -> u32 {
    assert!(!distance_samples.is_empty(), "need at least one sample");
    let mut totals = [0.0f64; NUM_MCS];
    for &rho in distance_samples {
        let gamma = snr_from_distance(rho, channel);
        for (mcs, total) in totals.iter_mut().enumerate() {
            *total += rates[mcs] * success.curves[mcs].evaluate(gamma);
        }
    }
    argmax_lowest_tie(&totals)
}

/// Precomputed expected-rate curves on a dense SNR grid.
///
/// Controllers evaluate thousands of curve points per transmission; linear
/// interpolation on a 0.02 dB grid reproduces the exact argmax (verified by
/// test) at a fraction of the cost.
#[derive(Debug)]
pub struct ExpectedRateModel {
    channel: ChannelParams,
    success: SuccessModelParams,
    rates: [f64; NUM_MCS],
    grid_min_db: f64,
    grid_step_db: f64,
    table: Vec<[f64; NUM_MCS]>,
}

impl ExpectedRateModel {
    const GRID_MIN_DB: f64 = -40.0;
    const GRID_MAX_DB: f64 = 110.0;
    const GRID_STEP_DB: f64 = 0.02;

    pub fn new(channel: ChannelParams, success: SuccessModelParams, rates: [f64; NUM_MCS]) -> Self {
        let n = ((Self::GRID_MAX_DB - Self::GRID_MIN_DB) / Self::GRID_STEP_DB).round() as usize + 1;
        let mut table = Vec::with_capacity(n);
        for i in 0..n {
            let gamma = Self::GRID_MIN_DB + i as f64 * Self::GRID_STEP_DB;
            let mut row = [0.0; NUM_MCS];
            for (mcs, cell) in row.iter_mut().enumerate() {
                *cell = rates[mcs] * success.curves[mcs].evaluate(gamma);
            }
            table.push(row);
        }
        ExpectedRateModel {
            channel,
            success,
            rates,
            grid_min_db: Self::GRID_MIN_DB,
            grid_step_db: Self::GRID_STEP_DB,
            table,
        }
    }

    pub fn channel(&self) -> &ChannelParams {
        &self.channel
    }

    pub fn success(&self) -> &SuccessModelParams {
        &self.success
    }

    pub fn rates(&self) -> &[f64; NUM_MCS] {
        &self.rates
    }

    fn accumulate(&self, distance_m: f64, totals: &mut [f64; NUM_MCS]) {
        let gamma = snr_from_distance(distance_m, &self.channel);
        let pos = (gamma - self.grid_min_db) / self.grid_step_db;
        if pos <= 0.0 {
            for (t, row) in totals.iter_mut().zip(self.table[0].iter()) {
                *t += row;
            }
            return;
        }
        let last = self.table.len() - 1;
        if pos >= last as f64 {
            for (t, row) in totals.iter_mut().zip(self.table[last].iter()) {
                *t += row;
            }
            return;
        }
        let idx = pos as usize;
        let frac = pos - idx as f64;
        let lo = &self.table[idx];
        let hi = &self.table[idx + 1];
        for mcs in 0..NUM_MCS {
            totals[mcs] += lo[mcs] + frac * (hi[mcs] - lo[mcs]);
        }
    }

    /// Fast-path equivalent of [`select_mcs_from_samples`].
    pub fn select_from_samples(&self, distance_samples: &[f64]) -> u32 {
        assert!(!distance_samples.is_empty(), "need at least one sample");
        let mut totals = [0.0f64; NUM_MCS];
        for &rho in distance_samples {
            self.accumulate(rho, &mut totals);
        }
        argmax_lowest_tie(&totals)
    }

    /// Exact point-mass selection, used by the oracle.
    pub fn select_at_distance(&self, distance_m: f64) -> u32 {
        select_mcs_from_samples(&[distance_m], &self.channel, &self.success, &self.rates)
    }
}

/// Hyperparameters shared by all controller constructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerParams {
    /// Monte-Carlo sample count for the expected-rate average.
    pub expected_rate_samples: usize,
    /// Particle count for the particle-filter variant.
    pub n_particles: usize,
    /// Smoothing weights for the exponential-smoothing variant.
    pub alpha: f64,
    pub beta: f64,
    /// Exponential forgetting rate of the Thompson sampler's Beta counts,
    /// per second. Zero keeps the textbook infinite-memory sampler.
    pub ts_decay_per_s: f64,
    /// Minstrel-like EWMA weight on new outcomes.
    pub minstrel_ewma_weight: f64,
    /// Probability that a transmission probes a non-best rate.
    pub minstrel_probe_probability: f64,
    /// How often the Minstrel-like controller re-ranks rates.
    pub minstrel_stats_interval_s: f64,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            expected_rate_samples: 256,
            n_particles: 1024,
            alpha: 0.5,
            beta: 0.5,
            ts_decay_per_s: 1.0,
            minstrel_ewma_weight: 0.25,
            minstrel_probe_probability: 0.1,
            minstrel_stats_interval_s: 0.1,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.expected_rate_samples == 0 {
            return Err("expected_rate_samples must be >= 1".into());
        }
        if self.n_particles < 2 {
            return Err("n_particles must be >= 2".into());
        }
        for (name, w) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(w > 0.0 && w < 1.0) {
                return Err(format!("{name} must be in (0, 1), got {w}"));
            }
        }
        if self.ts_decay_per_s.is_nan() || self.ts_decay_per_s < 0.0 {
            return Err("ts_decay_per_s must be >= 0".into());
        }
        if !(self.minstrel_ewma_weight > 0.0 && self.minstrel_ewma_weight <= 1.0) {
            return Err("minstrel_ewma_weight must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.minstrel_probe_probability) {
            return Err("minstrel_probe_probability must be in [0, 1]".into());
        }
        if self.minstrel_stats_interval_s.is_nan() || self.minstrel_stats_interval_s <= 0.0 {
            return Err("minstrel_stats_interval_s must be > 0".into());
        }
        Ok(())
    }
}

/// Which filter backs a distance-driven controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FilterKind {
    Smoothing,
    Kalman,
    Particle,
}

/// Distance-driven controller: filter the FTM measurements, sample the
/// predictive distance, take the expected-rate argmax.
#[derive(Debug, Clone)]
pub struct FtmRateController {
    kind: FilterKind,
    model: Arc<ExpectedRateModel>,
    dynamics: DynamicsParams,
    noise: MeasurementNoiseModel,
    n_samples: usize,
    n_particles: usize,
    alpha: f64,
    beta: f64,
    filter: Option<DistanceFilter>,
    last_measurement_s: f64,
}

impl FtmRateController {
    fn new(
        kind: FilterKind,
        model: Arc<ExpectedRateModel>,
        params: &ControllerParams,
        dynamics: DynamicsParams,
        noise: MeasurementNoiseModel,
    ) -> Self {
        FtmRateController {
            kind,
            model,
            dynamics,
            noise,
            n_samples: params.expected_rate_samples,
            n_particles: params.n_particles,
            alpha: params.alpha,
            beta: params.beta,
            filter: None,
            last_measurement_s: 0.0,
        }
    }

    fn initialize_filter<R: Rng + ?Sized>(
        &self,
        z: f64,
        rng: &mut R,
    ) -> Result<DistanceFilter, FilterError> {
        match self.kind {
            FilterKind::Smoothing => DistanceFilter::initialize_holt(z, self.alpha, self.beta),
            FilterKind::Kalman => DistanceFilter::initialize_kalman(z, &self.noise),
            FilterKind::Particle => {
                DistanceFilter::initialize_particle(z, &self.noise, self.n_particles, rng)
            }
        }
    }

    fn on_measurement<R: Rng + ?Sized>(
        &mut self,
        z: f64,
        t_s: f64,
        rng: &mut R,
    ) -> Result<(), ControlError> {
        match &mut self.filter {
            None => {
                self.filter = Some(self.initialize_filter(z, rng)?);
            }
            Some(filter) => {
                if t_s < self.last_measurement_s {
                    return Err(ControlError::OutOfOrderMeasurement {
                        t_s,
                        last_s: self.last_measurement_s,
                    });
                }
                let tau = t_s - self.last_measurement_s;
                match filter.observe(z, tau, &self.dynamics, &self.noise, rng) {
                    Ok(()) => {}
                    Err(FilterError::DegenerateWeights { .. }) => {
                        // Measurement incompatible with the whole population:
                        // restart the filter from it.
                        self.filter = Some(self.initialize_filter(z, rng)?);
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        self.last_measurement_s = t_s;
        Ok(())
    }

    fn select<R: Rng + ?Sized>(&self, now_s: f64, rng: &mut R) -> u32 {
        let Some(filter) = &self.filter else {
            // No ranging data yet: stay on the most robust rate.
            return 0;
        };
        let tau = (now_s - self.last_measurement_s).max(0.0);
        let samples = filter.predict_distance(tau, self.n_samples, &self.dynamics, rng);
        self.model.select_from_samples(&samples)
    }
}

/// Upper-bound baseline: selects from the true distance through the same
/// channel model, ignoring fading.
#[derive(Debug, Clone)]
pub struct OracleController {
    model: Arc<ExpectedRateModel>,
}

/// Per-MCS Beta posterior over frame success, with optional exponential
/// forgetting so the sampler keeps adapting in non-stationary conditions.
#[derive(Debug, Clone)]
pub struct ThompsonSampler {
    model: Arc<ExpectedRateModel>,
    successes: [f64; NUM_MCS],
    failures: [f64; NUM_MCS],
    decay_per_s: f64,
    last_feedback_s: f64,
}

impl ThompsonSampler {
    fn on_feedback(&mut self, fb: &TxFeedback) {
        if fb.mcs as usize >= NUM_MCS {
            return;
        }
        if self.decay_per_s > 0.0 {
            let dt = (fb.time_s - self.last_feedback_s).max(0.0);
            let factor = (-self.decay_per_s * dt).exp();
            for i in 0..NUM_MCS {
                self.successes[i] *= factor;
                self.failures[i] *= factor;
            }
        }
        self.last_feedback_s = fb.time_s;
        if fb.success {
            self.successes[fb.mcs as usize] += 1.0;
        } else {
            self.failures[fb.mcs as usize] += 1.0;
        }
    }

    fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let mut scores = [0.0f64; NUM_MCS];
        for (mcs, score) in scores.iter_mut().enumerate() {
            let beta = rand_distr::Beta::new(1.0 + self.successes[mcs], 1.0 + self.failures[mcs])
                .expect("valid Beta parameters");
            let sampled_success: f64 = beta.sample(rng);
            *score = self.model.rates()[mcs] * sampled_success;
        }
        argmax_lowest_tie(&scores)
    }

    pub fn posterior_counts(&self, mcs: u32) -> (f64, f64) {
        (
            1.0 + self.successes[mcs as usize],
            1.0 + self.failures[mcs as usize],
        )
    }
}

/// Simplified Minstrel: EWMA success per rate, best expected throughput,
/// periodic re-ranking, and probabilistic probing of non-best rates.
#[derive(Debug, Clone)]
pub struct MinstrelLike {
    model: Arc<ExpectedRateModel>,
    ewma_success: [f64; NUM_MCS],
    ewma_weight: f64,
    probe_probability: f64,
    stats_interval_s: f64,
    best: usize,
    last_rank_s: f64,
}

impl MinstrelLike {
    fn rank(&self) -> usize {
        let mut scores = [0.0f64; NUM_MCS];
        for (mcs, score) in scores.iter_mut().enumerate() {
            *score = self.model.rates()[mcs] * self.ewma_success[mcs];
        }
        argmax_lowest_tie(&scores) as usize
    }

    fn on_feedback(&mut self, fb: &TxFeedback) {
        if fb.mcs as usize >= NUM_MCS {
            return;
        }
        let outcome = if fb.success { 1.0 } else { 0.0 };
        let w = self.ewma_weight;
        self.ewma_success[fb.mcs as usize] =
            (1.0 - w) * self.ewma_success[fb.mcs as usize] + w * outcome;
    }

    fn select<R: Rng + ?Sized>(&mut self, now_s: f64, rng: &mut R) -> u32 {
        if now_s - self.last_rank_s >= self.stats_interval_s {
            self.best = self.rank();
            self.last_rank_s = now_s;
        }
        if rng.random::<f64>() < self.probe_probability {
            // Probe a uniformly random non-best rate.
            let probe = rng.random_range(0..NUM_MCS - 1);
            let probe = if probe >= self.best { probe + 1 } else { probe };
            return probe as u32;
        }
        self.best as u32
    }

    pub fn ewma(&self, mcs: u32) -> f64 {
        self.ewma_success[mcs as usize]
    }
}

/// One station's rate controller.
#[derive(Debug, Clone)]
pub enum RateController {
    FtmRate(FtmRateController),
    Oracle(OracleController),
    Thompson(ThompsonSampler),
    Minstrel(MinstrelLike),
}

impl RateController {
    pub fn new(
        policy: Policy,
        model: Arc<ExpectedRateModel>,
        params: &ControllerParams,
        dynamics: DynamicsParams,
        noise: MeasurementNoiseModel,
    ) -> Self {
        match policy {
            Policy::FtmrateEs => RateController::FtmRate(FtmRateController::new(
                FilterKind::Smoothing,
                model,
                params,
                dynamics,
                noise,
            )),
            Policy::FtmrateKf => RateController::FtmRate(FtmRateController::new(
                FilterKind::Kalman,
                model,
                params,
                dynamics,
                noise,
            )),
            Policy::FtmratePf => RateController::FtmRate(FtmRateController::new(
                FilterKind::Particle,
                model,
                params,
                dynamics,
                noise,
            )),
            Policy::Oracle => RateController::Oracle(OracleController { model }),
            Policy::ThompsonSampling => RateController::Thompson(ThompsonSampler {
                model,
                successes: [0.0; NUM_MCS],
                failures: [0.0; NUM_MCS],
                decay_per_s: params.ts_decay_per_s,
                last_feedback_s: 0.0,
            }),
            Policy::MinstrelLike => RateController::Minstrel(MinstrelLike {
                model,
                // Optimistic start so every rate gets tried before being
                // written off.
                ewma_success: [1.0; NUM_MCS],
                ewma_weight: params.minstrel_ewma_weight,
                probe_probability: params.minstrel_probe_probability,
                stats_interval_s: params.minstrel_stats_interval_s,
                best: NUM_MCS - 1,
                last_rank_s: f64::NEG_INFINITY,
            }),
        }
    }

    pub fn policy(&self) -> Policy {
        match self {
            RateController::FtmRate(c) => match c.kind {
                FilterKind::Smoothing => Policy::FtmrateEs,
                FilterKind::Kalman => Policy::FtmrateKf,
                FilterKind::Particle => Policy::FtmratePf,
            },
            RateController::Oracle(_) => Policy::Oracle,
            RateController::Thompson(_) => Policy::ThompsonSampling,
            RateController::Minstrel(_) => Policy::MinstrelLike,
        }
    }

    /// Routes a distance measurement into the policy's filter. A no-op for
    /// policies that do not track distance.
    pub fn on_measurement<R: Rng + ?Sized>(
        &mut self,
        rho_rtt_m: f64,
        t_s: f64,
        rng: &mut R,
    ) -> Result<(), ControlError> {
        match self {
            RateController::FtmRate(c) => c.on_measurement(rho_rtt_m, t_s, rng),
            _ => Ok(()),
        }
    }

    /// Picks the MCS for a transmission starting at `ctx.now_s`.
    pub fn select_mcs<R: Rng + ?Sized>(&mut self, ctx: &SelectContext, rng: &mut R) -> u32 {
        match self {
            RateController::FtmRate(c) => c.select(ctx.now_s, rng),
            RateController::Oracle(c) => c.model.select_at_distance(ctx.true_distance_m),
            RateController::Thompson(c) => c.select(rng),
            RateController::Minstrel(c) => c.select(ctx.now_s, rng),
        }
    }

    /// Feeds a transmission outcome back. Only the sampling baselines change
    /// state; distance-driven controllers and the oracle ignore it.
    pub fn on_feedback(&mut self, fb: &TxFeedback) {
        match self {
            RateController::Thompson(c) => c.on_feedback(fb),
            RateController::Minstrel(c) => c.on_feedback(fb),
            RateController::FtmRate(_) | RateController::Oracle(_) => {}
        }
    }

    /// Distance posterior mean, when the policy has one.
    pub fn distance_estimate(&self) -> Option<f64> {
        match self {
            RateController::FtmRate(c) => c.filter.as_ref().map(|f| f.distance_mean()),
            _ => None,
        }
    }
}
