//! Distance-tracking filters over the latent state (radial velocity,
//! distance).
//!
//! The state evolves as an integrated Wiener velocity plus a distance random
//! walk; sampling that continuous process at interval `tau` gives an exact
//! linear-Gaussian transition whose noise covariance is
//! [`transition_covariance`]. Three posteriors share one interface: a Kalman
//! filter (exact for Gaussian measurement noise), a bootstrap particle filter
//! (any noise density), and Holt double exponential smoothing (point
//! estimates only).
//!
//! State ordering is `(velocity, distance)` everywhere, matching the
//! covariance layout; tests pin this.

pub mod kalman;
pub mod particle;
pub mod smoothing;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ftm::MeasurementNoiseModel;
pub use kalman::GaussianState;
pub use particle::ParticlePopulation;
pub use smoothing::HoltState;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("elapsed time must be non-negative, got {0}")]
    NegativeTau(f64),
    #[error(
        "all particle weights vanished for measurement {measurement_m} m \
         (population spans [{population_min_m}, {population_max_m}] m)"
    )]
    DegenerateWeights {
        measurement_m: f64,
        population_min_m: f64,
        population_max_m: f64,
    },
    #[error("the Kalman filter requires Gaussian measurement noise")]
    KalmanNeedsGaussian,
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
}

/// Process-noise intensities of the mobility model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsParams {
    /// Velocity variation in (m/s)/sqrt(s).
    pub sigma_velocity: f64,
    /// Distance variation in m/sqrt(s).
    pub sigma_distance: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        DynamicsParams {
            sigma_velocity: 0.5,
            sigma_distance: 0.1,
        }
    }
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.sigma_velocity >= 0.0 && self.sigma_velocity.is_finite()) {
            return Err(FilterError::InvalidParameter(format!(
                "sigma_velocity must be finite and >= 0, got {}",
                self.sigma_velocity
            )));
        }
        if !(self.sigma_distance >= 0.0 && self.sigma_distance.is_finite()) {
            return Err(FilterError::InvalidParameter(format!(
                "sigma_distance must be finite and >= 0, got {}",
                self.sigma_distance
            )));
        }
        Ok(())
    }
}

/// Symmetric 2x2 matrix `[[a, b], [b, d]]` over (velocity, distance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl std::ops::Add for Mat2 {
    type Output = Mat2;

    fn add(self, other: Mat2) -> Mat2 {
        Mat2 {
            a: self.a + other.a,
            b: self.b + other.b,
            d: self.d + other.d,
        }
    }
}

impl Mat2 {
    pub const ZERO: Mat2 = Mat2 {
        a: 0.0,
        b: 0.0,
        d: 0.0,
    };

    pub fn diagonal(a: f64, d: f64) -> Mat2 {
        Mat2 { a, b: 0.0, d }
    }

    /// Eigenvalues, smaller first.
    pub fn eigenvalues(self) -> (f64, f64) {
        let mid = 0.5 * (self.a + self.d);
        let radius = (0.25 * (self.a - self.d).powi(2) + self.b * self.b).sqrt();
        (mid - radius, mid + radius)
    }

    pub fn trace(self) -> f64 {
        self.a + self.d
    }

    pub fn determinant(self) -> f64 {
        self.a * self.d - self.b * self.b
    }

    /// Lower Cholesky factor `[[l11, 0], [l21, l22]]`; tolerates zero rows so
    /// degenerate dynamics (either sigma at 0) stay sampleable.
    pub fn cholesky(self) -> (f64, f64, f64) {
        if self.a <= 0.0 {
            return (0.0, 0.0, self.d.max(0.0).sqrt());
        }
        let l11 = self.a.sqrt();
        let l21 = self.b / l11;
        let l22 = (self.d - l21 * l21).max(0.0).sqrt();
        (l11, l21, l22)
    }
}

/// Covariance of the exact discretized transition over elapsed time `tau`:
///
/// ```text
/// Q = [ s_v^2 t          s_v^2 t^2 / 2                ]
///     [ s_v^2 t^2 / 2    t (s_v^2 t^2 / 3 + s_d^2)    ]
/// ```
///
/// Symmetric PSD for every `tau >= 0`; setting `sigma_velocity = 0` reduces
/// the model to a pure random walk on distance.
pub fn transition_covariance(tau: f64, dynamics: &DynamicsParams) -> Result<Mat2, FilterError> {
    if tau < 0.0 {
        return Err(FilterError::NegativeTau(tau));
    }
    let sv2 = dynamics.sigma_velocity * dynamics.sigma_velocity;
    let sd2 = dynamics.sigma_distance * dynamics.sigma_distance;
    Ok(Mat2 {
        a: sv2 * tau,
        b: sv2 * tau * tau / 2.0,
        d: tau * (sv2 * tau * tau / 3.0 + sd2),
    })
}

/// One station's distance posterior, in whichever representation its policy
/// uses.
#[derive(Debug, Clone)]
pub enum DistanceFilter {
    Kalman {
        state: GaussianState,
        /// Standard deviation of the Gaussian measurement noise.
        measurement_sigma: f64,
    },
    Particle {
        population: ParticlePopulation,
    },
    Holt {
        state: HoltState,
    },
}

impl DistanceFilter {
    /// Builds a filter anchored on the first measurement: the Kalman prior is
    /// mean `(0, z)` with covariance `diag(1, measurement variance)`, the
    /// particle population is drawn from that same Gaussian (recentred by the
    /// noise mean for asymmetric noise), and smoothing starts at level `z`
    /// with zero trend.
    pub fn initialize_kalman(z: f64, noise: &MeasurementNoiseModel) -> Result<Self, FilterError> {
        let sigma = match *noise {
            MeasurementNoiseModel::Gaussian { sigma_m } if sigma_m > 0.0 => sigma_m,
            MeasurementNoiseModel::Gaussian { .. } => {
                return Err(FilterError::InvalidParameter(
                    "kalman filter needs gaussian sigma > 0".to_owned(),
                ))
            }
            MeasurementNoiseModel::ExpGaussian { .. } => {
                return Err(FilterError::KalmanNeedsGaussian)
            }
        };
        Ok(DistanceFilter::Kalman {
            state: GaussianState {
                mean: [0.0, z],
                covariance: Mat2::diagonal(1.0, sigma * sigma),
            },
            measurement_sigma: sigma,
        })
    }

    pub fn initialize_particle<R: Rng + ?Sized>(
        z: f64,
        noise: &MeasurementNoiseModel,
        n_particles: usize,
        rng: &mut R,
    ) -> Result<Self, FilterError> {
        if n_particles < 2 {
            return Err(FilterError::InvalidParameter(
                "need at least 2 particles".to_owned(),
            ));
        }
        let variance = match *noise {
            MeasurementNoiseModel::Gaussian { sigma_m } if sigma_m > 0.0 => sigma_m * sigma_m,
            MeasurementNoiseModel::Gaussian { .. } => {
                return Err(FilterError::InvalidParameter(
                    "particle filter needs a noise density with sigma > 0".to_owned(),
                ))
            }
            MeasurementNoiseModel::ExpGaussian {
                sigma_m,
                rate_per_m,
                ..
            } => sigma_m * sigma_m + 1.0 / (rate_per_m * rate_per_m),
        };
        let center = z - noise.mean_error();
        Ok(DistanceFilter::Particle {
            population: ParticlePopulation::from_gaussian(
                [0.0, center],
                Mat2::diagonal(1.0, variance),
                n_particles,
                rng,
            ),
        })
    }

    pub fn initialize_holt(z: f64, alpha: f64, beta: f64) -> Result<Self, FilterError> {
        Ok(DistanceFilter::Holt {
            state: HoltState::new(z, 0.0, alpha, beta)?,
        })
    }

    /// Folds one measurement taken `tau` seconds after the previous one into
    /// the posterior.
    pub fn observe<R: Rng + ?Sized>(
        &mut self,
        z: f64,
        tau: f64,
        dynamics: &DynamicsParams,
        noise: &MeasurementNoiseModel,
        rng: &mut R,
    ) -> Result<(), FilterError> {
        if tau < 0.0 {
            return Err(FilterError::NegativeTau(tau));
        }
        match self {
            DistanceFilter::Kalman {
                state,
                measurement_sigma,
            } => {
                let predicted = kalman::kf_predict(state, tau, dynamics);
                *state = kalman::kf_update(&predicted, z, *measurement_sigma);
                Ok(())
            }
            DistanceFilter::Particle { population } => {
                population.step(tau, dynamics, z, noise, rng)
            }
            DistanceFilter::Holt { state } => {
                *state = smoothing::es_update(state, z);
                Ok(())
            }
        }
    }

    /// Draws `n_samples` from the posterior predictive distribution of the
    /// distance `tau` seconds past the last measurement. Smoothing has no
    /// probabilistic forecast, so it contributes its point extrapolation
    /// replicated `n_samples` times.
    pub fn predict_distance<R: Rng + ?Sized>(
        &self,
        tau: f64,
        n_samples: usize,
        dynamics: &DynamicsParams,
        rng: &mut R,
    ) -> Vec<f64> {
        assert!(tau >= 0.0, "negative prediction horizon");
        assert!(n_samples >= 1, "need at least one sample");
        match self {
            DistanceFilter::Kalman { state, .. } => {
                let predicted = kalman::kf_predict(state, tau, dynamics);
                let sd = predicted.covariance.d.max(0.0).sqrt();
                let mean = predicted.mean[1];
                use rand_distr::Distribution;
                let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
                (0..n_samples)
                    .map(|_| mean + sd * normal.sample(rng))
                    .collect()
            }
            DistanceFilter::Particle { population } => {
                population.predict_distance(tau, n_samples, dynamics, rng)
            }
            DistanceFilter::Holt { state } => vec![state.forecast(tau); n_samples],
        }
    }

    /// Posterior mean of the distance at the last measurement time.
    pub fn distance_mean(&self) -> f64 {
        match self {
            DistanceFilter::Kalman { state, .. } => state.mean[1],
            DistanceFilter::Particle { population } => population.distance_mean(),
            DistanceFilter::Holt { state } => state.level,
        }
    }
}
