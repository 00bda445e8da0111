//! Channel model: distance-to-SNR mapping (log-distance path loss), Nakagami
//! multipath fading, and the per-MCS transmission-success curves.
//!
//! Success curves are CDFs of the sinh-arcsinh normal distribution, one per
//! MCS. The shipped parameter set is fitted offline against a reference
//! packet-error generator (see [`fit`]) and loaded from a versioned data
//! file; callers can substitute their own fit.

pub mod fit;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::sync::OnceLock;
use thiserror::Error;

use crate::phy::NUM_MCS;

/// Distances below this are clamped before entering the path-loss formula,
/// which diverges at zero. Keeps co-located stations at a finite, maximal SNR.
pub const MIN_DISTANCE_M: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid channel parameter: {0}")]
    InvalidParameter(String),
    #[error("success-model file rejected: {0}")]
    BadModelFile(String),
}

/// Log-distance path-loss parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelParams {
    /// Reference SNR in dB.
    pub reference_snr_db: f64,
    /// Reference path loss at 1 m, in dB.
    pub reference_loss_db: f64,
    /// Path loss exponent.
    pub exponent: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            reference_snr_db: 109.9906,
            reference_loss_db: 46.6777,
            exponent: 3.0,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "path loss exponent must be > 0, got {}",
                self.exponent
            )));
        }
        if !self.reference_snr_db.is_finite() || !self.reference_loss_db.is_finite() {
            return Err(ChannelError::InvalidParameter(
                "reference SNR and loss must be finite".to_owned(),
            ));
        }
        Ok(())
    }
}

/// Mean SNR in dB at a given distance. Distances at or below
/// [`MIN_DISTANCE_M`] (including negative filter estimates) are clamped.
pub fn snr_from_distance(distance_m: f64, params: &ChannelParams) -> f64 {
    let rho = distance_m.max(MIN_DISTANCE_M);
    params.reference_snr_db - (params.reference_loss_db + 10.0 * params.exponent * rho.log10())
}

/// Multipath fading applied on top of the mean SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FadingModel {
    None,
    /// Nakagami-m fading: linear power gain ~ Gamma(shape = m, scale = 1/m),
    /// i.e. unit mean. m = 1 is Rayleigh-equivalent.
    Nakagami {
        m: f64,
    },
}

impl Default for FadingModel {
    fn default() -> Self {
        // Strong-LOS multipath. The success curves are fitted without
        // fading, so selection from the mean SNR is only near-optimal when
        // fading is mild; heavier fading (m near 1) shifts the true optimum
        // below what any mean-SNR policy picks.
        FadingModel::Nakagami { m: 10.0 }
    }
}

impl FadingModel {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if let FadingModel::Nakagami { m } = *self {
            if !(m >= 0.5 && m.is_finite()) {
                return Err(ChannelError::InvalidParameter(format!(
                    "Nakagami shape must be >= 0.5, got {m}"
                )));
            }
        }
        Ok(())
    }
}

/// One faded SNR draw in dB.
pub fn sample_faded_snr<R: rand::Rng + ?Sized>(
    mean_snr_db: f64,
    fading: &FadingModel,
    rng: &mut R,
) -> f64 {
    match *fading {
        FadingModel::None => mean_snr_db,
        FadingModel::Nakagami { m } => {
            use rand_distr::Distribution;
            let gamma = rand_distr::Gamma::new(m, 1.0 / m).expect("validated shape");
            let gain: f64 = gamma.sample(rng);
            mean_snr_db + 10.0 * gain.log10()
        }
    }
}

/// Standard normal CDF.
pub(crate) fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Four parameters of one MCS's sinh-arcsinh success curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuccessCurve {
    pub location_db: f64,
    pub scale_db: f64,
    pub skewness: f64,
    pub tailweight: f64,
}

impl SuccessCurve {
    /// Success probability at SNR `gamma_db`; monotone non-decreasing.
    pub fn evaluate(&self, gamma_db: f64) -> f64 {
        let z = (gamma_db - self.location_db) / self.scale_db;
        standard_normal_cdf((self.tailweight * z.asinh() - self.skewness).sinh())
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.scale_db > 0.0 && self.scale_db.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "scale must be > 0, got {}",
                self.scale_db
            )));
        }
        if !(self.tailweight > 0.0 && self.tailweight.is_finite()) {
            return Err(ChannelError::InvalidParameter(format!(
                "tailweight must be > 0, got {}",
                self.tailweight
            )));
        }
        if !self.location_db.is_finite() || !self.skewness.is_finite() {
            return Err(ChannelError::InvalidParameter(
                "location and skewness must be finite".to_owned(),
            ));
        }
        Ok(())
    }
}

/// Provenance recorded alongside a fitted parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitMetadata {
    pub generator: String,
    pub samples_per_mcs: u64,
    /// Worst per-MCS mean absolute error of the fit, success-rate units.
    pub max_residual: f64,
}

/// Per-MCS success curves plus fit provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessModelParams {
    pub curves: [SuccessCurve; NUM_MCS],
    pub metadata: FitMetadata,
}

/// On-disk layout of the success-model file.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessModelFile {
    schema: String,
    generator: String,
    samples_per_mcs: u64,
    max_residual: f64,
    mcs: Vec<SuccessCurveRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SuccessCurveRecord {
    index: u8,
    location_db: f64,
    scale_db: f64,
    skewness: f64,
    tailweight: f64,
    residual: f64,
}

const SUCCESS_MODEL_SCHEMA: &str = "ftmrate-success-model-v1";

impl SuccessModelParams {
    /// Success probability of `mcs` at SNR `gamma_db`.
    pub fn success_probability(&self, gamma_db: f64, mcs: u32) -> f64 {
        assert!((mcs as usize) < NUM_MCS, "MCS {mcs} out of range");
        self.curves[mcs as usize].evaluate(gamma_db)
    }

    pub fn to_toml_string(&self) -> String {
        let file = SuccessModelFile {
            schema: SUCCESS_MODEL_SCHEMA.to_owned(),
            generator: self.metadata.generator.clone(),
            samples_per_mcs: self.metadata.samples_per_mcs,
            max_residual: self.metadata.max_residual,
            mcs: self
                .curves
                .iter()
                .enumerate()
                .map(|(i, c)| SuccessCurveRecord {
                    index: i as u8,
                    location_db: c.location_db,
                    scale_db: c.scale_db,
                    skewness: c.skewness,
                    tailweight: c.tailweight,
                    residual: 0.0,
                })
                .collect(),
        };
        toml::to_string_pretty(&file).expect("serializable model")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ChannelError> {
        let file: SuccessModelFile =
            toml::from_str(text).map_err(|e| ChannelError::BadModelFile(e.to_string()))?;
        if file.schema != SUCCESS_MODEL_SCHEMA {
            return Err(ChannelError::BadModelFile(format!(
                "unknown schema {:?}, expected {SUCCESS_MODEL_SCHEMA:?}",
                file.schema
            )));
        }
        if file.mcs.len() != NUM_MCS {
            return Err(ChannelError::BadModelFile(format!(
                "expected {NUM_MCS} curves, found {}",
                file.mcs.len()
            )));
        }
        let mut curves = [SuccessCurve {
            location_db: 0.0,
            scale_db: 1.0,
            skewness: 0.0,
            tailweight: 1.0,
        }; NUM_MCS];
        for record in &file.mcs {
            let idx = record.index as usize;
            if idx >= NUM_MCS {
                return Err(ChannelError::BadModelFile(format!(
                    "curve index {idx} out of range"
                )));
            }
            let curve = SuccessCurve {
                location_db: record.location_db,
                scale_db: record.scale_db,
                skewness: record.skewness,
                tailweight: record.tailweight,
            };
            curve.validate()?;
            curves[idx] = curve;
        }
        Ok(SuccessModelParams {
            curves,
            metadata: FitMetadata {
                generator: file.generator,
                samples_per_mcs: file.samples_per_mcs,
                max_residual: file.max_residual,
            },
        })
    }

    /// The parameter set shipped with the crate, fitted against the
    /// reference packet-error generator.
    pub fn bundled() -> &'static SuccessModelParams {
        static BUNDLED: OnceLock<SuccessModelParams> = OnceLock::new();
        BUNDLED.get_or_init(|| {
            SuccessModelParams::from_toml_str(include_str!("../data/success_model.toml"))
                .expect("bundled success model must parse")
        })
    }
}

/// Success probability `xi = s(gamma, mcs)` from a parameter set.
pub fn success_probability(gamma_db: f64, mcs: u32, params: &SuccessModelParams) -> f64 {
    params.success_probability(gamma_db, mcs)
}
