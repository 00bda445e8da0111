//! Fine timing measurement: round-trip-time arithmetic, RTT-to-distance
//! conversion, measurement-noise models, and burst airtime accounting.
//!
//! Measurements are modeled out-of-band: the simulator never charges channel
//! time for them, but [`burst_airtime_us`] reports what a burst would cost
//! in-band so the hypothetical overhead can be tallied from run output.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, PartialEq)]
pub enum FtmError {
    #[error("timestamps violate FTM ordering (t1={t1}, t2={t2}, t3={t3}, t4={t4})")]
    MeasurementRejected { t1: f64, t2: f64, t3: f64, t4: f64 },
    #[error("negative RTT {0} ns")]
    NegativeRtt(f64),
}

/// The four timestamps of one FTM frame exchange, in nanoseconds.
///
/// `t1`: responder transmits the FTM frame; `t2`: initiator receives it;
/// `t3`: initiator transmits the ACK; `t4`: responder receives the ACK.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtmTimestamps {
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
    pub t4: f64,
}

/// Round-trip time with the initiator's turnaround removed:
/// `(t4 - t1) - (t3 - t2)`.
pub fn compute_rtt(ts: FtmTimestamps) -> Result<f64, FtmError> {
    let FtmTimestamps { t1, t2, t3, t4 } = ts;
    let ordered = t4 >= t1 && t3 >= t2 && (t4 - t1) >= (t3 - t2);
    if !ordered {
        return Err(FtmError::MeasurementRejected { t1, t2, t3, t4 });
    }
    Ok((t4 - t1) - (t3 - t2))
}

/// One-way distance in meters from an RTT in nanoseconds.
pub fn rtt_to_distance(rtt_ns: f64) -> Result<f64, FtmError> {
    if rtt_ns < 0.0 {
        return Err(FtmError::NegativeRtt(rtt_ns));
    }
    Ok(rtt_ns * 1e-9 / 2.0 * SPEED_OF_LIGHT)
}

/// RTT in nanoseconds that a given one-way distance produces.
pub fn distance_to_rtt_ns(distance_m: f64) -> f64 {
    2.0 * distance_m / SPEED_OF_LIGHT * 1e9
}

/// Distribution of the distance measurement error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasurementNoiseModel {
    /// Zero-mean normal error with standard deviation `sigma_m`.
    Gaussian { sigma_m: f64 },
    /// Exponentially modified Gaussian: normal(mu, sigma) plus an
    /// exponential tail with the given rate (mean excess `1/rate`).
    ExpGaussian {
        mu_m: f64,
        sigma_m: f64,
        rate_per_m: f64,
    },
}

impl Default for MeasurementNoiseModel {
    fn default() -> Self {
        MeasurementNoiseModel::Gaussian { sigma_m: 1.0 }
    }
}

impl MeasurementNoiseModel {
    pub fn validate(&self) -> Result<(), String> {
        match *self {
            MeasurementNoiseModel::Gaussian { sigma_m } => {
                if !(sigma_m >= 0.0 && sigma_m.is_finite()) {
                    return Err(format!(
                        "gaussian sigma_m must be finite and >= 0, got {sigma_m}"
                    ));
                }
            }
            MeasurementNoiseModel::ExpGaussian {
                mu_m,
                sigma_m,
                rate_per_m,
            } => {
                if !mu_m.is_finite() {
                    return Err(format!("exp-gaussian mu_m must be finite, got {mu_m}"));
                }
                if !(sigma_m > 0.0 && sigma_m.is_finite()) {
                    return Err(format!("exp-gaussian sigma_m must be > 0, got {sigma_m}"));
                }
                if !(rate_per_m > 0.0 && rate_per_m.is_finite()) {
                    return Err(format!(
                        "exp-gaussian rate_per_m must be > 0, got {rate_per_m}"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Draws one error sample.
    pub fn sample_error<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MeasurementNoiseModel::Gaussian { sigma_m } => {
                if sigma_m == 0.0 {
                    0.0
                } else {
                    Normal::new(0.0, sigma_m)
                        .expect("validated sigma")
                        .sample(rng)
                }
            }
            MeasurementNoiseModel::ExpGaussian {
                mu_m,
                sigma_m,
                rate_per_m,
            } => {
                let gauss = Normal::new(mu_m, sigma_m)
                    .expect("validated sigma")
                    .sample(rng);
                let tail = Exp::new(rate_per_m).expect("validated rate").sample(rng);
                gauss + tail
            }
        }
    }

    /// Probability density of an error value, used as the particle-filter
    /// measurement likelihood.
    pub fn pdf(&self, error: f64) -> f64 {
        match *self {
            MeasurementNoiseModel::Gaussian { sigma_m } => {
                let z = error / sigma_m;
                (-0.5 * z * z).exp() / (sigma_m * (2.0 * std::f64::consts::PI).sqrt())
            }
            MeasurementNoiseModel::ExpGaussian {
                mu_m,
                sigma_m,
                rate_per_m,
            } => {
                let l = rate_per_m;
                let exponent = 0.5 * l * (2.0 * mu_m + l * sigma_m * sigma_m - 2.0 * error);
                let arg =
                    (mu_m + l * sigma_m * sigma_m - error) / (std::f64::consts::SQRT_2 * sigma_m);
                0.5 * l * exponent.exp() * erfc(arg)
            }
        }
    }

    /// Mean of the error distribution.
    pub fn mean_error(&self) -> f64 {
        match *self {
            MeasurementNoiseModel::Gaussian { .. } => 0.0,
            MeasurementNoiseModel::ExpGaussian {
                mu_m, rate_per_m, ..
            } => mu_m + 1.0 / rate_per_m,
        }
    }
}

/// One noisy distance reading: the true distance plus a noise draw. The
/// result may be negative; downstream consumers handle that, so no clamping
/// happens here.
pub fn sample_measurement<R: Rng + ?Sized>(
    true_distance_m: f64,
    noise: &MeasurementNoiseModel,
    rng: &mut R,
) -> f64 {
    true_distance_m + noise.sample_error(rng)
}

/// PHY used for FTM burst frames when reporting in-band airtime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FtmControlRate {
    /// 802.11a OFDM at 6 Mb/s.
    Legacy6Mbps,
    /// 802.11ax HE SU at 143.4 Mb/s (20 MHz, 0.8 µs GI), ACKs at 12 Mb/s.
    Ax143_4Mbps,
}

/// Frame sizes and spacing of the shortest possible FTM burst: one request,
/// two FTM frames, three ACKs, three SIFS periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FtmBurstSpec {
    pub ftm_request_bytes: u32,
    pub ftm_frame_1_bytes: u32,
    pub ftm_frame_2_bytes: u32,
    pub ack_bytes: u32,
    pub sifs_us: f64,
    pub control_rate: FtmControlRate,
}

impl Default for FtmBurstSpec {
    fn default() -> Self {
        FtmBurstSpec {
            ftm_request_bytes: 42,
            ftm_frame_1_bytes: 66,
            ftm_frame_2_bytes: 48,
            ack_bytes: 14,
            sifs_us: 16.0,
            control_rate: FtmControlRate::Legacy6Mbps,
        }
    }
}

// Legacy OFDM: 20 µs preamble + SIGNAL, 4 µs symbols, 16 service + 6 tail
// bits. HE SU at MCS 11 / 20 MHz / 0.8 µs GI: 1950 data bits per 13.6 µs
// symbol behind a 44 µs preamble. Durations are rounded up to whole µs,
// matching airtime-calculator convention.
fn legacy_ofdm_duration_us(len_bytes: u32, rate_mbps: f64) -> f64 {
    let bits = 22.0 + 8.0 * f64::from(len_bytes);
    let bits_per_symbol = rate_mbps * 4.0;
    20.0 + 4.0 * (bits / bits_per_symbol).ceil()
}

fn he_su_duration_us(len_bytes: u32) -> f64 {
    let bits = 22.0 + 8.0 * f64::from(len_bytes);
    (44.0 + 13.6 * (bits / 1950.0).ceil()).ceil()
}

/// Airtime of a single burst frame under the given control rate.
pub fn ftm_frame_duration_us(len_bytes: u32, rate: FtmControlRate) -> f64 {
    match rate {
        FtmControlRate::Legacy6Mbps => legacy_ofdm_duration_us(len_bytes, 6.0),
        FtmControlRate::Ax143_4Mbps => he_su_duration_us(len_bytes),
    }
}

/// ACK airtime; ACKs stay on legacy OFDM in both cases (6 Mb/s for the
/// 802.11a burst, 12 Mb/s when the FTM frames use the HE rate).
pub fn ftm_ack_duration_us(len_bytes: u32, rate: FtmControlRate) -> f64 {
    match rate {
        FtmControlRate::Legacy6Mbps => legacy_ofdm_duration_us(len_bytes, 6.0),
        FtmControlRate::Ax143_4Mbps => legacy_ofdm_duration_us(len_bytes, 12.0),
    }
}

/// Total airtime in µs of the shortest FTM burst: three frames, three ACKs,
/// three SIFS periods.
pub fn burst_airtime_us(spec: &FtmBurstSpec) -> f64 {
    let frames = ftm_frame_duration_us(spec.ftm_request_bytes, spec.control_rate)
        + ftm_frame_duration_us(spec.ftm_frame_1_bytes, spec.control_rate)
        + ftm_frame_duration_us(spec.ftm_frame_2_bytes, spec.control_rate);
    let acks = 3.0 * ftm_ack_duration_us(spec.ack_bytes, spec.control_rate);
    frames + acks + 3.0 * spec.sifs_us
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn rtt_direct_substitution() {
        let ts = FtmTimestamps {
            t1: 0.0,
            t2: 5.0,
            t3: 10.0,
            t4: 15.0,
        };
        assert_eq!(compute_rtt(ts).unwrap(), 10.0);
    }

    #[test]
    fn rtt_zero_turnaround() {
        let ts = FtmTimestamps {
            t1: 0.0,
            t2: 7.0,
            t3: 7.0,
            t4: 42.0,
        };
        assert_eq!(compute_rtt(ts).unwrap(), 42.0);
    }

    #[test]
    fn rtt_ten_meter_path() {
        // 10 m each way at c plus a 10 µs turnaround.
        let ts = FtmTimestamps {
            t1: 100.0,
            t2: 133.357,
            t3: 10133.357,
            t4: 10166.713,
        };
        let rtt = compute_rtt(ts).unwrap();
        assert!((rtt - 66.713).abs() < 1e-9, "rtt = {rtt}");
        let d = rtt_to_distance(rtt).unwrap();
        assert!((d - 10.0).abs() < 1e-3, "distance = {d}");
    }

    #[test]
    fn rtt_rejects_disordered_timestamps() {
        // Turnaround longer than the whole exchange.
        let ts = FtmTimestamps {
            t1: 0.0,
            t2: 1.0,
            t3: 9.0,
            t4: 5.0,
        };
        assert!(matches!(
            compute_rtt(ts),
            Err(FtmError::MeasurementRejected { .. })
        ));
    }

    #[test]
    fn distance_conversion_edges() {
        assert_eq!(rtt_to_distance(0.0).unwrap(), 0.0);
        assert!(rtt_to_distance(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn rtt_invariant_under_clock_offset(
            base in 0.0..1e6f64,
            turnaround in 0.0..1e5f64,
            flight in 0.0..1e4f64,
            offset in -1e9..1e9f64,
        ) {
            let ts = FtmTimestamps {
                t1: base,
                t2: base + flight / 2.0,
                t3: base + flight / 2.0 + turnaround,
                t4: base + flight + turnaround,
            };
            let shifted = FtmTimestamps {
                t1: ts.t1 + offset,
                t2: ts.t2 + offset,
                t3: ts.t3 + offset,
                t4: ts.t4 + offset,
            };
            let a = compute_rtt(ts).unwrap();
            let b = compute_rtt(shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
        }

        #[test]
        fn distance_round_trips_through_rtt(d in 0.0..1000.0f64) {
            let rt = rtt_to_distance(distance_to_rtt_ns(d)).unwrap();
            prop_assert!((rt - d).abs() < 1e-6, "{d} -> {rt}");
        }
    }

    #[test]
    fn degenerate_gaussian_noise_is_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let noise = MeasurementNoiseModel::Gaussian { sigma_m: 0.0 };
        for _ in 0..10 {
            assert_eq!(sample_measurement(20.0, &noise, &mut rng), 20.0);
        }
    }

    #[test]
    fn gaussian_noise_moments() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let noise = MeasurementNoiseModel::Gaussian { sigma_m: 1.0 };
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_measurement(20.0, &noise, &mut rng))
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 20.0).abs() < 0.02, "mean = {mean}");
        assert!((var.sqrt() - 1.0).abs() < 0.02, "sd = {}", var.sqrt());
    }

    #[test]
    fn exp_gaussian_noise_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let noise = MeasurementNoiseModel::ExpGaussian {
            mu_m: 0.0,
            sigma_m: 1.0,
            rate_per_m: 0.5,
        };
        assert_eq!(noise.mean_error(), 2.0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_measurement(20.0, &noise, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 22.0).abs() < 0.05, "mean = {mean}");
    }

    #[test]
    fn noise_reproducible_under_same_seed() {
        let noise = MeasurementNoiseModel::ExpGaussian {
            mu_m: 0.0,
            sigma_m: 0.5,
            rate_per_m: 1.0,
        };
        let mut a = ChaCha12Rng::seed_from_u64(7);
        let mut b = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            assert_eq!(
                sample_measurement(15.0, &noise, &mut a),
                sample_measurement(15.0, &noise, &mut b)
            );
        }
    }

    #[test]
    fn emg_pdf_integrates_to_one() {
        let noise = MeasurementNoiseModel::ExpGaussian {
            mu_m: 0.0,
            sigma_m: 0.5,
            rate_per_m: 1.0,
        };
        // Trapezoid over a wide interval.
        let (lo, hi, n) = (-20.0, 40.0, 60_000);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            let x = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            total += w * noise.pdf(x);
        }
        total *= h;
        assert!((total - 1.0).abs() < 1e-6, "integral = {total}");
    }

    #[test]
    fn burst_airtime_legacy_components() {
        assert_eq!(ftm_frame_duration_us(42, FtmControlRate::Legacy6Mbps), 80.0);
        assert_eq!(
            ftm_frame_duration_us(66, FtmControlRate::Legacy6Mbps),
            112.0
        );
        assert_eq!(ftm_frame_duration_us(48, FtmControlRate::Legacy6Mbps), 88.0);
        assert_eq!(ftm_ack_duration_us(14, FtmControlRate::Legacy6Mbps), 44.0);
    }

    #[test]
    fn burst_airtime_totals() {
        let legacy = FtmBurstSpec::default();
        assert_eq!(burst_airtime_us(&legacy), 460.0);
        let ax = FtmBurstSpec {
            control_rate: FtmControlRate::Ax143_4Mbps,
            ..FtmBurstSpec::default()
        };
        assert_eq!(burst_airtime_us(&ax), 318.0);
    }
}
