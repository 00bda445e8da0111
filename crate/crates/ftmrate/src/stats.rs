//! Small-sample statistics for seed sweeps: Student-t confidence intervals
//! and Welch's unequal-variance t-test.

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {min} samples, got {n}")]
    TooFewSamples { n: usize, min: usize },
    #[error("confidence must be in (0, 1), got {0}")]
    BadConfidence(f64),
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (denominator n - 1).
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub half_width: f64,
    pub confidence: f64,
    pub n: usize,
}

/// Two-sided Student-t confidence interval for the mean.
pub fn t_confidence_interval(
    xs: &[f64],
    confidence: f64,
) -> Result<ConfidenceInterval, StatsError> {
    if xs.len() < 2 {
        return Err(StatsError::TooFewSamples {
            n: xs.len(),
            min: 2,
        });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::BadConfidence(confidence));
    }
    let n = xs.len();
    let sd = sample_variance(xs).sqrt();
    let quantile = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("valid t distribution")
        .inverse_cdf(0.5 + confidence / 2.0);
    Ok(ConfidenceInterval {
        mean: mean(xs),
        half_width: quantile * sd / (n as f64).sqrt(),
        confidence,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchTest {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided p-value.
    pub p_value: f64,
}

/// Welch's t-test for a difference in means under unequal variances.
/// Degenerate all-constant inputs resolve to p = 1 (identical) or p = 0.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    let min = 2;
    if a.len() < min {
        return Err(StatsError::TooFewSamples { n: a.len(), min });
    }
    if b.len() < min {
        return Err(StatsError::TooFewSamples { n: b.len(), min });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_variance(a), sample_variance(b));

    let pooled = va / na + vb / nb;
    if pooled == 0.0 {
        let identical = ma == mb;
        return Ok(WelchTest {
            t_statistic: if identical { 0.0 } else { f64::INFINITY },
            degrees_of_freedom: na + nb - 2.0,
            p_value: if identical { 1.0 } else { 0.0 },
        });
    }

    let t = (ma - mb) / pooled.sqrt();
    let df = pooled.powi(2) / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid t distribution");
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(WelchTest {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p.clamp(0.0, 1.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_confidence_interval() {
        // {10, 12, 14}: mean 12, sd 2, half width t(0.995, 2) * 2 / sqrt(3).
        let ci = t_confidence_interval(&[10.0, 12.0, 14.0], 0.99).unwrap();
        assert_eq!(ci.mean, 12.0);
        let t995 = 9.924843200917869; // t quantile, df = 2
        let expected = t995 * 2.0 / 3.0f64.sqrt();
        assert!(
            (ci.half_width - expected).abs() < 1e-6,
            "half width {} vs {expected}",
            ci.half_width
        );
    }

    #[test]
    fn interval_requires_two_samples() {
        assert_eq!(
            t_confidence_interval(&[1.0], 0.99).unwrap_err(),
            StatsError::TooFewSamples { n: 1, min: 2 }
        );
    }

    #[test]
    fn welch_identical_samples_is_certainly_null() {
        let t = welch_t_test(&[5.0, 5.0, 5.0], &[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(t.p_value, 1.0);
        assert_eq!(t.t_statistic, 0.0);
    }

    #[test]
    fn welch_disjoint_samples_is_significant() {
        let a = [1.0, 1.0001, 0.9999];
        let b = [9.0, 9.0001, 8.9999];
        let t = welch_t_test(&a, &b).unwrap();
        assert!(t.p_value < 0.01, "p = {}", t.p_value);
        assert!(t.t_statistic < 0.0);
    }

    #[test]
    fn welch_degenerate_unequal_constants() {
        let t = welch_t_test(&[1.0, 1.0], &[2.0, 2.0]).unwrap();
        assert_eq!(t.p_value, 0.0);
    }

    #[test]
    fn welch_matches_reference_implementation() {
        // Frozen against scipy.stats.ttest_ind(equal_var=False).
        let a = [
            27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1, 21.9, 22.6, 23.1, 19.6, 19.0, 21.7,
            21.4,
        ];
        let b = [
            27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0, 24.8, 20.2, 21.9, 22.1, 22.9, 30.5,
            24.2,
        ];
        let t = welch_t_test(&a, &b).unwrap();
        assert!(
            (t.t_statistic - (-2.8413222713783814)).abs() < 1e-9,
            "t = {}",
            t.t_statistic
        );
        assert!((t.degrees_of_freedom - 27.882509841787975).abs() < 1e-9);
        assert!(
            (t.p_value - 0.008303425483320217).abs() < 1e-9,
            "p = {}",
            t.p_value
        );
    }

    #[test]
    fn welch_needs_two_samples_per_side() {
        assert!(welch_t_test(&[1.0], &[2.0, 3.0]).is_err());
        assert!(welch_t_test(&[1.0, 2.0], &[3.0]).is_err());
    }
}
