//! Holt double exponential smoothing: level plus linear trend.
//!
//! The cheapest of the three filters and the only one without a
//! probabilistic forecast, which is why it requires measurements at a fixed
//! cadence: the trend is "per measurement interval", so extrapolation only
//! makes sense when that interval is constant.

use super::FilterError;

/// Level/trend state with its smoothing weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoltState {
    /// Current level (distance, m).
    pub level: f64,
    /// Current trend (m/s).
    pub trend: f64,
    /// Level smoothing weight, in (0, 1).
    pub alpha: f64,
    /// Trend smoothing weight, in (0, 1).
    pub beta: f64,
}

impl HoltState {
    pub fn new(level: f64, trend: f64, alpha: f64, beta: f64) -> Result<Self, FilterError> {
        for (name, w) in [("alpha", alpha), ("beta", beta)] {
            if !(w > 0.0 && w < 1.0) {
                return Err(FilterError::InvalidParameter(format!(
                    "{name} must be in (0, 1), got {w}"
                )));
            }
        }
        Ok(HoltState {
            level,
            trend,
            alpha,
            beta,
        })
    }

    /// Point forecast `level + tau * trend`, `tau` seconds ahead.
    pub fn forecast(&self, tau: f64) -> f64 {
        self.level + tau * self.trend
    }
}

/// One smoothing update:
/// `level' = alpha z + (1 - alpha)(level + trend)`,
/// `trend' = beta (level' - level) + (1 - beta) trend`.
///
/// The trend carries units of m per measurement interval; the caller keeps
/// the cadence fixed and scales the forecast horizon accordingly.
pub fn es_update(state: &HoltState, z: f64) -> HoltState {
    let level = state.alpha * z + (1.0 - state.alpha) * (state.level + state.trend);
    let trend = state.beta * (level - state.level) + (1.0 - state.beta) * state.trend;
    HoltState {
        level,
        trend,
        ..*state
    }
}
