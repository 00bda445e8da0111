//! Slot-synchronous DCF: binary exponential backoff, no RTS/CTS, no capture,
//! no hidden terminals. Constants are the standard 802.11 OFDM PHY values.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// MAC timing and contention parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacParams {
    /// Minimum contention window (maximum initial backoff counter value).
    pub cw_min: u16,
    pub cw_max: u16,
    pub slot_us: u64,
    pub sifs_us: u64,
    pub difs_us: u64,
    /// ACK duration (legacy OFDM control response).
    pub ack_us: u64,
    /// Time wasted waiting for a missing ACK.
    pub ack_timeout_us: u64,
    pub max_retries: u32,
    /// MPDUs per transmission opportunity, all sharing one outcome draw.
    pub ampdu_frames: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            cw_min: 15,
            cw_max: 1023,
            slot_us: 9,
            sifs_us: 16,
            difs_us: 34,
            ack_us: 44,
            // SIFS + ACK + two slots of slack.
            ack_timeout_us: 78,
            max_retries: 7,
            ampdu_frames: 4,
        }
    }
}

impl MacParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.cw_min > self.cw_max {
            return Err(format!(
                "cw_min {} exceeds cw_max {}",
                self.cw_min, self.cw_max
            ));
        }
        if self.cw_max > 32767 {
            return Err("cw_max must be <= 32767".into());
        }
        for (name, v) in [
            ("slot_us", self.slot_us),
            ("sifs_us", self.sifs_us),
            ("difs_us", self.difs_us),
            ("ack_us", self.ack_us),
            ("ack_timeout_us", self.ack_timeout_us),
        ] {
            if v == 0 {
                return Err(format!("{name} must be positive"));
            }
        }
        if self.ampdu_frames == 0 {
            return Err("ampdu_frames must be >= 1".into());
        }
        Ok(())
    }
}

/// Per-station contention state.
#[derive(Debug, Clone, Copy)]
pub struct MacState {
    /// Current contention window (counter drawn from `0..=cw`).
    pub cw: u16,
    pub backoff: u16,
    pub retries: u32,
}

impl MacState {
    pub fn new<R: Rng + ?Sized>(params: &MacParams, rng: &mut R) -> Self {
        MacState {
            cw: params.cw_min,
            backoff: rng.random_range(0..=params.cw_min),
            retries: 0,
        }
    }
}

/// Who transmits next and after how many idle slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundResult {
    pub idle_slots: u16,
    /// Indices of the stations whose counters hit zero together. Two or more
    /// means a collision.
    pub transmitters: Vec<usize>,
}

/// One contention round over saturated stations: every counter decrements
/// through the same idle slots; whoever reaches zero transmits.
pub fn contention_round(macs: &mut [MacState]) -> RoundResult {
    debug_assert!(!macs.is_empty(), "need at least one backlogged station");
    let idle_slots = macs.iter().map(|m| m.backoff).min().unwrap_or(0);
    let mut transmitters = Vec::new();
    for (i, m) in macs.iter_mut().enumerate() {
        m.backoff -= idle_slots;
        if m.backoff == 0 {
            transmitters.push(i);
        }
    }
    RoundResult {
        idle_slots,
        transmitters,
    }
}

/// Applies a transmission outcome: success resets the window, failure
/// doubles it (capped), and exceeding the retry limit drops the frame and
/// starts fresh. A new backoff counter is drawn either way.
pub fn note_tx_result<R: Rng + ?Sized>(
    mac: &mut MacState,
    success: bool,
    params: &MacParams,
    rng: &mut R,
) {
    if success {
        mac.cw = params.cw_min;
        mac.retries = 0;
    } else {
        mac.retries += 1;
        if mac.retries > params.max_retries {
            mac.cw = params.cw_min;
            mac.retries = 0;
        } else {
            mac.cw = (mac.cw * 2 + 1).min(params.cw_max);
        }
    }
    mac.backoff = rng.random_range(0..=mac.cw);
}
