//! IEEE 802.11ax single-stream PHY: the MCS rate table, PHY/MAC framing
//! constants, and frame airtime arithmetic.
//!
//! The rate table covers all four channel widths and all three guard
//! intervals. Runtime scenarios use the 20 MHz column only, but the full
//! table is embedded so callers can query any valid combination.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from rate-table lookups and airtime computation.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PhyError {
    #[error("MCS index {0} out of range (valid: 0..=11)")]
    InvalidMcs(u32),
    #[error("unsupported channel width {0} MHz (valid: 20, 40, 80, 160)")]
    InvalidWidth(u32),
    #[error("unsupported guard interval {0} ns (valid: 3200, 1600, 800)")]
    InvalidGuardInterval(u32),
    #[error("payload must be positive")]
    EmptyPayload,
    #[error("at least one aggregated MPDU is required")]
    EmptyAggregate,
}

/// Number of MCS indices for a single spatial stream.
pub const NUM_MCS: usize = 12;

/// Channel width in MHz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum ChannelWidth {
    Mhz20,
    Mhz40,
    Mhz80,
    Mhz160,
}

impl ChannelWidth {
    pub fn mhz(self) -> u32 {
        match self {
            ChannelWidth::Mhz20 => 20,
            ChannelWidth::Mhz40 => 40,
            ChannelWidth::Mhz80 => 80,
            ChannelWidth::Mhz160 => 160,
        }
    }

    fn column(self) -> usize {
        match self {
            ChannelWidth::Mhz20 => 0,
            ChannelWidth::Mhz40 => 1,
            ChannelWidth::Mhz80 => 2,
            ChannelWidth::Mhz160 => 3,
        }
    }
}

impl TryFrom<u32> for ChannelWidth {
    type Error = PhyError;

    fn try_from(mhz: u32) -> Result<Self, PhyError> {
        match mhz {
            20 => Ok(ChannelWidth::Mhz20),
            40 => Ok(ChannelWidth::Mhz40),
            80 => Ok(ChannelWidth::Mhz80),
            160 => Ok(ChannelWidth::Mhz160),
            other => Err(PhyError::InvalidWidth(other)),
        }
    }
}

impl From<ChannelWidth> for u32 {
    fn from(w: ChannelWidth) -> u32 {
        w.mhz()
    }
}

/// OFDM guard interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum GuardInterval {
    /// 3.2 µs
    Long,
    /// 1.6 µs
    Medium,
    /// 0.8 µs
    Short,
}

impl GuardInterval {
    pub fn nanos(self) -> u32 {
        match self {
            GuardInterval::Long => 3200,
            GuardInterval::Medium => 1600,
            GuardInterval::Short => 800,
        }
    }

    pub fn micros(self) -> f64 {
        self.nanos() as f64 / 1000.0
    }

    fn column(self) -> usize {
        match self {
            GuardInterval::Long => 0,
            GuardInterval::Medium => 1,
            GuardInterval::Short => 2,
        }
    }
}

impl TryFrom<u32> for GuardInterval {
    type Error = PhyError;

    fn try_from(nanos: u32) -> Result<Self, PhyError> {
        match nanos {
            3200 => Ok(GuardInterval::Long),
            1600 => Ok(GuardInterval::Medium),
            800 => Ok(GuardInterval::Short),
            other => Err(PhyError::InvalidGuardInterval(other)),
        }
    }
}

impl From<GuardInterval> for u32 {
    fn from(gi: GuardInterval) -> u32 {
        gi.nanos()
    }
}

/// Modulation type of an MCS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
    Qam1024,
}

/// One row of the 802.11ax single-stream rate table.
#[derive(Debug, Clone, Copy)]
pub struct McsEntry {
    pub index: u8,
    pub modulation: Modulation,
    /// Coding rate as (numerator, denominator).
    pub coding_rate: (u8, u8),
    /// Data rate in Mbit/s, indexed by `[width][gi]` with widths ordered
    /// 20/40/80/160 MHz and GIs ordered 3.2/1.6/0.8 µs.
    pub data_rate_mbps: [[f64; 3]; 4],
}

/// 802.11ax data rates for one spatial stream (HE-MCS 0..=11).
const RATE_TABLE: [McsEntry; NUM_MCS] = [
    McsEntry {
        index: 0,
        modulation: Modulation::Bpsk,
        coding_rate: (1, 2),
        data_rate_mbps: [
            [7.3, 8.1, 8.6],
            [14.6, 16.3, 17.2],
            [30.6, 34.0, 36.0],
            [61.3, 68.1, 72.1],
        ],
    },
    McsEntry {
        index: 1,
        modulation: Modulation::Qpsk,
        coding_rate: (1, 2),
        data_rate_mbps: [
            [14.6, 16.3, 17.2],
            [29.3, 32.5, 34.4],
            [61.3, 68.1, 72.1],
            [122.5, 136.1, 144.1],
        ],
    },
    McsEntry {
        index: 2,
        modulation: Modulation::Qpsk,
        coding_rate: (3, 4),
        data_rate_mbps: [
            [21.9, 24.4, 25.8],
            [43.9, 48.8, 51.6],
            [91.9, 102.1, 108.1],
            [183.8, 204.2, 216.2],
        ],
    },
    McsEntry {
        index: 3,
        modulation: Modulation::Qam16,
        coding_rate: (1, 2),
        data_rate_mbps: [
            [29.3, 32.5, 34.4],
            [58.5, 65.0, 68.8],
            [122.5, 136.1, 144.1],
            [245.0, 272.2, 288.2],
        ],
    },
    McsEntry {
        index: 4,
        modulation: Modulation::Qam16,
        coding_rate: (3, 4),
        data_rate_mbps: [
            [43.9, 48.8, 51.6],
            [87.8, 97.5, 103.2],
            [183.8, 204.2, 216.2],
            [367.5, 408.3, 432.4],
        ],
    },
    McsEntry {
        index: 5,
        modulation: Modulation::Qam64,
        coding_rate: (2, 3),
        data_rate_mbps: [
            [58.5, 65.0, 68.8],
            [117.0, 130.0, 137.6],
            [245.0, 272.2, 288.2],
            [490.0, 544.4, 576.5],
        ],
    },
    McsEntry {
        index: 6,
        modulation: Modulation::Qam64,
        coding_rate: (3, 4),
        data_rate_mbps: [
            [65.8, 73.1, 77.4],
            [131.6, 146.3, 154.9],
            [275.6, 306.3, 324.4],
            [551.3, 612.5, 648.5],
        ],
    },
    McsEntry {
        index: 7,
        modulation: Modulation::Qam64,
        coding_rate: (5, 6),
        data_rate_mbps: [
            [73.1, 81.3, 86.0],
            [146.3, 162.5, 172.1],
            [306.3, 340.3, 360.3],
            [612.5, 680.6, 720.6],
        ],
    },
    McsEntry {
        index: 8,
        modulation: Modulation::Qam256,
        coding_rate: (3, 4),
        data_rate_mbps: [
            [87.8, 97.5, 103.2],
            [175.5, 195.0, 206.5],
            [367.5, 408.3, 432.4],
            [735.0, 816.7, 864.7],
        ],
    },
    McsEntry {
        index: 9,
        modulation: Modulation::Qam256,
        coding_rate: (5, 6),
        data_rate_mbps: [
            [97.5, 108.3, 114.7],
            [195.0, 216.7, 229.4],
            [408.3, 453.7, 480.4],
            [816.6, 907.4, 960.7],
        ],
    },
    McsEntry {
        index: 10,
        modulation: Modulation::Qam1024,
        coding_rate: (3, 4),
        data_rate_mbps: [
            [109.7, 121.9, 129.0],
            [219.4, 243.8, 258.1],
            [459.4, 510.4, 540.4],
            [918.8, 1020.8, 1080.9],
        ],
    },
    McsEntry {
        index: 11,
        modulation: Modulation::Qam1024,
        coding_rate: (5, 6),
        data_rate_mbps: [
            [121.9, 135.4, 143.4],
            [243.8, 270.8, 286.8],
            [510.4, 567.1, 600.5],
            [1020.8, 1134.2, 1201.0],
        ],
    },
];

/// Returns the full single-stream rate table.
pub fn rate_table() -> &'static [McsEntry; NUM_MCS] {
    &RATE_TABLE
}

/// Tabulated single-stream data rate in Mbit/s.
pub fn mcs_data_rate(mcs: u32, width: ChannelWidth, gi: GuardInterval) -> Result<f64, PhyError> {
    if mcs >= NUM_MCS as u32 {
        return Err(PhyError::InvalidMcs(mcs));
    }
    Ok(RATE_TABLE[mcs as usize].data_rate_mbps[width.column()][gi.column()])
}

/// All twelve data rates for one `(width, gi)` column, indexed by MCS.
pub fn rate_column(width: ChannelWidth, gi: GuardInterval) -> [f64; NUM_MCS] {
    let mut out = [0.0; NUM_MCS];
    for (mcs, entry) in RATE_TABLE.iter().enumerate() {
        out[mcs] = entry.data_rate_mbps[width.column()][gi.column()];
    }
    out
}

/// PHY configuration shared by all stations in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhyConfig {
    pub channel_width_mhz: ChannelWidth,
    pub guard_interval_ns: GuardInterval,
    /// Always 1; kept explicit because the rate table is single-stream only.
    pub spatial_streams: u8,
    /// MSDU payload per MPDU in bytes.
    pub payload_bytes: u32,
    /// Informational band label.
    pub band: String,
}

impl Default for PhyConfig {
    fn default() -> Self {
        PhyConfig {
            channel_width_mhz: ChannelWidth::Mhz20,
            guard_interval_ns: GuardInterval::Long,
            spatial_streams: 1,
            payload_bytes: 1500,
            band: "5 GHz".to_owned(),
        }
    }
}

impl PhyConfig {
    /// Data rates for this configuration's width/GI column.
    pub fn rates(&self) -> [f64; NUM_MCS] {
        rate_column(self.channel_width_mhz, self.guard_interval_ns)
    }
}

/// Fixed per-transmission overheads used by the airtime model.
///
/// The standard does not reduce to two numbers; these defaults fold the HE
/// preamble plus MAC framing into a preamble-equivalent duration and a
/// per-MPDU byte overhead (MAC header, FCS, A-MPDU delimiter, padding).
/// They shift absolute throughput but not the ordering of controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrameOverhead {
    /// Preamble-equivalent duration charged once per PPDU.
    pub preamble_us: f64,
    /// Extra bytes charged per aggregated MPDU.
    pub per_mpdu_bytes: u32,
}

impl Default for FrameOverhead {
    fn default() -> Self {
        FrameOverhead {
            preamble_us: 44.0,
            per_mpdu_bytes: 40,
        }
    }
}

/// Airtime in µs of one PPDU carrying `n_aggregated` MPDUs of `payload_bytes`
/// each, sent at `mcs` under `phy`.
///
/// The payload portion is `ceil(bits / rate)` so the result is a whole number
/// of µs on top of the preamble. Airtime is non-increasing in `mcs`.
pub fn frame_airtime_us(
    payload_bytes: u32,
    n_aggregated: u32,
    mcs: u32,
    phy: &PhyConfig,
    overhead: &FrameOverhead,
) -> Result<f64, PhyError> {
    if payload_bytes == 0 {
        return Err(PhyError::EmptyPayload);
    }
    if n_aggregated == 0 {
        return Err(PhyError::EmptyAggregate);
    }
    let rate = mcs_data_rate(mcs, phy.channel_width_mhz, phy.guard_interval_ns)?;
    let bits = 8.0 * f64::from(payload_bytes + overhead.per_mpdu_bytes) * f64::from(n_aggregated);
    Ok(overhead.preamble_us + (bits / rate).ceil())
}
