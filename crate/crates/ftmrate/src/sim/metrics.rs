//! Per-interval, per-station accounting of a simulation run.

use crate::phy::NUM_MCS;

/// Counters for one station over one metrics interval.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StationIntervalMetrics {
    /// Transmission opportunities taken (one per TXOP, not per MPDU).
    pub attempted: u64,
    pub successes: u64,
    pub collisions: u64,
    pub channel_losses: u64,
    /// Payload bits delivered in this interval.
    pub delivered_bits: u64,
    /// How often each MCS was selected for a transmission.
    pub mcs_histogram: [u32; NUM_MCS],
    /// FTM probes taken (out-of-band; zero channel cost).
    pub ftm_probes: u32,
}

impl StationIntervalMetrics {
    /// Most frequently selected MCS; ties break toward the lower index.
    /// `None` when the station never transmitted.
    pub fn mcs_mode(&self) -> Option<u32> {
        let mut best: Option<(usize, u32)> = None;
        for (mcs, &count) in self.mcs_histogram.iter().enumerate() {
            if count > 0 && best.is_none_or(|(_, c)| count > c) {
                best = Some((mcs, count));
            }
        }
        best.map(|(mcs, _)| mcs as u32)
    }

    /// Throughput over the interval in Mbit/s.
    pub fn throughput_mbps(&self, interval_s: f64) -> f64 {
        self.delivered_bits as f64 / interval_s / 1e6
    }
}

/// One decision taken by a controller, for trace comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionRecord {
    pub time_us: u64,
    pub station: u32,
    pub mcs: u32,
}

/// Everything a single `(scenario, controller, seed)` run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Metrics interval length (1 s).
    pub interval_s: f64,
    /// `per_interval[t][station]`.
    pub per_interval: Vec<Vec<StationIntervalMetrics>>,
    /// MCS decision log, captured only when requested.
    pub decisions: Option<Vec<DecisionRecord>>,
    /// Airtime one FTM burst would cost in-band, for overhead reporting.
    pub ftm_burst_airtime_us: f64,
}

impl RunOutput {
    pub fn n_intervals(&self) -> usize {
        self.per_interval.len()
    }

    pub fn n_stations(&self) -> usize {
        self.per_interval.first().map_or(0, |v| v.len())
    }

    /// Network throughput per interval, summed over stations, in Mbit/s.
    pub fn network_throughput_series(&self) -> Vec<f64> {
        self.per_interval
            .iter()
            .map(|stations| {
                stations.iter().map(|s| s.delivered_bits).sum::<u64>() as f64
                    / self.interval_s
                    / 1e6
            })
            .collect()
    }

    /// Mean aggregate network throughput over the whole run, in Mbit/s.
    pub fn aggregate_throughput_mbps(&self) -> f64 {
        let series = self.network_throughput_series();
        if series.is_empty() {
            return 0.0;
        }
        series.iter().sum::<f64>() / series.len() as f64
    }

    /// Per-interval throughput of one station, in Mbit/s.
    pub fn station_throughput_series(&self, station: usize) -> Vec<f64> {
        self.per_interval
            .iter()
            .map(|stations| stations[station].throughput_mbps(self.interval_s))
            .collect()
    }

    /// Per-interval modal MCS of one station (`None` where it never sent).
    pub fn station_mcs_mode_series(&self, station: usize) -> Vec<Option<u32>> {
        self.per_interval
            .iter()
            .map(|stations| stations[station].mcs_mode())
            .collect()
    }

    pub fn total_collisions(&self) -> u64 {
        self.per_interval
            .iter()
            .flat_map(|stations| stations.iter())
            .map(|s| s.collisions)
            .sum()
    }

    pub fn total_ftm_probes(&self) -> u64 {
        self.per_interval
            .iter()
            .flat_map(|stations| stations.iter())
            .map(|s| u64::from(s.ftm_probes))
            .sum()
    }

    /// What the run's probes would have cost in-band, in µs.
    pub fn hypothetical_ftm_airtime_us(&self) -> f64 {
        self.total_ftm_probes() as f64 * self.ftm_burst_airtime_us
    }
}
