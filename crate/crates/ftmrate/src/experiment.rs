//! Experiment harness: executes the `(controller, seed)` run matrix, writes
//! the CSV outputs and a reproducibility manifest, and compares controllers
//! with Welch t-tests.
//!
//! Output files per experiment:
//! - `intervals.csv` — one row per (run, second, station); the complete data.
//! - `seeds.csv` — one row per run with its aggregate metrics; the input to
//!   [`compare_report`].
//! - `summary.csv` — per-controller means with 99% confidence half-widths.
//! - `manifest.toml` — schema versions, code version, config hash, and the
//!   full config (lossless round-trip).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::rate_control::Policy;
use crate::sim::{build_rate_model, metrics::RunOutput, run_scenario_with_model, SimOptions};
use crate::stats::{self, StatsError};

pub const CSV_SCHEMA_VERSION: &str = "ftmrate-csv-v1";
pub const MANIFEST_SCHEMA_VERSION: &str = "ftmrate-manifest-v1";

pub const INTERVALS_HEADER: &str =
    "run_id,seed,controller,time_s,station_id,mcs_mode,attempted,successes,collisions,channel_losses,throughput_mbps";
pub const SEEDS_HEADER: &str =
    "controller,seed,aggregate_throughput_mbps,total_collisions,ftm_probes,hypothetical_ftm_airtime_us";
pub const SUMMARY_HEADER: &str = "controller,metric,mean,ci99_half_width,n_seeds";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("comparison input {path}: {message}")]
    BadInput { path: PathBuf, message: String },
    #[error("comparison needs at least two controllers, found {0}")]
    NotEnoughControllers(usize),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Where an experiment wrote its outputs.
#[derive(Debug, Clone)]
pub struct ExperimentPaths {
    pub intervals_csv: PathBuf,
    pub seeds_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub manifest: PathBuf,
}

/// Reproducibility record stored next to the CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema: String,
    pub csv_schema: String,
    pub code_version: String,
    /// SHA-256 of the canonical TOML form of `config`.
    pub config_sha256: String,
    pub config: ScenarioConfig,
}

pub fn config_sha256(cfg: &ScenarioConfig) -> String {
    let canonical = cfg.to_toml_string();
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

pub fn read_manifest(path: &Path) -> Result<Manifest, ExperimentError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    toml::from_str(&text).map_err(|e| ExperimentError::BadInput {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// One executed run: its `(controller, seed)` key and the simulator output.
pub type MatrixEntry = ((Policy, u64), RunOutput);

/// Executes the config's full `(controller, seed)` matrix in parallel and
/// returns outputs in matrix order (controllers outer, seeds inner).
pub fn run_matrix(
    cfg: &ScenarioConfig,
    opts: &SimOptions,
    parallel: Option<usize>,
) -> Result<Vec<MatrixEntry>, ExperimentError> {
    cfg.validate()?;
    let model = build_rate_model(cfg)?;
    let pairs: Vec<(Policy, u64)> = cfg
        .controllers
        .iter()
        .flat_map(|&c| cfg.seeds.iter().map(move |&s| (c, s)))
        .collect();

    let execute = || -> Vec<RunOutput> {
        use rayon::prelude::*;
        pairs
            .par_iter()
            .map(|&(policy, seed)| run_scenario_with_model(cfg, policy, seed, opts, model.clone()))
            .collect()
    };
    let results: Vec<RunOutput> = match parallel {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(execute),
        None => execute(),
    };
    Ok(pairs.into_iter().zip(results).collect())
}

/// Runs every `(controller, seed)` pair of the config and writes the four
/// output files into `out_dir`. Runs execute in parallel (`parallel` caps
/// the worker count); output ordering and content are independent of the
/// schedule.
pub fn run_experiment(
    cfg: &ScenarioConfig,
    out_dir: &Path,
    parallel: Option<usize>,
) -> Result<ExperimentPaths, ExperimentError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let matrix = run_matrix(cfg, &SimOptions::default(), parallel)?;
    let (pairs, results): (Vec<(Policy, u64)>, Vec<RunOutput>) = matrix.into_iter().unzip();

    let paths = ExperimentPaths {
        intervals_csv: out_dir.join("intervals.csv"),
        seeds_csv: out_dir.join("seeds.csv"),
        summary_csv: out_dir.join("summary.csv"),
        manifest: out_dir.join("manifest.toml"),
    };

    write_intervals_csv(&paths.intervals_csv, cfg, &pairs, &results)?;
    write_seeds_csv(&paths.seeds_csv, &pairs, &results)?;
    write_summary_csv(&paths.summary_csv, cfg, &pairs, &results)?;
    write_manifest(&paths.manifest, cfg)?;
    Ok(paths)
}

fn scenario_slug(cfg: &ScenarioConfig) -> &'static str {
    match cfg.scenario {
        crate::config::ScenarioKind::EqualDistance => "equal-distance",
        crate::config::ScenarioKind::MovingStation => "moving-station",
        crate::config::ScenarioKind::RwpmField => "rwpm-field",
    }
}

fn write_intervals_csv(
    path: &Path,
    cfg: &ScenarioConfig,
    pairs: &[(Policy, u64)],
    results: &[RunOutput],
) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{INTERVALS_HEADER}").map_err(io_err(path))?;
    let slug = scenario_slug(cfg);
    for ((policy, seed), run) in pairs.iter().zip(results) {
        let run_id = format!("{slug}-{}-s{seed}", policy.name());
        for (t, stations) in run.per_interval.iter().enumerate() {
            for (station_id, m) in stations.iter().enumerate() {
                let mode = m.mcs_mode().map(|v| v.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{run_id},{seed},{},{t},{station_id},{mode},{},{},{},{},{:.6}",
                    policy.name(),
                    m.attempted,
                    m.successes,
                    m.collisions,
                    m.channel_losses,
                    m.throughput_mbps(run.interval_s),
                )
                .map_err(io_err(path))?;
            }
        }
        // Keep completed runs on disk even if a later write fails.
        w.flush().map_err(io_err(path))?;
    }
    Ok(())
}

fn write_seeds_csv(
    path: &Path,
    pairs: &[(Policy, u64)],
    results: &[RunOutput],
) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{SEEDS_HEADER}").map_err(io_err(path))?;
    for ((policy, seed), run) in pairs.iter().zip(results) {
        writeln!(
            w,
            "{},{seed},{:.6},{},{},{:.1}",
            policy.name(),
            run.aggregate_throughput_mbps(),
            run.total_collisions(),
            run.total_ftm_probes(),
            run.hypothetical_ftm_airtime_us(),
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn write_summary_csv(
    path: &Path,
    cfg: &ScenarioConfig,
    pairs: &[(Policy, u64)],
    results: &[RunOutput],
) -> Result<(), ExperimentError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{SUMMARY_HEADER}").map_err(io_err(path))?;
    for &controller in &cfg.controllers {
        let throughputs: Vec<f64> = pairs
            .iter()
            .zip(results)
            .filter(|((p, _), _)| *p == controller)
            .map(|(_, run)| run.aggregate_throughput_mbps())
            .collect();
        let collisions: Vec<f64> = pairs
            .iter()
            .zip(results)
            .filter(|((p, _), _)| *p == controller)
            .map(|(_, run)| run.total_collisions() as f64 / cfg.duration_s)
            .collect();
        for (metric, values) in [
            ("aggregate_throughput_mbps", throughputs),
            ("collisions_per_s", collisions),
        ] {
            let (mean, half) = if values.len() >= 2 {
                let ci = stats::t_confidence_interval(&values, 0.99)?;
                (ci.mean, ci.half_width)
            } else {
                (stats::mean(&values), f64::NAN)
            };
            writeln!(
                w,
                "{},{metric},{mean:.6},{half:.6},{}",
                controller.name(),
                values.len()
            )
            .map_err(io_err(path))?;
        }
    }
    w.flush().map_err(io_err(path))
}

fn write_manifest(path: &Path, cfg: &ScenarioConfig) -> Result<(), ExperimentError> {
    let manifest = Manifest {
        schema: MANIFEST_SCHEMA_VERSION.to_owned(),
        csv_schema: CSV_SCHEMA_VERSION.to_owned(),
        code_version: env!("CARGO_PKG_VERSION").to_owned(),
        config_sha256: config_sha256(cfg),
        config: cfg.clone(),
    };
    let text = toml::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(path, text).map_err(io_err(path))
}

/// Per-controller aggregate throughput samples parsed from `seeds.csv`.
#[derive(Debug, Clone)]
pub struct ControllerSamples {
    pub controller: String,
    /// `(seed, aggregate throughput)` per run.
    pub samples: Vec<(u64, f64)>,
}

impl ControllerSamples {
    pub fn throughputs(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, v)| v).collect()
    }
}

/// Reads one or more `seeds.csv` files and groups samples by controller.
/// Duplicate `(controller, seed)` rows across files are rejected.
pub fn read_seed_samples(paths: &[PathBuf]) -> Result<Vec<ControllerSamples>, ExperimentError> {
    let mut order: Vec<String> = Vec::new();
    let mut grouped: std::collections::HashMap<String, Vec<(u64, f64)>> = Default::default();
    let mut seen: BTreeSet<(String, u64)> = BTreeSet::new();

    for path in paths {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        if header != SEEDS_HEADER {
            return Err(ExperimentError::BadInput {
                path: path.clone(),
                message: format!("unexpected header {header:?}"),
            });
        }
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(ExperimentError::BadInput {
                    path: path.clone(),
                    message: format!("line {}: expected 6 fields", lineno + 2),
                });
            }
            let controller = fields[0].to_owned();
            let parse_err = |what: &str| ExperimentError::BadInput {
                path: path.clone(),
                message: format!("line {}: bad {what}", lineno + 2),
            };
            let seed: u64 = fields[1].parse().map_err(|_| parse_err("seed"))?;
            let throughput: f64 = fields[2].parse().map_err(|_| parse_err("throughput"))?;
            if !seen.insert((controller.clone(), seed)) {
                return Err(ExperimentError::BadInput {
                    path: path.clone(),
                    message: format!("duplicate sample for {controller} seed {seed}"),
                });
            }
            if !grouped.contains_key(&controller) {
                order.push(controller.clone());
            }
            grouped
                .entry(controller)
                .or_default()
                .push((seed, throughput));
        }
    }

    Ok(order
        .into_iter()
        .map(|controller| {
            let samples = grouped.remove(&controller).unwrap_or_default();
            ControllerSamples {
                controller,
                samples,
            }
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct PairwiseComparison {
    pub a: String,
    pub b: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub welch: stats::WelchTest,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    /// `(controller, mean throughput, n seeds)`, best first.
    pub ranking: Vec<(String, f64, usize)>,
    pub pairs: Vec<PairwiseComparison>,
}

/// Pairwise Welch t-tests on per-seed aggregate throughput across all
/// controllers found in the inputs. Refuses controllers with fewer than two
/// seeds (no variance estimate).
pub fn compare_report(paths: &[PathBuf]) -> Result<ComparisonReport, ExperimentError> {
    let samples = read_seed_samples(paths)?;
    if samples.len() < 2 {
        return Err(ExperimentError::NotEnoughControllers(samples.len()));
    }
    for s in &samples {
        if s.samples.len() < 2 {
            return Err(StatsError::TooFewSamples {
                n: s.samples.len(),
                min: 2,
            }
            .into());
        }
    }

    let mut ranking: Vec<(String, f64, usize)> = samples
        .iter()
        .map(|s| {
            let xs = s.throughputs();
            (s.controller.clone(), stats::mean(&xs), xs.len())
        })
        .collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut pairs = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            let xa = samples[i].throughputs();
            let xb = samples[j].throughputs();
            pairs.push(PairwiseComparison {
                a: samples[i].controller.clone(),
                b: samples[j].controller.clone(),
                mean_a: stats::mean(&xa),
                mean_b: stats::mean(&xb),
                welch: stats::welch_t_test(&xa, &xb)?,
            });
        }
    }
    Ok(ComparisonReport { ranking, pairs })
}

/// Plain-text rendering of a comparison report.
pub fn render_report(report: &ComparisonReport) -> String {
    let mut out = String::new();
    out.push_str("rank  controller              mean Mb/s   seeds\n");
    for (i, (name, mean, n)) in report.ranking.iter().enumerate() {
        let _ = writeln!(out, "{:>4}  {:<22} {:>10.3}   {:>5}", i + 1, name, mean, n);
    }
    out.push('\n');
    out.push_str("pairwise Welch t-tests (two-sided, aggregate throughput):\n");
    for p in &report.pairs {
        let _ = writeln!(
            out,
            "  {:<22} vs {:<22} t = {:>8.3}  df = {:>6.2}  p = {:.4}",
            p.a, p.b, p.welch.t_statistic, p.welch.degrees_of_freedom, p.welch.p_value
        );
    }
    out
}
