//! Command-line experiment harness: run scenarios from configs or presets,
//! fit success models, and compare controllers.
//!
//! Exit codes: 0 on success, 1 for config/input problems, 2 for runtime
//! failures (I/O, non-converging fits).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ftmrate::channel::fit::{fit_success_model, generate_reference_samples};
use ftmrate::config::{parse_config, preset, preset_catalog, ConfigError, ScenarioConfig};
use ftmrate::experiment::{compare_report, render_report, run_experiment, ExperimentError};

#[derive(Parser)]
#[command(
    name = "ftmrate",
    version,
    about = "Distance-based 802.11 rate selection: link simulator and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (controller, seed) pair of a scenario and write CSV metrics.
    Run {
        /// Path to a TOML scenario config, or a preset name (see `presets`).
        scenario: String,
        /// Output directory for intervals.csv, seeds.csv, summary.csv,
        /// manifest.toml.
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Replace the config's seed list with a half-open range, e.g. 0..10.
        #[arg(long)]
        seed_range: Option<String>,
        /// Cap on concurrently executing runs.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// List the built-in scenario presets.
    Presets,
    /// Draw samples from the reference packet-error generator and fit the
    /// per-MCS success curves into a model file.
    FitSuccessModel {
        /// Samples per MCS.
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 1905)]
        seed: u64,
        #[arg(long, default_value = "success_model.toml")]
        out: PathBuf,
    },
    /// Rank controllers and run pairwise Welch t-tests over seeds.csv files.
    Compare {
        /// One or more seeds.csv files produced by `run`.
        #[arg(required = true)]
        seeds_csv: Vec<PathBuf>,
    },
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => ExitCode::from(code),
    }
}

fn fail(code: u8, message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    code
}

fn experiment_exit_code(err: &ExperimentError) -> u8 {
    match err {
        ExperimentError::Io { .. } => EXIT_RUNTIME,
        _ => EXIT_VALIDATION,
    }
}

fn dispatch(cli: Cli) -> Result<(), u8> {
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            seed_range,
            parallel,
        } => {
            let mut cfg = load_scenario(&scenario)?;
            if let Some(range) = seed_range {
                cfg.seeds = parse_seed_range(&range)
                    .map_err(|e| fail(EXIT_VALIDATION, format!("--seed-range {range}: {e}")))?;
            }
            let paths = run_experiment(&cfg, &out_dir, parallel)
                .map_err(|e| fail(experiment_exit_code(&e), e))?;
            println!("wrote {}", paths.intervals_csv.display());
            println!("wrote {}", paths.seeds_csv.display());
            println!("wrote {}", paths.summary_csv.display());
            println!("wrote {}", paths.manifest.display());
            if cfg.controllers.len() >= 2 && cfg.seeds.len() >= 2 {
                let report = compare_report(std::slice::from_ref(&paths.seeds_csv))
                    .map_err(|e| fail(experiment_exit_code(&e), e))?;
                println!();
                print!("{}", render_report(&report));
            }
            Ok(())
        }
        Command::Presets => {
            for (name, summary) in preset_catalog() {
                println!("{name:<36} {summary}");
            }
            Ok(())
        }
        Command::FitSuccessModel { samples, seed, out } => {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let data = generate_reference_samples(samples, &mut rng);
            let fitted = fit_success_model(&data)
                .map_err(|e| fail(EXIT_RUNTIME, format!("fit failed: {e}")))?;
            std::fs::write(&out, fitted.to_toml_string())
                .map_err(|e| fail(EXIT_RUNTIME, format!("{}: {e}", out.display())))?;
            println!(
                "fitted 12 curves from {samples} samples/MCS (max residual {:.4})",
                fitted.metadata.max_residual
            );
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Compare { seeds_csv } => {
            let report =
                compare_report(&seeds_csv).map_err(|e| fail(experiment_exit_code(&e), e))?;
            print!("{}", render_report(&report));
            Ok(())
        }
    }
}

fn load_scenario(arg: &str) -> Result<ScenarioConfig, u8> {
    if let Some(cfg) = preset(arg) {
        return Ok(cfg);
    }
    let path = PathBuf::from(arg);
    if !path.exists() {
        return Err(fail(
            EXIT_VALIDATION,
            format!("{arg:?} is neither a preset (see `ftmrate presets`) nor a config file"),
        ));
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| fail(EXIT_RUNTIME, format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        ConfigError::Parse(_) | ConfigError::Validation(_) => {
            fail(EXIT_VALIDATION, format!("{}: {e}", path.display()))
        }
    })
}

/// Parses `a..b` (half-open) into the seed list `a, a+1, ..., b-1`.
fn parse_seed_range(text: &str) -> Result<Vec<u64>, String> {
    let (start, end) = text
        .split_once("..")
        .ok_or_else(|| "expected START..END".to_owned())?;
    let start: u64 = start
        .trim()
        .parse()
        .map_err(|_| format!("bad start {start:?}"))?;
    let end: u64 = end.trim().parse().map_err(|_| format!("bad end {end:?}"))?;
    if end <= start {
        return Err(format!("empty range {start}..{end}"));
    }
    Ok((start..end).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_range_parsing() {
        assert_eq!(parse_seed_range("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seed_range("5..7").unwrap(), vec![5, 6]);
        assert!(parse_seed_range("3..3").is_err());
        assert!(parse_seed_range("x..3").is_err());
        assert!(parse_seed_range("3").is_err());
    }
}
