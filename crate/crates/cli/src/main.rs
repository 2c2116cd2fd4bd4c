mod config;
mod data;
mod error;
mod report;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use error::{CliError, Result};

/// Simulates an aggregator of residential PV + battery units bidding
/// into a two-settlement electricity market.
#[derive(Parser)]
#[command(name = "aggsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset on disk.
    Synth {
        /// Config file supplying generator settings (optional).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the number of units.
        #[arg(long)]
        units: Option<usize>,
        /// Total days to generate (training + evaluation).
        #[arg(long)]
        days: Option<usize>,
        /// Directory to write `prices.csv` and the unit files into.
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a dataset directory and report its shape.
    IngestCheck {
        /// Config file naming the data directory (optional).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Data directory; overrides the config.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train, simulate the selected cases, and write result artifacts.
    Run {
        /// Config file; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated case numbers, e.g. `1,3`; overrides the config.
        #[arg(long)]
        case: Option<String>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; overrides the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evaluation days to simulate; overrides the config.
        #[arg(long)]
        days: Option<usize>,
    },
    /// Re-render the comparison table from a finished run's output.
    Report {
        /// Output directory of a previous `run`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_case_list(text: &str) -> Result<Vec<u8>> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u8>()
                .map_err(|_| CliError::Validation(format!("bad case number '{part}'")))
        })
        .collect()
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, seed, units, days, out } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(u) = units {
                cfg.synth.n_units = u;
            }
            if let Some(d) = days {
                cfg.synth.n_days = d;
            }
            cfg.validate()?;
            let dataset = aggsim_core::synth::generate(&cfg.synth_spec()?)?;
            data::emit(&out, &dataset)?;
            println!(
                "wrote {} units x {} days (seed {}) to {}",
                dataset.units.len(),
                dataset.n_days(),
                cfg.seed,
                out.display()
            );
            Ok(())
        }
        Command::IngestCheck { config, data } => {
            let cfg = RunConfig::load(config.as_deref())?;
            let dir = data.unwrap_or_else(|| cfg.data_dir.clone());
            let ds = data::ingest(&dir, cfg.battery_spec()?)?;
            println!(
                "ok: {} units, {} days starting {}",
                ds.units.len(),
                ds.n_days(),
                ds.da.start().format("%Y-%m-%d")
            );
            for u in &ds.units {
                let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
                println!(
                    "  {}: mean pv {:.3} kW, mean demand {:.3} kW",
                    u.id,
                    mean(u.pv.values()),
                    mean(u.demand.values())
                );
            }
            Ok(())
        }
        Command::Run { config, case, seed, out, days } => {
            let mut cfg = RunConfig::load(config.as_deref())?;
            if let Some(list) = case {
                cfg.cases = parse_case_list(&list)?;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(dir) = out {
                cfg.out_dir = dir;
            }
            if let Some(d) = days {
                cfg.eval_days = d;
            }
            let summary = run::execute(&cfg).inspect_err(|e| write_error_report(&cfg.out_dir, e))?;
            print!("{}", run::render_table(&summary));
            println!("artifacts in {}", cfg.out_dir.display());
            Ok(())
        }
        Command::Report { out } => {
            let cases = report::summarize(&out)?;
            print!("{}", report::render(&cases));
            Ok(())
        }
    }
}

/// Best-effort machine-readable error report next to the other artifacts.
fn write_error_report(out_dir: &Path, err: &CliError) {
    let body = serde_json::json!({
        "error": { "kind": err.kind(), "message": err.message(), "exit_code": err.exit_code() }
    });
    if std::fs::create_dir_all(out_dir).is_ok() {
        let _ = std::fs::write(out_dir.join("error_report.json"), body.to_string());
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            let body = serde_json::json!({
                "error": { "kind": e.kind(), "message": e.message(), "exit_code": e.exit_code() }
            });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
