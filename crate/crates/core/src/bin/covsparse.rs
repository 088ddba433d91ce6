use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use covsparse::bench::{self, BenchReport};
use covsparse::data::{self, SyntheticSpec};
use covsparse::Error;

#[derive(Parser)]
#[command(
    name = "covsparse",
    version,
    about = "Sparse regression with missing data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paired benchmark of the plain and covariance-augmented algorithms.
    Bench {
        #[command(subcommand)]
        action: BenchAction,
    },
    /// Data generation.
    Gen {
        #[command(subcommand)]
        action: GenAction,
    },
}

#[derive(Subcommand)]
enum BenchAction {
    /// Run every cell of a config and write the JSONL report.
    Run {
        config: PathBuf,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a report as a with/without comparison table.
    Table { report: PathBuf, out: PathBuf },
    /// Export the phase-one covariance of one dataset cell (`id` or `id/trial`).
    Cov {
        config: PathBuf,
        dataset_id: String,
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum GenAction {
    /// Generate a synthetic dataset from a TOML spec into a directory.
    Synth { spec: PathBuf, out_dir: PathBuf },
}

enum Failure {
    Input(Error),
    NoConvergence,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Input(e)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Bench { action } => match action {
            BenchAction::Run { config, out } => {
                let report = bench::run_benchmark(&config)?;
                match out {
                    Some(path) => report.write(&path)?,
                    None => print!("{}", report.to_jsonl()),
                }
                for row in report.rows.iter().filter(|r| r.error.is_some()) {
                    eprintln!(
                        "{} {:?}: {}",
                        row.dataset_id,
                        row.algorithm,
                        row.error.as_deref().unwrap_or("")
                    );
                }
                if !report.is_empty() && !report.any_converged() {
                    return Err(Failure::NoConvergence);
                }
            }
            BenchAction::Table { report, out } => {
                if out == report || bench::structured_path(&out) == report {
                    return Err(Failure::Input(Error::InvalidConfig(format!(
                        "table output would overwrite the report {}",
                        report.display()
                    ))));
                }
                let report = BenchReport::read(&report)?;
                bench::emit_table(&report, &out)?;
            }
            BenchAction::Cov {
                config,
                dataset_id,
                out,
            } => {
                let cfg = bench::BenchConfig::load(&config)?;
                bench::export_covariance(&cfg, &dataset_id, &out)?;
            }
        },
        Command::Gen { action } => match action {
            GenAction::Synth { spec, out_dir } => {
                let text = fs::read_to_string(&spec).map_err(|source| Error::Io {
                    path: spec.clone(),
                    source,
                })?;
                let parsed: SyntheticSpec = toml::from_str(&text).map_err(|e| Error::Format {
                    path: spec.clone(),
                    message: e.to_string(),
                })?;
                let d = data::generate_synthetic(&parsed)?;
                data::save_dataset(&d, &out_dir)?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::NoConvergence) => {
            eprintln!("error: no cell converged");
            ExitCode::from(2)
        }
    }
}
