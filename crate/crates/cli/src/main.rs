//! `sysrisk`: rolling-correlation PCA, CARS, and lag-correlation analysis of monthly panels.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sysrisk_core::{CarsMode, MissingPolicy, ReturnOperator, SeriesKind, YearMonth};

#[derive(Debug, Parser)]
#[command(
    name = "sysrisk",
    version,
    about = "Systemic-risk indicators from monthly asset panels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Rolling spectra, CARS, and CARS peaks for one panel.
    Analyze(PipelineArgs),
    /// Autocorrelation and dominant period of the CARS series.
    Autocorr(PipelineArgs),
    /// Cross-correlation of two panels' CARS before and after a split date.
    Crosscorr(CrossArgs),
    /// Generate synthetic panel(s) from a key=value spec file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Panel CSV (`date,<asset1>,<asset2>,...`).
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, default_value = "price")]
    pub kind: SeriesKind,

    /// Return operator: log | diff.
    #[arg(long, default_value = "log")]
    pub operator: ReturnOperator,

    /// Missing-data policy: reject | ffill | drop.
    #[arg(long, default_value = "reject")]
    pub missing: MissingPolicy,

    /// Correlation window in months.
    #[arg(long, default_value_t = 36)]
    pub window: usize,

    /// Number of leading eigenvalues summed.
    #[arg(long, default_value_t = 4)]
    pub top_k: usize,

    /// CARS memory in months (defaults to --window).
    #[arg(long)]
    pub cars_window: Option<usize>,

    /// telescoping | flat.
    #[arg(long, default_value = "telescoping")]
    pub cars_mode: CarsMode,

    /// Months between consecutive correlation windows.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,

    /// Largest lag for auto/cross-correlation.
    #[arg(long, default_value_t = 24)]
    pub max_lag: usize,

    /// Minimum peak prominence reported in peaks.csv.
    #[arg(long, default_value_t = 0.0)]
    pub min_prominence: f64,

    /// Minimum distance in months between reported peaks.
    #[arg(long, default_value_t = 6)]
    pub min_separation: usize,

    /// Also write the per-window eigenvalues to spectra.csv.
    #[arg(long)]
    pub dump_spectra: bool,

    /// Also write the return matrix to returns.csv.
    #[arg(long)]
    pub dump_returns: bool,

    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CrossArgs {
    #[command(flatten)]
    pub pipeline: PipelineArgs,

    /// Second panel CSV.
    #[arg(long)]
    pub input2: PathBuf,

    /// First month of the "after" sample.
    #[arg(long, default_value = "2010-01")]
    pub split: YearMonth,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// key=value spec file.
    #[arg(long)]
    pub spec: PathBuf,

    /// Output CSV; a coupled pair is written to `<stem>_a.csv` and `<stem>_b.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            // Usage errors are user errors; help and version requests succeed.
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Analyze(args) => commands::analyze(&args),
        Command::Autocorr(args) => commands::autocorr(&args),
        Command::Crosscorr(args) => commands::crosscorr(&args),
        Command::Synth(args) => commands::synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}: {}", err.stage, err.message);
            ExitCode::from(err.code)
        }
    }
}
