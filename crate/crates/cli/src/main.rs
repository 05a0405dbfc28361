//! `ddnet` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use ddnet_core::data::Split;
use ddnet_core::metrics::ReportFormat;
use ddnet_core::models::Arch;
use ddnet_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ddnet", version, about = "Driver drowsiness CNN ensemble: train, evaluate, predict, verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train one network and write a checkpoint plus a history CSV.
    Train(TrainArgs),
    /// Score a checkpoint on one manifest split.
    Eval(EvalArgs),
    /// Classify a single PGM image.
    Predict(PredictArgs),
    /// Average member probabilities, threshold, and report every member.
    EnsembleEval(EnsembleArgs),
    /// Finite-difference check of a freshly initialised network.
    Gradcheck(GradcheckArgs),
    /// Assign train/validation/test splits to a manifest.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// cnn1, cnn2 or cnn3 (may come from --preset or the config instead).
    #[arg(long)]
    pub arch: Option<Arch>,
    #[arg(long)]
    pub manifest: PathBuf,
    /// JSON run config; its keys override the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// section3-cnn1/2/3 or methodology-cnn1/2 (default: section3-cnnN for the arch).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Checkpoint output path.
    #[arg(long)]
    pub out: PathBuf,
    /// History CSV path (default: <out stem>.history.csv next to the checkpoint).
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Record missing or duplicate manifest paths as warnings instead of errors.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    #[arg(long, default_value = "text", value_parser = parse_format)]
    pub format: ReportFormat,
    /// Model name in the report (default: checkpoint file stem).
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    /// JSON config with an `ensemble: {members, threshold}` section.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Overrides the config threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value = "text", value_parser = parse_format)]
    pub format: ReportFormat,
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub arch: Arch,
    #[arg(long, default_value_t = 1e-5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub threshold: f64,
    /// Coordinates sampled per tensor.
    #[arg(long, default_value_t = ddnet_core::models::GRADCHECK_SAMPLES_PER_TENSOR)]
    pub samples: usize,
    /// Perturb every coordinate (hours for the full networks).
    #[arg(long)]
    pub all: bool,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep the class mix of every split proportional (`--stratified false` to disable).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub stratified: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lenient: bool,
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse::<Split>().map_err(|e| e.to_string())
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse::<ReportFormat>().map_err(|e| e.to_string())
}

/// Failures carrying their exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(Error),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            e if e.is_numeric() => Failure::Numeric(e.to_string()),
            Error::UnknownArch(_) | Error::UnknownFormat(_) | Error::Config(_) | Error::InvalidArgument(_) => {
                Failure::Usage(e.to_string())
            }
            e => Failure::Data(e),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Numeric(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Usage(m) => eprintln!("error: {m}"),
                Failure::Data(e) => eprintln!("error: {e}"),
                Failure::Numeric(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
