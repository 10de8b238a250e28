//! `gsalign`: synthesize corpora, train aligners and predictors, sweep the
//! aligner width, and plot exported traces.

mod align;
mod config;
mod failure;
mod manifest;
mod plot;
mod predict;
mod sweep;
mod synth;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use config::TrainOverrides;
use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "gsalign", version, about = "Dynamic alignment of continuous emotion annotations")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Base seed; run r uses seed + r.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Number of seeded runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    /// Worker threads for independent runs.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// TOML file with optional [train] and [synth] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub train: TrainOverrides,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic corpus with ground-truth sidecars.
    Synth(synth::SynthArgs),
    /// Train aligners and export generated gold standards.
    Align(align::AlignArgs),
    /// Train and evaluate LT or SLTS predictors.
    Predict(predict::PredictArgs),
    /// Compare aligner hidden sizes by development loss.
    Sweep(sweep::SweepArgs),
    /// Overlay CSV columns in an SVG line plot.
    Plot(plot::PlotArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GsChoice {
    Baseline,
    Generated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Lt,
    Slts,
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.common.jobs == 0 {
        return Err(Failure::invalid("--jobs must be at least 1"));
    }
    match &cli.command {
        Command::Synth(a) => synth::run(&cli.common, a),
        Command::Align(a) => align::run(&cli.common, a),
        Command::Predict(a) => predict::run(&cli.common, a),
        Command::Sweep(a) => sweep::run(&cli.common, a),
        Command::Plot(a) => plot::run(&cli.common, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(failure::EXIT_INVALID);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
