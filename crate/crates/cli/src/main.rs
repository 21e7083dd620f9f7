mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit codes: 0 success, 2 configuration or usage, 3 numerical failure,
/// 4 verification failure.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self {
            code: 4,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<hno::Error> for CliError {
    fn from(e: hno::Error) -> Self {
        use hno::Error::*;
        let code = match e {
            InvalidArgument(_) | ShapeMismatch(_) | Format { .. } | Io(_) => 2,
            NonFinite { .. }
            | DegenerateSample { .. }
            | Stability(_)
            | SolverFailure(_)
            | Diverged(_) => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hno",
    version,
    about = "Hilbert and Fourier neural operators on synthetic PDE data"
)]
struct Cli {
    /// key = value configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the `seed` key
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the command
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Progress on stderr
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Split {
    All,
    Train,
    Val,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file
    GenData {
        /// burgers1d, darcy2d or lorenz63
        problem: String,
    },
    /// Train a model; writes model.hnom, report.csv and summary.txt into --out
    Train,
    /// Evaluate a checkpoint on a dataset
    Eval {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        split: Split,
        /// Validation fraction used to locate the train/val split
        #[arg(long, default_value_t = 0.2)]
        val_fraction: f64,
        /// Write predictions in the dataset format
        #[arg(long)]
        dump_predictions: Option<PathBuf>,
        /// Evaluate at resolution N2, subsampling the dataset if it is finer
        #[arg(long, value_name = "N2")]
        resolution_transfer: Option<usize>,
    },
    /// Hilbert transform, envelope and phase of a one-column CSV signal
    HilbertDemo {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        axis: usize,
    },
    /// Finite-difference check of the analytic gradients
    Gradcheck,
}

pub struct Globals {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = Globals {
        config: cli.config,
        seed: cli.seed,
        out: cli.out,
        verbose: cli.verbose,
    };
    let result = match cli.command {
        Command::GenData { problem } => commands::gen_data(&g, &problem),
        Command::Train => commands::train(&g),
        Command::Eval {
            checkpoint,
            dataset,
            split,
            val_fraction,
            dump_predictions,
            resolution_transfer,
        } => commands::eval(
            &g,
            &commands::EvalArgs {
                checkpoint,
                dataset,
                split,
                val_fraction,
                dump_predictions,
                resolution_transfer,
            },
        ),
        Command::HilbertDemo { input, axis } => commands::hilbert_demo(&g, &input, axis),
        Command::Gradcheck => commands::gradcheck(&g),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
