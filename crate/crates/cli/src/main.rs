//! `deepstruct`: generate data, train, evaluate and check models.
//!
//! Exit codes: 0 success, 1 check failure, 2 I/O, 3 validation or
//! incompatibility.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deepstruct::learning::{Algorithm, Strategy};
use deepstruct::Error;

#[derive(Parser, Debug)]
#[command(name = "deepstruct", version, about = "Joint training of deep potentials and Markov random fields")]
struct Cli {
    /// Overrides the seed of the spec's [train] and [data] sections.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render the train/val/test splits described by a spec.
    GenData {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on generated splits.
    Train {
        #[arg(long)]
        spec: PathBuf,
        /// Directory written by `gen-data`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        strategy: Option<Strategy>,
        #[arg(long)]
        algo: Option<Algorithm>,
        /// Tab-separated iteration log; defaults to `<out>.log.tsv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Word and character accuracy of a model on one dataset file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Finite-difference check of the structured objective.
    Gradcheck {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 3)]
        samples: usize,
    },
    /// Print the pairwise tables of a model.
    Inspect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        pairwise_class: Option<usize>,
    },
    /// Randomized message-passing checks against exact enumeration.
    OracleCheck {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
}

/// A failed command: its exit code and message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn check(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_)
            | Error::BadMagic { .. }
            | Error::Truncated
            | Error::ChecksumMismatch { .. }
            | Error::UnsupportedVersion(_) => 2,
            Error::Config(_)
            | Error::InvalidArgument(_)
            | Error::Incompatible(_)
            | Error::InvalidGraph(_)
            | Error::StateSpaceTooLarge { .. }
            | Error::LabelOutOfRange { .. }
            | Error::ShapeMismatch { .. } => 3,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("DEEPSTRUCT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Failure::validation(format!("DEEPSTRUCT_THREADS must be a nonnegative integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::validation(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    let seed = cli.seed;
    match cli.command {
        Command::GenData { spec, out } => commands::gen_data(&spec, &out, seed),
        Command::Train {
            spec,
            data,
            out,
            strategy,
            algo,
            log,
        } => commands::train(&commands::TrainArgs {
            spec,
            data,
            out,
            strategy,
            algorithm: algo,
            log,
            seed,
        }),
        Command::Eval { model, data } => commands::eval(&model, &data),
        Command::Gradcheck { spec, samples } => commands::gradcheck(&spec, samples, seed),
        Command::Inspect { model, pairwise_class } => commands::inspect(&model, pairwise_class),
        Command::OracleCheck { spec, trials } => commands::oracle_check(&spec, trials, seed),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
