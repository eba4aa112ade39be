//! `flowsentry` — train and evaluate flow-based intrusion detectors on
//! Zeek conn.log captures and compare the scores against embedded
//! reference results.

mod ops;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use flowsentry_core::Error as CoreError;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_DATA: u8 = 2;

/// A failure carrying its process exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        match e {
            // misconfiguration is a usage problem; everything else is data
            CoreError::InvalidConfig(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "flowsentry",
    version,
    about = "Flow-based IoT intrusion detection workbench",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error."
)]
pub struct Cli {
    /// RNG seed (falls back to $FLOWSENTRY_SEED, then 1)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap for parallel sections
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// JSON run-config file; explicit flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Print total and per-class flow counts of a capture
    Summarize {
        /// Zeek conn.log.labeled file
        log: Option<PathBuf>,
        /// Canonical dataset name (inferred from the path when omitted)
        #[arg(long)]
        name: Option<String>,
    },
    /// Encode a capture: split, fit the schema on the training side, and
    /// write train/eval CSVs plus the schema JSON
    Preprocess {
        log: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// binary or multiclass
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        eval_fraction: Option<f64>,
    },
    /// Carve the three balanced subsets out of the full 1-1 capture
    Carve {
        log: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model on a capture's training split and save it
    Train {
        /// svm | xgboost | lightgbm | iforest | lof | drl
        model: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        eval_fraction: Option<f64>,
    },
    /// 5-fold cross-validation of one model configuration
    Crossval {
        model: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        name: Option<String>,
        /// Append the CV run row to this CSV
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long)]
        eval_fraction: Option<f64>,
    },
    /// Grid search over the default (or configured) hyperparameter grid
    Gridsearch {
        model: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        /// Write best_config.json here
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        eval_fraction: Option<f64>,
    },
    /// Train the DRL agent and write its episode log next to the model
    DrlTrain {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        eval_fraction: Option<f64>,
    },
    /// Evaluate a saved model on its capture's evaluation split
    Evaluate {
        model_file: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Append the evaluation run row to this CSV
        #[arg(long)]
        runs: Option<PathBuf>,
    },
    /// Render runs.csv into report.md, charts and delta tables
    Report {
        #[arg(long)]
        runs: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print produced-versus-reference deltas for a runs.csv
    Compare {
        #[arg(long)]
        runs: Option<PathBuf>,
        /// Also write deltas.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    // die quietly when a pager or `head` closes the pipe
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    return ExitCode::SUCCESS;
                }
                _ => EXIT_USAGE,
            };
            eprint!("{e}");
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        // a failed re-init only happens in tests sharing a process; ignore
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match ops::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
