//! `dextron`: trajectory generation, controller search, policy training,
//! evaluation and success-model explanations from one binary.

mod commands;
mod error;
mod params;

use clap::{Parser, Subcommand, ValueEnum};
use commands::Common;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dextron", version, about = "Surrogate grasping pipeline")]
struct Cli {
    /// Run directory holding every artifact.
    #[arg(long, global = true, default_value = "run")]
    dir: PathBuf,
    /// Flat `key = value` file overriding the defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a single key, e.g. `--set n_samples=5000`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Threads for the parallel sections.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Rlil,
    Rl,
    Bc,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Rlil => "rlil",
            Mode::Rl => "rl",
            Mode::Bc => "bc",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic trajectory grid, or validate and copy imported CSVs.
    Gen {
        #[arg(long = "import")]
        import: Vec<PathBuf>,
    },
    /// Monte Carlo search for working controller and environment pairs.
    Mc,
    /// Train a policy.
    Train {
        #[arg(long, value_enum, default_value = "rlil")]
        mode: Mode,
    },
    /// Evaluate a checkpoint (or the stored experts) on fresh episodes.
    Eval {
        /// `rlil`, `rl`, `bc` or `expert`.
        #[arg(long, default_value = "rlil")]
        mode: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Build the outcome dataset.
    SmData {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train the success model.
    SmTrain,
    /// Write action-sweep explanations for sample episodes.
    Explain {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = Common { dir: cli.dir, config: cli.config, sets: cli.sets, seed: cli.seed, workers: cli.workers };
    let result = match &cli.command {
        Command::Gen { import } => commands::gen(&common, import),
        Command::Mc => commands::mc(&common),
        Command::Train { mode } => commands::train(&common, mode.name()),
        Command::Eval { mode, checkpoint } => commands::eval(&common, mode, checkpoint.as_deref()),
        Command::SmData { checkpoint } => commands::sm_data(&common, checkpoint.as_deref()),
        Command::SmTrain => commands::sm_train(&common),
        Command::Explain { checkpoint } => commands::explain(&common, checkpoint.as_deref()),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
