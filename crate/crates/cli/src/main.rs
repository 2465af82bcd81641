//! `coderl`: train, evaluate and inspect feedback-driven program synthesis
//! runs on the bundled mini-language.
//!
//! Every failure prints one JSON error record on stderr and exits with 2
//! (config), 3 (corpus) or 4 (anything else).

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "coderl", version, about = "Meta-RL program synthesis with memory-backed feedback")]
struct Cli {
    /// TOML run config; built-in defaults when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides `corpus`.
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Overrides `trainer.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a policy and save checkpoint, long-term memory and metrics.
    Train {
        #[arg(long)]
        max_iterations: Option<usize>,
    },
    /// pass@k of a checkpoint on the corpus.
    Evaluate {
        /// Defaults to the run's checkpoint path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Skip retrieval even when the config enables long-term memory.
        #[arg(long)]
        no_memory: bool,
    },
    /// Sample programs for one task and show how they score.
    Generate {
        #[arg(long)]
        task: String,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        samples: usize,
        /// Defaults to the config's evaluation temperature.
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        no_memory: bool,
    },
    /// Finite-difference check of the supervised and reinforcement losses.
    GradCheck {
        #[arg(long, default_value_t = 50)]
        instances: usize,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 8)]
        buckets: usize,
        #[arg(long, default_value_t = 12)]
        max_len: usize,
    },
    /// Long-term memory statistics and nearest neighbours of a query.
    InspectMemory {
        /// Defaults to the run's memory file.
        #[arg(long)]
        lmb: Option<PathBuf>,
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        k: Option<usize>,
    },
    /// Train and evaluate every memory configuration over several seeds.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => coderl_core::harness::RunConfig::load(p)?,
        None => coderl_core::harness::RunConfig::default(),
    };
    if let Some(d) = cli.output_dir {
        config.output_dir = d;
    }
    if let Some(c) = cli.corpus {
        config.corpus = Some(c);
    }
    if let Some(s) = cli.seed {
        config.trainer.seed = s;
    }
    if let Command::Train { max_iterations: Some(n) } = cli.command {
        config.trainer.max_iterations = n;
    }
    config.validate()?;
    match cli.command {
        Command::Train { .. } => commands::train(&config),
        Command::Evaluate { checkpoint, no_memory } => commands::evaluate(&config, checkpoint, no_memory),
        Command::Generate { task, checkpoint, samples, temperature, no_memory } => {
            commands::generate(&config, &task, checkpoint, samples, temperature, no_memory)
        }
        Command::GradCheck { instances, hidden, buckets, max_len } => {
            commands::grad_check(&config, instances, hidden, buckets, max_len)
        }
        Command::InspectMemory { lmb, query, k } => commands::inspect_memory(&config, lmb, query, k),
        Command::Ablate { seeds } => commands::ablate(&config, &seeds),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let e = CliError::Usage(e.render().to_string().trim_end().to_string());
            eprintln!("{}", e.record());
            return ExitCode::from(e.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
