use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mgu_cli::commands::{self, Format};
use mgu_cli::config::ExperimentConfig;
use mgu_cli::experiment;
use mgu_core::Error;

/// Memorization-guided graph unlearning pipeline.
#[derive(Parser)]
#[command(name = "mgu", version, about)]
struct Cli {
    /// Path to the experiment configuration (JSON).
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Override the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Override every configured seed (split, training, unlearning).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for data-parallel sections (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Report output format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the configured synthetic graph and write graph.json.
    GenSbm,
    /// Train the original model.
    Train,
    /// Estimate per-node memorization scores.
    Memscore,
    /// Memorization scores plus task-level difficulty scores.
    Difficulty,
    /// Build the five difficulty-stratified deletion sets.
    Sample,
    /// Run adaptive unlearning for the configured request.
    Unlearn {
        /// Original model JSON; trained fresh when absent.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score an unlearned model against a retrained reference.
    Evaluate {
        /// Unlearned model JSON.
        #[arg(long)]
        unlearned: PathBuf,
        /// Retrained reference model JSON.
        #[arg(long)]
        retrained: PathBuf,
        /// Deletion request JSON.
        #[arg(long)]
        request: PathBuf,
    },
    /// Full pipeline: train, score, sample, unlearn, evaluate, aggregate.
    Experiment,
}

fn apply_overrides(cfg: &mut ExperimentConfig, cli: &Cli) {
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.split.seed = seed;
        cfg.train.seed = seed;
        cfg.unlearn.seed = seed;
        cfg.seeds = vec![seed];
    }
}

fn run(cli: &Cli) -> mgu_core::Result<()> {
    mgu_core::par::configure_workers(cli.workers);
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    apply_overrides(&mut cfg, cli);
    match &cli.command {
        Command::GenSbm => commands::cmd_gen_sbm(&cfg),
        Command::Train => commands::cmd_train(&cfg),
        Command::Memscore => commands::cmd_memscore(&cfg),
        Command::Difficulty => commands::cmd_difficulty(&cfg),
        Command::Sample => commands::cmd_sample(&cfg),
        Command::Unlearn { model } => commands::cmd_unlearn(&cfg, model.as_deref()),
        Command::Evaluate { unlearned, retrained, request } => {
            commands::cmd_evaluate(&cfg, unlearned, retrained, request, cli.format.into())
        }
        Command::Experiment => experiment::cmd_experiment(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("MGU_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = match e {
                Error::Config(_) => 2u8,
                _ => 1u8,
            };
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.to_string(), "exit_code": code })
            );
            ExitCode::from(code)
        }
    }
}
