//! `molgen`: curate, train, generate, evaluate, analyze and edit from one
//! TOML config. Every command writes `<command>.manifest.json` next to its
//! outputs and reports failures as a JSON record on stderr.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::Run;
use config::LoadedConfig;
use manifest::Manifest;

#[derive(Debug, Parser)]
#[command(name = "molgen", version, about = "Conditional molecule generation pipeline")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, env = "MOLGEN_CONFIG", global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, env = "MOLGEN_SEED", global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to one per core.
    #[arg(long, env = "MOLGEN_WORKERS", global = true)]
    workers: Option<usize>,
    /// Output directory shared by all commands.
    #[arg(long, env = "MOLGEN_OUT", global = true, default_value = "molgen-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split the dataset and build the example and challenging sets.
    Curate,
    /// Train the sequence model on the curated set.
    Train,
    /// Sample molecules conditioned on test-set properties.
    Generate,
    /// Score generated molecules against a reference set.
    Evaluate {
        /// Samples to score; defaults to the output of `generate`.
        #[arg(long)]
        samples: Option<PathBuf>,
        /// Reference set; defaults to the curated training set.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Substructure associations and latent separability.
    Analyze,
    /// Property-targeted editing of one source molecule.
    Edit,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Curate => "curate",
            Command::Train => "train",
            Command::Generate => "generate",
            Command::Evaluate { .. } => "evaluate",
            Command::Analyze => "analyze",
            Command::Edit => "edit",
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    let config_path = cli.config.context("no config given; pass --config or set MOLGEN_CONFIG")?;
    let loaded = LoadedConfig::load(&config_path)?;
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let seed = cli.seed.unwrap_or(loaded.config.seed);
    let name = cli.command.name();
    let mut manifest = Manifest::new(name, seed, cli.workers, &loaded.text, &cli.out);
    manifest.input(&loaded.path)?;
    let mut run = Run {
        loaded,
        seed,
        out: cli.out,
        manifest,
    };
    match cli.command {
        Command::Curate => commands::curate(&mut run)?,
        Command::Train => commands::train(&mut run)?,
        Command::Generate => commands::generate_cmd(&mut run)?,
        Command::Evaluate { samples, reference } => commands::evaluate_cmd(&mut run, samples, reference)?,
        Command::Analyze => commands::analyze(&mut run)?,
        Command::Edit => commands::edit(&mut run)?,
    }
    run.manifest.write()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let command = cli.command.name();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({
                "command": command,
                "error": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
