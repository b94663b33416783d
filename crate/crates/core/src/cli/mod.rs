//! Command-line surface. Every subcommand except `generate` reads one TOML
//! config; `--seed` and `--out` override the file.

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};

use crate::models::ModelKind;
use commands::Ctx;
use config::RunConfig;

#[derive(Debug, Parser)]
#[command(
    name = "lexaudit",
    version,
    about = "Tweet classification, grouped evaluation and lexical bias audit"
)]
pub struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read and filter the labeled corpus into the output directory.
    Ingest,
    /// Fit the feature space on the ingested corpus and write the matrix.
    Featurize,
    /// Train one model on the full feature matrix.
    Train {
        /// Model kind; overrides `[model] kind`.
        #[arg(long)]
        kind: Option<ModelKind>,
    },
    /// Cross-validate models under each configured split method.
    Evaluate {
        /// Evaluate this model file's configuration instead of `[evaluate] models`.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Score the mention and word-list baselines on the same splits.
    Baseline,
    /// Bucket a trained model's word importances against the dialect reference corpus.
    Audit {
        /// Model file; defaults to the one written by `train`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dialect posterior threshold; overrides `[audit] tau`.
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Run every stage and write a combined report.
    Pipeline,
    /// Write a synthetic labeled corpus, dialect corpus and community map.
    Generate {
        /// Number of labeled tweets.
        #[arg(long, default_value_t = 2000)]
        n: usize,
        /// Share of positive tweets.
        #[arg(long)]
        positive_fraction: Option<f64>,
        /// Number of dialect reference tweets.
        #[arg(long, default_value_t = 2000)]
        dialect: usize,
    },
}

fn context(cli: &Cli) -> anyhow::Result<Ctx> {
    let path = cli.config.as_deref().context("this command needs --config <path>")?;
    Ctx::new(RunConfig::load(path, cli.seed, cli.out.as_deref())?)
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Generate {
            n,
            positive_fraction,
            dialect,
        } => {
            let seed = cli.seed.context("generate needs --seed")?;
            let out = cli.out.as_deref().context("generate needs --out <dir>")?;
            let seeds = commands::generate(out, *n, *positive_fraction, *dialect, seed)?;
            println!("wrote {} (seed accounts: {})", out.display(), seeds.join(", "));
        }
        Command::Ingest => commands::ingest(&context(&cli)?)?,
        Command::Featurize => commands::featurize(&context(&cli)?)?,
        Command::Train { kind } => commands::train(&context(&cli)?, *kind)?,
        Command::Evaluate { model } => print!("{}", commands::evaluate(&context(&cli)?, model.as_deref())?.table),
        Command::Baseline => print!("{}", commands::baseline(&context(&cli)?)?.table),
        Command::Audit { model, tau } => print!("{}", commands::audit(&context(&cli)?, model.as_deref(), *tau)?),
        Command::Pipeline => print!("{}", commands::pipeline(&context(&cli)?)?),
    }
    Ok(())
}
