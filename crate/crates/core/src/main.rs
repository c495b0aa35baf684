use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use bangla_bully::pipeline::{self, RunConfig};
use bangla_bully::Result;

/// Bangla cyberbullying detection: CNN-LSTM classifiers with a stacked
/// meta-classifier.
#[derive(Parser, Debug)]
#[command(name = "bangla-bully", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for the split, embeddings, networks and meta-classifiers.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Training epochs for both networks.
    #[arg(long, global = true)]
    epochs: Option<usize>,

    /// Keep the embedding layer fixed during training.
    #[arg(long, global = true)]
    freeze_embeddings: bool,

    /// Train the meta-classifiers on in-sample network predictions.
    #[arg(long, global = true)]
    in_sample: bool,

    /// Dataset CSV, overriding the config.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,

    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split the dataset and fit the vocabulary.
    Preprocess,
    /// Train skip-gram word embeddings.
    Embed,
    /// Train the binary and multiclass networks.
    Train,
    /// Compare the meta-classifiers and fit the final one.
    Ensemble,
    /// Write the confusion matrix, reports and summary.
    Evaluate,
    /// Classify one comment with the saved artifacts.
    Predict {
        /// The comment text.
        text: String,
    },
    /// Run every stage in order.
    RunAll,
    /// Print the effective configuration as TOML.
    Config,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.set_seed(seed);
    }
    if let Some(epochs) = cli.epochs {
        config.set_epochs(epochs);
    }
    if cli.freeze_embeddings {
        config.set_freeze_embeddings(true);
    }
    if cli.in_sample {
        config.ensemble.in_sample = true;
    }
    if let Some(d) = &cli.dataset {
        config.dataset = d.clone();
    }
    if let Some(o) = &cli.output {
        config.output_dir = o.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Preprocess => pipeline::preprocess(&config),
        Command::Embed => pipeline::embed(&config),
        Command::Train => pipeline::train(&config),
        Command::Ensemble => pipeline::ensemble(&config),
        Command::Evaluate => pipeline::evaluate(&config).map(|s| println!("{s}")),
        Command::RunAll => pipeline::run_pipeline(&config).map(|s| println!("{s}")),
        Command::Predict { text } => pipeline::predict_text(&config, text).map(|p| println!("{p}")),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
