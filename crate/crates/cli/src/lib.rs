//! Command-line front end: corpus generation, training, evaluation, the
//! experiment table, gradient checks and single-pair prediction.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lambda_nli::model::Mode;

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;

pub use error::{CliError, CliResult};

/// Version stamped into every JSON document the tool writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(name = "lambda-nli", version, about = "Entity-aware NLI with lambda attention")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate the entity-change, role-switch and control corpora.
    Generate {
        /// Generation config (TOML). Relative resource paths resolve against its directory.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed. Falls back to NLI_SEED.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and write a checkpoint plus per-epoch metrics.
    Train(Box<TrainArgs>),
    /// Score a checkpoint on one or more corpora.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "data", required = true, num_args = 1..)]
        data: Vec<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run every row of an experiment spec and print the accuracy table.
    Experiment {
        spec: PathBuf,
        /// Output directory; defaults to the spec's `out` or `<spec dir>/experiment`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every parameter group in both modes.
    Gradcheck {
        /// First seed. Falls back to NLI_SEED, then 0.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of consecutive seeds.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        json: bool,
    },
    /// Classify one sentence pair.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        premise: String,
        #[arg(long)]
        hypothesis: String,
        /// Print probabilities and the attention matrices e, sym, lambda and e' as JSON.
        #[arg(long)]
        explain: bool,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpora (JSONL); concatenated.
    #[arg(long = "train", required = true, num_args = 1..)]
    pub train: Vec<PathBuf>,
    /// Dev corpus used to pick the best epoch.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Run config (TOML with [model] and [train] tables). Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub mode: Option<Mode>,
    /// Symbolic match score; ignored by the baseline.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long)]
    pub lambda_init: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Falls back to the config, then NLI_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub unk_dropout: Option<f64>,
    #[arg(long)]
    pub name_dropout: Option<f64>,
    #[arg(long)]
    pub clip: Option<f64>,
    /// Checkpoint path.
    #[arg(long)]
    pub out: PathBuf,
    /// Metrics CSV; defaults to the checkpoint path with `.metrics.csv`.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// writing normal output to `out`. Help and version requests print and
/// succeed.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            write!(out, "{e}")?;
            return Ok(());
        }
        Err(e) => {
            let msg = e.render().to_string();
            return Err(CliError::Usage(msg.trim_start_matches("error: ").trim_end().to_string()));
        }
    };
    match cli.command {
        Command::Generate { config, seed, out: dir } => commands::generate(config.as_deref(), seed, &dir, out),
        Command::Train(args) => commands::train(&args, out),
        Command::Eval { model, data, json } => commands::eval(&model, &data, json, out),
        Command::Experiment { spec, out: dir } => experiment::run(&spec, dir.as_deref(), out),
        Command::Gradcheck { seed, seeds, json } => commands::gradcheck(seed, seeds, json, out),
        Command::Predict {
            model,
            premise,
            hypothesis,
            explain,
            json,
        } => commands::predict(&model, &premise, &hypothesis, explain, json, out),
    }
}
