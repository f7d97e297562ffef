//! Command-line front end for the segmentor: `pretrain`, `train`,
//! `segment` and `eval` subcommands sharing one key=value settings
//! model (built-in defaults, then a settings file, then flags).

mod commands;
mod settings;

pub use settings::Settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "nseg",
    version,
    about = "Transition-based neural Chinese word segmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Pretrain the shared character-window network on auxiliary tasks.
    Pretrain(PretrainArgs),
    /// Train a segmentor with beam search and early updates.
    Train(TrainArgs),
    /// Segment raw text with a trained model.
    Segment(SegmentArgs),
    /// Score a predicted segmentation against gold.
    Eval(EvalArgs),
}

/// Settings plumbing shared by the model-building commands. Precedence,
/// lowest to highest: built-in defaults, --config file, --set pairs,
/// dedicated flags.
#[derive(Args, Debug)]
pub struct SettingsArgs {
    /// Key=value settings file (same keys as --print-config prints).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// One settings override, repeatable (e.g. --set hidden_dim=64).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Character-context encoder: none|window|lstm|window_plus_lstm.
    #[arg(long, value_name = "MODE")]
    pub char_mode: Option<String>,
    /// Word-context encoder: none|window_1|window_2|window_3|lstm|window_plus_lstm.
    #[arg(long, value_name = "MODE")]
    pub word_mode: Option<String>,
    /// Print the effective settings and exit without running.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Args, Debug)]
pub struct PretrainArgs {
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Raw corpus with punctuation kept, for the punctuation task.
    #[arg(long, value_name = "FILE")]
    pub punc: Option<PathBuf>,
    /// Automatically segmented (silver) corpus.
    #[arg(long, value_name = "FILE")]
    pub autoseg: Option<PathBuf>,
    /// Corpus segmented under a different standard.
    #[arg(long, value_name = "FILE")]
    pub hetero: Option<PathBuf>,
    /// POS-tagged corpus, word<delim>TAG tokens.
    #[arg(long, value_name = "FILE")]
    pub pos: Option<PathBuf>,
    /// Word/tag delimiter in the --pos corpus.
    #[arg(long, default_value = "/", value_name = "STR")]
    pub pos_delim: String,
    /// Pretraining epochs (shorthand for --set pretrain.epochs=N).
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    /// Seed for initialization and task sampling.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Externally pretrained character embeddings (token v1..vd lines).
    #[arg(long, value_name = "FILE")]
    pub char_emb: Option<PathBuf>,
    /// Externally pretrained bigram embeddings.
    #[arg(long, value_name = "FILE")]
    pub bichar_emb: Option<PathBuf>,
    /// Output model file.
    #[arg(long, value_name = "FILE", required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
    /// Also write the per-epoch log lines to this file.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub settings: SettingsArgs,
    /// Training corpus, space-separated words per line.
    #[arg(long, value_name = "FILE", required_unless_present = "print_config")]
    pub train: Option<PathBuf>,
    /// Development corpus for model selection.
    #[arg(long, value_name = "FILE", required_unless_present = "print_config")]
    pub dev: Option<PathBuf>,
    /// Pretrained model whose embeddings and window network seed this
    /// run; its vocabularies and window-stack sizes take precedence.
    #[arg(long, value_name = "FILE")]
    pub pretrained: Option<PathBuf>,
    /// Beam width (shorthand for --set train.beam=N).
    #[arg(long, value_name = "N")]
    pub beam: Option<usize>,
    /// Training epochs.
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    /// Seed for initialization, shuffling and noise.
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Externally pretrained character embeddings; a --pretrained model
    /// overwrites these rows again during transfer.
    #[arg(long, value_name = "FILE")]
    pub char_emb: Option<PathBuf>,
    /// Externally pretrained bigram embeddings.
    #[arg(long, value_name = "FILE")]
    pub bichar_emb: Option<PathBuf>,
    /// Externally pretrained word embeddings (frozen by default).
    #[arg(long, value_name = "FILE")]
    pub word_emb: Option<PathBuf>,
    /// Output model file; holds the best-dev checkpoint.
    #[arg(long, value_name = "FILE", required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
    /// Metrics log file (default: <out>.log).
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SegmentArgs {
    /// Segmentor model file.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Input text, one sentence per line (default: standard input).
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Output file (default: standard output).
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
    /// Beam width.
    #[arg(long, default_value_t = 8, value_name = "N")]
    pub beam: usize,
    /// Worker threads decoding in parallel; output order is preserved.
    #[arg(long, default_value_t = 1, value_name = "N")]
    pub threads: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Gold corpus.
    #[arg(long, value_name = "FILE")]
    pub gold: PathBuf,
    /// Predicted corpus, aligned with gold line by line.
    #[arg(long, value_name = "FILE")]
    pub pred: PathBuf,
    /// Also break results down by sentence length.
    #[arg(long)]
    pub per_length_bucket: bool,
}

/// Parses the process arguments and runs the chosen command.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn dispatch(cli: &Cli) -> nseg::Result<()> {
    match &cli.command {
        Command::Pretrain(args) => commands::pretrain(args),
        Command::Train(args) => commands::train(args),
        Command::Segment(args) => commands::segment(args),
        Command::Eval(args) => commands::eval(args),
    }
}
