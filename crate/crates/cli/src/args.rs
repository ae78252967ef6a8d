use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use polar_rewrite::datagen::Split;
use polar_rewrite::flags::{SatisfactionMode, SatisfierConfig, StyleTrigger};
use polar_rewrite::pipeline::Decoder;
use serde::Serialize;

/// Rewrite polar question/answer pairs into standalone statements.
///
/// Every option can also be set through an environment variable named
/// `POLAR_REWRITE_<OPTION>` (for example `POLAR_REWRITE_SEED`).
#[derive(Debug, Parser)]
#[command(name = "polar-rewrite", version)]
pub struct Cli {
    /// Log more (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with train/dev/test splits.
    Datagen(DatagenArgs),
    /// Extract phrase constraints from bracketed parses.
    ExtractConstraints(ExtractArgs),
    /// Train a model on one split of a corpus.
    Train(TrainArgs),
    /// Decode rewrites with a trained checkpoint.
    Rewrite(RewriteArgs),
    /// Score rewrites against the gold targets.
    Evaluate(EvaluateArgs),
    /// Print the flag matrix of one input/output pair.
    InspectFlags(InspectArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Semantic,
    Lexical,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerArg {
    #[value(name = "first_person")]
    FirstPerson,
    #[value(name = "second_person")]
    SecondPerson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderArg {
    Greedy,
    Beam,
    Cbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    Tsv,
    Json,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

impl From<DecoderArg> for Decoder {
    fn from(d: DecoderArg) -> Decoder {
        match d {
            DecoderArg::Greedy => Decoder::Greedy,
            DecoderArg::Beam => Decoder::Beam,
            DecoderArg::Cbs => Decoder::Cbs,
        }
    }
}

/// Flag satisfaction settings shared by the model-facing commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SatisfierArgs {
    /// How constraint flags flip to satisfied; `off` trains a model without flags.
    #[arg(
        long,
        value_enum,
        default_value = "semantic",
        env = "POLAR_REWRITE_MODE"
    )]
    pub mode: ModeArg,
    /// Similarity floor.
    #[arg(long, default_value_t = 0.8, env = "POLAR_REWRITE_THRESHOLD_A")]
    pub threshold_a: f64,
    /// Minimum similarity gain of the step that satisfies a constraint.
    #[arg(long, default_value_t = 0.3, env = "POLAR_REWRITE_THRESHOLD_B")]
    pub threshold_b: f64,
    #[arg(long, value_enum, default_value = "off", env = "POLAR_REWRITE_STYLE")]
    pub style: Toggle,
    #[arg(
        long,
        value_enum,
        default_value = "first_person",
        env = "POLAR_REWRITE_STYLE_TRIGGER"
    )]
    pub style_trigger: TriggerArg,
}

impl SatisfierArgs {
    pub fn config(&self) -> SatisfierConfig {
        SatisfierConfig {
            threshold_a: self.threshold_a,
            threshold_b: self.threshold_b,
            mode: match self.mode {
                ModeArg::Semantic => SatisfactionMode::Semantic,
                ModeArg::Lexical => SatisfactionMode::Lexical,
                ModeArg::Off => SatisfactionMode::Off,
            },
            style_enabled: self.style == Toggle::On,
            style_trigger: match self.style_trigger {
                TriggerArg::FirstPerson => StyleTrigger::FirstPerson,
                TriggerArg::SecondPerson => StyleTrigger::SecondPerson,
            },
            ..SatisfierConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DatagenArgs {
    /// Output directory for the JSONL files, manifest and config snapshot.
    #[arg(long, env = "POLAR_REWRITE_OUT")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1500, env = "POLAR_REWRITE_N")]
    pub n: usize,
    #[arg(long, default_value_t = 13, env = "POLAR_REWRITE_SEED")]
    pub seed: u64,
    /// Category weights: explanation,complement,condition,alternative.
    #[arg(long, value_delimiter = ',', num_args = 4, default_values_t = [0.25, 0.25, 0.25, 0.25], env = "POLAR_REWRITE_MIX")]
    pub mix: Vec<f64>,
    /// Share of answers that get an extra first-person sentence.
    #[arg(long, default_value_t = 0.2, env = "POLAR_REWRITE_FIRST_PERSON_RATE")]
    pub first_person_rate: f64,
    /// Restrict generation to these domains.
    #[arg(long, value_delimiter = ',', env = "POLAR_REWRITE_DOMAINS")]
    pub domains: Vec<String>,
    /// Put every instance of this domain in the test split.
    #[arg(long, env = "POLAR_REWRITE_HOLDOUT")]
    pub holdout: Option<String>,
    /// Explicit train,dev,test sizes.
    #[arg(
        long,
        value_delimiter = ',',
        num_args = 3,
        env = "POLAR_REWRITE_SPLIT_SIZES"
    )]
    pub split_sizes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExtractArgs {
    /// Corpus JSONL whose parses are re-extracted.
    #[arg(
        long,
        conflicts_with = "tree",
        required_unless_present = "tree",
        env = "POLAR_REWRITE_INPUT"
    )]
    pub input: Option<PathBuf>,
    /// A single bracketed question parse.
    #[arg(long)]
    pub tree: Option<String>,
    /// Bracketed answer parse to pair with --tree.
    #[arg(long, requires = "tree")]
    pub answer_tree: Option<String>,
    /// Also keep subject and root NPs.
    #[arg(long)]
    pub include_toplevel_np: bool,
    /// Output JSONL (stdout when absent).
    #[arg(long, env = "POLAR_REWRITE_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    /// Corpus JSONL; the vocabulary covers every split in it.
    #[arg(long, env = "POLAR_REWRITE_DATA")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "train", env = "POLAR_REWRITE_SPLIT")]
    pub split: SplitArg,
    /// Output directory for the checkpoint, loss log and config snapshot.
    #[arg(long, env = "POLAR_REWRITE_OUT")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20, env = "POLAR_REWRITE_EPOCHS")]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3, env = "POLAR_REWRITE_LR")]
    pub lr: f64,
    #[arg(long, default_value_t = 16, env = "POLAR_REWRITE_BATCH_SIZE")]
    pub batch_size: usize,
    #[arg(long, default_value_t = 64, env = "POLAR_REWRITE_DIM")]
    pub dim: usize,
    #[arg(long, default_value_t = 4, env = "POLAR_REWRITE_HEADS")]
    pub heads: usize,
    #[arg(long, default_value_t = 128, env = "POLAR_REWRITE_FF_DIM")]
    pub ff_dim: usize,
    /// Encoder and decoder depth.
    #[arg(long, default_value_t = 2, env = "POLAR_REWRITE_LAYERS")]
    pub layers: usize,
    #[arg(long, default_value_t = 48, env = "POLAR_REWRITE_MAX_LEN")]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.0, env = "POLAR_REWRITE_LABEL_SMOOTHING")]
    pub label_smoothing: f64,
    #[arg(long, default_value_t = 7, env = "POLAR_REWRITE_SEED")]
    pub seed: u64,
    #[command(flatten)]
    pub satisfier: SatisfierArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RewriteArgs {
    /// Checkpoint written by `train`.
    #[arg(long, env = "POLAR_REWRITE_MODEL")]
    pub model: PathBuf,
    #[arg(long, env = "POLAR_REWRITE_DATA")]
    pub data: PathBuf,
    /// Split to decode; every instance when absent.
    #[arg(long, value_enum, env = "POLAR_REWRITE_SPLIT")]
    pub split: Option<SplitArg>,
    /// Decode at most this many instances.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Output JSONL; the config snapshot goes to `<out>.config.json`.
    #[arg(long, env = "POLAR_REWRITE_OUT")]
    pub out: PathBuf,
    #[arg(
        long,
        value_enum,
        default_value = "beam",
        env = "POLAR_REWRITE_DECODER"
    )]
    pub decoder: DecoderArg,
    #[arg(long, default_value_t = 4, env = "POLAR_REWRITE_BEAM")]
    pub beam: usize,
    #[arg(long, default_value_t = 40, env = "POLAR_REWRITE_MAX_LEN")]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.7, env = "POLAR_REWRITE_LENGTH_PENALTY")]
    pub length_penalty: f64,
    /// Write one flag matrix per instance into this directory.
    #[arg(long, env = "POLAR_REWRITE_TRACE")]
    pub trace: Option<PathBuf>,
    #[command(flatten)]
    pub satisfier: SatisfierArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    /// JSONL of `{"id", "output"}` records, e.g. from `rewrite`.
    #[arg(long, env = "POLAR_REWRITE_OUTPUTS")]
    pub outputs: PathBuf,
    /// Corpus JSONL holding the gold targets.
    #[arg(long, env = "POLAR_REWRITE_DATA")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test", env = "POLAR_REWRITE_SPLIT")]
    pub split: SplitArg,
    /// Output directory for report.json and report.txt.
    #[arg(long, env = "POLAR_REWRITE_OUT")]
    pub out: PathBuf,
    /// System name shown in the report.
    #[arg(long, default_value = "system", env = "POLAR_REWRITE_SYSTEM")]
    pub system: String,
    /// Thresholds used by the coverage audit.
    #[command(flatten)]
    pub satisfier: SatisfierArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InspectArgs {
    /// Encoder input text.
    #[arg(long)]
    pub input: String,
    /// Output text to replay.
    #[arg(long)]
    pub output: String,
    /// Constraint span; must occur in the input.
    #[arg(long = "constraint")]
    pub constraints: Vec<String>,
    /// Similarity of constraint 0 after each output token, replacing the
    /// built-in embedder.
    #[arg(long, value_delimiter = ',', conflicts_with = "sims_file")]
    pub sims: Option<Vec<f64>>,
    /// JSON similarity table (constraint id, prefix length, value).
    #[arg(long)]
    pub sims_file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: TraceFormat,
    /// Write the matrix here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub satisfier: SatisfierArgs,
}
