use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fixattn::data::Task;
use fixattn::model::HeadPreset;
use fixattn::patterns::PatternKind;

#[derive(Debug, Parser)]
#[command(name = "fixattn", version, about = "Encoder-decoder translation with fixed encoder attention patterns")]
pub struct Cli {
    /// Print progress messages on stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write it to an output directory.
    Train(Box<TrainArgs>),
    /// Translate a file line by line with greedy decoding.
    Translate(TranslateArgs),
    /// Translate a test set and report BLEU.
    Evaluate(EvaluateArgs),
    /// Report the BLEU change when each encoder head is masked in all layers.
    Ablate(AblateArgs),
    /// Score a contrastive fixture and report accuracy.
    ScoreContrastive(ContrastiveArgs),
    /// Print parameter counts for every head layout.
    Params(ParamsArgs),
    /// Print a fixed attention pattern as CSV.
    DumpPatterns(DumpArgs),
    /// Write a synthetic parallel corpus and its contrastive fixture.
    GenData(GenDataArgs),
    /// Paired bootstrap significance test between two system outputs.
    Bootstrap(BootstrapArgs),
}

/// Model shape flags shared by `train` and `params`.
#[derive(Debug, Args, Default)]
pub struct ShapeArgs {
    /// Encoder head layout: 8L, 7Ftoken+1L, 7Fword+1L, 8Ftoken or 1L.
    #[arg(long)]
    pub heads: Option<HeadPreset>,
    #[arg(long)]
    pub enc_layers: Option<usize>,
    #[arg(long)]
    pub dec_layers: Option<usize>,
    #[arg(long)]
    pub d_model: Option<usize>,
    #[arg(long)]
    pub d_ff: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON run configuration; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for checkpoint, configuration and vocabularies.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Longest sentence the model accepts.
    #[arg(long)]
    pub max_len: Option<usize>,

    /// Train on a synthetic task instead of files.
    #[arg(long, conflicts_with_all = ["src", "tgt"])]
    pub task: Option<Task>,
    /// Content symbols of the synthetic task.
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Sentences of the synthetic task.
    #[arg(long)]
    pub sentences: Option<usize>,
    #[arg(long)]
    pub min_sent_len: Option<usize>,
    #[arg(long)]
    pub max_sent_len: Option<usize>,
    /// Seed of the synthetic corpus.
    #[arg(long)]
    pub data_seed: Option<u64>,

    /// Source side of a parallel corpus.
    #[arg(long, requires = "tgt")]
    pub src: Option<PathBuf>,
    #[arg(long, requires = "src")]
    pub tgt: Option<PathBuf>,
    /// Split long words into @@-marked pieces.
    #[arg(long)]
    pub subword: bool,

    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Source-token cap per batch.
    #[arg(long)]
    pub batch_tokens: Option<usize>,
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Seeds initialisation, shuffling and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Directory written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    /// Worker threads for decoding; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Also report BLEU by reference length.
    #[arg(long)]
    pub by_length: bool,
    /// Bucket edges for --by-length, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = fixattn::eval::DEFAULT_BUCKET_EDGES)]
    pub edges: Vec<usize>,
    /// Write the translations here.
    #[arg(long)]
    pub hyps: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ContrastiveArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Tab-separated source, reference, contrastive, attribute lines.
    #[arg(long)]
    pub fixture: PathBuf,
    #[arg(long)]
    pub by_attribute: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ParamsArgs {
    /// JSON run or model configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from the base shape (512 wide, 6+6 layers) instead of the toy one.
    #[arg(long)]
    pub base: bool,
    #[command(flatten)]
    pub shape: ShapeArgs,
    #[arg(long)]
    pub src_vocab: Option<usize>,
    #[arg(long)]
    pub tgt_vocab: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct DumpArgs {
    /// Pattern name (current, prev, next, left, right, end, start, last) or number 1-8.
    #[arg(long)]
    pub kind: PatternKind,
    /// Sentence length for a token-based pattern.
    #[arg(long, conflicts_with = "sentence", required_unless_present = "sentence")]
    pub length: Option<usize>,
    /// Whitespace-separated subword tokens with @@ continuation markers.
    #[arg(long)]
    pub sentence: Option<String>,
    /// Build the word-based pattern from the sentence segmentation.
    #[arg(long, requires = "sentence")]
    pub word: bool,
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub task: Task,
    #[arg(long, default_value_t = 20)]
    pub vocab_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub sentences: usize,
    #[arg(long, default_value_t = 3)]
    pub min_sent_len: usize,
    #[arg(long, default_value_t = 10)]
    pub max_sent_len: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Writes PREFIX.src, PREFIX.tgt and PREFIX.contrastive.tsv.
    #[arg(long)]
    pub out_prefix: PathBuf,
    /// Put the last N sentences into PREFIX.test.* instead.
    #[arg(long, default_value_t = 0)]
    pub test: usize,
}

#[derive(Debug, Args)]
pub struct BootstrapArgs {
    #[arg(long)]
    pub hyps_a: PathBuf,
    #[arg(long)]
    pub hyps_b: PathBuf,
    #[arg(long = "ref")]
    pub reference: PathBuf,
    #[arg(long, default_value_t = fixattn::eval::DEFAULT_RESAMPLES)]
    pub resamples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub json: bool,
}
