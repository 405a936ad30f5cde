//! `runwayseq`: next-season design prediction pipeline over runway-show
//! feature data. Subcommands cover the full flow: generate a synthetic
//! corpus, train the collection-embedding model, train per-designer RNN or
//! LSTM sequence models, evaluate next-season ranking AUC, and export
//! class-occurrence trend series.
//!
//! Every command is deterministic given identical inputs and seed; the
//! seed falls back to the RUNWAYSEQ_SEED environment variable, then 42.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "runwayseq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted designer styles and trend.
    GenSynth(GenSynthArgs),
    /// Train the multi-task collection-embedding model.
    TrainEmbedding(TrainEmbeddingArgs),
    /// Train one sequence model per eligible designer.
    TrainSeq(TrainSeqArgs),
    /// Rank held-out collections against sampled negatives and report AUC.
    Evaluate(EvaluateArgs),
    /// Normalized per-year occurrence series for one predicted class label.
    TrendReport(TrendReportArgs),
}

#[derive(clap::Args)]
pub struct GenSynthArgs {
    /// Output directory for corpus.manifest, features/ and latents.tsv.
    #[arg(long)]
    pub out: PathBuf,
    /// Key/value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed (fallback: config file, then RUNWAYSEQ_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of designers (default 12).
    #[arg(long)]
    pub designers: Option<usize>,
    /// Number of timeline slots, two per year (default 16).
    #[arg(long)]
    pub seasons: Option<usize>,
    /// Minimum looks per collection (default 4).
    #[arg(long)]
    pub looks_min: Option<usize>,
    /// Maximum looks per collection (default 12).
    #[arg(long)]
    pub looks_max: Option<usize>,
    /// Feature dimension of generated looks (default 512).
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// Latent style dimension (default 8).
    #[arg(long)]
    pub style_dim: Option<usize>,
    /// Random-walk step scale for styles and trend (default 0.05).
    #[arg(long)]
    pub drift: Option<f64>,
    /// Weight of the shared trend in each look (default 0.5).
    #[arg(long)]
    pub trend_strength: Option<f64>,
    /// Per-look feature noise standard deviation (default 0.1).
    #[arg(long)]
    pub noise: Option<f64>,
    /// Probability a designer skips a slot (default 0).
    #[arg(long)]
    pub skip_prob: Option<f64>,
    /// First timeline year (default 2000).
    #[arg(long)]
    pub year0: Option<i32>,
}

#[derive(clap::Args)]
pub struct TrainEmbeddingArgs {
    /// Corpus manifest path.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output checkpoint path (.rwem).
    #[arg(long)]
    pub out: PathBuf,
    /// Training log path (default: checkpoint path with .log extension).
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Key/value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Collection embedding dimension (default 256).
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Collections per optimizer step (default 16).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Epoch cap (default 200).
    #[arg(long)]
    pub max_epoch: Option<usize>,
    /// No-improvement epochs per task before convergence (default 10).
    #[arg(long)]
    pub patience: Option<usize>,
    /// Seed (fallback: config file, then RUNWAYSEQ_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(clap::Args)]
pub struct TrainSeqArgs {
    /// Corpus manifest path.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Trained embedding checkpoint (.rwem).
    #[arg(long)]
    pub embedding: PathBuf,
    /// Recurrent cell kind: rnn or lstm.
    #[arg(long)]
    pub cell: String,
    /// Output directory for per-designer .rwsq checkpoints.
    #[arg(long)]
    pub out: PathBuf,
    /// Key/value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Hidden state dimension (default 128).
    #[arg(long)]
    pub hidden_dim: Option<usize>,
    /// Transitions per optimizer step (default 16).
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate (default 0.0001).
    #[arg(long)]
    pub lr: Option<f64>,
    /// Epoch cap per designer (default 500).
    #[arg(long)]
    pub max_epoch: Option<usize>,
    /// Seed (fallback: config file, then RUNWAYSEQ_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for per-designer training (default 1).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(clap::Args)]
pub struct EvaluateArgs {
    /// Corpus manifest path.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Trained embedding checkpoint (.rwem).
    #[arg(long)]
    pub embedding: PathBuf,
    /// Directories holding per-designer .rwsq checkpoints (repeatable;
    /// mixed cell kinds produce one report row each).
    #[arg(long, required = true)]
    pub seq: Vec<PathBuf>,
    /// Report output path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-designer breakdown path (default: report path with
    /// .designers.tsv extension).
    #[arg(long)]
    pub per_designer: Option<PathBuf>,
    /// Key/value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Negative collections sampled per positive (default 1).
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Evaluate only the N designers with the most collections
    /// (default 202, clamped to the corpus; 0 evaluates everyone).
    #[arg(long)]
    pub cohort: Option<usize>,
    /// Seed (fallback: config file, then RUNWAYSEQ_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(clap::Args)]
pub struct TrendReportArgs {
    /// Class prediction table (tab-separated: look_id, slot, designer,
    /// rank, label).
    #[arg(long)]
    pub classes: PathBuf,
    /// Class label to trace.
    #[arg(long)]
    pub label: String,
    /// Corpus manifest path (supplies the per-year designer counts).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output series path (year, normalized occurrence).
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::GenSynth(args) => commands::gen_synth(args),
        Command::TrainEmbedding(args) => commands::train_embedding_cmd(args),
        Command::TrainSeq(args) => commands::train_seq(args),
        Command::Evaluate(args) => commands::evaluate_cmd(args),
        Command::TrendReport(args) => commands::trend_report(args),
    }
}
