//! kpeval: keyphrase experiment toolkit.
//!
//! Subcommands cover the post-model pipeline: corpus statistics, majority
//! voting over generated sequences, verdict filtering, exact/partial F1
//! evaluation, binary filter evaluation, training-data sampling and
//! randomized Tukey HSD significance testing.

mod commands;
mod meta;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "kpeval", version, about = "Keyphrase evaluation toolkit")]
struct Cli {
    /// Worker threads (default: available parallelism). Never affects
    /// output content.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Corpus statistics: document count, mean keyphrases, absent ratio.
    Stats(StatsArgs),
    /// Print raw -> normalized (-> stemmed) forms, tab-separated.
    Normalize(NormalizeArgs),
    /// Majority-vote beam sequences into one ranked keyphrase list per
    /// document.
    Vote(VoteArgs),
    /// Drop predictions whose filter verdict is false.
    Filter(FilterArgs),
    /// Evaluate ranked predictions: F1@5 / F1@O, exact and partial,
    /// present/absent/all subsets.
    Eval(EvalArgs),
    /// Accuracy and confusion matrix of filter verdicts against labels.
    BinaryEval(BinaryEvalArgs),
    /// Emit fine-tuning example files.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Randomized Tukey HSD test over a documents x systems score matrix.
    Hsd(HsdArgs),
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus JSON-lines file.
    #[arg(long)]
    corpus: PathBuf,
    /// Split label recorded in the output.
    #[arg(long, default_value = "test")]
    split: String,
    /// Malformed lines tolerated before the load fails.
    #[arg(long, default_value_t = 0)]
    max_skipped: usize,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Phrases to normalize; read from --input when empty.
    phrases: Vec<String>,
    /// File with one phrase per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Add the stemmed form as a third column.
    #[arg(long)]
    show_stems: bool,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VoteArgs {
    /// Prediction JSON-lines file ({"id","sequences":[...]} or
    /// {"id","keyphrases":[...]}).
    #[arg(long)]
    predictions: PathBuf,
    /// Delimiter splitting keyphrases inside string-valued sequences.
    #[arg(long, default_value = ";")]
    delimiter: String,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct FilterArgs {
    /// Ranked predictions JSON-lines file.
    #[arg(long)]
    predictions: PathBuf,
    /// Verdict JSON-lines file ({"id","keyphrase","relevant"} or "score").
    #[arg(long)]
    verdicts: PathBuf,
    /// Binarization threshold for score-valued verdicts.
    #[arg(long)]
    threshold: Option<f64>,
    /// What to do with predictions that have no verdict.
    #[arg(long, default_value = "keep")]
    missing_policy: String,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus JSON-lines file (the golden keyphrases).
    #[arg(long)]
    corpus: PathBuf,
    /// Prediction JSON-lines file.
    #[arg(long)]
    predictions: PathBuf,
    /// Matchers to run.
    #[arg(long, value_delimiter = ',', default_values_t = ["exact".to_string(), "partial".to_string()])]
    matcher: Vec<String>,
    /// Cutoffs: positive integers, "O" (golden count) or "all".
    #[arg(long, value_delimiter = ',', default_values_t = ["5".to_string(), "O".to_string()])]
    cutoff: Vec<String>,
    /// Golden subsets to score against.
    #[arg(long, value_delimiter = ',', default_values_t = ["present".to_string(), "absent".to_string(), "all".to_string()])]
    subset: Vec<String>,
    /// Delimiter splitting keyphrases inside string-valued sequences.
    #[arg(long, default_value = ";")]
    delimiter: String,
    /// Malformed corpus lines tolerated.
    #[arg(long, default_value_t = 0)]
    max_skipped: usize,
    /// Write per-document scores (TSV) for significance testing.
    #[arg(long)]
    dump_scores: Option<PathBuf>,
    /// Write per-document match reports (JSON-lines) for audit.
    #[arg(long)]
    dump_matches: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BinaryEvalArgs {
    /// Labeled examples: pairs TSV (doc_id, keyphrase, label) or JSON-lines
    /// {"id","keyphrase","label"}.
    #[arg(long)]
    examples: PathBuf,
    /// Predicted verdicts JSON-lines file.
    #[arg(long)]
    verdicts: PathBuf,
    /// Binarization threshold for score-valued verdicts.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SampleCommand {
    /// Filtering-model examples with co-occurrence-component soft negatives.
    Soft(SampleSoftArgs),
    /// Filtering-model examples mixing soft and model-generated hard
    /// negatives.
    Mixed(SampleMixedArgs),
    /// Generation-model examples (input/target JSON-lines).
    Generation(SampleGenerationArgs),
}

#[derive(Args)]
struct SampleSoftArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Negatives per positive example.
    #[arg(long, default_value_t = 1)]
    ratio: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// pairs-tsv or prompt-text.
    #[arg(long, default_value = "pairs-tsv")]
    format: String,
    /// Whitespace-token budget for prompt-text inputs.
    #[arg(long, default_value_t = 512)]
    token_budget: usize,
    #[arg(long, default_value_t = 0)]
    max_skipped: usize,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct SampleMixedArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Generated predictions for every corpus document (hard negatives).
    #[arg(long)]
    generated: PathBuf,
    /// Soft negatives per positive.
    #[arg(long, default_value_t = 1)]
    i_soft: usize,
    /// Hard negatives per positive.
    #[arg(long, default_value_t = 1)]
    j_hard: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "pairs-tsv")]
    format: String,
    #[arg(long, default_value_t = 512)]
    token_budget: usize,
    #[arg(long, default_value = ";")]
    delimiter: String,
    #[arg(long, default_value_t = 0)]
    max_skipped: usize,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct SampleGenerationArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Put present keyphrases before absent ones in the target.
    #[arg(long)]
    sorted: bool,
    #[arg(long, default_value = ";")]
    delimiter: String,
    /// Task prefix prepended to the input text.
    #[arg(long, default_value = "generate keyphrases: ")]
    prefix: String,
    #[arg(long, default_value_t = 512)]
    token_budget: usize,
    #[arg(long, default_value_t = 0)]
    max_skipped: usize,
    #[arg(long, short = 'o')]
    output: PathBuf,
}

#[derive(Args)]
struct HsdArgs {
    /// Score matrix file (TSV: doc_id + one column per system; or JSON).
    #[arg(long, conflicts_with = "dumps")]
    matrix: Option<PathBuf>,
    /// Per-system score dumps produced by `eval --dump-scores`.
    #[arg(long, num_args = 1.., conflicts_with = "matrix")]
    dumps: Vec<PathBuf>,
    /// System names for --dumps (default: file stems).
    #[arg(long, num_args = 1..)]
    names: Vec<String>,
    /// Score column picked from dumps.
    #[arg(long, default_value = "f1")]
    metric: String,
    /// Row selection from dumps.
    #[arg(long, default_value = "exact")]
    matcher: String,
    #[arg(long, default_value = "O")]
    cutoff: String,
    #[arg(long, default_value = "all")]
    subset: String,
    #[arg(long, default_value_t = 1_000_000)]
    permutations: u64,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Tsv)]
    format: OutputFormat,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();

    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            fail(&anyhow::anyhow!("cannot size thread pool: {e}"));
        }
    }

    let result = match cli.command {
        Command::Stats(args) => commands::stats(args),
        Command::Normalize(args) => commands::normalize(args),
        Command::Vote(args) => commands::vote(args),
        Command::Filter(args) => commands::filter(args),
        Command::Eval(args) => commands::eval(args),
        Command::BinaryEval(args) => commands::binary_eval(args),
        Command::Sample(SampleCommand::Soft(args)) => commands::sample_soft(args),
        Command::Sample(SampleCommand::Mixed(args)) => commands::sample_mixed(args),
        Command::Sample(SampleCommand::Generation(args)) => commands::sample_generation(args),
        Command::Hsd(args) => commands::hsd(args),
    };

    if let Err(e) = result {
        fail(&e);
    }
}

fn fail(error: &anyhow::Error) -> ! {
    let payload = serde_json::json!({ "error": format!("{error:#}") });
    eprintln!("{payload}");
    std::process::exit(1);
}
