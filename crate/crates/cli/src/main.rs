//! `sapo`: train, decode, evaluate and diagnose linear-chain taggers.
//!
//! Exit codes: 0 success, 1 invalid flags or configuration, 2 unreadable or
//! malformed files, 3 non-finite weights during training.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "sapo", version, about = "Search-based probabilistic online learning for sequence tagging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it together with its learning curve.
    Train(TrainArgs),
    /// Tag a CoNLL file, optionally emitting the top-k taggings per sequence.
    Decode(DecodeArgs),
    /// Emit the top-n taggings of every sequence with their probabilities.
    Nbest(NbestArgs),
    /// Score predictions against gold tags.
    Eval(EvalArgs),
    /// Measure how far top-n updates are from the exact gradient.
    Diagnose(DiagnoseArgs),
    /// Write a synthetic HMM corpus.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Algo {
    Sapo,
    CrfSgd,
    Perc,
    PercAvg,
    Mira,
    MiraAvg,
    MiraNbest,
    MiraNbestAvg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SearchKind {
    Astar,
    Beam,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricKind {
    Accuracy,
    #[value(name = "chunk-f1")]
    ChunkF1,
}

#[derive(Args)]
struct TrainArgs {
    /// Training algorithm.
    #[arg(long, value_enum)]
    algo: Algo,
    /// Training corpus in CoNLL format, gold tag in the last column.
    #[arg(long, value_name = "PATH")]
    train: PathBuf,
    /// Feature template file.
    #[arg(long, value_name = "PATH")]
    templates: PathBuf,
    /// Held-out corpus evaluated after each epoch.
    #[arg(long, value_name = "PATH")]
    heldout: Option<PathBuf>,
    /// Number of candidates per update (sapo, mira-nbest) [default: 5].
    #[arg(long, value_name = "INT")]
    n: Option<usize>,
    /// Learning rate (sapo, crf-sgd) [default: 0.05].
    #[arg(long, allow_negative_numbers = true, value_name = "FLOAT")]
    lr: Option<f64>,
    /// L2 regularization strength (sapo, crf-sgd) [default: 1.0].
    #[arg(long, allow_negative_numbers = true, value_name = "FLOAT")]
    l2: Option<f64>,
    /// Number of passes over the training data.
    #[arg(long, value_name = "INT", default_value_t = 20)]
    epochs: usize,
    /// Seed for the per-epoch sample order.
    #[arg(long, value_name = "INT", default_value_t = 1)]
    seed: u64,
    /// Top-n search strategy (sapo, mira-nbest) [default: astar].
    #[arg(long, value_enum)]
    search: Option<SearchKind>,
    /// Beam width, with --search beam [default: 50].
    #[arg(long, value_name = "INT")]
    beam: Option<usize>,
    /// Learning-rate decay: epoch e uses lr * RATE^(e-1) (sapo, crf-sgd) [default: none].
    #[arg(long, allow_negative_numbers = true, value_name = "RATE")]
    lr_decay: Option<f64>,
    /// Upper bound on each MIRA step (mira variants) [default: unbounded].
    #[arg(long, allow_negative_numbers = true, value_name = "FLOAT")]
    mira_c: Option<f64>,
    /// Held-out metric.
    #[arg(long, value_enum, default_value_t = MetricKind::Accuracy)]
    metric: MetricKind,
    /// Evaluate the held-out set every this many epochs (and after the last).
    #[arg(long, value_name = "INT", default_value_t = 1)]
    eval_every: usize,
    /// Learning-curve CSV output.
    #[arg(long, value_name = "PATH")]
    curves: Option<PathBuf>,
    /// Model output.
    #[arg(long, value_name = "PATH")]
    model_out: Option<PathBuf>,
    /// Fill the epoch_seconds column of the curve CSV (makes it run-dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Model file.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// CoNLL input; an extra last column is taken as gold and scored.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Output with the predicted tag appended to each token line.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Emit the top K taggings per sequence instead of one [default: off].
    #[arg(long, value_name = "K")]
    nbest: Option<usize>,
}

#[derive(Args)]
struct NbestArgs {
    /// Model file.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// CoNLL input; an extra last column is taken as gold.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Output, one block per candidate.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
    /// Candidates per sequence.
    #[arg(long, value_name = "INT", default_value_t = 5)]
    n: usize,
    /// Search strategy.
    #[arg(long, value_enum, default_value_t = SearchKind::Astar)]
    search: SearchKind,
    /// Beam width, with --search beam [default: 50].
    #[arg(long, value_name = "INT")]
    beam: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Gold CoNLL file, tag in the last column. Without --pred, the last two
    /// columns are read as gold and predicted tags.
    #[arg(long, value_name = "PATH")]
    gold: PathBuf,
    /// Predicted CoNLL file, tag in the last column.
    #[arg(long, value_name = "PATH")]
    pred: Option<PathBuf>,
    /// Metric.
    #[arg(long, value_enum, default_value_t = MetricKind::Accuracy)]
    metric: MetricKind,
    /// Per-tag (or per chunk type) CSV output.
    #[arg(long, value_name = "PATH")]
    per_tag: Option<PathBuf>,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Model file.
    #[arg(long, value_name = "PATH")]
    model: PathBuf,
    /// CoNLL input with gold tags in the last column.
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Candidate counts to probe.
    #[arg(long, value_name = "LIST", value_delimiter = ',', default_value = "1,2,5,10,50")]
    n_list: Vec<usize>,
    /// L2 strength used in both update terms.
    #[arg(long, allow_negative_numbers = true, value_name = "FLOAT", default_value_t = 1.0)]
    l2: f64,
    /// CSV output (per-n means over all sequences).
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Number of tags.
    #[arg(long, value_name = "INT", default_value_t = 5)]
    tags: usize,
    /// Vocabulary size.
    #[arg(long, value_name = "INT", default_value_t = 50)]
    vocab: usize,
    /// Mean sequence length.
    #[arg(long, value_name = "FLOAT", default_value_t = 10.0)]
    mean_length: f64,
    /// Number of sequences.
    #[arg(long, value_name = "INT", default_value_t = 100)]
    count: usize,
    /// Generator seed.
    #[arg(long, value_name = "INT", default_value_t = 1)]
    seed: u64,
    /// Weight of each tag's own words in its emission distribution, in [0, 1].
    #[arg(long, value_name = "FLOAT", default_value_t = 0.5)]
    separability: f64,
    /// CoNLL output.
    #[arg(long, value_name = "PATH")]
    output: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Decode(a) => commands::decode(a),
        Command::Nbest(a) => commands::nbest(a),
        Command::Eval(a) => commands::eval(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Generate(a) => commands::generate(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
