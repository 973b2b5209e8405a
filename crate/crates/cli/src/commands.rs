use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use sapo_core::data::{generate_synthetic_hmm, load_model, read_conll_path, save_model, write_corpus, Corpus, SyntheticConfig};
use sapo_core::eval::{evaluate, Metric};
use sapo_core::inference::{delta_diagnostic, topn_distribution, write_delta_csv, Search};
use sapo_core::train::{train as run_training, Algorithm, Schedule, TrainConfig, DEFAULT_BEAM};
use sapo_core::{Error, Model, Sequence, TemplateSet};

use crate::{Algo, DecodeArgs, DiagnoseArgs, EvalArgs, GenerateArgs, MetricKind, NbestArgs, SearchKind, TrainArgs};

pub enum Failure {
    Usage(String),
    Core(Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e {
                Error::Io(_) | Error::Csv(_) | Error::Format { .. } | Error::Version { .. } => 2,
                Error::NonFinite { .. } => 3,
                _ => 1,
            },
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Core(Error::Io(e))
    }
}

type Outcome = Result<String, Failure>;

fn usage(m: impl Into<String>) -> Failure {
    Failure::Usage(m.into())
}

/// Prefixes I/O and format errors with the file they concern.
fn located(path: &Path, e: Error) -> Failure {
    let file = path.display();
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{file}: {io}"))),
        Error::Format { line, message } => Error::Format {
            line,
            message: format!("{file}: {message}"),
        },
        other => other,
    }
    .into()
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| located(path, e.into()))
}

fn read_corpus(path: &Path, has_gold: bool) -> Result<Corpus, Failure> {
    read_conll_path(path, has_gold).map_err(|e| located(path, e))
}

fn open_model(path: &Path) -> Result<Model, Failure> {
    load_model(path).map_err(|e| located(path, e))
}

fn metric(m: MetricKind) -> Metric {
    match m {
        MetricKind::Accuracy => Metric::Accuracy,
        MetricKind::ChunkF1 => Metric::ChunkF1,
    }
}

fn search(kind: SearchKind, beam: Option<usize>) -> Result<Search, Failure> {
    match (kind, beam) {
        (SearchKind::Astar, Some(_)) => Err(usage("--beam requires --search beam")),
        (SearchKind::Astar, None) => Ok(Search::AStar),
        (SearchKind::Beam, b) => Ok(Search::Beam(b.unwrap_or(DEFAULT_BEAM))),
    }
}

impl TrainArgs {
    /// Checks flag combinations and builds the configuration without touching
    /// any file.
    fn config(&self) -> Result<TrainConfig, Failure> {
        let (algorithm, averaged) = match self.algo {
            Algo::Sapo => (Algorithm::Sapo, false),
            Algo::CrfSgd => (Algorithm::CrfSgd, false),
            Algo::Perc => (Algorithm::Perceptron, false),
            Algo::PercAvg => (Algorithm::Perceptron, true),
            Algo::Mira => (Algorithm::Mira, false),
            Algo::MiraAvg => (Algorithm::Mira, true),
            Algo::MiraNbest => (Algorithm::MiraNbest, false),
            Algo::MiraNbestAvg => (Algorithm::MiraNbest, true),
        };
        let reject = |flag: &str, given: bool, allowed: bool, who: &str| {
            if given && !allowed {
                Err(usage(format!("{flag} applies only to {who}, not to {}", self.algo_name())))
            } else {
                Ok(())
            }
        };
        let uses_n = algorithm.uses_n();
        let uses_lr = algorithm.uses_learning_rate();
        reject("--n", self.n.is_some(), uses_n, "sapo and mira-nbest")?;
        reject("--search", self.search.is_some(), uses_n, "sapo and mira-nbest")?;
        reject("--beam", self.beam.is_some(), uses_n, "sapo and mira-nbest")?;
        reject("--lr", self.lr.is_some(), uses_lr, "sapo and crf-sgd")?;
        reject("--l2", self.l2.is_some(), uses_lr, "sapo and crf-sgd")?;
        reject("--lr-decay", self.lr_decay.is_some(), uses_lr, "sapo and crf-sgd")?;
        reject("--mira-c", self.mira_c.is_some(), algorithm.is_mira(), "the mira variants")?;
        let defaults = TrainConfig::default();
        let cfg = TrainConfig {
            algorithm,
            averaged,
            n: self.n.unwrap_or(defaults.n),
            learning_rate: self.lr.unwrap_or(defaults.learning_rate),
            l2: self.l2.unwrap_or(defaults.l2),
            epochs: self.epochs,
            seed: self.seed,
            search: search(self.search.unwrap_or(SearchKind::Astar), self.beam)?,
            schedule: self.lr_decay.map_or(Schedule::Fixed, Schedule::ExponentialDecay),
            mira_c: self.mira_c.unwrap_or(defaults.mira_c),
            eval_every: self.eval_every,
            metric: metric(self.metric),
        };
        // everything except the dependence on the training-set size
        cfg.validate(usize::MAX)?;
        Ok(cfg)
    }

    fn algo_name(&self) -> String {
        clap::ValueEnum::to_possible_value(&self.algo)
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
}

pub fn train(a: TrainArgs) -> Outcome {
    let cfg = a.config()?;
    let source = fs::read_to_string(&a.templates).map_err(|e| located(&a.templates, e.into()))?;
    let templates = TemplateSet::parse(&source)?;
    let corpus = read_corpus(&a.train, true)?;
    let heldout = a.heldout.as_deref().map(|p| read_corpus(p, true)).transpose()?;
    let (model, curve) = run_training(templates, &corpus, heldout.as_ref(), &cfg)?;
    if let Some(path) = &a.model_out {
        save_model(&model, path)?;
    }
    if let Some(path) = &a.curves {
        curve.write_csv(create(path)?, a.timing)?;
    }
    let last = curve.last().expect("at least one epoch");
    let mut summary = format!(
        "{} epochs={} features={} objective={:.6} w_complexity={:.6} train_accuracy={}",
        a.algo_name(),
        last.epoch,
        model.weights.len(),
        last.objective,
        last.w_complexity,
        model.meta.get("train_accuracy").map(String::as_str).unwrap_or("nan"),
    );
    if let Some(m) = last.heldout_metric {
        summary.push_str(&format!(" heldout_{}={m:.6}", cfg.metric));
    }
    Ok(summary)
}

/// Splits `input` into the observation corpus the model expects and, when an
/// extra last column is present, gold tag strings.
fn model_input(model: &Model, input: &Corpus) -> Result<(Vec<Sequence>, Option<Vec<Vec<String>>>), Failure> {
    if input.columns == model.columns {
        Ok((input.sequences.clone(), None))
    } else if input.columns == model.columns + 1 {
        let with_gold = input.clone().into_gold_last()?;
        let gold = with_gold.gold_tags()?;
        let seqs = with_gold
            .sequences
            .into_iter()
            .map(|s| Sequence {
                tokens: s.tokens,
                gold: None,
            })
            .collect();
        Ok((seqs, Some(gold)))
    } else {
        Err(Error::LengthMismatch {
            what: "input columns",
            expected: model.columns,
            got: input.columns,
        }
        .into())
    }
}

fn write_candidates(model: &Model, input: &Corpus, seqs: &[Sequence], n: usize, search: Search, out: &Path) -> Outcome {
    let mut w = create(out)?;
    let mut total = 0;
    for (i, (seq, raw)) in seqs.iter().zip(&input.sequences).enumerate() {
        let nb = topn_distribution(search.run(&model.build_lattice(seq)?, n));
        for (rank, e) in nb.entries.iter().enumerate() {
            writeln!(w, "# sequence {} rank {} score {} prob {}", i + 1, rank + 1, e.score, e.prob)?;
            for (tok, &tag) in raw.tokens.iter().zip(&e.tags) {
                writeln!(w, "{} {}", tok.join(" "), model.tagset.name(tag))?;
            }
            writeln!(w)?;
        }
        total += nb.len();
    }
    w.flush()?;
    Ok(format!("{total} candidates for {} sequences", seqs.len()))
}

fn decode_summary(model: &Model, seqs: &[Sequence], gold: Option<&[Vec<String>]>, pred: &[Vec<String>]) -> Outcome {
    let tokens: usize = seqs.iter().map(Sequence::len).sum();
    let mut s = format!("decoded {} sequences ({tokens} tokens)", seqs.len());
    if let Some(g) = gold {
        s.push_str(&format!(" {}", evaluate(Metric::Accuracy, g, pred)?.summary()));
    }
    if let Some(acc) = model.meta.get("train_accuracy") {
        s.push_str(&format!(" model_train_accuracy={acc}"));
    }
    Ok(s)
}

pub fn decode(a: DecodeArgs) -> Outcome {
    if a.nbest == Some(0) {
        return Err(usage("--nbest must be at least 1"));
    }
    let model = open_model(&a.model)?;
    let input = read_corpus(&a.input, false)?;
    let (seqs, gold) = model_input(&model, &input)?;
    if let Some(k) = a.nbest {
        let summary = write_candidates(&model, &input, &seqs, k, Search::AStar, &a.output)?;
        return Ok(format!("decoded {summary}"));
    }
    let pred: Vec<Vec<String>> = seqs
        .iter()
        .map(|s| Ok(model.decode(s)?.into_iter().map(|k| model.tagset.name(k).to_string()).collect()))
        .collect::<Result<_, Error>>()?;
    sapo_core::data::write_conll(&input, &pred, create(&a.output)?)?;
    decode_summary(&model, &seqs, gold.as_deref(), &pred)
}

pub fn nbest(a: NbestArgs) -> Outcome {
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let search = search(a.search, a.beam)?;
    if search == Search::Beam(0) {
        return Err(usage("--beam must be at least 1"));
    }
    let model = open_model(&a.model)?;
    let input = read_corpus(&a.input, false)?;
    let (seqs, _) = model_input(&model, &input)?;
    write_candidates(&model, &input, &seqs, a.n, search, &a.output)
}

pub fn eval(a: EvalArgs) -> Outcome {
    let (gold, pred) = match &a.pred {
        Some(p) => (read_corpus(&a.gold, true)?.gold_tags()?, read_corpus(p, true)?.gold_tags()?),
        None => {
            let both = read_corpus(&a.gold, true)?;
            if both.columns < 2 {
                return Err(usage(format!(
                    "{} needs gold and predicted tag columns when --pred is not given",
                    a.gold.display()
                )));
            }
            let gold = both
                .sequences
                .iter()
                .map(|s| s.tokens.iter().map(|t| t.last().unwrap().clone()).collect())
                .collect();
            (gold, both.gold_tags()?)
        }
    };
    let report = evaluate(metric(a.metric), &gold, &pred)?;
    if let Some(path) = &a.per_tag {
        report.write_per_tag_csv(create(path)?)?;
    }
    Ok(report.summary())
}

pub fn diagnose(a: DiagnoseArgs) -> Outcome {
    if a.n_list.is_empty() || a.n_list.contains(&0) {
        return Err(usage("--n-list needs positive integers"));
    }
    if !(a.l2 >= 0.0 && a.l2.is_finite()) {
        return Err(usage(format!("--l2 must be non-negative, got {}", a.l2)));
    }
    let model = open_model(&a.model)?;
    let corpus = read_corpus(&a.input, true)?.align_tags(&model.tagset);
    let mut reports = Vec::with_capacity(corpus.len());
    for seq in &corpus.sequences {
        let inst = model.encode(seq)?;
        reports.push(delta_diagnostic(&model, &inst, &a.n_list, a.l2, corpus.len())?);
    }
    if let Some(path) = &a.output {
        write_delta_csv(&reports, create(path)?)?;
    }
    let count = reports.len() as f64;
    let parts: Vec<String> = a
        .n_list
        .iter()
        .enumerate()
        .map(|(j, n)| {
            let tail = reports.iter().map(|r| r[j].tail_mass).sum::<f64>() / count;
            let l2 = reports.iter().map(|r| r[j].l2_norm).sum::<f64>() / count;
            format!("n={n}:tail_mass={tail:.6},l2_delta={l2:.6}")
        })
        .collect();
    Ok(format!("diagnosed {} sequences {}", reports.len(), parts.join(" ")))
}

pub fn generate(a: GenerateArgs) -> Outcome {
    let cfg = SyntheticConfig {
        tags: a.tags,
        vocab: a.vocab,
        mean_length: a.mean_length,
        count: a.count,
        seed: a.seed,
        separability: a.separability,
    };
    let corpus = generate_synthetic_hmm(&cfg)?;
    write_corpus(&corpus, create(&a.output)?)?;
    Ok(format!(
        "generated {} sequences ({} tokens) {}",
        corpus.len(),
        corpus.num_tokens(),
        corpus.provenance
    ))
}
