//! Token accuracy, BIO chunk F-score and weight complexity.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Accuracy,
    ChunkF1,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Accuracy => "accuracy",
            Metric::ChunkF1 => "chunk_f1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Counts {
    Tokens { correct: usize, total: usize },
    Chunks { matched: usize, predicted: usize, gold: usize },
}

/// Per tag (accuracy) or per chunk type (F-score) counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TagCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl TagCounts {
    pub fn precision(&self) -> f64 {
        ratio(self.correct, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.correct, self.gold)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metric: Metric,
    pub value: f64,
    pub counts: Counts,
    pub per_tag: BTreeMap<String, TagCounts>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_shapes<S: AsRef<str>, T: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<T>]) -> Result<()> {
    if gold.len() != pred.len() {
        return Err(Error::LengthMismatch {
            what: "prediction sequences",
            expected: gold.len(),
            got: pred.len(),
        });
    }
    for (g, p) in gold.iter().zip(pred) {
        if g.len() != p.len() {
            return Err(Error::LengthMismatch {
                what: "predicted tags",
                expected: g.len(),
                got: p.len(),
            });
        }
    }
    Ok(())
}

pub fn token_accuracy<S: AsRef<str>, T: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<T>]) -> Result<EvalReport> {
    check_shapes(gold, pred)?;
    let (mut correct, mut total) = (0, 0);
    let mut per_tag: BTreeMap<String, TagCounts> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        for (g, p) in g.iter().zip(p) {
            let (g, p) = (g.as_ref(), p.as_ref());
            total += 1;
            per_tag.entry(g.to_string()).or_default().gold += 1;
            per_tag.entry(p.to_string()).or_default().predicted += 1;
            if g == p {
                correct += 1;
                per_tag.get_mut(g).unwrap().correct += 1;
            }
        }
    }
    Ok(EvalReport {
        metric: Metric::Accuracy,
        value: ratio(correct, total),
        counts: Counts::Tokens { correct, total },
        per_tag,
    })
}

/// A chunk span, `end` inclusive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
    pub kind: String,
}

/// Extracts BIO chunks. An `I-X` that does not continue an open `X` chunk
/// starts a new one.
pub fn extract_chunks<S: AsRef<str>>(tags: &[S]) -> Result<Vec<Chunk>> {
    let mut chunks = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (t, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        let (prefix, kind) = if tag == "O" {
            ("O", "")
        } else {
            match tag.split_once('-') {
                Some((p @ ("B" | "I"), k)) if !k.is_empty() => (p, k),
                _ => return Err(Error::MalformedTag(tag.to_string())),
            }
        };
        let continues = prefix == "I" && matches!(open, Some((_, k)) if k == kind);
        if !continues {
            if let Some((start, k)) = open.take() {
                chunks.push(Chunk {
                    start,
                    end: t - 1,
                    kind: k.to_string(),
                });
            }
            if prefix != "O" {
                open = Some((t, kind));
            }
        }
    }
    if let Some((start, k)) = open {
        chunks.push(Chunk {
            start,
            end: tags.len() - 1,
            kind: k.to_string(),
        });
    }
    Ok(chunks)
}

/// Balanced chunk F-score, chunks matched on exact span and type.
pub fn chunk_f1<S: AsRef<str>, T: AsRef<str>>(gold: &[Vec<S>], pred: &[Vec<T>]) -> Result<EvalReport> {
    check_shapes(gold, pred)?;
    let (mut matched, mut n_pred, mut n_gold) = (0, 0, 0);
    let mut per_tag: BTreeMap<String, TagCounts> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        let gc = extract_chunks(g)?;
        let pc = extract_chunks(p)?;
        n_gold += gc.len();
        n_pred += pc.len();
        for c in &gc {
            per_tag.entry(c.kind.clone()).or_default().gold += 1;
        }
        for c in &pc {
            per_tag.entry(c.kind.clone()).or_default().predicted += 1;
            if gc.binary_search(c).is_ok() {
                matched += 1;
                per_tag.get_mut(&c.kind).unwrap().correct += 1;
            }
        }
    }
    let value = f1(ratio(matched, n_pred), ratio(matched, n_gold));
    Ok(EvalReport {
        metric: Metric::ChunkF1,
        value,
        counts: Counts::Chunks {
            matched,
            predicted: n_pred,
            gold: n_gold,
        },
        per_tag,
    })
}

pub fn evaluate<S: AsRef<str>, T: AsRef<str>>(metric: Metric, gold: &[Vec<S>], pred: &[Vec<T>]) -> Result<EvalReport> {
    match metric {
        Metric::Accuracy => token_accuracy(gold, pred),
        Metric::ChunkF1 => chunk_f1(gold, pred),
    }
}

impl EvalReport {
    /// One-line summary, e.g. `accuracy=0.700000 correct=7 total=10`.
    pub fn summary(&self) -> String {
        match self.counts {
            Counts::Tokens { correct, total } => {
                format!("{}={:.6} correct={correct} total={total}", self.metric, self.value)
            }
            Counts::Chunks {
                matched,
                predicted,
                gold,
            } => format!(
                "{}={:.6} precision={:.6} recall={:.6} matched={matched} predicted={predicted} gold={gold}",
                self.metric,
                self.value,
                ratio(matched, predicted),
                ratio(matched, gold)
            ),
        }
    }

    pub fn write_per_tag_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tag", "gold", "predicted", "correct", "precision", "recall", "f1"])?;
        for (tag, c) in &self.per_tag {
            w.write_record([
                tag.clone(),
                c.gold.to_string(),
                c.predicted.to_string(),
                c.correct.to_string(),
                c.precision().to_string(),
                c.recall().to_string(),
                c.f1().to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean absolute weight over every indexed feature, zeros included.
pub fn w_complexity(weights: &[f64]) -> f64 {
    if weights.is_empty() {
        return 0.0;
    }
    weights.iter().map(|w| w.abs()).sum::<f64>() / weights.len() as f64
}
