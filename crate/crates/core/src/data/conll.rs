use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{Sequence, Tagset};

/// A column-format corpus. `columns` counts observation columns only; the gold
/// tag, when present, is stored separately in each sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub sequences: Vec<Sequence>,
    pub columns: usize,
    pub tagset: Tagset,
    pub provenance: String,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn num_tokens(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    pub fn has_gold(&self) -> bool {
        self.sequences.iter().all(|s| s.gold.is_some())
    }

    /// Gold tags as strings, one vector per sequence.
    pub fn gold_tags(&self) -> Result<Vec<Vec<String>>> {
        self.sequences
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let g = s.gold.as_ref().ok_or(Error::MissingGold(i))?;
                Ok(g.iter().map(|&k| self.tagset.name(k).to_string()).collect())
            })
            .collect()
    }

    /// Reinterprets the last observation column as the gold tag.
    pub fn into_gold_last(self) -> Result<Corpus> {
        if self.has_gold() {
            return Ok(self);
        }
        if self.columns < 2 {
            return Err(Error::Format {
                line: 0,
                message: "need at least one observation column besides the tag".into(),
            });
        }
        let mut tagset = Tagset::new();
        let sequences = self
            .sequences
            .into_iter()
            .map(|mut s| {
                let gold = s
                    .tokens
                    .iter_mut()
                    .map(|tok| tagset.intern(&tok.pop().unwrap()))
                    .collect();
                s.gold = Some(gold);
                s
            })
            .collect();
        Ok(Corpus {
            sequences,
            columns: self.columns - 1,
            tagset,
            provenance: self.provenance,
        })
    }

    /// Re-indexes gold tags against `tags`. Tags unknown to `tags` are appended
    /// after them, so ids below `tags.len()` keep their meaning.
    pub fn align_tags(&self, tags: &Tagset) -> Corpus {
        let mut merged = tags.clone();
        let sequences = self
            .sequences
            .iter()
            .map(|s| Sequence {
                tokens: s.tokens.clone(),
                gold: s
                    .gold
                    .as_ref()
                    .map(|g| g.iter().map(|&k| merged.intern(self.tagset.name(k))).collect()),
            })
            .collect();
        Corpus {
            sequences,
            columns: self.columns,
            tagset: merged,
            provenance: self.provenance.clone(),
        }
    }
}

/// Reads whitespace-separated columns; blank lines separate sequences. With
/// `has_gold`, the last column is the gold tag. CRLF line endings and trailing
/// blank lines are accepted.
pub fn read_conll<R: BufRead>(reader: R, has_gold: bool) -> Result<Corpus> {
    let mut tagset = Tagset::new();
    let mut sequences = Vec::new();
    let mut width: Option<usize> = None;
    let mut tokens: Vec<Vec<String>> = Vec::new();
    let mut gold: Vec<usize> = Vec::new();
    let mut flush = |tokens: &mut Vec<Vec<String>>, gold: &mut Vec<usize>| -> Result<()> {
        if !tokens.is_empty() {
            let g = has_gold.then(|| std::mem::take(gold));
            sequences.push(Sequence::new(std::mem::take(tokens), g)?);
        }
        Ok(())
    };
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            flush(&mut tokens, &mut gold)?;
            continue;
        }
        match width {
            None => {
                if has_gold && fields.len() < 2 {
                    return Err(Error::Format {
                        line: line_no,
                        message: "expected at least one observation column and a tag".into(),
                    });
                }
                width = Some(fields.len());
            }
            Some(w) if w != fields.len() => {
                return Err(Error::Format {
                    line: line_no,
                    message: format!("expected {w} columns, found {}", fields.len()),
                });
            }
            Some(_) => {}
        }
        let mut row: Vec<String> = fields.iter().map(|s| s.to_string()).collect();
        if has_gold {
            gold.push(tagset.intern(&row.pop().unwrap()));
        }
        tokens.push(row);
    }
    flush(&mut tokens, &mut gold)?;
    let Some(width) = width else {
        return Err(Error::Format {
            line: 0,
            message: "empty corpus".into(),
        });
    };
    Ok(Corpus {
        sequences,
        columns: if has_gold { width - 1 } else { width },
        tagset,
        provenance: String::new(),
    })
}

pub fn read_conll_path<P: AsRef<Path>>(path: P, has_gold: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let mut corpus = read_conll(BufReader::new(File::open(path)?), has_gold)?;
    corpus.provenance = path.display().to_string();
    Ok(corpus)
}

fn write_rows<W: Write>(corpus: &Corpus, predictions: Option<&[Vec<String>]>, out: &mut W) -> Result<()> {
    for (i, seq) in corpus.sequences.iter().enumerate() {
        for (t, tok) in seq.tokens.iter().enumerate() {
            let mut fields: Vec<&str> = tok.iter().map(String::as_str).collect();
            if let Some(g) = &seq.gold {
                fields.push(corpus.tagset.name(g[t]));
            }
            if let Some(p) = predictions {
                fields.push(&p[i][t]);
            }
            writeln!(out, "{}", fields.join(" "))?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the corpus as read (observation columns, then gold when present).
/// Output always uses `\n` line endings and single spaces between columns.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    write_rows(corpus, None, &mut out)
}

/// Writes the corpus with one predicted tag appended to every token line.
pub fn write_conll<W: Write>(corpus: &Corpus, predictions: &[Vec<String>], mut out: W) -> Result<()> {
    if predictions.len() != corpus.len() {
        return Err(Error::LengthMismatch {
            what: "predictions",
            expected: corpus.len(),
            got: predictions.len(),
        });
    }
    for (seq, p) in corpus.sequences.iter().zip(predictions) {
        if seq.len() != p.len() {
            return Err(Error::LengthMismatch {
                what: "predicted tags",
                expected: seq.len(),
                got: p.len(),
            });
        }
    }
    write_rows(corpus, Some(predictions), &mut out)
}
