//! Line-oriented model file.
//!
//! ```text
//! version	1
//! columns	1
//! tags	B-NP	I-NP	O
//! meta	algo	sapo
//! templates-begin
//! U00:%x[0,0]
//! B
//! templates-end
//! T	B-NP	I-NP	2.5
//! E	O	U00:the	-0.75
//! ```
//!
//! `T` lines are transition weights (previous tag, current tag), `E` lines are
//! emission weights (tag, observation attribute). Only nonzero weights are
//! written, in feature-id order, using shortest round-trip decimal notation.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::{FeatureIndex, FeatureKey, Tagset};
use crate::model::Model;
use crate::template::TemplateSet;

pub const FORMAT_VERSION: u32 = 1;

fn format_weight(w: f64) -> String {
    let a = w.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{w:e}")
    } else {
        format!("{w}")
    }
}

fn clean(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

pub fn write_model<W: Write>(m: &Model, mut out: W) -> Result<()> {
    writeln!(out, "version\t{FORMAT_VERSION}")?;
    writeln!(out, "columns\t{}", m.columns)?;
    writeln!(out, "tags\t{}", m.tagset.tags().join("\t"))?;
    for (k, v) in &m.meta {
        writeln!(out, "meta\t{}\t{}", clean(k), clean(v))?;
    }
    writeln!(out, "templates-begin")?;
    for line in m.templates.source().lines() {
        writeln!(out, "{}", line.trim_end_matches('\r'))?;
    }
    writeln!(out, "templates-end")?;
    for (id, &w) in m.weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        match m.index.describe(id) {
            FeatureKey::Transition { prev, cur } => writeln!(
                out,
                "T\t{}\t{}\t{}",
                m.tagset.name(prev),
                m.tagset.name(cur),
                format_weight(w)
            )?,
            FeatureKey::Emission { attr, tag } => writeln!(
                out,
                "E\t{}\t{}\t{}",
                m.tagset.name(tag),
                m.index.attr_name(attr),
                format_weight(w)
            )?,
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_model<P: AsRef<Path>>(m: &Model, path: P) -> Result<()> {
    write_model(m, BufWriter::new(File::create(path)?))
}

pub fn read_model<R: BufRead>(reader: R) -> Result<Model> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| l.map(|l| (i + 1, l)));
    let mut next = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some(r) => Ok(r?),
            None => Err(Error::Format {
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    };
    let corrupt = |line: usize, message: String| Error::Format { line, message };

    let (n, line) = next("version")?;
    match line.split_once('\t') {
        Some(("version", v)) if v.trim() == FORMAT_VERSION.to_string() => {}
        Some(("version", v)) => {
            return Err(Error::Version {
                found: v.trim().to_string(),
                expected: FORMAT_VERSION,
            })
        }
        _ => return Err(corrupt(n, "expected `version` header".into())),
    }
    let (n, line) = next("columns")?;
    let columns: usize = match line.split_once('\t') {
        Some(("columns", v)) => v.trim().parse().map_err(|_| corrupt(n, "bad column count".into()))?,
        _ => return Err(corrupt(n, "expected `columns` header".into())),
    };
    let (n, line) = next("tags")?;
    let tagset = match line.strip_prefix("tags\t") {
        Some(rest) => Tagset::from_tags(rest.split('\t')).map_err(|e| corrupt(n, e.to_string()))?,
        None => return Err(corrupt(n, "expected `tags` header".into())),
    };
    let mut meta = BTreeMap::new();
    loop {
        let (n, line) = next("templates-begin")?;
        if line == "templates-begin" {
            break;
        }
        let fields: Vec<&str> = line.splitn(3, '\t').collect();
        match fields.as_slice() {
            ["meta", k, v] => {
                meta.insert(k.to_string(), v.to_string());
            }
            _ => return Err(corrupt(n, "expected `meta` line or `templates-begin`".into())),
        }
    }
    let mut text = String::new();
    loop {
        let (_, line) = next("templates-end")?;
        if line == "templates-end" {
            break;
        }
        text.push_str(&line);
        text.push('\n');
    }
    let templates = TemplateSet::parse(&text)?;
    templates.check_columns(columns)?;

    let mut index = FeatureIndex::new(tagset.len(), templates.transitions);
    let mut entries: Vec<(FeatureKey, f64)> = Vec::new();
    let mut seen = HashSet::new();
    for r in lines {
        let (n, line) = r?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(corrupt(n, "expected 4 tab-separated fields".into()));
        }
        let weight: f64 = fields[3]
            .parse()
            .ok()
            .filter(|w: &f64| w.is_finite())
            .ok_or_else(|| corrupt(n, format!("bad weight `{}`", fields[3])))?;
        let tag = |s: &str| tagset.get(s).ok_or_else(|| corrupt(n, format!("unknown tag `{s}`")));
        let key = match fields[0] {
            "T" if index.transitions() => FeatureKey::Transition {
                prev: tag(fields[1])?,
                cur: tag(fields[2])?,
            },
            "T" => return Err(corrupt(n, "transition weight in a model without transitions".into())),
            "E" => FeatureKey::Emission {
                tag: tag(fields[1])?,
                attr: index.insert(fields[2]),
            },
            other => return Err(corrupt(n, format!("unknown record type `{other}`"))),
        };
        if !seen.insert(key) {
            return Err(corrupt(n, "duplicate feature".into()));
        }
        entries.push((key, weight));
    }
    let mut weights = vec![0.0; index.num_features()];
    for (key, w) in entries {
        let id = match key {
            FeatureKey::Transition { prev, cur } => index.transition_id(prev, cur).unwrap(),
            FeatureKey::Emission { attr, tag } => index.emission_id(attr, tag),
        };
        weights[id] = w;
    }
    Ok(Model {
        tagset,
        templates,
        index,
        weights,
        columns,
        meta,
    })
}

pub fn load_model<P: AsRef<Path>>(path: P) -> Result<Model> {
    read_model(BufReader::new(File::open(path)?))
}
