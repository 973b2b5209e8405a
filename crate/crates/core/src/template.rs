//! Feature template grammar.
//!
//! One template per line, in the usual CRF template style:
//!
//! ```text
//! # comment
//! U00:%x[-1,0]
//! U01:%x[0,0]
//! U02:%x[-1,0]/%x[0,0]
//! U03:%s[0,0,3]
//! U04:%v[0,2]
//! B
//! ```
//!
//! Macros inside a template body:
//!
//! * `%x[row,col]` copies column `col` of the token at relative position `row`.
//! * `%p[row,col,len]` / `%s[row,col,len]` copy the first / last `len` characters.
//! * `%v[row,col]` parses the column as a number; the template then fires once with
//!   that real value instead of 1.0 (several `%v` atoms multiply).
//!
//! Any other text is copied literally. Positions outside the sequence read a
//! boundary symbol (`_B-1_` before the start, `_B+1_` after the end, and so on).
//! A line consisting of just `B` enables tag-transition features.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Atom {
    Literal(String),
    Column { offset: i32, column: usize },
    Prefix { offset: i32, column: usize, len: usize },
    Suffix { offset: i32, column: usize, len: usize },
    Numeric { offset: i32, column: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureTemplate {
    pub name: String,
    pub atoms: Vec<Atom>,
}

/// Compiled template file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    pub templates: Vec<FeatureTemplate>,
    /// Whether a `B` line was present.
    pub transitions: bool,
    source: String,
}

fn boundary(position: isize, len: usize) -> String {
    if position < 0 {
        format!("_B-{}_", -position)
    } else {
        format!("_B+{}_", position as usize - len + 1)
    }
}

impl FeatureTemplate {
    /// Renders the attribute string for position `pos` into `out`.
    ///
    /// Returns the feature value, or `None` when a numeric atom falls outside the
    /// sequence (the feature does not fire).
    pub fn expand(&self, tokens: &[Vec<String>], pos: usize, out: &mut String) -> Result<Option<f64>> {
        out.clear();
        out.push_str(&self.name);
        out.push(':');
        let mut value = 1.0;
        for atom in &self.atoms {
            match atom {
                Atom::Literal(text) => out.push_str(text),
                Atom::Column { offset, column } => match cell(tokens, pos, *offset, *column) {
                    Ok(s) => out.push_str(s),
                    Err(b) => out.push_str(&b),
                },
                Atom::Prefix { offset, column, len } => match cell(tokens, pos, *offset, *column) {
                    Ok(s) => out.extend(s.chars().take(*len)),
                    Err(b) => out.push_str(&b),
                },
                Atom::Suffix { offset, column, len } => match cell(tokens, pos, *offset, *column) {
                    Ok(s) => {
                        let n = s.chars().count();
                        out.extend(s.chars().skip(n.saturating_sub(*len)));
                    }
                    Err(b) => out.push_str(&b),
                },
                Atom::Numeric { offset, column } => match cell(tokens, pos, *offset, *column) {
                    Ok(s) => {
                        let v: f64 = s.parse().map_err(|_| Error::NotNumeric {
                            value: s.to_string(),
                            column: *column,
                        })?;
                        if !v.is_finite() {
                            return Err(Error::NotNumeric {
                                value: s.to_string(),
                                column: *column,
                            });
                        }
                        value *= v;
                    }
                    Err(_) => return Ok(None),
                },
            }
        }
        Ok(if value == 0.0 { None } else { Some(value) })
    }

    fn columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.atoms.iter().filter_map(|a| match a {
            Atom::Literal(_) => None,
            Atom::Column { column, .. }
            | Atom::Prefix { column, .. }
            | Atom::Suffix { column, .. }
            | Atom::Numeric { column, .. } => Some(*column),
        })
    }
}

/// `Ok(cell)` for in-range positions, `Err(boundary symbol)` otherwise.
fn cell(tokens: &[Vec<String>], pos: usize, offset: i32, column: usize) -> std::result::Result<&str, String> {
    let p = pos as isize + offset as isize;
    if p < 0 || p >= tokens.len() as isize {
        return Err(boundary(p, tokens.len()));
    }
    Ok(tokens[p as usize][column].as_str())
}

impl TemplateSet {
    /// Parses template text. The same text always yields the same templates in the
    /// same order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut templates = Vec::new();
        let mut transitions = false;
        let mut names = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim_end_matches('\r');
            let lead = line.len() - line.trim_start().len();
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line == "B" {
                transitions = true;
                continue;
            }
            let err = |column: usize, message: &str| Error::TemplateSyntax {
                line: line_no,
                column: lead + column,
                message: message.to_string(),
            };
            let Some(colon) = line.find(':') else {
                return Err(err(1, "expected `<id>:<body>`"));
            };
            let name = &line[..colon];
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(err(1, "invalid template id"));
            }
            if name.starts_with('B') {
                return Err(err(1, "observation-dependent transition templates are not supported"));
            }
            if !names.insert(name.to_string()) {
                return Err(err(1, &format!("duplicate template id `{name}`")));
            }
            let atoms = parse_body(&line[colon + 1..], colon + 2).map_err(|(c, m)| err(c, &m))?;
            templates.push(FeatureTemplate {
                name: name.to_string(),
                atoms,
            });
        }
        Ok(Self {
            templates,
            transitions,
            source: text.to_string(),
        })
    }

    /// Original text the set was compiled from.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// Fails if any template reads a column the data does not have.
    pub fn check_columns(&self, available: usize) -> Result<()> {
        for t in &self.templates {
            if let Some(column) = t.columns().find(|&c| c >= available) {
                return Err(Error::UnknownColumn {
                    template: t.name.clone(),
                    column,
                    available,
                });
            }
        }
        Ok(())
    }

    /// Highest column index referenced plus one (0 when no columns are read).
    pub fn min_columns(&self) -> usize {
        self.templates
            .iter()
            .flat_map(|t| t.columns())
            .map(|c| c + 1)
            .max()
            .unwrap_or(0)
    }
}

/// Parses a template body. `base` is the 1-based column of the body's first
/// character on its line; errors carry `(column, message)`.
fn parse_body(body: &str, base: usize) -> std::result::Result<Vec<Atom>, (usize, String)> {
    let chars: Vec<char> = body.chars().collect();
    let mut atoms = Vec::new();
    let mut literal = String::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            return Err((base + i, "whitespace is not allowed in a template body".into()));
        }
        if c != '%' {
            literal.push(c);
            i += 1;
            continue;
        }
        let kind = chars.get(i + 1).copied();
        if !matches!(kind, Some('x' | 'p' | 's' | 'v')) {
            return Err((base + i, "expected one of %x, %p, %s, %v".into()));
        }
        let open = i + 2;
        if chars.get(open) != Some(&'[') {
            return Err((base + open, "expected `[`".into()));
        }
        let Some(close) = chars[open..].iter().position(|&c| c == ']').map(|p| open + p) else {
            return Err((base + open, "unclosed `[`".into()));
        };
        let inner: String = chars[open + 1..close].iter().collect();
        let args: Vec<&str> = inner.split(',').map(str::trim).collect();
        let want = if matches!(kind, Some('p' | 's')) { 3 } else { 2 };
        if args.len() != want {
            return Err((base + open, format!("expected {want} comma-separated arguments")));
        }
        let offset: i32 = args[0]
            .parse()
            .map_err(|_| (base + open + 1, format!("invalid row offset `{}`", args[0])))?;
        let column: usize = args[1]
            .parse()
            .map_err(|_| (base + open + 1, format!("invalid column `{}`", args[1])))?;
        if !literal.is_empty() {
            atoms.push(Atom::Literal(std::mem::take(&mut literal)));
        }
        let atom = match kind {
            Some('x') => Atom::Column { offset, column },
            Some('v') => Atom::Numeric { offset, column },
            Some(k) => {
                let len: usize = match args[2].parse() {
                    Ok(l) if l > 0 => l,
                    _ => return Err((base + open + 1, format!("invalid length `{}`", args[2]))),
                };
                if k == 'p' {
                    Atom::Prefix { offset, column, len }
                } else {
                    Atom::Suffix { offset, column, len }
                }
            }
            None => unreachable!(),
        };
        atoms.push(atom);
        i = close + 1;
    }
    if !literal.is_empty() {
        atoms.push(Atom::Literal(literal));
    }
    Ok(atoms)
}

impl std::fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name)?;
        f.write_char(':')?;
        for atom in &self.atoms {
            match atom {
                Atom::Literal(s) => f.write_str(s)?,
                Atom::Column { offset, column } => write!(f, "%x[{offset},{column}]")?,
                Atom::Numeric { offset, column } => write!(f, "%v[{offset},{column}]")?,
                Atom::Prefix { offset, column, len } => write!(f, "%p[{offset},{column},{len}]")?,
                Atom::Suffix { offset, column, len } => write!(f, "%s[{offset},{column},{len}]")?,
            }
        }
        Ok(())
    }
}
