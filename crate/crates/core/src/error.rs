use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("template syntax error at line {line}, column {column}: {message}")]
    TemplateSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("template `{template}` references column {column} but the data has {available} observation column(s)")]
    UnknownColumn {
        template: String,
        column: usize,
        available: usize,
    },

    #[error("length mismatch: {what} has length {got}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("tag {0} is not in the tagset")]
    UnknownTag(String),

    #[error("sequence {0} has no gold tags")]
    MissingGold(usize),

    #[error("empty sequence")]
    EmptySequence,

    #[error("value `{value}` in column {column} is not a number")]
    NotNumeric { value: String, column: usize },

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: String, expected: u32 },

    #[error("instance too large: {paths} paths exceed the enumeration limit of {limit}")]
    TooLarge { paths: u128, limit: u128 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite weight detected after sample {sample} (epoch {epoch})")]
    NonFinite { epoch: usize, sample: usize },

    #[error("malformed chunk tag `{0}`")]
    MalformedTag(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
