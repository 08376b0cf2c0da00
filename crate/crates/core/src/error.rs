use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inputs or options that violate a documented precondition.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed text or binary input.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// Structurally well-formed data that fails a semantic check.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("out-of-vocabulary character {ch:?} in {word:?}")]
    Oov { ch: char, word: String },

    #[error("symbol table mismatch: {0}")]
    SymbolMismatch(String),

    #[error("epsilon cycle in {0} operand")]
    EpsilonCycle(&'static str),

    #[error("empty graph: {0}")]
    EmptyGraph(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
