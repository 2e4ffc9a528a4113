//! Crate-wide error type.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record ({message})")]
    CorpusParse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("instance {instance_id}: {message}")]
    Validation { instance_id: String, message: String },

    #[error("label {label:?} is not part of schema {schema_id} ({context})")]
    SchemaMismatch {
        label: String,
        schema_id: String,
        context: String,
    },

    #[error("unknown dataset id {id:?}; known ids: {known}")]
    UnknownSchema { id: String, known: String },

    #[error("invalid schema {schema_id}: {message}")]
    InvalidSchema { schema_id: String, message: String },

    #[error("verbalizer word {word:?} for label {label:?} does not bind: {message}")]
    Binding {
        label: String,
        word: String,
        message: String,
    },

    #[error("empty corpus: {context}")]
    EmptyCorpus { context: String },

    #[error("batch size must be at least 1, got {got}")]
    BatchSize { got: usize },

    #[error("alignment error: {message}")]
    Alignment { message: String },

    #[error("position {index} is not a mask position")]
    NotAMask { index: usize },

    #[error("prompt for instance {instance_id} has {len} tokens, backend maximum is {max}")]
    PromptTooLong {
        instance_id: String,
        len: usize,
        max: usize,
    },

    #[error("template (permutation {permutation_id}) has no dev score; score the pool first")]
    UnscoredTemplate { permutation_id: u8 },

    #[error("infiller failed on scaffold permutation {permutation_id}: {message}")]
    Infiller { permutation_id: u8, message: String },

    #[error("invalid template: {message}")]
    Template { message: String },

    #[error("hidden vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training diverged at step {step}: loss became non-finite")]
    Diverged { step: usize },

    #[error("graph prediction needs at least 2 detected events, got {got}")]
    TooFewEvents { got: usize },

    #[error("configuration error: {message}")]
    Config { message: String },

    #[error("backend error: {message}")]
    Backend { message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
