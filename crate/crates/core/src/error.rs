use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error class, used for CLI exit codes and the C ABI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Backend,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in stanza {stanza}: {message}")]
    Stanza { stanza: usize, message: String },

    #[error("parse error at line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("ontology structure error: {0}")]
    Structure(String),

    #[error("is_a cycle detected through {0}")]
    Cycle(String),

    #[error("unknown term {0}")]
    UnknownTerm(String),

    #[error("term {0} is obsolete")]
    ObsoleteTerm(String),

    #[error("annotation corpus is empty")]
    EmptyCorpus,

    #[error("annotation source {0} has no diseases")]
    EmptySource(String),

    #[error("ingestion error: {0}")]
    Ingest(String),

    #[error("similarity undefined: {0}")]
    UndefinedSimilarity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("retrieval error: {0}")]
    Retrieval(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("featurization error for patient {patient}, term {term}: {message}")]
    Featurize {
        patient: String,
        term: String,
        message: String,
    },

    #[error("credential error: {0}")]
    Credential(String),

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("artifact mismatch: {0}")]
    ArtifactMismatch(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::Template(_) | Error::ArtifactMismatch(_) => {
                ErrorClass::Config
            }
            Error::Credential(_) | Error::BackendUnavailable(_) | Error::Protocol(_) => {
                ErrorClass::Backend
            }
            _ => ErrorClass::Data,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Stanza { .. } | Error::Line { .. } => "parse",
            Error::Json(_) => "json",
            Error::Structure(_) => "structure",
            Error::Cycle(_) => "cycle",
            Error::UnknownTerm(_) => "unknown_term",
            Error::ObsoleteTerm(_) => "obsolete_term",
            Error::EmptyCorpus => "empty_corpus",
            Error::EmptySource(_) => "empty_source",
            Error::Ingest(_) => "ingest",
            Error::UndefinedSimilarity(_) => "undefined_similarity",
            Error::Config(_) => "config",
            Error::Generation(_) => "generation",
            Error::Template(_) => "template",
            Error::Embedding(_) => "embedding",
            Error::Retrieval(_) => "retrieval",
            Error::Sampling(_) => "sampling",
            Error::Training(_) => "training",
            Error::Featurize { .. } => "featurize",
            Error::Credential(_) => "credential",
            Error::BackendUnavailable(_) => "backend_unavailable",
            Error::Protocol(_) => "protocol",
            Error::ArtifactMismatch(_) => "artifact_mismatch",
        }
    }
}
