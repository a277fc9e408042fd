use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while building taxonomies, loading corpora, training and
/// evaluating models.
#[derive(Debug, Error)]
pub enum Error {
    #[error("hierarchy is empty")]
    EmptyHierarchy,
    #[error("cycle detected through node `{0}`")]
    Cycle(String),
    #[error("multiple roots: `{0}` and `{1}`")]
    MultipleRoots(String, String),
    #[error("node `{child}` has two parents: `{first}` and `{second}`")]
    DuplicateParent {
        child: String,
        first: String,
        second: String,
    },
    #[error("taxonomy leaves are at mixed depths; normalize the depth first")]
    NotNormalized,
    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unknown label `{label}` for document `{doc}`")]
    UnknownLabel { doc: String, label: String },
    #[error("inconsistent labels for document `{doc}`: {message}")]
    InconsistentLabels { doc: String, message: String },
    #[error("label at depth {depth} exceeds taxonomy depth {max}")]
    LabelTooDeep { depth: usize, max: usize },
    #[error("missing similarity vector for depth {0}")]
    MissingDepth(usize),
    #[error("similarity vector at depth {depth} has {found} values, expected {expected}")]
    SimilarityLength {
        depth: usize,
        found: usize,
        expected: usize,
    },
    #[error("NaN similarity at depth {0}")]
    NanSimilarity(usize),

    #[error("label rate {0} is outside (0, 1]")]
    InvalidRate(f64),
    #[error("no labeled documents")]
    NoLabeledDocuments,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("word index {index} is outside a vocabulary of size {size}")]
    WordOutOfRange { index: usize, size: usize },
    #[error("posterior does not sum to one (sum = {0})")]
    UnnormalizedPosterior(f64),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty class set")]
    EmptyClassSet,
    #[error("cannot generate an empty corpus")]
    EmptyCorpus,
    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("rate {rate}, seed {seed}: {source}")]
    Run {
        rate: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
