use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate document id {id:?} at line {line} (first seen at line {first_line})")]
    DuplicateId {
        id: String,
        line: usize,
        first_line: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("document {id:?} has {found} sentences, at least {required} required")]
    TooFewSentences {
        id: String,
        found: usize,
        required: usize,
    },

    #[error("empty token sequence")]
    EmptySequence,

    #[error("corpus contains no tokens")]
    NoTokens,

    #[error("zero-norm embedding at row {0}")]
    ZeroNorm(usize),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing label for document {0:?}")]
    MissingLabel(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("partner collision: {0}")]
    PartnerCollision(String),

    #[error("epoch {epoch}, batch {batch}: {source}")]
    Training {
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("item {index}: {source}")]
    Indexed {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at(index: usize, source: Error) -> Self {
        Error::Indexed {
            index,
            source: Box::new(source),
        }
    }

    /// Short machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::TooFewSentences { .. } => "too_few_sentences",
            Error::EmptySequence => "empty_sequence",
            Error::NoTokens => "no_tokens",
            Error::ZeroNorm(_) => "zero_norm",
            Error::NonFinite(_) => "non_finite",
            Error::MissingLabel(_) => "missing_label",
            Error::UnknownId(_) => "unknown_id",
            Error::PartnerCollision(_) => "partner_collision",
            Error::Training { .. } => "training",
            Error::Indexed { source, .. } => source.kind(),
            Error::Json(_) => "json",
        }
    }
}
