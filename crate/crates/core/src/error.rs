use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
///
/// Variants are grouped by the process exit code the CLI maps them to; see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    // configuration / usage
    #[error("config error: {0}")]
    Config(String),

    // data errors
    #[error("malformed manifest {path}: {field}: {message}")]
    MalformedManifest {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("duplicate word id {0:?} in manifest")]
    DuplicateWordId(String),
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),
    #[error("word {word}: syllable spans overlap ({first} and {second})")]
    OverlappingSpans {
        word: String,
        first: usize,
        second: usize,
    },
    #[error("word {word}: syllable indices are not contiguous from 0")]
    NonContiguousIndices { word: String },
    #[error("{path}:{line}: {message}")]
    MalformedRow {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("audio too short: {samples} samples, need at least {needed} for one analysis window")]
    AudioTooShort { samples: usize, needed: usize },
    #[error("invalid audio: {0}")]
    InvalidAudio(String),
    #[error("invalid pitch parameters: {0}")]
    InvalidParams(String),
    #[error("only {found} voiced frames across the speaker's corpus, need {needed}")]
    InsufficientVoicedFrames { found: usize, needed: usize },
    #[error("degenerate speaker range: lo {lo_hz} Hz, hi {hi_hz} Hz")]
    InsufficientRange { lo_hz: f64, hi_hz: f64 },
    #[error("only {found} voiced frames in syllable, need {needed}")]
    TooFewVoicedFrames { found: usize, needed: usize },
    #[error("only {found} contour points, need {needed}")]
    TooFewPoints { found: usize, needed: usize },
    #[error("invalid contour: {0}")]
    InvalidContour(String),
    #[error("invalid frequency {0} Hz")]
    InvalidFrequency(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty contingency table: {0}")]
    EmptyTable(String),
    #[error("missing labels: {0}")]
    MissingLabels(String),
    #[error(
        "all {clusters} mean shift clusters are smaller than the threshold {threshold}; \
         lower the threshold or raise the bandwidth"
    )]
    AllClustersSpurious { clusters: usize, threshold: usize },
    #[error("malformed artifact {path}: {message}")]
    MalformedArtifact { path: PathBuf, message: String },

    // numerical failures
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient at parameter {index}")]
    NonFiniteGradient { index: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),
    #[error("invalid clustering input: {0}")]
    InvalidClustering(String),

    #[error("word {word}: {source}")]
    InWord {
        word: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
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

    pub fn in_word(word: impl Into<String>, source: Error) -> Self {
        Error::InWord {
            word: word.into(),
            source: Box::new(source),
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InWord { source, .. } => source.exit_code(),
            Error::Config(_) => 1,
            Error::ShapeMismatch(_)
            | Error::NonFiniteGradient { .. }
            | Error::NonFiniteLoss { .. }
            | Error::DegenerateCovariance(_)
            | Error::InvalidClustering(_) => 3,
            _ => 2,
        }
    }
}
