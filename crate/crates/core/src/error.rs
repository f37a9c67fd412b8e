use thiserror::Error;

use crate::features::FeatureKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the module that raises them; the FFI layer maps
/// each variant onto a stable integer code via [`Error::code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // audio
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("signal has no samples")]
    EmptySignal,
    #[error("invalid analysis config: {0}")]
    InvalidConfig(String),
    #[error("sample rate mismatch: buffer is {actual} Hz, config expects {expected} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },

    // features
    #[error("no values to pool for {0} statistics")]
    NoValues(FeatureKind),
    #[error("statistics kind {stats} does not match contour kind {contour}")]
    KindMismatch { stats: FeatureKind, contour: FeatureKind },
    #[error("durations sum to {sum} frames but contour has {frames}")]
    DurationMismatch { sum: i64, frames: usize },
    #[error("negative duration {value} at phoneme {index}")]
    NegativeDuration { index: usize, value: i64 },

    // alignment ingest
    #[error("schema error: {0}")]
    Schema(String),
    #[error("word spans overlap or are out of order at word {index}")]
    SpanOverlap { index: usize },
    #[error("{phonemes} phonemes but {durations} durations")]
    DurationCountMismatch { phonemes: usize, durations: usize },
    #[error("bad alignment token {0:?}")]
    Token(String),
    #[error("fragment {id:?} has end {end} <= begin {begin}")]
    NegativeInterval { id: String, begin: f64, end: f64 },

    // sfv
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("phoneme {0:?} not in vocabulary")]
    VocabMiss(String),
    #[error("missing input: {0}")]
    MissingInput(String),

    // eval
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("empty sequence")]
    EmptySequence,
    #[error("utterance {utterance:?} unmatched between ground truth and system {system:?}")]
    MissingUtterance { system: String, utterance: String },
    #[error("system {0:?} has no utterances")]
    EmptySystem(String),

    // corpus
    #[error("fragment {id:?} ends at {end}s beyond audio length {length}s")]
    OutOfRange { id: String, end: f64, length: f64 },
    #[error("no transcript for record {0:?}")]
    MissingTranscript(String),
    #[error("bad split spec: {0}")]
    BadSpec(String),
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, err: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            message: err.to_string(),
        }
    }

    /// Stable numeric code for C callers. Zero is reserved for success.
    pub fn code(&self) -> i32 {
        match self {
            Error::MalformedHeader(_) => 10,
            Error::UnsupportedEncoding(_) => 11,
            Error::EmptySignal => 12,
            Error::InvalidConfig(_) => 13,
            Error::SampleRateMismatch { .. } => 14,
            Error::NoValues(_) => 20,
            Error::KindMismatch { .. } => 21,
            Error::DurationMismatch { .. } => 22,
            Error::NegativeDuration { .. } => 23,
            Error::Schema(_) => 30,
            Error::SpanOverlap { .. } => 31,
            Error::DurationCountMismatch { .. } => 32,
            Error::Token(_) => 33,
            Error::NegativeInterval { .. } => 34,
            Error::LengthMismatch(_) => 40,
            Error::IndexOutOfRange(_) => 41,
            Error::VocabMiss(_) => 42,
            Error::MissingInput(_) => 43,
            Error::InsufficientData(_) => 50,
            Error::EmptySequence => 51,
            Error::MissingUtterance { .. } => 52,
            Error::EmptySystem(_) => 53,
            Error::OutOfRange { .. } => 60,
            Error::MissingTranscript(_) => 61,
            Error::BadSpec(_) => 62,
            Error::DuplicateId(_) => 63,
            Error::Io { .. } => 70,
        }
    }
}
