use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variant names are stable: the CLI prints them on stderr and maps them to
/// exit codes through [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    // audio ingestion
    #[error("UnsupportedSampleRate: {0} Hz (expected 4000, 8000 or 16000)")]
    UnsupportedSampleRate(u32),
    #[error("UnsupportedEncoding: {0}")]
    UnsupportedEncoding(String),
    #[error("MalformedContainer: {0}")]
    MalformedContainer(String),
    #[error("EmptyAudio: clip contains no samples")]
    EmptyAudio,

    // feature extraction
    #[error("SignalTooShort: {len} samples, need at least {needed}")]
    SignalTooShort { len: usize, needed: usize },
    #[error("FrameTooShort: window needs at least 2 samples, got {0}")]
    FrameTooShort(usize),
    #[error("InvalidDftSize: {0}")]
    InvalidDftSize(String),
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),

    // shared shape checks
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("EmptyFeatureMatrix: no frames")]
    EmptyFeatureMatrix,

    // model training
    #[error("TooFewFrames: {frames} frames for {components} components")]
    TooFewFrames { frames: usize, components: usize },
    #[error("DegenerateComponent: component {0} could not be re-seeded")]
    DegenerateComponent(usize),
    #[error("NegativeRelevance: {0}")]
    NegativeRelevance(f64),
    #[error("RankTooLarge: rank {rank} must be below supervector dimension {dim}")]
    RankTooLarge { rank: usize, dim: usize },
    #[error("NumericalFailure: {0}")]
    NumericalFailure(String),

    // scoring
    #[error("DegenerateCohort: {0}")]
    DegenerateCohort(String),
    #[error("ZeroVector: cosine score of a zero vector is undefined")]
    ZeroVector,
    #[error("NotADistribution: {0}")]
    NotADistribution(String),

    // evaluation
    #[error("EmptyRegistry: no enrolled speakers")]
    EmptyRegistry,
    #[error("ModeMismatch: {0}")]
    ModeMismatch(String),
    #[error("EmptyScoreSet: {0}")]
    EmptyScoreSet(&'static str),
    #[error("InvalidExperimentConfig: {0}")]
    InvalidExperimentConfig(String),
    #[error("DuplicateSpeakerId: {0}")]
    DuplicateSpeakerId(String),

    // persistence
    #[error("IoFailure: {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("WrongKind: expected {expected}, found {found}")]
    WrongKind { expected: String, found: String },
    #[error("UnsupportedVersion: {0}")]
    UnsupportedVersion(u64),
    #[error("CorruptArtifact: {0}")]
    CorruptArtifact(String),

    #[error("Usage: {0}")]
    Usage(String),
}

/// Coarse failure classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Model, scoring or registry level failure (exit 1).
    Domain,
    /// Unreadable or unsupported input data (exit 2).
    InputData,
    /// Bad flags or configuration (exit 64).
    Usage,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Domain => 1,
            ErrorCategory::InputData => 2,
            ErrorCategory::Usage => 64,
        }
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::IoFailure { path: path.into(), source }
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }

    /// The bare variant name, e.g. `"UnsupportedSampleRate"`.
    pub fn name(&self) -> &'static str {
        match self {
            Error::UnsupportedSampleRate(_) => "UnsupportedSampleRate",
            Error::UnsupportedEncoding(_) => "UnsupportedEncoding",
            Error::MalformedContainer(_) => "MalformedContainer",
            Error::EmptyAudio => "EmptyAudio",
            Error::SignalTooShort { .. } => "SignalTooShort",
            Error::FrameTooShort(_) => "FrameTooShort",
            Error::InvalidDftSize(_) => "InvalidDftSize",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::EmptyFeatureMatrix => "EmptyFeatureMatrix",
            Error::TooFewFrames { .. } => "TooFewFrames",
            Error::DegenerateComponent(_) => "DegenerateComponent",
            Error::NegativeRelevance(_) => "NegativeRelevance",
            Error::RankTooLarge { .. } => "RankTooLarge",
            Error::NumericalFailure(_) => "NumericalFailure",
            Error::DegenerateCohort(_) => "DegenerateCohort",
            Error::ZeroVector => "ZeroVector",
            Error::NotADistribution(_) => "NotADistribution",
            Error::EmptyRegistry => "EmptyRegistry",
            Error::ModeMismatch(_) => "ModeMismatch",
            Error::EmptyScoreSet(_) => "EmptyScoreSet",
            Error::InvalidExperimentConfig(_) => "InvalidExperimentConfig",
            Error::DuplicateSpeakerId(_) => "DuplicateSpeakerId",
            Error::IoFailure { .. } => "IoFailure",
            Error::WrongKind { .. } => "WrongKind",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::CorruptArtifact(_) => "CorruptArtifact",
            Error::Usage(_) => "Usage",
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::UnsupportedSampleRate(_)
            | Error::UnsupportedEncoding(_)
            | Error::MalformedContainer(_)
            | Error::EmptyAudio
            | Error::SignalTooShort { .. }
            | Error::IoFailure { .. }
            | Error::WrongKind { .. }
            | Error::UnsupportedVersion(_)
            | Error::CorruptArtifact(_) => ErrorCategory::InputData,
            Error::InvalidConfig(_) | Error::InvalidExperimentConfig(_) | Error::Usage(_) => ErrorCategory::Usage,
            _ => ErrorCategory::Domain,
        }
    }
}
