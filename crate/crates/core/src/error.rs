use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unreadable file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("zero-length audio")]
    EmptyAudio,

    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: start ≥ end ({start} ≥ {end})")]
    StartNotBeforeEnd { line: usize, start: u64, end: u64 },

    #[error("overlapping intervals in {utterance}: [{prev_start}, {prev_end}) and [{start}, {end})")]
    OverlappingIntervals {
        utterance: String,
        prev_start: u64,
        prev_end: u64,
        start: u64,
        end: u64,
    },

    #[error("zero variance: cannot standardize a constant corpus")]
    ZeroVariance,

    #[error("sample rate mismatch: expected {expected} Hz, got {got} Hz")]
    SampleRateMismatch { expected: u32, got: u32 },

    #[error("frame shorter than one sample ({frame_ms} ms at {sample_rate} Hz)")]
    FrameTooShort { frame_ms: f64, sample_rate: u32 },

    #[error("annotation [{start}, {end}) exceeds waveform length {len}")]
    AnnotationOutOfRange { start: u64, end: u64, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported interchange version {0}")]
    VersionMismatch(u32),

    #[error("unsupported class count {0}, expected 3")]
    ClassCount(u32),

    #[error("truncated payload: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },

    #[error("unsorted boundary list")]
    Unsorted,

    #[error("no reference boundaries")]
    NoReference,

    #[error("utterance sets differ: {0}")]
    UtteranceMismatch(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by numerics at runtime rather than by the
    /// caller's inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Diverged { .. })
    }
}
