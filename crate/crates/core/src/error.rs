use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input data, file or argument value.
    Data,
    /// The numbers are well-formed but the model degenerates on them.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions nx={nx} ny={ny} nt={nt}: all must be positive")]
    InvalidDimensions { nx: usize, ny: usize, nt: usize },
    #[error("data length {actual} does not match nx*ny*nt = {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("non-finite sample at (x={x}, y={y}, t={t})")]
    NonFiniteVolumeSample { x: usize, y: usize, t: usize },
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("sampling interval dt={0} must be finite and strictly positive")]
    InvalidDt(f64),
    #[error("trace has no samples")]
    EmptyTrace,
    #[error("trace of length {len} is too short (need at least {min})")]
    TraceTooShort { len: usize, min: usize },
    #[error("trace mismatch: {0}")]
    TraceMismatch(String),
    #[error("volume dimensions differ: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },
    #[error("invalid filter parameters: {0}")]
    InvalidParams(String),
    #[error("degenerate model: gain denominator h^2*p_prior + r is zero")]
    DegenerateGain,
    #[error("degenerate covariance: p_prior[{index}] is zero")]
    DegenerateCovariance { index: usize },
    #[error("inconsistent filter trajectory: {0}")]
    InconsistentTrajectory(String),
    #[error("noise window {window} out of range 1..={len}")]
    NoiseWindow { window: usize, len: usize },
    #[error("invalid ROI {t_lo}:{t_hi} for trace length {nt}")]
    InvalidRoi { t_lo: usize, t_hi: usize, nt: usize },
    #[error("ROI {t_lo}:{t_hi} leaves no samples outside it")]
    EmptyNoiseRegion { t_lo: usize, t_hi: usize },
    #[error("PSNR is infinite: zero noise power outside the ROI")]
    InfinitePsnr,
    #[error("Q grid is empty")]
    EmptyGrid,
    #[error("Q grid value {0} is not finite and strictly positive")]
    InvalidGridValue(f64),
    #[error("cannot sample {requested} traces from {available}")]
    SampleCount { requested: usize, available: usize },
    #[error("median noise power of the sampled traces is zero; cannot anchor a default Q grid")]
    ZeroNoisePower,
    #[error("cutoff {cutoff_hz} Hz must lie in (0, {nyquist_hz}) Hz")]
    InvalidCutoff { cutoff_hz: f64, nyquist_hz: f64 },
    #[error("mask coordinate ({x}, {y}) outside {nx}x{ny} grid")]
    MaskOutOfBounds {
        x: usize,
        y: usize,
        nx: usize,
        ny: usize,
    },
    #[error("invalid synthesis spec: {0}")]
    InvalidSynthSpec(String),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("at sample {index}: {source}")]
    AtSample {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("at trace (x={x}, y={y}): {source}")]
    AtTrace {
        x: usize,
        y: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DegenerateGain
            | Error::DegenerateCovariance { .. }
            | Error::InfinitePsnr
            | Error::ZeroNoisePower => ErrorClass::Numerical,
            Error::AtSample { source, .. } | Error::AtTrace { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn at_sample(self, index: usize) -> Error {
        Error::AtSample {
            index,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_trace(self, x: usize, y: usize) -> Error {
        Error::AtTrace {
            x,
            y,
            source: Box::new(self),
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Error {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips location wrappers and returns the innermost error.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtSample { source, .. } | Error::AtTrace { source, .. } => source.root(),
            e => e,
        }
    }
}
