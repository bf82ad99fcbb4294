use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("conditional density normalization did not converge (relative error {relative_error:.3e})")]
    NormalizationFailure { relative_error: f64 },

    #[error("quadrature error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureFailure { estimate: f64, tolerance: f64 },

    #[error("phase settings do not determine a sinusoid (normal matrix is singular)")]
    DegeneratePhases,

    #[error("no candidate center produced a finite symmetry score")]
    CenterNotFound,

    #[error("symmetry score is flat; the visibility map carries no center information")]
    DegenerateScore,

    #[error("visibility profile never falls below half of its peak {peak:.4}")]
    NoHalfCrossing { peak: f64 },

    #[error("visibility does not decay (idler phase curvature is zero)")]
    NoDecay,

    #[error("regime parameter {regime_parameter:.4} is at or above the bound {bound}")]
    RegimeViolation { regime_parameter: f64, bound: f64 },

    #[error("FWHM {fwhm:.6e} m lies outside the achievable range [{min:.6e}, {max:.6e}] m")]
    BracketFailure { fwhm: f64, min: f64, max: f64 },

    #[error("malformed stack header: {0}")]
    MalformedHeader(String),

    #[error("truncated stack file: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: u64, found: u64 },

    #[error("sidecar metadata disagrees with binary stack: {0}")]
    MetadataMismatch(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Broad failure classes, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    Io,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Strips any stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self.root() {
            Error::InvalidParameter { .. } | Error::Config { .. } => ErrorClass::Input,
            Error::MalformedHeader(_)
            | Error::TruncatedFile { .. }
            | Error::MetadataMismatch(_)
            | Error::Io(_) => ErrorClass::Io,
            _ => ErrorClass::Numerical,
        }
    }

    /// Short variant name, used in sweep status columns.
    pub fn label(&self) -> &'static str {
        match self.root() {
            Error::InvalidParameter { .. } => "InvalidParameter",
            Error::NormalizationFailure { .. } => "NormalizationFailure",
            Error::QuadratureFailure { .. } => "QuadratureFailure",
            Error::DegeneratePhases => "DegeneratePhases",
            Error::CenterNotFound => "CenterNotFound",
            Error::DegenerateScore => "DegenerateScore",
            Error::NoHalfCrossing { .. } => "NoHalfCrossing",
            Error::NoDecay => "NoDecay",
            Error::RegimeViolation { .. } => "RegimeViolation",
            Error::BracketFailure { .. } => "BracketFailure",
            Error::MalformedHeader(_) => "MalformedHeader",
            Error::TruncatedFile { .. } => "TruncatedFile",
            Error::MetadataMismatch(_) => "MetadataMismatch",
            Error::Config { .. } => "Config",
            Error::Io(_) => "Io",
            Error::Stage { .. } => unreachable!("root() strips stage labels"),
        }
    }
}
