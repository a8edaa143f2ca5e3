use thiserror::Error;

use crate::scan::KSample;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: expected {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("pair is not normalized: norm = {norm}")]
    Unnormalized { norm: f64 },

    /// |a| >= alpha0 leaves no positive mixing ratio C.
    #[error("unphysical mixing: |a| = {a} must be below alpha0 = {alpha0}")]
    UnphysicalMixing { a: f64, alpha0: f64 },

    #[error("singular linearized system (k at a spectral point?)")]
    DegenerateLinearization,

    #[error("eigenvalue-direction overlap vanished: I_mu = {i_mu:e}")]
    StalledUpdate { i_mu: f64 },

    #[error("iteration diverged: {0}")]
    Divergence(String),

    #[error("no convergence after {iterations} iterations (last residual {last:e})", last = residual_history.last().copied().unwrap_or(f64::NAN))]
    NonConvergence {
        iterations: usize,
        residual_history: Vec<f64>,
    },

    #[error("converged onto a nodeful branch: u changes sign {sign_changes} time(s)")]
    WrongBranch { sign_changes: usize },

    #[error("seed iteration failed: {0}")]
    Seed(String),

    #[error("scan failed: {reason}")]
    ScanFailure {
        reason: String,
        history: Vec<KSample>,
    },

    #[error("undefined state: {0}")]
    UndefinedState(String),

    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),

    #[error("unsupported snapshot format version {found} (this build reads {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit codes used by the command-line driver.
pub mod exit {
    pub const SUCCESS: u8 = 0;
    pub const USAGE: u8 = 2;
    pub const CONVERGENCE: u8 = 3;
    pub const SCAN: u8 = 4;
    pub const IO: u8 = 5;
}

impl Error {
    /// Exit code class: bad input or configuration, a solve that did not
    /// converge, a failed coupling scan, or a file-level failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidConfig(_)
            | Error::InvalidInput(_)
            | Error::Shape { .. }
            | Error::NonFinite { .. }
            | Error::Unnormalized { .. }
            | Error::UnphysicalMixing { .. }
            | Error::UndefinedState(_) => exit::USAGE,
            Error::DegenerateLinearization
            | Error::StalledUpdate { .. }
            | Error::Divergence(_)
            | Error::NonConvergence { .. }
            | Error::WrongBranch { .. }
            | Error::Seed(_) => exit::CONVERGENCE,
            Error::ScanFailure { .. } => exit::SCAN,
            Error::CorruptSnapshot(_)
            | Error::UnsupportedVersion { .. }
            | Error::Io(_)
            | Error::Json(_) => exit::IO,
        }
    }

    /// Stable snake_case name for diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::Shape { .. } => "shape",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidInput(_) => "invalid_input",
            Error::Unnormalized { .. } => "unnormalized",
            Error::UnphysicalMixing { .. } => "unphysical_mixing",
            Error::DegenerateLinearization => "degenerate_linearization",
            Error::StalledUpdate { .. } => "stalled_update",
            Error::Divergence(_) => "divergence",
            Error::NonConvergence { .. } => "non_convergence",
            Error::WrongBranch { .. } => "wrong_branch",
            Error::Seed(_) => "seed",
            Error::ScanFailure { .. } => "scan_failure",
            Error::UndefinedState(_) => "undefined_state",
            Error::CorruptSnapshot(_) => "corrupt_snapshot",
            Error::UnsupportedVersion { .. } => "unsupported_version",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Shape { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { what, index }),
        None => Ok(()),
    }
}
