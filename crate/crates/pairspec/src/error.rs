//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A joint-spectrum model violates one or more of its invariants.
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// A wavelength grid with non-positive steps or empty axes.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A spectral map whose values contradict its declared kind.
    #[error("invalid map: {0}")]
    InvalidMap(String),

    /// A polarization state outside the physical domain.
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A filter profile outside its domain.
    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    /// A polarizer scan that cannot support a three-coefficient fit.
    #[error("invalid scan: {0}")]
    InvalidScan(String),

    /// A run configuration that failed validation before any computation.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Both decay-path rates are zero; the local state is undefined.
    #[error("undefined state: both decay-path rates are zero")]
    UndefinedState,

    /// The coincidence scan has no modulation; the maximum angle is undefined.
    #[error("undefined maximum angle: scan has no modulation")]
    UndefinedMaxAngle,

    /// The requested marginal is not a proper Gaussian width.
    #[error("degenerate marginal: {0}")]
    DegenerateMarginal(String),

    /// Two maps that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An iterative fit failed to converge or to produce a usable model.
    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    /// Not enough usable pixels or samples for the number of free parameters.
    #[error("too few data points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    /// The fitted scan offset is non-positive; visibility is meaningless.
    #[error("fitted scan offset is not positive")]
    NonPositiveOffset,

    /// Background correction produced a visibility above one.
    #[error("inconsistent correction: corrected visibility {corrected} exceeds 1")]
    InconsistentCorrection { corrected: f64 },

    /// No scanned point satisfies the optimization constraint.
    #[error("infeasible constraint: {0}")]
    Infeasible(String),

    /// A data file that could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for validation failures of inputs and
    /// configuration, 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidModel(_)
            | Error::InvalidGrid(_)
            | Error::InvalidMap(_)
            | Error::InvalidState(_)
            | Error::InvalidFilter(_)
            | Error::InvalidScan(_)
            | Error::InvalidConfig(_)
            | Error::GridMismatch(_)
            | Error::Parse { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
