//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]; variants carry enough structure
//! for callers to distinguish invalid inputs from numerical failures without
//! parsing message strings.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A point or vector had a different dimension than the object it was
    /// used with.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// Ambient dimension outside the supported range `1..=16`.
    #[error("unsupported dimension {0}: must be between 1 and 16")]
    UnsupportedDimension(usize),

    /// A construction parameter violated a documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A density exponent makes the density non-integrable near its singular
    /// set, so ball masses would be infinite.
    #[error("non-integrable density: exponent {exponent} must exceed {limit}")]
    NonIntegrable { exponent: f64, limit: f64 },

    /// The dual density `rho^{-1/(p-1)}` is non-integrable, so the Muckenhoupt
    /// product is infinite on balls meeting the singular set.
    #[error("dual density non-integrable: dual exponent {dual_exponent} does not exceed {limit}")]
    DualNonIntegrable { dual_exponent: f64, limit: f64 },

    /// The dual density and Muckenhoupt products are only defined for `p > 1`.
    #[error("exponent p = {0} out of range: p must exceed 1")]
    ExponentOutOfRange(f64),

    /// Monte Carlo sample budget below the minimum needed for a variance
    /// estimate.
    #[error("sample budget {0} too small: at least {1} samples required")]
    SampleBudgetTooSmall(u64, u64),

    /// Too many samples landed exactly on the singular set; the geometry is
    /// degenerate for floating-point sampling.
    #[error("singular-set hit fraction {fraction:.3e} exceeds {limit:.1e}: degenerate configuration")]
    SingularHitRate { fraction: f64, limit: f64 },

    /// Adaptive quadrature exhausted its panel budget before reaching the
    /// requested tolerance.
    #[error("quadrature tolerance not reached: error bound {err_bound:.3e} after {panels} panels")]
    ToleranceNotReached { err_bound: f64, panels: usize },

    /// A line mass was requested along a ray on which the density fails to be
    /// integrable (local exponent at a crossing is -1 or below, or the whole
    /// ray lies in the singular set).
    #[error("line mass undefined along this ray: local exponent {exponent} is not above -1")]
    LineMassUndefined { exponent: f64 },

    /// The closed-form line-mass bounds require `R > |x - x0|`.
    #[error("outside bound regime: R = {radius} must exceed |x - x0| = {distance}")]
    OutsideBoundRegime { radius: f64, distance: f64 },

    /// A ratio-curve schedule violated its preconditions.
    #[error("invalid radius schedule: {0}")]
    InvalidSchedule(String),

    /// An envelope fit was requested on a curve whose deviations are all
    /// within noise; the envelope is unfalsifiable at this sample budget.
    #[error("envelope fit inconclusive: only {signal_points} of {total_points} points rise above 3 sigma (need at least {required})")]
    EnvelopeNoiseDominated {
        signal_points: usize,
        total_points: usize,
        required: usize,
    },

    /// Experiment configuration failed validation after parsing.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// Failure reading, parsing or writing experiment files.
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
