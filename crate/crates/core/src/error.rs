//! Error type shared by all modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A configuration value violates a module invariant. `key` names the
    /// offending parameter so config-file errors point at the right line.
    #[error("invalid config: {key}: {reason}")]
    InvalidConfig { key: String, reason: String },

    /// A trajectory left the configured trap extent (runaway feedback or a
    /// numerically unstable setup).
    #[error("trajectory exceeded abort threshold at step {step}: |x| = {position:.3e} m")]
    NumericalBlowup { step: usize, position: f64 },

    /// A non-finite sample reached a recursive filter and poisoned its state.
    #[error("filter state poisoned by non-finite input at sample {sample}")]
    FilterFault { sample: usize },

    #[error("not enough samples: need {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("not enough detection events: need {needed}, got {got}")]
    InsufficientEvents { needed: usize, got: usize },

    #[error("trace too short: need {needed} samples, got {got}")]
    TraceTooShort { needed: usize, got: usize },

    #[error("no linear region found in knife-edge scan")]
    NoLinearRegion,

    #[error("measured slope {slope:.3e} consistent with zero (σ = {sigma:.3e})")]
    SlopeConsistentWithZero { slope: f64, sigma: f64 },

    #[error("no significant modulation: amplitude {amp:.3e} < {nsigma}σ ({sigma:.3e})")]
    NoModulation { amp: f64, sigma: f64, nsigma: f64 },

    #[error("calibration tone peak not above background ({peak:.3e} <= {background:.3e})")]
    PeakBelowBackground { peak: f64, background: f64 },

    #[error("rate {rate:.3e} at or above fitted maximum {r_max:.3e} (pole violation)")]
    RateAbovePole { rate: f64, r_max: f64 },

    #[error("fit did not converge after {iterations} iterations (|r| = {residual:.3e})")]
    FitNonConvergence { iterations: usize, residual: f64 },

    #[error("fit parameter {name} pinned at bound {value:.6e}")]
    FitPinnedAtBound { name: String, value: f64 },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("fitted spot is circular within errors; major-axis angle unreliable")]
    AngleUnreliable,
}

impl CoreError {
    pub fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CoreError::InvalidConfig {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
