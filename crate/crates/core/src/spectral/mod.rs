//! Spectral estimation and thermometry: Welch periodograms of the detected
//! counts, the two-step displacement calibration (knife-edge slope plus
//! drive-tone correlation), and the model fits that turn a calibrated
//! spectrum into a temperature.

mod calibration;
mod fits;
mod welch;

pub use calibration::{
    calibrate_spectrum, correlate_drive, measure_slope, tone_peak_height, CalibrationResult,
    CorrelationAmplitude, SlopeMeasurement, TonePeak,
};
pub use fits::{
    fit_motion_psd, fit_saturation_curve, motion_psd_model, saturation_model, FitWindow,
    LorentzianFit, SaturationFit,
};
pub use welch::{welch_psd, welch_psd_counts, Window};

use crate::error::{CoreError, Result};

/// One-sided power spectral density on a frequency grid.
///
/// Raw spectra carry normalized-signal²/Hz; after [`calibrate_spectrum`] the
/// values are displacement PSD in m²/Hz.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Frequency grid [Hz], strictly increasing.
    pub freqs: Vec<f64>,
    /// PSD values, ≥ 0.
    pub values: Vec<f64>,
    /// Resolution bandwidth of the estimate [Hz].
    pub rbw: f64,
    /// Displacement-calibrated?
    pub calibrated: bool,
    /// Number of averaged segments (0 for synthetic spectra).
    pub n_averages: usize,
}

impl Spectrum {
    pub fn validate(&self) -> Result<()> {
        if self.freqs.len() != self.values.len() || self.freqs.is_empty() {
            return Err(CoreError::invalid("spectrum", "empty or mismatched grids"));
        }
        if !(self.rbw > 0.0) {
            return Err(CoreError::invalid("spectrum.rbw", "must be > 0"));
        }
        if self.freqs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::invalid("spectrum.freqs", "must be strictly increasing"));
        }
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CoreError::invalid("spectrum.values", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn bin_spacing(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            self.rbw
        }
    }

    /// Indices with frequency inside [lo, hi].
    pub fn bins_in(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.freqs.partition_point(|&f| f < lo);
        let end = self.freqs.partition_point(|&f| f <= hi);
        start..end
    }

    /// Integrated power over [lo, hi].
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let df = self.bin_spacing();
        self.bins_in(lo, hi).map(|i| self.values[i] * df).sum()
    }

    /// Total integrated power.
    pub fn total_power(&self) -> f64 {
        let df = self.bin_spacing();
        self.values.iter().sum::<f64>() * df
    }

    /// Frequency and value of the largest bin within [lo, hi].
    pub fn argmax_in(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        self.bins_in(lo, hi)
            .map(|i| (self.freqs[i], self.values[i]))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}
