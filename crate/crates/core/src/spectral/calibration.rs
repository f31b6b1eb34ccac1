//! The two-step displacement calibration.
//!
//! Step one measures the knife-edge response: scan the ion across the edge,
//! record the normalized count rate, and take the least-squares slope of the
//! linear region. Step two drives the ion coherently next to the motional
//! line and reads the resulting count-rate modulation from the phases of the
//! detection events relative to the drive zero crossings. The modulation
//! amplitude divided by the slope is the displacement amplitude of the
//! driven motion, which pins the absolute scale of the raw spectrum via its
//! drive-tone peak.

use super::Spectrum;
use crate::error::{CoreError, Result};
use crate::fit::{line_fit, sinusoid_fit};

/// Slope of the normalized count rate per unit ion displacement [1/m].
#[derive(Debug, Clone, Copy)]
pub struct SlopeMeasurement {
    pub slope: f64,
    pub uncertainty: f64,
    /// Points inside the linear region that entered the fit.
    pub points_used: usize,
}

/// Least-squares slope of the linear region of a knife-edge scan.
///
/// `positions` are the scan displacements [m] along the scan direction and
/// `normalized_counts` the count rates normalized to the balanced (focus)
/// value. The linear region is where an erf response stays within 1 % of its
/// tangent, i.e. |response − center| ≤ 0.194 of the full half-swing.
/// `scan_projection` is cos of the angle between the scan direction and the
/// knife normal; the returned slope refers to displacement along the normal.
pub fn measure_slope(
    positions: &[f64],
    normalized_counts: &[f64],
    scan_projection: f64,
) -> Result<SlopeMeasurement> {
    if positions.len() != normalized_counts.len() || positions.len() < 5 {
        return Err(CoreError::TooFewSamples {
            needed: 5,
            got: positions.len().min(normalized_counts.len()),
        });
    }
    if !(scan_projection.abs() > 1e-6) {
        return Err(CoreError::invalid(
            "scan_projection",
            "scan direction is parallel to the knife edge",
        ));
    }

    let u_min = normalized_counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let u_max = normalized_counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half_swing = 0.5 * (u_max - u_min);
    let u_mid = 0.5 * (u_max + u_min);

    // erf(z) is within 1 % of its tangent for |z| ≤ 0.173, i.e. while the
    // response covers no more than erf(0.173)/1 ≈ 0.194 of the half-swing.
    const LINEAR_FRACTION: f64 = 0.194;
    let (xs, ys): (Vec<f64>, Vec<f64>) = if half_swing < 0.02 {
        // Essentially flat response: fit everything and let the
        // significance check below speak.
        (positions.to_vec(), normalized_counts.to_vec())
    } else {
        positions
            .iter()
            .zip(normalized_counts)
            .filter(|(_, &u)| (u - u_mid).abs() <= LINEAR_FRACTION * half_swing)
            .map(|(&d, &u)| (d, u))
            .unzip()
    };

    if xs.len() < 3 {
        return Err(CoreError::NoLinearRegion);
    }

    let ((_, slope), (_, sigma)) = line_fit(&xs, &ys, None)?;
    if slope.abs() < 3.0 * sigma {
        return Err(CoreError::SlopeConsistentWithZero { slope, sigma });
    }
    Ok(SlopeMeasurement {
        slope: slope / scan_projection,
        uncertainty: sigma / scan_projection.abs(),
        points_used: xs.len(),
    })
}

/// Count-rate modulation amplitude extracted from detection-event phases.
#[derive(Debug, Clone, Copy)]
pub struct CorrelationAmplitude {
    /// Relative modulation amplitude of the normalized rate.
    pub amplitude: f64,
    pub uncertainty: f64,
    /// Modulation phase relative to the drive [rad].
    pub phase: f64,
    pub n_events: usize,
}

impl CorrelationAmplitude {
    /// The amplitude, or an error when it is consistent with zero at the
    /// `nsigma` level (an insignificant modulation cannot calibrate a
    /// spectrum).
    pub fn significant(&self, nsigma: f64) -> Result<f64> {
        if self.amplitude < nsigma * self.uncertainty {
            return Err(CoreError::NoModulation {
                amp: self.amplitude,
                sigma: self.uncertainty,
                nsigma,
            });
        }
        Ok(self.amplitude)
    }
}

/// Folds photon arrival times over the drive period (taken from the rising
/// zero crossings), histograms the phases, and fits the normalized histogram
/// with a sinusoid. Returns the fitted relative modulation amplitude.
pub fn correlate_drive(
    event_times: &[f64],
    zero_crossings: &[f64],
    n_bins: usize,
) -> Result<CorrelationAmplitude> {
    const MIN_EVENTS: usize = 10_000;
    if event_times.len() < MIN_EVENTS {
        return Err(CoreError::InsufficientEvents {
            needed: MIN_EVENTS,
            got: event_times.len(),
        });
    }
    if zero_crossings.len() < 2 {
        return Err(CoreError::invalid("zero_crossings", "need at least two"));
    }
    if n_bins < 8 {
        return Err(CoreError::invalid("n_bins", "need at least 8 phase bins"));
    }

    let t0 = zero_crossings[0];
    let period = (zero_crossings[zero_crossings.len() - 1] - t0)
        / (zero_crossings.len() - 1) as f64;
    if !(period > 0.0) {
        return Err(CoreError::invalid("zero_crossings", "not ascending"));
    }

    let mut hist = vec![0u64; n_bins];
    for &t in event_times {
        let phase = ((t - t0) / period).rem_euclid(1.0);
        let idx = ((phase * n_bins as f64) as usize).min(n_bins - 1);
        hist[idx] += 1;
    }

    let mean = event_times.len() as f64 / n_bins as f64;
    let phases: Vec<f64> = (0..n_bins)
        .map(|k| (k as f64 + 0.5) / n_bins as f64 * std::f64::consts::TAU)
        .collect();
    let y: Vec<f64> = hist.iter().map(|&c| c as f64 / mean).collect();
    let sigma_y = (1.0 / mean).sqrt();
    let (amp, phase, _, sigma_amp) = sinusoid_fit(&phases, &y, sigma_y)?;

    // Finite phase bins smear the fundamental by sinc(π/n_bins).
    let x = std::f64::consts::PI / n_bins as f64;
    let binning = x.sin() / x;

    Ok(CorrelationAmplitude {
        amplitude: amp / binning,
        uncertainty: sigma_amp / binning,
        phase,
        n_events: event_times.len(),
    })
}

/// The drive tone as seen in the raw spectrum.
#[derive(Debug, Clone, Copy)]
pub struct TonePeak {
    /// Squared modulation amplitude referred to one resolution bandwidth
    /// (raw units / RBW): the height entering the calibration scale.
    pub height: f64,
    /// Background-subtracted integrated tone power [raw units].
    pub power: f64,
    /// Flat background level under the tone [raw units/Hz].
    pub background: f64,
}

/// Measures the calibration-tone peak around `f_tone` (± `half_window` Hz).
/// The background is the median density in the flanking bands and the tone
/// power is the background-subtracted integral across the window. The
/// reported height uses the amplitude-squared convention: height·RBW equals
/// the squared modulation amplitude of the tone, so that
/// [`calibrate_spectrum`] yields the one-sided displacement PSD.
pub fn tone_peak_height(spec: &Spectrum, f_tone: f64, half_window: f64) -> Result<TonePeak> {
    spec.validate()?;
    let tone_bins = spec.bins_in(f_tone - half_window, f_tone + half_window);
    if tone_bins.is_empty() {
        return Err(CoreError::invalid("tone window", "outside the spectrum"));
    }

    let mut flank: Vec<f64> = spec
        .bins_in(f_tone - 4.0 * half_window, f_tone - half_window)
        .chain(spec.bins_in(f_tone + half_window, f_tone + 4.0 * half_window))
        .map(|i| spec.values[i])
        .collect();
    if flank.len() < 4 {
        return Err(CoreError::invalid("tone window", "no flanking background bins"));
    }
    flank.sort_by(f64::total_cmp);
    let background = flank[flank.len() / 2];

    let df = spec.bin_spacing();
    let peak_bin = tone_bins
        .clone()
        .map(|i| spec.values[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let power: f64 = tone_bins.map(|i| (spec.values[i] - background) * df).sum();
    if peak_bin - background <= background || power <= 0.0 {
        return Err(CoreError::PeakBelowBackground {
            peak: peak_bin,
            background,
        });
    }

    Ok(TonePeak {
        height: 2.0 * power / spec.rbw,
        power,
        background,
    })
}

/// Output of the full calibration for one detection configuration.
#[derive(Debug, Clone, Copy)]
pub struct CalibrationResult {
    /// Normalized-count slope per displacement [1/m].
    pub slope: f64,
    pub slope_err: f64,
    /// Relative count-rate modulation amplitude of the drive tone.
    pub a_corr: f64,
    pub a_corr_err: f64,
    /// Displacement amplitude of the driven motion, a_corr/slope [m].
    pub a_displ: f64,
    /// Raw-to-calibrated PSD scale [m²/Hz per raw unit].
    pub scale: f64,
}

impl CalibrationResult {
    pub fn from_measurements(
        slope: SlopeMeasurement,
        corr: CorrelationAmplitude,
        tone: TonePeak,
        rbw: f64,
    ) -> Result<Self> {
        let a_displ = corr.amplitude / slope.slope.abs();
        let scale = a_displ * a_displ / (tone.height * rbw);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(CoreError::invalid("calibration.scale", "non-positive scale"));
        }
        Ok(CalibrationResult {
            slope: slope.slope,
            slope_err: slope.uncertainty,
            a_corr: corr.amplitude,
            a_corr_err: corr.uncertainty,
            a_displ,
            scale,
        })
    }
}

/// Applies the displacement calibration: values × A_displ²/(peak_height·RBW).
pub fn calibrate_spectrum(raw: &Spectrum, peak_height: f64, a_displ: f64) -> Result<Spectrum> {
    raw.validate()?;
    if raw.calibrated {
        return Err(CoreError::invalid("spectrum", "already calibrated"));
    }
    if !(peak_height > 0.0 && peak_height.is_finite()) {
        return Err(CoreError::invalid("peak_height", "must be > 0"));
    }
    if !(a_displ >= 0.0 && a_displ.is_finite()) {
        return Err(CoreError::invalid("a_displ", "must be >= 0"));
    }
    let scale = a_displ * a_displ / (peak_height * raw.rbw);
    Ok(Spectrum {
        freqs: raw.freqs.clone(),
        values: raw.values.iter().map(|v| v * scale).collect(),
        rbw: raw.rbw,
        calibrated: true,
        n_averages: raw.n_averages,
    })
}
