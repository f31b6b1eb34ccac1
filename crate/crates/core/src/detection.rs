//! Knife-edge photon detection.
//!
//! The ion image (magnification `M`, Gaussian spot of size `σ` at the knife
//! plane) is split by the knife edge into a transmitted and a reflected
//! channel. A displacement `d` of the ion along the knife normal moves the
//! spot, so the transmitted fraction is ½·[1 + erf(M·d/(σ√2))] and the
//! counts on each photomultiplier are Poisson with the correspondingly
//! modulated rate.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{CoreError, Result};
use crate::rng::SimRng;

/// Which side of the knife edge a trace was recorded on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Passes the knife edge; drives the feedback loop.
    Transmitted,
    /// Reflected off the coated half; used for independent thermometry.
    Reflected,
}

/// Imaging / detection parameters.
#[derive(Debug, Clone, Copy)]
pub struct OpticalConfig {
    /// Imaging magnification onto the knife plane.
    pub magnification: f64,
    /// Gaussian spot size at the knife plane [m].
    pub spot_sigma: f64,
    /// Angle of the knife-edge line against the lab x-axis [rad].
    pub knife_angle: f64,
    /// Static offset of the image along the knife normal [m, object plane];
    /// nonzero while the trap is scanned for the slope calibration.
    pub knife_offset: f64,
    /// Fraction of emitted fluorescence photons that reach the detectors.
    pub collection_efficiency: f64,
    /// Detected 369.5 nm count rate at full saturation [counts/s], summed
    /// over both channels.
    pub rate_370_max: f64,
    /// Detected 297 nm count rate at full saturation [counts/s].
    pub rate_297_max: f64,
}

impl OpticalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.magnification > 0.0 && self.magnification.is_finite()) {
            return Err(CoreError::invalid("optics.magnification", "must be > 0"));
        }
        if !(self.spot_sigma > 0.0 && self.spot_sigma.is_finite()) {
            return Err(CoreError::invalid("optics.spot_sigma", "must be > 0"));
        }
        if !(self.collection_efficiency > 0.0 && self.collection_efficiency <= 1.0) {
            return Err(CoreError::invalid(
                "optics.collection_efficiency",
                "must be in (0, 1]",
            ));
        }
        if !(self.rate_370_max > 0.0) || !(self.rate_297_max > 0.0) {
            return Err(CoreError::invalid("optics.rate_max", "rates must be > 0"));
        }
        if !self.knife_angle.is_finite() || !self.knife_offset.is_finite() {
            return Err(CoreError::invalid("optics.knife", "non-finite geometry"));
        }
        Ok(())
    }

    /// Slope of the *normalized* count rate per unit object-plane
    /// displacement at balance [1/m]: 2·M/(σ√(2π)).
    pub fn normalized_slope(&self) -> f64 {
        2.0 * self.magnification / (self.spot_sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Spot size giving a target normalized slope at magnification `m`.
    pub fn sigma_for_slope(slope: f64, m: f64) -> f64 {
        2.0 * m / (slope * (2.0 * std::f64::consts::PI).sqrt())
    }

    /// Spot size such that the slope *measured in situ* — with the ion
    /// jittering thermally by `thermal_rms` along the knife normal — comes
    /// out at `slope`. Thermal blur convolves the erf response, so the
    /// optical spot must be narrower than the effective one.
    pub fn sigma_for_operating_slope(slope: f64, m: f64, thermal_rms: f64) -> Result<f64> {
        let sigma_eff = Self::sigma_for_slope(slope, m);
        let blur = m * thermal_rms;
        if blur >= sigma_eff {
            return Err(CoreError::invalid(
                "optics.spot_sigma",
                format!(
                    "requested slope {slope:.3e}/m unreachable: thermal blur {blur:.3e} m exceeds \
                     effective spot {sigma_eff:.3e} m"
                ),
            ));
        }
        Ok((sigma_eff * sigma_eff - blur * blur).sqrt())
    }

    /// Total detected 369.5 nm rate at saturation `s` [counts/s].
    pub fn detected_rate_370(&self, s: f64) -> f64 {
        scattering_rate(s, self.rate_370_max)
    }
}

/// Detected scattering rate r_max·s/(1+s). Written as r_max/(1 + 1/s) so the
/// s → 0 and s → ∞ limits fall out of IEEE arithmetic.
pub fn scattering_rate(s: f64, r_max: f64) -> f64 {
    debug_assert!(s >= 0.0);
    if s == 0.0 {
        0.0
    } else {
        r_max / (1.0 + 1.0 / s)
    }
}

/// Signed displacement of the ion image along the knife-edge normal, for an
/// ion at trap-axis coordinates `x` and radial axes at `axis_angles` [rad].
/// The knife normal points along `knife_angle + π/2`.
#[inline]
pub fn project_onto_knife_normal(x: [f64; 2], axis_angles: [f64; 2], knife_angle: f64) -> f64 {
    let normal = knife_angle + std::f64::consts::FRAC_PI_2;
    x[0] * (axis_angles[0] - normal).cos() + x[1] * (axis_angles[1] - normal).cos()
}

/// Projection coefficient of each trap axis onto the knife normal.
#[inline]
pub fn projection_coefficients(axis_angles: [f64; 2], knife_angle: f64) -> [f64; 2] {
    let normal = knife_angle + std::f64::consts::FRAC_PI_2;
    [
        (axis_angles[0] - normal).cos(),
        (axis_angles[1] - normal).cos(),
    ]
}

/// Transmitted fraction for an image displaced by `d` along the knife normal.
#[inline]
pub fn knife_transmission(d: f64, magnification: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + libm::erf(magnification * d / (sigma * std::f64::consts::SQRT_2)))
}

/// Reflected fraction; the split is lossless, so this is exactly
/// 1 − transmission.
#[inline]
pub fn knife_reflection(d: f64, magnification: f64, sigma: f64) -> f64 {
    1.0 - knife_transmission(d, magnification, sigma)
}

/// Small-displacement linearization of the transmission,
/// ½ + M·d/(σ·√(2π)).
#[inline]
pub fn knife_transmission_linearized(d: f64, magnification: f64, sigma: f64) -> f64 {
    0.5 + magnification * d / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Uniformly sampled detected-count time series for one channel.
#[derive(Debug, Clone)]
pub struct PhotocurrentTrace {
    /// Bin rate [Hz].
    pub sample_rate: f64,
    /// Detected counts per bin.
    pub samples: Vec<u32>,
    pub channel: Channel,
}

impl PhotocurrentTrace {
    /// Nyquist guard: binning must resolve the fastest trap frequency.
    pub fn validate(&self, max_trap_freq_hz: f64) -> Result<()> {
        if self.sample_rate <= 2.0 * max_trap_freq_hz {
            return Err(CoreError::invalid(
                "detection.sample_rate",
                format!(
                    "{:.3e} Hz does not resolve trap motion at {max_trap_freq_hz:.3e} Hz",
                    self.sample_rate
                ),
            ));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn mean_counts(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|&c| c as f64).sum::<f64>() / self.samples.len() as f64
    }

    /// Counts normalized to the trace mean (dimensionless rate units).
    pub fn normalized(&self) -> Vec<f64> {
        let mean = self.mean_counts();
        if mean == 0.0 {
            return vec![0.0; self.samples.len()];
        }
        self.samples.iter().map(|&c| c as f64 / mean).collect()
    }
}

/// One Poisson draw with mean `lambda` (counts in one bin).
#[inline]
pub fn poisson_count(lambda: f64, rng: &mut SimRng) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map_or(0, |p| p.sample(rng) as u32)
}

/// Independent Poisson counts for a time-varying rate [counts/s] binned at
/// `dt` seconds per bin.
pub fn sample_photon_counts(rates: &[f64], dt: f64, rng: &mut SimRng) -> Vec<u32> {
    rates.iter().map(|&r| poisson_count(r * dt, rng)).collect()
}

/// Draws photon arrival times for one bin, uniform within the bin.
#[inline]
pub fn event_times_in_bin(t0: f64, dt: f64, count: u32, rng: &mut SimRng, out: &mut Vec<f64>) {
    for _ in 0..count {
        out.push(t0 + dt * rng.random::<f64>());
    }
}
