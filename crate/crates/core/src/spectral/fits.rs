//! Model fits: the motional Lorentzian that encodes the mode temperature,
//! and the saturation law tying the Doppler temperature to the detected
//! 297 nm count rate.

use super::Spectrum;
use crate::constants::K_B;
use crate::error::{CoreError, Result};
use crate::fit::{levenberg_marquardt, LmOptions};

/// One-sided displacement PSD of a thermal damped mode [m²/Hz]:
/// S(ω) = (4·k_B·T/m)·γ/((ω² − ω_j²)² + γ²·ω²), evaluated at ω = 2πf.
/// Its integral over f is the thermal position variance k_B·T/(m·ω_j²).
pub fn motion_psd_model(f_hz: f64, t: f64, omega_j: f64, gamma_j: f64, mass: f64) -> f64 {
    let w = std::f64::consts::TAU * f_hz;
    let denom = (w * w - omega_j * omega_j).powi(2) + gamma_j * gamma_j * w * w;
    (4.0 * K_B * t / mass) * gamma_j / denom
}

/// Doppler temperature as a function of the detected 297 nm rate:
/// T(R) = T₀·(1 + R/(R_max − R)).
pub fn saturation_model(r: f64, t0: f64, r_max: f64) -> f64 {
    t0 * (1.0 + r / (r_max - r))
}

/// Fit window: a band around the expected line minus exclusion intervals
/// (the calibration tone, the other motional peak).
#[derive(Debug, Clone)]
pub struct FitWindow {
    /// Expected line center [Hz].
    pub center: f64,
    /// Half-width of the band [Hz].
    pub half_width: f64,
    /// Excluded frequency intervals [Hz].
    pub exclusions: Vec<(f64, f64)>,
}

impl FitWindow {
    pub fn new(center: f64, half_width: f64) -> Self {
        FitWindow { center, half_width, exclusions: Vec::new() }
    }

    pub fn exclude(mut self, lo: f64, hi: f64) -> Self {
        self.exclusions.push((lo, hi));
        self
    }

    fn contains(&self, f: f64) -> bool {
        (f - self.center).abs() <= self.half_width
            && !self.exclusions.iter().any(|&(lo, hi)| f >= lo && f <= hi)
    }
}

/// Lorentzian thermometry result.
#[derive(Debug, Clone, Copy)]
pub struct LorentzianFit {
    /// Mode temperature [K].
    pub t: f64,
    pub t_err: f64,
    /// Line center [rad/s].
    pub omega: f64,
    pub omega_err: f64,
    /// Linewidth [rad/s].
    pub gamma: f64,
    pub gamma_err: f64,
    /// Flat PSD offset [m²/Hz].
    pub offset: f64,
    pub offset_err: f64,
    /// √χ² of the final (log-space) residuals.
    pub residual_norm: f64,
    pub reduced_chi2: f64,
}

impl LorentzianFit {
    /// Thermal position variance implied by the fit, k_B·T/(m·ω²) [m²].
    pub fn position_variance(&self, mass: f64) -> f64 {
        K_B * self.t / (mass * self.omega * self.omega)
    }
}

/// Fits the motional line in `window` on a calibrated spectrum.
///
/// The fit runs on log-PSD residuals: averaged periodograms have
/// multiplicative noise, so log residuals are homoskedastic and the fit is
/// insensitive to the dynamic range between peak and floor. The small
/// log-average bias of a K-segment estimate is removed using the Hann
/// 50 %-overlap equivalent-averages factor. Initial values come from the
/// spectrum itself: line center from the argmax, linewidth from the smoothed
/// FWHM, temperature from the peak area.
pub fn fit_motion_psd(
    spec: &Spectrum,
    window: &FitWindow,
    mass: f64,
    init: Option<(f64, f64, f64, f64)>,
) -> Result<LorentzianFit> {
    spec.validate()?;
    let pts: Vec<(f64, f64)> = spec
        .bins_in(window.center - window.half_width, window.center + window.half_width)
        .filter(|&i| window.contains(spec.freqs[i]) && spec.values[i] > 0.0)
        .map(|i| (spec.freqs[i], spec.values[i]))
        .collect();
    if pts.len() < 24 {
        return Err(CoreError::TooFewSamples { needed: 24, got: pts.len() });
    }

    let (t0, w0, g0, off0) = match init {
        Some(v) => v,
        None => auto_init(&pts, mass)?,
    };

    // Bias of ln of an averaged periodogram: E[ln(χ²_2K/2K)] = ψ(K) − ln K.
    // With 50 % overlapped Hann segments the equivalent independent count is
    // ~0.72·K; for synthetic spectra (n_averages = 0) nothing is corrected.
    let log_bias = if spec.n_averages > 0 {
        let k_eq = 0.72 * spec.n_averages as f64;
        -(0.5 / k_eq + 1.0 / (12.0 * k_eq * k_eq))
    } else {
        0.0
    };

    // Parameters: [ln T, ω, ln γ, ln offset] — positivity by construction.
    let p0 = [t0.ln(), w0, g0.ln(), off0.max(1e-300).ln()];
    let fit = levenberg_marquardt(
        |p, r| {
            let (t, w, g, off) = (p[0].exp(), p[1], p[2].exp(), p[3].exp());
            for (i, &(f, s)) in pts.iter().enumerate() {
                let m = motion_psd_model(f, t, w, g, mass) + off;
                r[i] = (s.ln() - log_bias) - m.ln();
            }
        },
        &p0,
        pts.len(),
        &LmOptions::default(),
    )?;

    let [lnt, w, lng, lnoff] = [fit.params[0], fit.params[1], fit.params[2], fit.params[3]];
    let [slnt, sw, slng, slnoff] = [
        fit.uncertainties[0],
        fit.uncertainties[1],
        fit.uncertainties[2],
        fit.uncertainties[3],
    ];
    let out = LorentzianFit {
        t: lnt.exp(),
        t_err: lnt.exp() * slnt,
        omega: w,
        omega_err: sw,
        gamma: lng.exp(),
        gamma_err: lng.exp() * slng,
        offset: lnoff.exp(),
        offset_err: lnoff.exp() * slnoff,
        residual_norm: fit.chi2.sqrt(),
        reduced_chi2: fit.reduced_chi2(),
    };

    let f_fit = out.omega / std::f64::consts::TAU;
    if (f_fit - window.center).abs() >= window.half_width {
        return Err(CoreError::FitPinnedAtBound {
            name: "omega".into(),
            value: out.omega,
        });
    }
    if !(out.t > 0.0 && out.gamma > 0.0) {
        return Err(CoreError::DegenerateFit("non-positive temperature or linewidth".into()));
    }
    Ok(out)
}

/// Seeds (T, ω, γ, offset) from the data in the window.
fn auto_init(pts: &[(f64, f64)], mass: f64) -> Result<(f64, f64, f64, f64)> {
    let n = pts.len();
    // Offset: median of the outer quarter of the window.
    let mut edges: Vec<f64> = pts[..n / 8]
        .iter()
        .chain(&pts[n - n / 8..])
        .map(|&(_, s)| s)
        .collect();
    edges.sort_by(f64::total_cmp);
    let offset = edges[edges.len() / 2].max(1e-300);

    // Light smoothing before the argmax / FWHM estimates.
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            pts[lo..hi].iter().map(|&(_, s)| s).sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let i_max = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let f_peak = pts[i_max].0;
    let peak = (smooth[i_max] - offset).max(1e-300);

    let half = offset + peak / 2.0;
    let mut lo = f_peak;
    let mut hi = f_peak;
    for i in (0..i_max).rev() {
        if smooth[i] < half {
            lo = pts[i].0;
            break;
        }
    }
    for i in i_max..n {
        if smooth[i] < half {
            hi = pts[i].0;
            break;
        }
    }
    let df = pts[1].0 - pts[0].0;
    let fwhm = (hi - lo).max(2.0 * df);
    let gamma = std::f64::consts::TAU * fwhm;
    let omega = std::f64::consts::TAU * f_peak;

    // Peak area → temperature: ∫S df = k_B T/(m ω²).
    let area: f64 = pts.iter().map(|&(_, s)| (s - offset).max(0.0) * df).sum();
    let t = (area * mass * omega * omega / K_B).max(1e-9);
    Ok((t, omega, gamma, offset))
}

/// Saturation-law fit result.
#[derive(Debug, Clone, Copy)]
pub struct SaturationFit {
    /// Zero-saturation Doppler temperature [K].
    pub t0: f64,
    pub t0_err: f64,
    /// Full-saturation 297 nm rate [counts/s].
    pub r_max: f64,
    pub r_max_err: f64,
    pub reduced_chi2: f64,
}

/// Fits T(R) = T₀(1 + R/(R_max − R)) to no-feedback temperatures against
/// detected 297 nm rates. `temp_errs` weights the residuals when given.
pub fn fit_saturation_curve(
    rates: &[f64],
    temps: &[f64],
    temp_errs: Option<&[f64]>,
) -> Result<SaturationFit> {
    let n = rates.len();
    if n < 4 || temps.len() != n {
        return Err(CoreError::TooFewSamples { needed: 4, got: n.min(temps.len()) });
    }
    if let Some(e) = temp_errs {
        if e.len() != n || e.iter().any(|&v| !(v > 0.0)) {
            return Err(CoreError::invalid("temp_errs", "must be positive, one per point"));
        }
    }
    let r_data_max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if rates.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(CoreError::invalid("rates", "must be finite and >= 0"));
    }

    // Keep the pole beyond the data: R_max = R_data_max + exp(q).
    let t0_init = temps
        .iter()
        .zip(rates)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(&t, _)| t)
        .unwrap();
    let p0 = [t0_init.ln(), (0.2 * r_data_max).max(1e-6).ln()];
    let fit = levenberg_marquardt(
        |p, r| {
            let t0 = p[0].exp();
            let r_max = r_data_max + p[1].exp();
            for i in 0..n {
                let m = saturation_model(rates[i], t0, r_max);
                r[i] = match temp_errs {
                    Some(e) => (temps[i] - m) / e[i],
                    None => (temps[i] - m) / temps[i],
                };
            }
        },
        &p0,
        n,
        &LmOptions::default(),
    )?;

    let t0 = fit.params[0].exp();
    let t0_err = t0 * fit.uncertainties[0];
    let excess = fit.params[1].exp();
    let r_max = r_data_max + excess;
    let r_max_err = excess * fit.uncertainties[1];

    if r_data_max >= r_max {
        return Err(CoreError::RateAbovePole { rate: r_data_max, r_max });
    }
    Ok(SaturationFit {
        t0,
        t0_err,
        r_max,
        r_max_err,
        reduced_chi2: fit.reduced_chi2(),
    })
}
