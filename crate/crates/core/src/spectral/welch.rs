//! Welch PSD estimation with overlapped, windowed, mean-subtracted segments.

use rustfft::{num_complex::Complex, FftPlanner};

use super::Spectrum;
use crate::detection::PhotocurrentTrace;
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn samples(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| {
                    let x = std::f64::consts::TAU * i as f64 / n as f64;
                    0.5 * (1.0 - x.cos())
                })
                .collect(),
        }
    }
}

/// One-sided Welch PSD of `samples` at rate `fs` [Hz].
///
/// Each segment has its mean removed before windowing; the reported `rbw` is
/// the window's equivalent noise bandwidth (Σw²/(Σw)² · fs). Scaling is
/// density (units²/Hz): the integral of the spectrum approximates the
/// variance of the input.
pub fn welch_psd(
    samples: &[f64],
    fs: f64,
    segment_len: usize,
    overlap: f64,
    window: Window,
) -> Result<Spectrum> {
    if segment_len < 16 {
        return Err(CoreError::invalid("welch.segment_len", "must be >= 16"));
    }
    if samples.len() < segment_len {
        return Err(CoreError::TraceTooShort {
            needed: segment_len,
            got: samples.len(),
        });
    }
    if !(0.0..0.95).contains(&overlap) {
        return Err(CoreError::invalid("welch.overlap", "must be in [0, 0.95)"));
    }

    let w = window.samples(segment_len);
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    let rbw = fs * sum_w2 / (sum_w * sum_w);

    let hop = ((segment_len as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    let n_bins = segment_len / 2 + 1;
    let mut acc = vec![0.0f64; n_bins];
    let mut n_segments = 0usize;

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(segment_len);
    let mut buf = vec![Complex::new(0.0, 0.0); segment_len];

    let mut start = 0;
    while start + segment_len <= samples.len() {
        let seg = &samples[start..start + segment_len];
        let mean = seg.iter().sum::<f64>() / segment_len as f64;
        for i in 0..segment_len {
            buf[i] = Complex::new((seg[i] - mean) * w[i], 0.0);
        }
        fft.process(&mut buf);
        for (k, slot) in acc.iter_mut().enumerate() {
            *slot += buf[k].norm_sqr();
        }
        n_segments += 1;
        start += hop;
    }

    let scale = 1.0 / (n_segments as f64 * fs * sum_w2);
    let mut values = Vec::with_capacity(n_bins);
    for (k, &a) in acc.iter().enumerate() {
        let one_sided = if k == 0 || (segment_len % 2 == 0 && k == n_bins - 1) {
            1.0
        } else {
            2.0
        };
        values.push(a * scale * one_sided);
    }
    let freqs = (0..n_bins).map(|k| k as f64 * fs / segment_len as f64).collect();

    Ok(Spectrum {
        freqs,
        values,
        rbw,
        calibrated: false,
        n_averages: n_segments,
    })
}

/// Welch PSD of a photon-count trace, normalized to its mean count so the
/// values are in normalized-signal²/Hz (shot-noise floor 2/rate).
pub fn welch_psd_counts(
    trace: &PhotocurrentTrace,
    segment_len: usize,
    overlap: f64,
    window: Window,
) -> Result<Spectrum> {
    let u = trace.normalized();
    welch_psd(&u, trace.sample_rate, segment_len, overlap, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{sample_photon_counts, Channel};
    use crate::rng::SimRng;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    #[test]
    fn white_noise_psd_is_flat_at_analytic_level() {
        // Gaussian white noise with variance σ²: one-sided density 2σ²/fs.
        let fs = 1e6;
        let sigma = 0.7;
        let mut rng = SimRng::seed_from_u64(4);
        let x: Vec<f64> = (0..1 << 20)
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let spec = welch_psd(&x, fs, 4096, 0.5, Window::Hann).unwrap();
        let expected = 2.0 * sigma * sigma / fs;
        let mid = &spec.values[100..spec.values.len() - 100];
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        assert_relative_eq!(mean, expected, max_relative = 0.02);
    }

    #[test]
    fn poisson_counts_sit_on_the_shot_noise_floor() {
        // Constant-rate counts normalized to their mean: flat at 2/R.
        let rate = 1e6;
        let fs = 10e6;
        let mut rng = SimRng::seed_from_u64(8);
        let samples = sample_photon_counts(&vec![rate; 1 << 21], 1.0 / fs, &mut rng);
        let trace = PhotocurrentTrace {
            sample_rate: fs,
            samples,
            channel: Channel::Transmitted,
        };
        let spec = welch_psd_counts(&trace, 1 << 14, 0.5, Window::Hann).unwrap();
        let expected = 2.0 / rate;
        let mid = &spec.values[50..spec.values.len() - 50];
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        assert_relative_eq!(mean, expected, max_relative = 0.1);
    }

    #[test]
    fn tone_carries_half_amplitude_squared() {
        // Integrated peak power of a pure sinusoid is A²/2.
        let fs = 1e6;
        let n = 1 << 18;
        let seg = 1 << 12;
        let amp = 0.37;
        // Bin-centered tone.
        let f0 = 40.0 * fs / seg as f64;
        let x: Vec<f64> = (0..n)
            .map(|i| amp * (std::f64::consts::TAU * f0 * i as f64 / fs).sin())
            .collect();
        let spec = welch_psd(&x, fs, seg, 0.5, Window::Hann).unwrap();
        let df = spec.bin_spacing();
        let power = spec.integrate(f0 - 5.0 * df, f0 + 5.0 * df);
        assert_relative_eq!(power, amp * amp / 2.0, max_relative = 0.02);
    }

    #[test]
    fn rbw_matches_hann_equivalent_noise_bandwidth() {
        let fs = 1e6;
        let seg = 4096;
        let x = vec![0.0; seg * 4];
        let spec = welch_psd(&x, fs, seg, 0.5, Window::Hann).unwrap();
        // Hann ENBW is 1.5 bins.
        assert_relative_eq!(spec.rbw, 1.5 * fs / seg as f64, max_relative = 1e-3);
    }

    #[test]
    fn parseval_holds_within_two_percent() {
        // Band-limited noise (white noise through a crude smoother) so that
        // per-segment mean removal costs nothing measurable.
        let fs = 1e6;
        let mut rng = SimRng::seed_from_u64(12);
        let white: Vec<f64> = (0..1 << 19).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let x: Vec<f64> = white
            .windows(4)
            .map(|w| w.iter().sum::<f64>() / 2.0)
            .collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let spec = welch_psd(&x, fs, 8192, 0.5, Window::Hann).unwrap();
        assert_relative_eq!(spec.total_power(), var, max_relative = 0.02);
    }

    #[test]
    fn trace_too_short_is_reported() {
        let x = vec![0.0; 100];
        assert!(matches!(
            welch_psd(&x, 1e6, 1024, 0.5, Window::Hann),
            Err(CoreError::TraceTooShort { .. })
        ));
    }
}
