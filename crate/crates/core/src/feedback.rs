//! The electronic feedback chain: resonant bandpass, all-pass phase shifter,
//! gain, clipping and loop delay, ending in a force on a compensation
//! electrode. Two independent chains may process the same in-loop signal to
//! cool both radial axes.
//!
//! The filters run at the detection bin rate. Phase bookkeeping at the loop
//! center frequency is what matters for cold damping: the bandpass is
//! designed for unit gain and zero phase at its center, the phase shifter
//! realizes an arbitrary phase there, and the delay line adds a known −ω·τ.

use crate::error::{CoreError, Result};

/// Parameters of one feedback loop.
#[derive(Debug, Clone, Copy)]
pub struct FeedbackConfig {
    /// Bandpass center [rad/s]; placed on the targeted trap axis.
    pub center: f64,
    /// Full −3 dB bandwidth of the bandpass [rad/s].
    pub bandwidth: f64,
    /// Phase realized at the center frequency [rad], |phase| ≤ π.
    pub phase: f64,
    /// Dimensionless feedback gain.
    pub gain: f64,
    /// Loop delay [s]; quantized to detection bins by the engine.
    pub delay: f64,
    /// Force per unit of processed normalized signal at gain 1 [N].
    pub force_scale: f64,
    /// Electrode push direction, lab frame (normalized on validation).
    pub electrode_axis: [f64; 2],
    /// Clip level on the processed signal, normalized units.
    pub clip: f64,
}

impl FeedbackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.center > 0.0 && self.center.is_finite()) {
            return Err(CoreError::invalid("feedback.center", "must be > 0"));
        }
        if !(self.bandwidth > 0.0) || self.bandwidth >= self.center / 2.0 {
            return Err(CoreError::invalid(
                "feedback.bandwidth",
                "must satisfy 0 < bandwidth < center/2",
            ));
        }
        if !self.phase.is_finite() || self.phase.abs() > std::f64::consts::PI + 1e-12 {
            return Err(CoreError::invalid("feedback.phase", "|phase| must be <= pi"));
        }
        if !(self.gain >= 0.0 && self.gain.is_finite()) {
            return Err(CoreError::invalid("feedback.gain", "must be >= 0"));
        }
        if !(self.clip > 0.0) {
            return Err(CoreError::invalid("feedback.clip", "must be > 0"));
        }
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return Err(CoreError::invalid("feedback.delay", "must be >= 0"));
        }
        if !(self.force_scale.is_finite()) {
            return Err(CoreError::invalid("feedback.force_scale", "must be finite"));
        }
        let n = (self.electrode_axis[0].powi(2) + self.electrode_axis[1].powi(2)).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(CoreError::invalid("feedback.electrode_axis", "must be nonzero"));
        }
        Ok(())
    }

    pub fn normalized_axis(&self) -> [f64; 2] {
        let n = (self.electrode_axis[0].powi(2) + self.electrode_axis[1].powi(2)).sqrt();
        [self.electrode_axis[0] / n, self.electrode_axis[1] / n]
    }

    /// Force scale κ that defines the gain axis: at g = 1 the cold-damping
    /// rate equals 10·γ for a loop reading a signal of `slope` [1/m]
    /// normalized counts per displacement. Identity used:
    /// Γ_fb = κ·g·slope/(m·ω).
    pub fn force_scale_for_unit_gain(gamma: f64, mass: f64, omega: f64, slope: f64) -> f64 {
        10.0 * gamma * mass * omega / slope
    }

    /// Phase-shifter setting that turns the delayed position signal into
    /// velocity damping at `omega`. `signal_sign` is the sign of the
    /// (projection × electrode-alignment) product for the targeted axis.
    pub fn cold_damping_phase(omega: f64, delay: f64, signal_sign: f64) -> f64 {
        let mut phi = omega * delay - std::f64::consts::FRAC_PI_2;
        if signal_sign < 0.0 {
            phi += std::f64::consts::PI;
        }
        wrap_phase(phi)
    }
}

/// Wraps into (−π, π].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi % std::f64::consts::TAU;
    if p > std::f64::consts::PI {
        p -= std::f64::consts::TAU;
    } else if p <= -std::f64::consts::PI {
        p += std::f64::consts::TAU;
    }
    p
}

/// Direct-form-I biquad section.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b: [f64; 3],
    a: [f64; 2], // a1, a2 with a0 normalized to 1
    x: [f64; 2],
    y: [f64; 2],
}

impl Biquad {
    /// Constant-peak-gain resonant bandpass: unit gain, zero phase at
    /// `omega0`, −3 dB full width `bw` (both rad/s), sampled at `fs` Hz.
    fn bandpass(omega0: f64, bw: f64, fs: f64) -> Self {
        let w0 = omega0 / fs;
        let q = omega0 / bw;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b: [alpha / a0, 0.0, -alpha / a0],
            a: [-2.0 * w0.cos() / a0, (1.0 - alpha) / a0],
            x: [0.0; 2],
            y: [0.0; 2],
        }
    }

    #[inline]
    fn step(&mut self, u: f64) -> f64 {
        let y = self.b[0] * u + self.b[1] * self.x[0] + self.b[2] * self.x[1]
            - self.a[0] * self.y[0]
            - self.a[1] * self.y[1];
        self.x[1] = self.x[0];
        self.x[0] = u;
        self.y[1] = self.y[0];
        self.y[0] = y;
        y
    }

    fn reset(&mut self) {
        self.x = [0.0; 2];
        self.y = [0.0; 2];
    }

    /// Complex response at digital frequency `w` [rad/sample].
    fn response(&self, w: f64) -> (f64, f64) {
        let (z1r, z1i) = ((-w).cos(), (-w).sin());
        let (z2r, z2i) = ((-2.0 * w).cos(), (-2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * z1r + self.b[2] * z2r,
            self.b[1] * z1i + self.b[2] * z2i,
        );
        let den = (
            1.0 + self.a[0] * z1r + self.a[1] * z2r,
            self.a[0] * z1i + self.a[1] * z2i,
        );
        complex_div(num, den)
    }
}

fn complex_div(n: (f64, f64), d: (f64, f64)) -> (f64, f64) {
    let m = d.0 * d.0 + d.1 * d.1;
    ((n.0 * d.0 + n.1 * d.1) / m, (n.1 * d.0 - n.0 * d.1) / m)
}

/// Resonant bandpass realized as two cascaded biquads.
///
/// A single second-order section cannot reach 20 dB of rejection five
/// bandwidths above center (it tops out near 19 dB there), so the chain uses
/// two sections whose individual Q is widened such that the cascade keeps
/// the requested −3 dB width.
#[derive(Debug, Clone)]
pub struct Bandpass {
    stages: [Biquad; 2],
    poisoned: Option<usize>,
    n_samples: usize,
}

/// Per-stage −3 dB width factor for a two-stage cascade: each stage is
/// 1/√(√2 − 1) wider than the target so the cascade hits −3 dB at the edges.
const CASCADE_WIDEN: f64 = 1.553_773_974_030_037;

impl Bandpass {
    pub fn new(omega0: f64, bw: f64, fs: f64) -> Self {
        let stage_bw = bw * CASCADE_WIDEN;
        Bandpass {
            stages: [
                Biquad::bandpass(omega0, stage_bw, fs),
                Biquad::bandpass(omega0, stage_bw, fs),
            ],
            poisoned: None,
            n_samples: 0,
        }
    }

    /// Advances the filter by one sample. A non-finite input poisons the
    /// state; see [`Bandpass::fault`].
    #[inline]
    pub fn step(&mut self, u: f64) -> f64 {
        self.n_samples += 1;
        if !u.is_finite() && self.poisoned.is_none() {
            self.poisoned = Some(self.n_samples - 1);
        }
        let mid = self.stages[0].step(u);
        self.stages[1].step(mid)
    }

    /// Index of the first non-finite input, if any.
    pub fn fault(&self) -> Option<usize> {
        self.poisoned
    }

    pub fn check(&self) -> Result<()> {
        match self.poisoned {
            Some(sample) => Err(CoreError::FilterFault { sample }),
            None => Ok(()),
        }
    }

    pub fn reset(&mut self) {
        self.stages.iter_mut().for_each(Biquad::reset);
        self.poisoned = None;
        self.n_samples = 0;
    }

    /// Analytic response of the designed transfer function at `f_hz`.
    pub fn response_at(&self, f_hz: f64, fs: f64) -> (f64, f64) {
        let w = std::f64::consts::TAU * f_hz / fs;
        let (r0, i0) = self.stages[0].response(w);
        let (r1, i1) = self.stages[1].response(w);
        (r0 * r1 - i0 * i1, r0 * i1 + i0 * r1)
    }
}

/// First-order all-pass (with an optional sign flip) realizing an arbitrary
/// phase at one frequency. |H| = 1 everywhere, so only the loop phase at the
/// center is affected.
#[derive(Debug, Clone)]
pub struct PhaseShifter {
    coeff: f64,
    sign: f64,
    identity: bool,
    x1: f64,
    y1: f64,
    poisoned: Option<usize>,
    n_samples: usize,
}

impl PhaseShifter {
    /// Realizes `phase` (|phase| ≤ π) at angular frequency `omega0`,
    /// sampled at `fs`.
    pub fn new(phase: f64, omega0: f64, fs: f64) -> Result<Self> {
        if !phase.is_finite() || phase.abs() > std::f64::consts::PI + 1e-12 {
            return Err(CoreError::invalid("phase", "|phase| must be <= pi"));
        }
        let w = omega0 / fs;
        let eps = 1e-9;
        let (sign, target) = if phase.abs() < eps {
            return Ok(PhaseShifter {
                coeff: 0.0,
                sign: 1.0,
                identity: true,
                x1: 0.0,
                y1: 0.0,
                poisoned: None,
                n_samples: 0,
            });
        } else if (phase.abs() - std::f64::consts::PI).abs() < eps {
            (-1.0, None)
        } else if phase < 0.0 {
            (1.0, Some(phase))
        } else {
            (-1.0, Some(phase - std::f64::consts::PI))
        };

        let coeff = match target {
            None => {
                return Ok(PhaseShifter {
                    coeff: 0.0,
                    sign,
                    identity: true,
                    x1: 0.0,
                    y1: 0.0,
                    poisoned: None,
                    n_samples: 0,
                })
            }
            Some(t) => solve_allpass_coeff(t, w),
        };
        Ok(PhaseShifter {
            coeff,
            sign,
            identity: false,
            x1: 0.0,
            y1: 0.0,
            poisoned: None,
            n_samples: 0,
        })
    }

    #[inline]
    pub fn step(&mut self, u: f64) -> f64 {
        self.n_samples += 1;
        if !u.is_finite() && self.poisoned.is_none() {
            self.poisoned = Some(self.n_samples - 1);
        }
        if self.identity {
            return self.sign * u;
        }
        // H(z) = (a + z⁻¹)/(1 + a z⁻¹)
        let y = self.coeff * u + self.x1 - self.coeff * self.y1;
        self.x1 = u;
        self.y1 = y;
        self.sign * y
    }

    pub fn fault(&self) -> Option<usize> {
        self.poisoned
    }

    pub fn check(&self) -> Result<()> {
        match self.poisoned {
            Some(sample) => Err(CoreError::FilterFault { sample }),
            None => Ok(()),
        }
    }

    pub fn reset(&mut self) {
        self.x1 = 0.0;
        self.y1 = 0.0;
        self.poisoned = None;
        self.n_samples = 0;
    }
}

/// Phase of the first-order all-pass at digital frequency `w` for
/// coefficient `a`.
fn allpass_phase(a: f64, w: f64) -> f64 {
    let num = f64::atan2(-w.sin(), a + w.cos());
    let den = f64::atan2(-a * w.sin(), 1.0 + a * w.cos());
    num - den
}

/// Solves allpass_phase(a, w) = target for a ∈ (−1, 1); the phase is
/// monotone in the coefficient, covering (−π, 0).
fn solve_allpass_coeff(target: f64, w: f64) -> f64 {
    debug_assert!((-std::f64::consts::PI..0.0).contains(&target));
    let (mut lo, mut hi) = (-1.0 + 1e-12, 1.0 - 1e-12);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if allpass_phase(mid, w) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Fixed-length delay line (in samples) with an all-zero initial state.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: Vec<f64>,
    idx: usize,
}

impl DelayLine {
    pub fn new(samples: usize) -> Self {
        DelayLine {
            buf: vec![0.0; samples.max(1)],
            idx: 0,
        }
    }

    /// Pushes a sample and pops the one delayed by the line length.
    #[inline]
    pub fn push(&mut self, v: f64) -> f64 {
        let out = self.buf[self.idx];
        self.buf[self.idx] = v;
        self.idx = (self.idx + 1) % self.buf.len();
        out
    }

    pub fn reset(&mut self) {
        self.buf.fill(0.0);
        self.idx = 0;
    }
}

/// Electrode force for a processed chain output: F = κ·g·clip(y)·ê.
#[inline]
pub fn feedback_force(processed: f64, cfg: &FeedbackConfig) -> [f64; 2] {
    let clipped = processed.clamp(-cfg.clip, cfg.clip);
    let f = cfg.force_scale * cfg.gain * clipped;
    let axis = cfg.normalized_axis();
    [f * axis[0], f * axis[1]]
}

/// One feedback chain: bandpass → phase shifter → gain/clip (force), with
/// the loop delay handled by the caller's sample clock.
#[derive(Debug, Clone)]
pub struct LoopChain {
    pub cfg: FeedbackConfig,
    bandpass: Bandpass,
    shifter: PhaseShifter,
    delay: DelayLine,
}

impl LoopChain {
    pub fn new(cfg: FeedbackConfig, fs: f64) -> Result<Self> {
        cfg.validate()?;
        let delay_samples = (cfg.delay * fs).round() as usize;
        if delay_samples < 1 {
            return Err(CoreError::invalid(
                "feedback.delay",
                format!("must be at least one detection bin (1/{fs} s)"),
            ));
        }
        Ok(LoopChain {
            bandpass: Bandpass::new(cfg.center, cfg.bandwidth, fs),
            shifter: PhaseShifter::new(cfg.phase, cfg.center, fs)?,
            delay: DelayLine::new(delay_samples),
            cfg,
        })
    }

    /// Feeds one normalized in-loop sample; returns the delayed force to
    /// apply during the next bin.
    #[inline]
    pub fn process(&mut self, u: f64) -> [f64; 2] {
        let y = self.shifter.step(self.bandpass.step(u));
        let clipped = y.clamp(-self.cfg.clip, self.cfg.clip);
        let delayed = self.delay.push(self.cfg.force_scale * self.cfg.gain * clipped);
        let axis = self.cfg.normalized_axis();
        [delayed * axis[0], delayed * axis[1]]
    }

    pub fn check(&self) -> Result<()> {
        self.bandpass.check()?;
        self.shifter.check()
    }

    pub fn reset(&mut self) {
        self.bandpass.reset();
        self.shifter.reset();
        self.delay.reset();
    }
}

/// Two independent chains fed by the same in-loop signal; their electrode
/// forces superpose.
#[derive(Debug, Clone)]
pub struct DualLoop {
    pub loops: Vec<LoopChain>,
}

impl DualLoop {
    pub fn new(cfgs: &[FeedbackConfig], fs: f64) -> Result<Self> {
        if cfgs.len() == 2 {
            let same_center = (cfgs[0].center - cfgs[1].center).abs() < 1e-9;
            let a0 = cfgs[0].normalized_axis();
            let a1 = cfgs[1].normalized_axis();
            let same_axis = (a0[0] - a1[0]).abs() < 1e-12 && (a0[1] - a1[1]).abs() < 1e-12;
            if same_center && same_axis {
                return Err(CoreError::invalid(
                    "feedback",
                    "two loops need distinct centers or distinct electrode axes",
                ));
            }
        }
        let loops = cfgs
            .iter()
            .map(|c| LoopChain::new(*c, fs))
            .collect::<Result<Vec<_>>>()?;
        Ok(DualLoop { loops })
    }

    /// Total delayed force from all chains for one input sample.
    #[inline]
    pub fn process(&mut self, u: f64) -> [f64; 2] {
        let mut f = [0.0, 0.0];
        for chain in &mut self.loops {
            let fi = chain.process(u);
            f[0] += fi[0];
            f[1] += fi[1];
        }
        f
    }

    pub fn check(&self) -> Result<()> {
        self.loops.iter().try_for_each(|c| c.check())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    const FS: f64 = 10e6;
    const F0: f64 = 455e3;
    const BW: f64 = 20e3;

    /// Steady-state complex response of a filter measured in the time
    /// domain by quadrature demodulation.
    fn measure_response<F: FnMut(f64) -> f64>(mut step: F, f_hz: f64) -> (f64, f64) {
        let w = TAU * f_hz / FS;
        let settle = 40_000;
        let n = 200_000;
        for i in 0..settle {
            step((w * i as f64).sin());
        }
        let (mut qs, mut qc) = (0.0, 0.0);
        for i in settle..settle + n {
            let y = step((w * i as f64).sin());
            qs += y * (w * i as f64).sin();
            qc += y * (w * i as f64).cos();
        }
        let gain = 2.0 * ((qs / n as f64).powi(2) + (qc / n as f64).powi(2)).sqrt();
        let phase = (qc / n as f64).atan2(qs / n as f64);
        (gain, phase)
    }

    #[test]
    fn bandpass_rejects_dc() {
        let mut bp = Bandpass::new(TAU * F0, TAU * BW, FS);
        let mut last = 0.0;
        for _ in 0..200_000 {
            last = bp.step(1.0);
        }
        assert!(last.abs() < 1e-9, "DC leak {last}");
    }

    #[test]
    fn bandpass_center_response_is_unity_zero_phase() {
        let mut bp = Bandpass::new(TAU * F0, TAU * BW, FS);
        let (gain, phase) = measure_response(|u| bp.step(u), F0);
        assert_relative_eq!(gain, 1.0, max_relative = 0.01);
        assert!(phase.abs() < 1f64.to_radians(), "phase {} deg", phase.to_degrees());
    }

    #[test]
    fn bandpass_attenuates_five_bandwidths_out() {
        let bp = Bandpass::new(TAU * F0, TAU * BW, FS);
        for f in [F0 - 5.0 * BW, F0 + 5.0 * BW] {
            // Analytic response of the designed transfer function ...
            let (re, im) = bp.response_at(f, FS);
            let analytic = (re * re + im * im).sqrt();
            assert!(
                analytic < 0.1,
                "analytic |H({f})| = {analytic} (need ≥ 20 dB rejection)"
            );
            // ... and the time-domain filter agrees with it.
            let mut bp_t = bp.clone();
            let (gain, _) = measure_response(|u| bp_t.step(u), f);
            assert_relative_eq!(gain, analytic, max_relative = 0.02);
        }
    }

    #[test]
    fn bandpass_minus3db_width_is_as_designed() {
        let bp = Bandpass::new(TAU * F0, TAU * BW, FS);
        for f in [F0 - BW / 2.0, F0 + BW / 2.0] {
            let (re, im) = bp.response_at(f, FS);
            let g = (re * re + im * im).sqrt();
            assert_relative_eq!(g, std::f64::consts::FRAC_1_SQRT_2, max_relative = 0.02);
        }
    }

    #[test]
    fn phase_shifter_hits_targets() {
        for target_deg in [-170.0, -90.0, -30.0, 0.0, 45.0, 90.0, 150.0, 180.0] {
            let target = (target_deg as f64).to_radians();
            let mut ps = PhaseShifter::new(target, TAU * F0, FS).unwrap();
            let (gain, phase) = measure_response(|u| ps.step(u), F0);
            assert_relative_eq!(gain, 1.0, max_relative = 0.01);
            let err = wrap_phase(phase - target).abs();
            assert!(
                err < 1f64.to_radians(),
                "target {target_deg}°: got {} deg",
                phase.to_degrees()
            );
        }
    }

    #[test]
    fn quadrature_shift_kills_zero_lag_correlation() {
        let mut ps = PhaseShifter::new(std::f64::consts::FRAC_PI_2, TAU * F0, FS).unwrap();
        let w = TAU * F0 / FS;
        let mut dot = 0.0;
        let mut norm = 0.0;
        for i in 0..300_000 {
            let u = (w * i as f64).sin();
            let y = ps.step(u);
            if i > 50_000 {
                dot += u * y;
                norm += u * u;
            }
        }
        assert!((dot / norm).abs() < 0.02, "zero-lag correlation {}", dot / norm);
    }

    #[test]
    fn filters_poison_on_non_finite_input() {
        let mut bp = Bandpass::new(TAU * F0, TAU * BW, FS);
        bp.step(1.0);
        bp.step(f64::NAN);
        assert!(matches!(bp.check(), Err(CoreError::FilterFault { sample: 1 })));
        bp.reset();
        assert!(bp.check().is_ok());

        let mut ps = PhaseShifter::new(1.0, TAU * F0, FS).unwrap();
        ps.step(f64::INFINITY);
        assert!(ps.check().is_err());
    }

    fn test_cfg(gain: f64) -> FeedbackConfig {
        FeedbackConfig {
            center: TAU * F0,
            bandwidth: TAU * BW,
            phase: 0.5,
            gain,
            delay: 1e-6,
            force_scale: 1e-21,
            electrode_axis: [0.0, 1.0],
            clip: 3.0,
        }
    }

    #[test]
    fn force_scaling_and_clipping() {
        let cfg = test_cfg(0.0);
        assert_eq!(feedback_force(5.0, &cfg), [0.0, 0.0]);

        let cfg = test_cfg(2.0);
        let f = feedback_force(10.0 * cfg.clip, &cfg);
        let mag = (f[0] * f[0] + f[1] * f[1]).sqrt();
        assert_relative_eq!(mag, cfg.force_scale * cfg.gain * cfg.clip, max_relative = 1e-12);
    }

    #[test]
    fn delay_line_shifts_by_its_length() {
        let mut d = DelayLine::new(3);
        assert_eq!(d.push(1.0), 0.0);
        assert_eq!(d.push(2.0), 0.0);
        assert_eq!(d.push(3.0), 0.0);
        assert_eq!(d.push(4.0), 1.0);
        assert_eq!(d.push(5.0), 2.0);
    }

    #[test]
    fn dual_loop_with_zero_second_gain_matches_single() {
        let c1 = test_cfg(1.0);
        let mut c2 = test_cfg(0.0);
        c2.center = TAU * 450e3;
        c2.electrode_axis = [1.0, 0.0];
        let mut dual = DualLoop::new(&[c1, c2], FS).unwrap();
        let mut single = LoopChain::new(c1, FS).unwrap();
        let mut rngish = 0.123f64;
        for _ in 0..5000 {
            rngish = (rngish * 1103.515).fract();
            let u = rngish - 0.5;
            assert_eq!(dual.process(u), single.process(u));
        }
    }

    #[test]
    fn dual_loop_rejects_identical_loops() {
        let c = test_cfg(1.0);
        assert!(DualLoop::new(&[c, c], FS).is_err());
        let mut c2 = c;
        c2.center = TAU * 450e3;
        assert!(DualLoop::new(&[c, c2], FS).is_ok());
    }

    #[test]
    fn cold_damping_phase_wraps() {
        let phi = FeedbackConfig::cold_damping_phase(TAU * 455e3, 1e-6, 1.0);
        assert!(phi.abs() <= std::f64::consts::PI);
        // Flipping the signal sign flips the phase by π.
        let phi_neg = FeedbackConfig::cold_damping_phase(TAU * 455e3, 1e-6, -1.0);
        assert_relative_eq!(
            wrap_phase(phi_neg - phi).abs(),
            std::f64::consts::PI,
            max_relative = 1e-12
        );
    }
}
