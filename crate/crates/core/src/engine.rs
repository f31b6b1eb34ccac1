//! Closed-loop runs: ion dynamics, knife-edge detection and the feedback
//! chain(s) advanced on a common clock.
//!
//! Time is organized in detection bins (default 10 MHz). Within a bin the
//! ion is integrated with several substeps under a constant feedback force
//! (zero-order hold, like the sampled electronics it models) plus the
//! analytic drive; the bin's photon counts are drawn from the bin-averaged
//! knife transmission; the new in-loop sample then updates the chains, whose
//! delayed output becomes the force for a later bin.

use crate::detection::{
    event_times_in_bin, knife_transmission, poisson_count, project_onto_knife_normal, Channel,
    OpticalConfig, PhotocurrentTrace,
};
use crate::error::{CoreError, Result};
use crate::feedback::{DualLoop, FeedbackConfig};
use crate::rng::SimRng;
use crate::sim::{AxisPropagator, BathConfig, CoherentDrive, IonState, TrapConfig};

/// Full description of one closed-loop run.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub trap: TrapConfig,
    pub bath: BathConfig,
    pub optics: OpticalConfig,
    /// Zero, one or two feedback loops.
    pub feedback: Vec<FeedbackConfig>,
    /// Optional calibration / excitation tone.
    pub drive: Option<CoherentDrive>,
    /// Detection bin rate [Hz].
    pub sample_rate: f64,
    /// Integration substeps per detection bin.
    pub substeps: usize,
    /// Run length [s].
    pub duration: f64,
    /// Record end-of-bin velocities every this many bins.
    pub velocity_decimation: usize,
    /// Record the trajectory every this many bins (0 = off).
    pub position_decimation: usize,
    /// Record out-loop photon arrival times.
    pub record_events: bool,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.trap.validate()?;
        self.bath.validate()?;
        self.optics.validate()?;
        for f in &self.feedback {
            f.validate()?;
        }
        let f_max = self.trap.omega.iter().cloned().fold(0.0, f64::max)
            / std::f64::consts::TAU;
        if self.sample_rate <= 10.0 * f_max {
            return Err(CoreError::invalid(
                "engine.sample_rate",
                format!("need > 10x the fastest trap frequency ({f_max:.3e} Hz)"),
            ));
        }
        if self.substeps == 0 {
            return Err(CoreError::invalid("engine.substeps", "must be >= 1"));
        }
        let dt_sub = 1.0 / (self.sample_rate * self.substeps as f64);
        if dt_sub > 1.0 / (50.0 * f_max) {
            return Err(CoreError::invalid(
                "engine.substeps",
                format!("substep {dt_sub:.3e} s exceeds the 1/(50 f_trap) resolution guard"),
            ));
        }
        if !(self.duration > 0.0) {
            return Err(CoreError::invalid("engine.duration", "must be > 0"));
        }
        if self.velocity_decimation == 0 {
            return Err(CoreError::invalid("engine.velocity_decimation", "must be >= 1"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        (self.duration * self.sample_rate).round() as usize
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub sample_rate: f64,
    pub inloop: PhotocurrentTrace,
    pub outloop: PhotocurrentTrace,
    /// Out-loop photon arrival times [s] (empty unless recorded).
    pub outloop_events: Vec<f64>,
    /// Decimated end-of-bin velocities per trap axis [m/s].
    pub velocities: [Vec<f64>; 2],
    /// Spacing of the velocity samples [s].
    pub velocity_dt: f64,
    /// Decimated (t, x, v) trajectory (empty unless requested).
    pub trajectory: Vec<(f64, [f64; 2], [f64; 2])>,
    pub final_state: IonState,
}

impl RunRecord {
    pub fn mean_rate(&self, channel: Channel) -> f64 {
        let trace = match channel {
            Channel::Transmitted => &self.inloop,
            Channel::Reflected => &self.outloop,
        };
        trace.mean_counts() * self.sample_rate
    }
}

/// Runs the closed loop. Deterministic for a given (config, rng seed).
pub fn run(cfg: &EngineConfig, rng: &mut SimRng) -> Result<RunRecord> {
    cfg.validate()?;

    let n_bins = cfg.bins();
    let dt_bin = 1.0 / cfg.sample_rate;
    let dt_sub = dt_bin / cfg.substeps as f64;
    let mass = cfg.trap.mass;

    let props = [
        AxisPropagator::new(cfg.trap.omega[0], cfg.trap.gamma[0], mass, cfg.bath.temperature, dt_sub)?,
        AxisPropagator::new(cfg.trap.omega[1], cfg.trap.gamma[1], mass, cfg.bath.temperature, dt_sub)?,
    ];
    let mut loops = DualLoop::new(&cfg.feedback, cfg.sample_rate)?;

    // Lab-frame decompositions used every substep.
    let axis_cos = [cfg.trap.axis_angles[0].cos(), cfg.trap.axis_angles[1].cos()];
    let axis_sin = [cfg.trap.axis_angles[0].sin(), cfg.trap.axis_angles[1].sin()];
    let drive_amp_axes = cfg.drive.map(|d| {
        [
            d.amplitude * (d.axis[0] * axis_cos[0] + d.axis[1] * axis_sin[0]),
            d.amplitude * (d.axis[0] * axis_cos[1] + d.axis[1] * axis_sin[1]),
        ]
    });

    let rate_total = cfg.optics.detected_rate_370(cfg.bath.saturation);
    let lambda_balanced = (rate_total * dt_bin / 2.0).max(1e-300);

    let mut state = IonState::at_rest();
    let mut force_fb = [0.0f64, 0.0];

    let mut inloop = Vec::with_capacity(n_bins);
    let mut outloop = Vec::with_capacity(n_bins);
    let mut events = Vec::new();
    let mut velocities = [
        Vec::with_capacity(n_bins / cfg.velocity_decimation + 1),
        Vec::with_capacity(n_bins / cfg.velocity_decimation + 1),
    ];
    let mut trajectory = Vec::new();

    for bin in 0..n_bins {
        let t_bin = bin as f64 * dt_bin;

        // Feedback force in trap-axis components, constant over the bin.
        let f_axes_fb = [
            force_fb[0] * axis_cos[0] + force_fb[1] * axis_sin[0],
            force_fb[0] * axis_cos[1] + force_fb[1] * axis_sin[1],
        ];

        let mut d_sum = 0.0;
        for sub in 0..cfg.substeps {
            let mut f = f_axes_fb;
            if let (Some(d), Some(amp)) = (&cfg.drive, &drive_amp_axes) {
                let t_mid = t_bin + (sub as f64 + 0.5) * dt_sub;
                let s = (d.omega * t_mid + d.phase).sin();
                f[0] += amp[0] * s;
                f[1] += amp[1] * s;
            }
            for j in 0..2 {
                props[j].step(&mut state.x[j], &mut state.v[j], f[j] / mass, rng);
            }
            d_sum += project_onto_knife_normal(state.x, cfg.trap.axis_angles, cfg.optics.knife_angle);
        }
        state.t = t_bin + dt_bin;

        if state.x[0].abs() > cfg.trap.abort_extent || state.x[1].abs() > cfg.trap.abort_extent {
            return Err(CoreError::NumericalBlowup {
                step: bin,
                position: state.x[0].abs().max(state.x[1].abs()),
            });
        }

        // Bin-averaged image displacement drives the photon statistics.
        let d_mean = d_sum / cfg.substeps as f64 + cfg.optics.knife_offset;
        let tau = knife_transmission(d_mean, cfg.optics.magnification, cfg.optics.spot_sigma);
        let lam = rate_total * dt_bin;
        let n_in = poisson_count(lam * tau, rng);
        let n_out = poisson_count(lam * (1.0 - tau), rng);
        inloop.push(n_in);
        outloop.push(n_out);
        if cfg.record_events {
            event_times_in_bin(t_bin, dt_bin, n_out, rng, &mut events);
        }

        // New in-loop sample through the chains; output is already delayed.
        let u = n_in as f64 / lambda_balanced - 1.0;
        force_fb = loops.process(u);

        if bin % cfg.velocity_decimation == 0 {
            velocities[0].push(state.v[0]);
            velocities[1].push(state.v[1]);
        }
        if cfg.position_decimation > 0 && bin % cfg.position_decimation == 0 {
            trajectory.push((state.t, state.x, state.v));
        }
    }

    loops.check()?;

    Ok(RunRecord {
        sample_rate: cfg.sample_rate,
        inloop: PhotocurrentTrace {
            sample_rate: cfg.sample_rate,
            samples: inloop,
            channel: Channel::Transmitted,
        },
        outloop: PhotocurrentTrace {
            sample_rate: cfg.sample_rate,
            samples: outloop,
            channel: Channel::Reflected,
        },
        outloop_events: events,
        velocities,
        velocity_dt: dt_bin * cfg.velocity_decimation as f64,
        trajectory,
        final_state: state,
    })
}
