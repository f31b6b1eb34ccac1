//! Desk-scale physics of a single laser-cooled trapped ion watched through a
//! knife edge: stochastic radial motion, photon-counting detection, an
//! electronic feedback chain, and the spectral-thermometry / calibration
//! machinery needed to turn detected counts into absolute temperatures.
//!
//! The crate is organized along the signal path:
//!
//! * [`sim`] — radial Langevin dynamics of the ion (exact Gaussian propagator),
//!   Doppler bath parameters, coherent drives, equipartition thermometry.
//! * [`detection`] — erf knife-edge split of the ion image onto two
//!   photon-counting channels with Poisson shot noise.
//! * [`feedback`] — bandpass + all-pass + gain/clip/delay chain converting the
//!   in-loop photocurrent into an electrode force; supports two loops.
//! * [`engine`] — the closed-loop simulation binding the three above.
//! * [`spectral`] — Welch PSD estimation, displacement calibration, Lorentzian
//!   and saturation-law fits.
//! * [`imaging`] — synthetic long-exposure ion images and 2-D Gaussian fits
//!   for locating the radial trap axes.

pub mod constants;
pub mod detection;
pub mod engine;
pub mod error;
pub mod feedback;
pub mod fit;
pub mod imaging;
pub mod rng;
pub mod sim;
pub mod spectral;

pub use error::{CoreError, Result};
pub use rng::SimRng;
