//! Physical constants (SI) and the defaults shared by the simulation modules.

/// Boltzmann constant [J/K].
pub const K_B: f64 = 1.380_649e-23;

/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054_571_817e-34;

/// Atomic mass unit [kg].
pub const AMU: f64 = 1.660_539_068_92e-27;

/// Mass of a singly charged Yb-174 ion [kg].
pub const MASS_YB174: f64 = 173.938 * AMU;

/// Doppler temperature limit ħΓ/(2 k_B) for a transition of linewidth
/// `gamma` [rad/s].
pub fn doppler_limit(gamma: f64) -> f64 {
    HBAR * gamma / (2.0 * K_B)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doppler_limit_for_yb_cooling_transition() {
        // 2π·19.6 MHz linewidth puts the limit at 470 µK.
        let t = doppler_limit(2.0 * std::f64::consts::PI * 19.6e6);
        assert!((t - 470e-6).abs() < 1e-6, "got {t}");
    }
}
