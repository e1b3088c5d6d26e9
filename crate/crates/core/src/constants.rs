//! Physical constants used throughout the simulator.
//!
//! All values are SI. Everything that depends on fundamental constants pulls
//! them from here so that golden-number tests pin a single source of truth.

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Elementary charge (C).
pub const ELECTRON_CHARGE: f64 = 1.602177e-19;

/// Planck constant (J*s).
pub const PLANCK: f64 = 6.62607e-34;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 2.99792458e8;

/// Energy of a single photon at the given vacuum wavelength (J).
pub fn photon_energy(wavelength_m: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength_m
}

/// Optical frequency for the given vacuum wavelength (Hz).
pub fn optical_frequency(wavelength_m: f64) -> f64 {
    SPEED_OF_LIGHT / wavelength_m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn photon_energy_at_1550nm() {
        // ~0.8 eV, the usual telecom C-band photon
        let e = photon_energy(1550e-9);
        assert!((e - 1.2817e-19).abs() / 1.2817e-19 < 1e-3);
    }
}
