//! Everything between transmitter output and detector input: fiber loss,
//! chromatic-dispersion temporal crosstalk, amplifier ASE, laser RIN,
//! four-wave-mixing scaling, free-space diffraction, and RF links.

use crate::constants::{photon_energy, BOLTZMANN, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Transmission band of the optical carrier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Band {
    CBand,
    OBand,
}

/// Physical medium of the link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Ideal,
    Fiber,
    FreeSpace,
    Rf,
}

/// Static description of one weight-distribution link.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkConfig {
    pub kind: LinkKind,
    /// km for fiber, m for free space.
    pub length: f64,
    pub loss_per_km_db: f64,
    /// Couplers, splices, and other fixed losses.
    pub extra_loss_db: f64,
    pub band: Band,
    pub center_wavelength_nm: f64,
    /// Optical bandwidth per wavelength channel.
    pub optical_bandwidth_hz: f64,
    /// Symbol (weight) period at the client.
    pub symbol_period_s: f64,
    pub launch_power_per_wavelength_w: f64,
    pub temperature_k: f64,
    /// Laser relative intensity noise; `None` disables the RIN source.
    pub rin_dbc_per_hz: Option<f64>,
}

impl LinkConfig {
    /// Loss-free short link; the default test bench.
    pub fn ideal() -> Self {
        LinkConfig {
            kind: LinkKind::Ideal,
            length: 0.0,
            loss_per_km_db: 0.0,
            extra_loss_db: 0.0,
            band: Band::CBand,
            center_wavelength_nm: 1550.0,
            optical_bandwidth_hz: 100e9,
            symbol_period_s: 1e-9,
            launch_power_per_wavelength_w: 1e-3,
            temperature_k: 300.0,
            rin_dbc_per_hz: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length < 0.0
            || self.loss_per_km_db < 0.0
            || self.extra_loss_db < 0.0
            || self.launch_power_per_wavelength_w < 0.0
        {
            return Err(Error::invalid("link: negative power, length or loss"));
        }
        if self.symbol_period_s <= 0.0 || self.optical_bandwidth_hz <= 0.0 {
            return Err(Error::invalid("link: symbol period and bandwidth must be positive"));
        }
        band_check(self.band, self.center_wavelength_nm)?;
        Ok(())
    }

    pub fn wavelength_m(&self) -> f64 {
        self.center_wavelength_nm * 1e-9
    }

    /// End-to-end linear power transmission of the link.
    pub fn attenuation(&self) -> f64 {
        match self.kind {
            LinkKind::Ideal | LinkKind::Rf => db_to_factor(self.extra_loss_db),
            LinkKind::Fiber => fiber_attenuation(self.length, self.loss_per_km_db, self.extra_loss_db),
            LinkKind::FreeSpace => db_to_factor(self.extra_loss_db),
        }
    }

    /// Channel bandwidth expressed as a wavelength span at band center.
    pub fn bandwidth_span_nm(&self) -> f64 {
        bandwidth_span_nm(self.center_wavelength_nm, self.optical_bandwidth_hz)
    }
}

/// EDFA amplifier settings.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AmplifierConfig {
    /// Linear gain ratio, >= 1.
    pub gain: f64,
    /// Population inversion factor, >= 1 (1 for well pumped amplifiers).
    pub inversion_factor: f64,
    /// Optical bandwidth of the wavelength channel.
    pub channel_bandwidth_hz: f64,
}

impl AmplifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gain < 1.0 {
            return Err(Error::invalid("amplifier: gain must be >= 1"));
        }
        if self.inversion_factor < 1.0 {
            return Err(Error::invalid("amplifier: inversion factor must be >= 1"));
        }
        if self.channel_bandwidth_hz <= 0.0 {
            return Err(Error::invalid("amplifier: bandwidth must be positive"));
        }
        Ok(())
    }
}

/// Diffraction-limited free-space link parameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FreeSpaceConfig {
    /// Transmit power per wavelength (W).
    pub p_t: f64,
    /// Effective transmit aperture area (m^2).
    pub a_t: f64,
    /// Effective receive aperture area (m^2).
    pub a_r: f64,
    /// Carrier wavelength (m).
    pub wavelength_m: f64,
    /// Link distance (m).
    pub distance_m: f64,
    pub n_wavelengths: usize,
}

impl FreeSpaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p_t <= 0.0
            || self.a_t <= 0.0
            || self.a_r <= 0.0
            || self.wavelength_m <= 0.0
            || self.distance_m <= 0.0
            || self.n_wavelengths == 0
        {
            return Err(Error::invalid("free-space config: all fields must be positive"));
        }
        Ok(())
    }
}

fn band_check(band: Band, wavelength_nm: f64) -> Result<()> {
    let ok = match band {
        Band::CBand => (1500.0..=1600.0).contains(&wavelength_nm),
        Band::OBand => (1250.0..=1380.0).contains(&wavelength_nm),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "wavelength {wavelength_nm} nm inconsistent with {band:?}"
        )))
    }
}

pub fn db_to_factor(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Linear power transmission of a fiber span with fixed extra losses.
pub fn fiber_attenuation(length_km: f64, loss_per_km_db: f64, extra_db: f64) -> f64 {
    db_to_factor(length_km * loss_per_km_db + extra_db)
}

/// Chromatic dispersion coefficient D in ps/(nm km).
///
/// C-band standard single-mode fiber: constant 18. O-band: 0.092 per nm
/// offset from the 1314 nm zero-dispersion point.
pub fn dispersion_coefficient(band: Band, wavelength_nm: f64) -> Result<f64> {
    band_check(band, wavelength_nm)?;
    Ok(match band {
        Band::CBand => 18.0,
        Band::OBand => 0.092 * (wavelength_nm - 1314.0).abs(),
    })
}

/// Temporal crosstalk factor: maximum inter-wavelength delay over the symbol
/// period. D in ps/(nm km), span in nm, length in km, period in seconds.
pub fn crosstalk_chi(d_ps_nm_km: f64, span_nm: f64, length_km: f64, symbol_period_s: f64) -> f64 {
    let max_delay_s = d_ps_nm_km * span_nm * length_km * 1e-12;
    max_delay_s / symbol_period_s
}

/// Dispersion-limited channel capacity in weights per second.
///
/// Uses the natural logarithm; see the module docs on sweep outputs for the
/// base-10 alternative (values differ by ln 10).
pub fn channel_capacity(chi: f64, b_opt_hz: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&chi) || chi == 0.0 {
        return Err(Error::invalid(format!("channel_capacity: chi {chi} outside (0,1)")));
    }
    Ok(2.0 * std::f64::consts::PI * (2.0 * chi).sqrt() / (1.0 / chi).ln() * b_opt_hz)
}

/// Wavelength span corresponding to an optical bandwidth at band center.
pub fn bandwidth_span_nm(center_wavelength_nm: f64, bandwidth_hz: f64) -> f64 {
    let lambda_m = center_wavelength_nm * 1e-9;
    lambda_m * lambda_m * bandwidth_hz / SPEED_OF_LIGHT * 1e9
}

/// Two-tap forward-leak crosstalk kernel: each symbol leaks fraction `chi`
/// into its successor. The final symbol keeps its energy so the stream total
/// is conserved exactly; chi = 0 is the identity.
pub fn apply_temporal_crosstalk(stream: &[f64], chi: f64) -> Vec<f64> {
    if stream.is_empty() || chi == 0.0 {
        return stream.to_vec();
    }
    let n = stream.len();
    let mut out = vec![0.0; n];
    for (j, &s) in stream.iter().enumerate() {
        if j + 1 < n {
            out[j] += (1.0 - chi) * s;
            out[j + 1] += chi * s;
        } else {
            out[j] += s;
        }
    }
    out
}

/// EDFA output: amplified signal plus amplified-spontaneous-emission power.
pub struct EdfaOutput {
    pub p_signal: f64,
    pub p_ase: f64,
}

/// p_signal = G * p_in; p_ase = mu * h*nu * df_opt * (G - 1).
pub fn edfa_output(p_in: f64, amp: &AmplifierConfig, wavelength_m: f64) -> EdfaOutput {
    let hv = photon_energy(wavelength_m);
    EdfaOutput {
        p_signal: amp.gain * p_in,
        p_ase: amp.inversion_factor * hv * amp.channel_bandwidth_hz * (amp.gain - 1.0),
    }
}

/// Four-wave-mixing product power scaling, kappa * p1 * p2 * p3.
pub fn fwm_scaling(p1: f64, p2: f64, p3: f64, kappa: f64) -> f64 {
    kappa * p1 * p2 * p3
}

/// Friis received power per wavelength: P_t * A_t * A_r / (lambda^2 R^2).
pub fn friis_received_power(cfg: &FreeSpaceConfig) -> Result<f64> {
    cfg.validate()?;
    Ok(cfg.p_t * cfg.a_t * cfg.a_r / (cfg.wavelength_m * cfg.wavelength_m * cfg.distance_m * cfg.distance_m))
}

/// Shot-noise-limited relative intensity noise, 2 h nu / P_av, in 1/Hz.
pub fn rin_shot_limit(p_av_w: f64, wavelength_m: f64) -> Result<f64> {
    if p_av_w <= 0.0 {
        return Err(Error::invalid("rin_shot_limit: power must be positive"));
    }
    Ok(2.0 * photon_energy(wavelength_m) / p_av_w)
}

/// Convert a linear RIN (1/Hz) to dBc/Hz.
pub fn rin_to_dbc_per_hz(rin_per_hz: f64) -> f64 {
    10.0 * rin_per_hz.log10()
}

/// Dimensionless relative power variance of a RIN spec over a bandwidth.
pub fn rin_dimensionless(rin_dbc_per_hz: f64, bandwidth_hz: f64) -> f64 {
    10f64.powf(rin_dbc_per_hz / 10.0) * bandwidth_hz
}

/// Receiver power SNR implied by a laser RIN spec over a channel bandwidth.
pub fn rin_power_snr(rin_dbc_per_hz: f64, bandwidth_hz: f64) -> f64 {
    1.0 / rin_dimensionless(rin_dbc_per_hz, bandwidth_hz)
}

/// Thermal-noise-limited RF homodyne power SNR: sqrt(P_s P_LO) / (k T df).
pub fn rf_link_snr(p_s_w: f64, p_lo_w: f64, bandwidth_hz: f64, temperature_k: f64) -> Result<f64> {
    if p_s_w <= 0.0 || p_lo_w <= 0.0 || bandwidth_hz <= 0.0 || temperature_k <= 0.0 {
        return Err(Error::invalid("rf_link_snr: all inputs must be positive"));
    }
    Ok((p_s_w * p_lo_w).sqrt() / (BOLTZMANN * temperature_k * bandwidth_hz))
}

/// Named link presets.
pub mod presets {
    use super::*;

    /// Loss-free bench link.
    pub fn ideal() -> LinkConfig {
        LinkConfig::ideal()
    }

    /// Short lab fiber patch: a few dB of coupling loss, GHz clock.
    pub fn local_lab() -> LinkConfig {
        LinkConfig {
            kind: LinkKind::Fiber,
            length: 0.01,
            loss_per_km_db: 0.2,
            extra_loss_db: 6.0,
            symbol_period_s: 1e-9,
            ..LinkConfig::ideal()
        }
    }

    /// Two 43 km deployed strands in loopback, 22 dB of loss each, 1 kHz
    /// clock as run in the field.
    pub fn deployed_86km() -> LinkConfig {
        LinkConfig {
            kind: LinkKind::Fiber,
            length: 86.0,
            loss_per_km_db: 22.0 / 43.0,
            extra_loss_db: 0.0,
            symbol_period_s: 1e-3,
            ..LinkConfig::ideal()
        }
    }

    /// Ground station to low-earth-orbit satellite.
    pub fn leo() -> FreeSpaceConfig {
        FreeSpaceConfig {
            p_t: 1.0,
            a_t: 0.1,
            a_r: 0.1,
            wavelength_m: 1550e-9,
            distance_m: 2e6,
            n_wavelengths: 100,
        }
    }

    /// Earth to Mars distance with the same apertures.
    pub fn mars() -> FreeSpaceConfig {
        FreeSpaceConfig {
            distance_m: 5e10,
            ..leo()
        }
    }

    /// Future green (532 nm) Mars base station, 10 W and 1000 wavelengths.
    pub fn green_mars() -> FreeSpaceConfig {
        FreeSpaceConfig {
            p_t: 10.0,
            wavelength_m: 532e-9,
            distance_m: 5e10,
            n_wavelengths: 1000,
            ..leo()
        }
    }

    /// 5G-style RF parameters: pW received signal, uW local oscillator,
    /// GHz bandwidth, room temperature.
    pub struct RfPreset {
        pub p_s_w: f64,
        pub p_lo_w: f64,
        pub bandwidth_hz: f64,
        pub temperature_k: f64,
    }

    pub fn rf_5g() -> RfPreset {
        RfPreset {
            p_s_w: 1e-12,
            p_lo_w: 1e-6,
            bandwidth_hz: 1e9,
            temperature_k: 300.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn attenuation_zero_length_is_unity() {
        assert_eq!(fiber_attenuation(0.0, 0.14, 0.0), 1.0);
    }

    #[test]
    fn attenuation_70km_at_014db() {
        // ~10 dB plumbing-loss over the metro span
        let f = fiber_attenuation(70.0, 0.14, 0.0);
        assert!((f - 0.1).abs() / 0.1 < 0.05, "factor {f}");
    }

    #[test]
    fn attenuation_deployed_strand() {
        let f = fiber_attenuation(43.0, 22.0 / 43.0, 0.0);
        assert_relative_eq!(f, 6.3e-3, max_relative = 0.02);
    }

    #[test]
    fn attenuation_composes_in_db() {
        let a = fiber_attenuation(12.0, 0.2, 1.0);
        let b = fiber_attenuation(30.0, 0.2, 2.0);
        let joint = fiber_attenuation(42.0, 0.2, 3.0);
        assert_relative_eq!(a * b, joint, max_relative = 1e-12);
    }

    #[test]
    fn dispersion_cband_constant() {
        assert_eq!(dispersion_coefficient(Band::CBand, 1550.0).unwrap(), 18.0);
    }

    #[test]
    fn dispersion_oband_zero_point_and_slope() {
        assert_eq!(dispersion_coefficient(Band::OBand, 1314.0).unwrap(), 0.0);
        assert_relative_eq!(
            dispersion_coefficient(Band::OBand, 1334.0).unwrap(),
            1.84,
            max_relative = 1e-12
        );
    }

    #[test]
    fn dispersion_band_mismatch_rejected() {
        assert!(dispersion_coefficient(Band::CBand, 1310.0).is_err());
        assert!(dispersion_coefficient(Band::OBand, 1550.0).is_err());
    }

    #[test]
    fn chi_evaluates_and_scales_linearly() {
        assert_eq!(crosstalk_chi(18.0, 0.8, 0.0, 1e-9), 0.0);
        let chi = crosstalk_chi(18.0, 0.8, 10.0, 1e-9);
        assert_relative_eq!(chi, 0.144, max_relative = 1e-12);
        assert_relative_eq!(crosstalk_chi(18.0, 0.8, 20.0, 1e-9), 2.0 * chi, max_relative = 1e-12);
    }

    #[test]
    fn capacity_reference_points() {
        assert_relative_eq!(channel_capacity(0.05, 1.0).unwrap(), 0.663, max_relative = 1e-3);
        assert_relative_eq!(channel_capacity(0.1, 1.0).unwrap(), 1.220, max_relative = 1e-3);
        assert_relative_eq!(
            channel_capacity(0.1, 5.0).unwrap(),
            5.0 * channel_capacity(0.1, 1.0).unwrap(),
            max_relative = 1e-12
        );
        assert!(channel_capacity(0.0, 1.0).is_err());
        assert!(channel_capacity(1.0, 1.0).is_err());
    }

    #[test]
    fn crosstalk_kernel_identity_and_impulse() {
        let s = vec![0.3, 0.7, 0.1];
        assert_eq!(apply_temporal_crosstalk(&s, 0.0), s);
        let imp = apply_temporal_crosstalk(&[1.0, 0.0, 0.0], 0.1);
        assert_relative_eq!(imp[0], 0.9);
        assert_relative_eq!(imp[1], 0.1);
        assert_eq!(imp[2], 0.0);
    }

    #[test]
    fn crosstalk_conserves_energy() {
        let mut r = crate::rng::StreamRng::derive(3, &[1]);
        let s: Vec<f64> = (0..257).map(|_| r.next_f64()).collect();
        let out = apply_temporal_crosstalk(&s, 0.23);
        let (a, b): (f64, f64) = (s.iter().sum(), out.iter().sum());
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn edfa_reference_point() {
        let amp = AmplifierConfig {
            gain: 100.0,
            inversion_factor: 1.0,
            channel_bandwidth_hz: 100e9,
        };
        let out = edfa_output(1e-6, &amp, 1550e-9);
        assert_relative_eq!(out.p_signal, 1e-4, max_relative = 1e-12);
        // ~1.27 uW of spontaneous emission per channel
        assert!((out.p_ase - 1e-6).abs() / 1e-6 < 0.3, "p_ase {}", out.p_ase);
        // fully used channel: ~10 aJ per MAC of background
        let e_per_symbol = out.p_ase / amp.channel_bandwidth_hz;
        assert!((e_per_symbol - 1e-17).abs() / 1e-17 < 0.3);
    }

    #[test]
    fn edfa_unity_gain_is_noiseless() {
        let amp = AmplifierConfig {
            gain: 1.0,
            inversion_factor: 1.0,
            channel_bandwidth_hz: 100e9,
        };
        assert_eq!(edfa_output(1e-3, &amp, 1550e-9).p_ase, 0.0);
    }

    #[test]
    fn fwm_cubic_scaling() {
        assert_eq!(fwm_scaling(0.0, 1.0, 1.0, 1.0), 0.0);
        let base = fwm_scaling(1e-4, 1e-4, 1e-4, 2.0);
        let scaled = fwm_scaling(1e-5, 1e-5, 1e-5, 2.0);
        assert_relative_eq!(scaled, base * 1e-3, max_relative = 1e-12);
        assert_relative_eq!(fwm_scaling(1e-4, 1e-4, 1e-4, 4.0), 2.0 * base, max_relative = 1e-12);
    }

    #[test]
    fn friis_reference_links() {
        let leo = friis_received_power(&presets::leo()).unwrap();
        assert!((leo - 1e-3).abs() / 1e-3 < 0.5, "LEO {leo}");
        let mars = friis_received_power(&presets::mars()).unwrap();
        assert!(mars / 1e-12 < 2.0 && mars / 1e-12 > 0.5, "Mars {mars}");
        let green = friis_received_power(&presets::green_mars()).unwrap();
        assert!((green - 140e-12).abs() / 140e-12 < 0.5, "green Mars {green}");
    }

    #[test]
    fn friis_symmetric_in_apertures() {
        let mut cfg = presets::leo();
        cfg.a_t = 0.03;
        cfg.a_r = 0.4;
        let a = friis_received_power(&cfg).unwrap();
        std::mem::swap(&mut cfg.a_t, &mut cfg.a_r);
        let b = friis_received_power(&cfg).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-14);
    }

    #[test]
    fn rin_shot_limited_20mw() {
        let rin = rin_shot_limit(20e-3, 1550e-9).unwrap();
        assert!((rin - 1.3e-17).abs() / 1.3e-17 < 0.05, "rin {rin}");
        let dbc = rin_to_dbc_per_hz(rin);
        assert!((dbc + 169.0).abs() < 1.0, "dbc {dbc}");
        assert_relative_eq!(
            rin_shot_limit(10e-3, 1550e-9).unwrap(),
            2.0 * rin,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rin_snr_for_mass_produced_laser() {
        assert_relative_eq!(rin_power_snr(-140.0, 100e9), 1000.0, max_relative = 1e-9);
    }

    #[test]
    fn rf_snr_reference_point() {
        let p = presets::rf_5g();
        let snr = rf_link_snr(p.p_s_w, p.p_lo_w, p.bandwidth_hz, p.temperature_k).unwrap();
        assert!((snr - 241.0).abs() / 241.0 < 0.05, "snr {snr}");
        // square-root dependence on signal power
        let snr4 = rf_link_snr(4.0 * p.p_s_w, p.p_lo_w, p.bandwidth_hz, p.temperature_k).unwrap();
        assert_relative_eq!(snr4, 2.0 * snr, max_relative = 1e-12);
    }
}
