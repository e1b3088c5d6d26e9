//! Detector and noise models: time-integrating receivers, amplified
//! photoreceivers, linear APDs, SNSPD photon counting, coherent gain, and
//! the noise-floor formulas they obey.
//!
//! Conventions: quantum efficiency is electrons per photon in (0,1];
//! amplified receivers carry a responsivity in A/W plus a transimpedance
//! gain in V/A. SNR is the ratio of signal to rms noise in matched units.

use crate::constants::{photon_energy, BOLTZMANN, ELECTRON_CHARGE};
use crate::error::{Error, Result};
use crate::rng::StreamRng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Charge-integrating receiver: photodiode plus integration capacitor.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TimeIntegrator {
    pub capacitance_f: f64,
    pub temperature_k: f64,
    /// Electrons per photon, (0,1].
    pub quantum_efficiency: f64,
    /// Measured readout noise; `None` selects the ideal kTC floor.
    pub readout_noise_volts: Option<f64>,
    /// Series resistance when integrating a voltage input.
    pub series_resistance_ohm: f64,
    /// Reset-switch offset voltage.
    pub switch_offset_v: f64,
    pub dark_current_a: f64,
}

impl TimeIntegrator {
    /// rms readout noise in volts: the override if present, else sqrt(kT/C).
    pub fn readout_noise(&self) -> f64 {
        self.readout_noise_volts
            .unwrap_or_else(|| (BOLTZMANN * self.temperature_k / self.capacitance_f).sqrt())
    }
}

/// Amplified photoreceiver that reads out every symbol.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AmplifiedTia {
    /// Integrated output voltage noise, rms.
    pub v_rms: f64,
    pub bandwidth_hz: f64,
    /// Transimpedance gain.
    pub gain_v_per_a: f64,
    /// Detector responsivity, A/W equivalent in (0,1].
    pub responsivity_a_per_w: f64,
    /// Fiber-to-detector coupling, (0,1].
    pub coupling_efficiency: f64,
    /// Effective noise multiplier for the output termination; where the
    /// factor belongs physically is detector-specific, so it is exposed
    /// per preset.
    pub termination_factor: f64,
}

impl AmplifiedTia {
    /// Noise-equivalent optical power at the input, in watts.
    pub fn nep_w(&self) -> f64 {
        self.v_rms * self.termination_factor / (self.gain_v_per_a * self.responsivity_a_per_w)
    }
}

/// Linear-mode avalanche photoreceiver: a TIA with internal gain bought by
/// a large bias voltage.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LinearApd {
    pub tia: AmplifiedTia,
    pub internal_gain: f64,
    pub bias_voltage_v: f64,
}

impl LinearApd {
    pub fn nep_w(&self) -> f64 {
        self.tia.nep_w() / self.internal_gain
    }
}

/// Superconducting nanowire single-photon detector read through a voltage
/// integrator, with calibrated photon-number bins.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Snspd {
    pub quantum_efficiency: f64,
    pub dark_count_rate_hz: f64,
    /// Above this photon rate the device latches; exceedance is flagged,
    /// not modeled as latching dynamics.
    pub saturation_rate_hz: f64,
    pub bin_offset_v: f64,
    pub bin_step_v: f64,
}

/// Homodyne receiver boosting a weak signal with a local oscillator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoherentHomodyne {
    pub lo_power_w: f64,
    pub quantum_efficiency: f64,
}

/// All supported detector models.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DetectorModel {
    TimeIntegrator(TimeIntegrator),
    AmplifiedTia(AmplifiedTia),
    LinearApd(LinearApd),
    Snspd(Snspd),
    CoherentHomodyne(CoherentHomodyne),
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        let check_unit = |v: f64, what: &str| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be in (0,1], got {v}")))
            }
        };
        let check_pos = |v: f64, what: &str| {
            if v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{what} must be positive, got {v}")))
            }
        };
        match self {
            DetectorModel::TimeIntegrator(d) => {
                check_pos(d.capacitance_f, "capacitance")?;
                check_pos(d.temperature_k, "temperature")?;
                check_unit(d.quantum_efficiency, "quantum efficiency")?;
                if d.dark_current_a < 0.0 {
                    return Err(Error::invalid("dark current must be non-negative"));
                }
                Ok(())
            }
            DetectorModel::AmplifiedTia(d) => {
                check_pos(d.v_rms, "v_rms")?;
                check_pos(d.bandwidth_hz, "bandwidth")?;
                check_pos(d.gain_v_per_a, "gain")?;
                check_unit(d.responsivity_a_per_w, "responsivity")?;
                check_unit(d.coupling_efficiency, "coupling efficiency")?;
                check_pos(d.termination_factor, "termination factor")
            }
            DetectorModel::LinearApd(d) => {
                DetectorModel::AmplifiedTia(d.tia).validate()?;
                check_pos(d.internal_gain, "internal gain")?;
                check_pos(d.bias_voltage_v, "bias voltage")
            }
            DetectorModel::Snspd(d) => {
                check_unit(d.quantum_efficiency, "quantum efficiency")?;
                check_pos(d.saturation_rate_hz, "saturation rate")?;
                check_pos(d.bin_step_v, "bin step")?;
                if d.dark_count_rate_hz < 0.0 {
                    return Err(Error::invalid("dark count rate must be non-negative"));
                }
                Ok(())
            }
            DetectorModel::CoherentHomodyne(d) => {
                check_pos(d.lo_power_w, "LO power")?;
                check_unit(d.quantum_efficiency, "quantum efficiency")
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DetectorModel::TimeIntegrator(_) => "time_integrator",
            DetectorModel::AmplifiedTia(_) => "amplified_tia",
            DetectorModel::LinearApd(_) => "linear_apd",
            DetectorModel::Snspd(_) => "snspd",
            DetectorModel::CoherentHomodyne(_) => "coherent_homodyne",
        }
    }
}

/// Per-source variance account of one readout, all in the reading's units
/// squared. Components always sum to `total`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NoiseBreakdown {
    pub thermal: f64,
    pub shot: f64,
    pub dark: f64,
    pub ase: f64,
    pub rin: f64,
    pub flicker: f64,
}

impl NoiseBreakdown {
    pub fn total(&self) -> f64 {
        self.thermal + self.shot + self.dark + self.ase + self.rin + self.flicker
    }
}

/// One simulated readout with its diagnostics.
#[derive(Clone, Debug)]
pub struct ReadoutSample {
    /// Volts or photon count, detector dependent.
    pub value: f64,
    /// MACs accumulated in the window.
    pub window_macs: usize,
    pub noise_breakdown: NoiseBreakdown,
}

// ---------------------------------------------------------------------------
// Integration primitives
// ---------------------------------------------------------------------------

/// Trapezoid-rule charge integration of a uniformly sampled current trace:
/// V = (1/C) * integral(i dt) + switch offset.
pub fn integrate_current(samples: &[f64], dt_s: f64, capacitance_f: f64, switch_offset_v: f64) -> Result<f64> {
    if capacitance_f <= 0.0 {
        return Err(Error::invalid("integrate_current: capacitance must be positive"));
    }
    Ok(trapezoid(samples, dt_s) / capacitance_f + switch_offset_v)
}

/// Voltage-input integration through a series resistor. The physical output
/// is -(1/RC) * integral(v dt); the sign is flipped here, matching how the
/// readout software treats it.
pub fn integrate_voltage(samples: &[f64], dt_s: f64, resistance_ohm: f64, capacitance_f: f64) -> Result<f64> {
    if resistance_ohm <= 0.0 || capacitance_f <= 0.0 {
        return Err(Error::invalid("integrate_voltage: R and C must be positive"));
    }
    Ok(trapezoid(samples, dt_s) / (resistance_ohm * capacitance_f))
}

fn trapezoid(samples: &[f64], dt: f64) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let inner: f64 = samples[1..samples.len() - 1].iter().sum();
    dt * (0.5 * (samples[0] + samples[samples.len() - 1]) + inner)
}

// ---------------------------------------------------------------------------
// Noise-floor formulas
// ---------------------------------------------------------------------------

/// Thermal (kTC) readout noise in electrons rms and volts rms.
pub fn thermal_noise_electrons(temperature_k: f64, capacitance_f: f64) -> Result<(f64, f64)> {
    if temperature_k <= 0.0 || capacitance_f <= 0.0 {
        return Err(Error::invalid("thermal_noise_electrons: T and C must be positive"));
    }
    let charge = (BOLTZMANN * temperature_k * capacitance_f).sqrt();
    Ok((charge / ELECTRON_CHARGE, charge / capacitance_f))
}

/// Equivalent noise bandwidth of an RC readout, 1/(4RC).
pub fn rc_noise_bandwidth(resistance_ohm: f64, capacitance_f: f64) -> f64 {
    1.0 / (4.0 * resistance_ohm * capacitance_f)
}

/// Thermal noise expressed as RF power, 4 k T df.
pub fn thermal_noise_power(temperature_k: f64, bandwidth_hz: f64) -> f64 {
    4.0 * BOLTZMANN * temperature_k * bandwidth_hz
}

/// Exact Poisson photon-count sample with the given mean.
pub fn sample_shot(mean_photons: f64, rng: &mut StreamRng) -> u64 {
    if mean_photons <= 0.0 {
        return 0;
    }
    Poisson::new(mean_photons).expect("positive mean").sample(rng) as u64
}

/// Time-integrator SNR after M MACs against the kTC floor, in electron units.
pub fn snr_time_integrator(
    e_mac_j: f64,
    quantum_efficiency: f64,
    window_macs: usize,
    temperature_k: f64,
    capacitance_f: f64,
    wavelength_m: f64,
) -> Result<f64> {
    if e_mac_j <= 0.0 {
        return Err(Error::invalid("snr_time_integrator: e_mac must be positive"));
    }
    let (noise_electrons, _) = thermal_noise_electrons(temperature_k, capacitance_f)?;
    let signal_electrons =
        e_mac_j * quantum_efficiency * window_macs as f64 / photon_energy(wavelength_m);
    Ok(signal_electrons / noise_electrons)
}

/// Per-MAC SNR of an amplified receiver: E_mac * B / NEP, with coupling
/// efficiency applied to the optical energy.
pub fn amplified_snr(e_mac_j: f64, det: &AmplifiedTia) -> Result<f64> {
    if e_mac_j <= 0.0 {
        return Err(Error::invalid("amplified_snr: e_mac must be positive"));
    }
    Ok(e_mac_j * det.coupling_efficiency * det.bandwidth_hz / det.nep_w())
}

/// Optical energy per MAC a thermal-noise-limited TIA needs for a target
/// SNR: E_mac = SNR * (h nu / (q eta)) * sqrt(4kT / (R df)).
pub fn tia_thermal_emac(
    snr_target: f64,
    resistance_ohm: f64,
    bandwidth_hz: f64,
    temperature_k: f64,
    wavelength_m: f64,
    quantum_efficiency: f64,
) -> Result<f64> {
    if snr_target <= 0.0 || resistance_ohm <= 0.0 || bandwidth_hz <= 0.0 {
        return Err(Error::invalid("tia_thermal_emac: inputs must be positive"));
    }
    let hv = photon_energy(wavelength_m);
    Ok(snr_target * hv / (ELECTRON_CHARGE * quantum_efficiency)
        * (4.0 * BOLTZMANN * temperature_k / (resistance_ohm * bandwidth_hz)).sqrt())
}

/// Photons per readout at which shot noise equals kTC thermal noise:
/// n = k T C / q^2.
pub fn shot_thermal_crossover(temperature_k: f64, capacitance_f: f64) -> Result<f64> {
    if temperature_k <= 0.0 || capacitance_f <= 0.0 {
        return Err(Error::invalid("shot_thermal_crossover: T and C must be positive"));
    }
    Ok(BOLTZMANN * temperature_k * capacitance_f / (ELECTRON_CHARGE * ELECTRON_CHARGE))
}

/// Flicker-noise current spectral density, K_f * i^alpha / f^beta, in A^2/Hz.
pub fn flicker_psd(k_f: f64, current_a: f64, alpha: f64, beta: f64, frequency_hz: f64) -> Result<f64> {
    if frequency_hz <= 0.0 {
        return Err(Error::invalid("flicker_psd: frequency must be positive"));
    }
    if current_a < 0.0 {
        return Err(Error::invalid("flicker_psd: current must be non-negative"));
    }
    Ok(k_f * current_a.powf(alpha) / frequency_hz.powf(beta))
}

/// Flicker/shot crossover frequency, f_c = K_f * i / (2q).
pub fn flicker_corner(k_f: f64, current_a: f64) -> f64 {
    k_f * current_a / (2.0 * ELECTRON_CHARGE)
}

/// Electrical energy an avalanche photodiode pulls from its supply per MAC.
///
/// Thermal-limited operation: gain cancels against the reduced optical
/// energy, E_det = q eta E_mac V_bias / (h nu). Shot-limited operation:
/// extra gain only multiplies the drawn charge.
pub fn apd_electrical_energy(
    e_mac_j: f64,
    bias_voltage_v: f64,
    quantum_efficiency: f64,
    wavelength_m: f64,
    gain: f64,
    shot_limited: bool,
) -> Result<f64> {
    if e_mac_j <= 0.0 || bias_voltage_v <= 0.0 || gain <= 0.0 {
        return Err(Error::invalid("apd_electrical_energy: inputs must be positive"));
    }
    let base = ELECTRON_CHARGE * quantum_efficiency * e_mac_j * bias_voltage_v
        / photon_energy(wavelength_m);
    Ok(if shot_limited { base * gain } else { base })
}

/// Map an integrator output voltage to a photon count via the calibrated
/// bins. Returns the count and a calibration-drift warning when the raw
/// result was negative before clamping.
pub fn snspd_count_from_voltage(v: f64, det: &Snspd) -> (u64, bool) {
    let raw = (v - det.bin_offset_v) / det.bin_step_v;
    let rounded = raw.round();
    if rounded < 0.0 {
        (0, true)
    } else {
        (rounded as u64, false)
    }
}

/// Homodyne photocurrent, proportional to the signal and LO fields.
pub fn coherent_photocurrent(e_sig: f64, e_lo: f64) -> f64 {
    e_sig * e_lo
}

/// Charge accumulated from dark current over a window.
pub fn dark_charge(dark_current_a: f64, window_s: f64) -> f64 {
    dark_current_a * window_s
}

/// Named detector presets with datasheet-derived parameters.
pub mod presets {
    use super::*;

    /// Thorlabs PDA10CS amplified InGaAs receiver, 30 dB gain setting.
    pub fn pda10cs() -> DetectorModel {
        DetectorModel::AmplifiedTia(AmplifiedTia {
            v_rms: 300e-6,
            bandwidth_hz: 775e3,
            gain_v_per_a: 2.4e4,
            responsivity_a_per_w: 1.0,
            coupling_efficiency: 1.0,
            termination_factor: 1.0,
        })
    }

    /// Koheron PD100-DC. The factor of 2 covers the 50 ohm digitizer
    /// termination seen at its output.
    pub fn koheron_pd100() -> DetectorModel {
        DetectorModel::AmplifiedTia(AmplifiedTia {
            v_rms: 286e-6,
            bandwidth_hz: 110e6,
            gain_v_per_a: 3900.0,
            responsivity_a_per_w: 0.9,
            coupling_efficiency: 1.0,
            termination_factor: 2.0,
        })
    }

    /// Thorlabs APD430C linear avalanche receiver, M = 20, with the 50%
    /// fiber-faceplate coupling it had on the bench.
    pub fn apd430c() -> DetectorModel {
        DetectorModel::LinearApd(LinearApd {
            tia: AmplifiedTia {
                v_rms: 3e-3,
                bandwidth_hz: 400e6,
                gain_v_per_a: 1e4,
                responsivity_a_per_w: 0.9,
                coupling_efficiency: 0.5,
                termination_factor: 1.0,
            },
            internal_gain: 20.0,
            bias_voltage_v: 40.0,
        })
    }

    /// 10 pF integrating receiver at the ideal kTC readout floor (~20 uV).
    pub fn time_integrator_10pf() -> DetectorModel {
        DetectorModel::TimeIntegrator(TimeIntegrator {
            capacitance_f: 10e-12,
            temperature_k: 300.0,
            quantum_efficiency: 0.8,
            readout_noise_volts: None,
            series_resistance_ohm: 300e3,
            switch_offset_v: 500e-6,
            dark_current_a: 50e-12,
        })
    }

    /// The bench 10 pF integrator, limited by internal technical noise to
    /// 220 uV of readout noise.
    pub fn time_integrator_10pf_measured() -> DetectorModel {
        match time_integrator_10pf() {
            DetectorModel::TimeIntegrator(mut d) => {
                d.readout_noise_volts = Some(220e-6);
                DetectorModel::TimeIntegrator(d)
            }
            _ => unreachable!(),
        }
    }

    /// Forward-looking 1 fF receiver: single-photon-scale thermal floor.
    pub fn time_integrator_1ff() -> DetectorModel {
        DetectorModel::TimeIntegrator(TimeIntegrator {
            capacitance_f: 1e-15,
            temperature_k: 300.0,
            quantum_efficiency: 0.8,
            readout_noise_volts: None,
            series_resistance_ohm: 300e3,
            switch_offset_v: 0.0,
            dark_current_a: 0.0,
        })
    }

    /// WSi nanowire single-photon detector behind the voltage integrator.
    pub fn snspd() -> DetectorModel {
        DetectorModel::Snspd(Snspd {
            quantum_efficiency: 0.9,
            dark_count_rate_hz: 1000.0,
            saturation_rate_hz: 1e6,
            bin_offset_v: 0.02,
            bin_step_v: 0.005,
        })
    }

    /// Shot-noise-limited homodyne receiver with a 1 mW local oscillator.
    pub fn coherent_homodyne() -> DetectorModel {
        DetectorModel::CoherentHomodyne(CoherentHomodyne {
            lo_power_w: 1e-3,
            quantum_efficiency: 0.9,
        })
    }

    /// Look a preset up by its CLI name.
    pub fn by_name(name: &str) -> Option<DetectorModel> {
        Some(match name {
            "pda10cs" => pda10cs(),
            "koheron-pd100" | "koheron_pd100" => koheron_pd100(),
            "apd430c" => apd430c(),
            "time-integrator-10pf" | "time_integrator_10pf" => time_integrator_10pf(),
            "time-integrator-10pf-measured" | "time_integrator_10pf_measured" => {
                time_integrator_10pf_measured()
            }
            "time-integrator-1ff" | "time_integrator_1ff" => time_integrator_1ff(),
            "snspd" => snspd(),
            "coherent-homodyne" | "coherent_homodyne" => coherent_homodyne(),
            _ => return None,
        })
    }

    pub const NAMES: &[&str] = &[
        "pda10cs",
        "koheron-pd100",
        "apd430c",
        "time-integrator-10pf",
        "time-integrator-10pf-measured",
        "time-integrator-1ff",
        "snspd",
        "coherent-homodyne",
    ];
}
