//! End-to-end simulation: weight broadcast, client-side analog
//! multiply-accumulate, detector noise, and decode, composed into dot
//! products, full-model inference, precision tests, and energy sweeps.
//!
//! Signal bookkeeping is done in detected-electron units (photon counts for
//! the SNSPD). A window readout turns a stream of non-negative symbol
//! products into electrons through the detector model, injects the enabled
//! noise sources, and decodes back to MAC units through the affine
//! calibration line. Signed values run as separate non-negative passes that
//! are combined digitally.

use crate::channel::{
    apply_temporal_crosstalk, edfa_output, rin_dimensionless, AmplifierConfig, LinkConfig,
};
use crate::codec::{quantize_unit, split_signed};
use crate::constants::{photon_energy, ELECTRON_CHARGE};
use crate::error::{Error, Result};
use crate::model::{argmax, chunk_columns, Dataset, Model};
use crate::receiver::{sample_shot, DetectorModel, NoiseBreakdown};
use crate::rng::StreamRng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which noise sources are injected.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NoiseFlags {
    pub shot: bool,
    pub thermal: bool,
    pub dark: bool,
    pub ase: bool,
    pub rin: bool,
}

impl NoiseFlags {
    pub fn all_on() -> Self {
        NoiseFlags {
            shot: true,
            thermal: true,
            dark: true,
            ase: true,
            rin: true,
        }
    }

    pub fn all_off() -> Self {
        NoiseFlags {
            shot: false,
            thermal: false,
            dark: false,
            ase: false,
            rin: false,
        }
    }

    pub fn any(&self) -> bool {
        self.shot || self.thermal || self.dark || self.ase || self.rin
    }
}

/// How `e_mac_target` is anchored to the symbol stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyReference {
    /// A full-scale product (1.0 * 1.0) deposits e_mac_target.
    FullScale,
    /// The workload-averaged MAC deposits e_mac_target, matching how
    /// receiver sensitivity is quoted from measured energy totals.
    MeanMac,
}

/// Full experiment description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub link: LinkConfig,
    pub detector: DetectorModel,
    pub amplifier: Option<AmplifierConfig>,
    pub n_wavelengths: usize,
    /// MACs accumulated per integration window.
    pub window_macs: usize,
    /// Optical energy per MAC at the detector (J).
    pub e_mac_target: f64,
    pub energy_reference: EnergyReference,
    pub dac_bits: Option<u8>,
    pub adc_bits: Option<u8>,
    pub noise: NoiseFlags,
    /// Temporal crosstalk factor; `None` disables the kernel entirely.
    pub crosstalk_chi: Option<f64>,
    /// Clip out-of-range floats at the encoder instead of erroring.
    pub clip_encoding: bool,
    pub seed: u64,
    pub trials: usize,
}

impl Scenario {
    /// Noiseless, unquantized bench scenario: the oracle path.
    pub fn ideal() -> Self {
        Scenario {
            link: LinkConfig::ideal(),
            detector: crate::receiver::presets::time_integrator_10pf(),
            amplifier: None,
            n_wavelengths: 16,
            window_macs: 100,
            e_mac_target: 1e-15,
            energy_reference: EnergyReference::FullScale,
            dac_bits: None,
            adc_bits: None,
            noise: NoiseFlags::all_off(),
            crosstalk_chi: None,
            clip_encoding: false,
            seed: 42,
            trials: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.detector.validate()?;
        if let Some(a) = &self.amplifier {
            a.validate()?;
        }
        if self.n_wavelengths == 0 || self.window_macs == 0 {
            return Err(Error::config("scenario: N and M must be >= 1"));
        }
        if self.e_mac_target <= 0.0 || !self.e_mac_target.is_finite() {
            return Err(Error::config("scenario: e_mac_target must be positive"));
        }
        if let Some(chi) = self.crosstalk_chi {
            if !(0.0..1.0).contains(&chi) {
                return Err(Error::config(format!("scenario: chi {chi} outside [0,1)")));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("scenario: trials must be >= 1"));
        }
        Ok(())
    }
}

/// Fixed per-run context derived from a scenario.
struct Frontend {
    sc: Scenario,
    /// Full-scale optical energy per MAC at the detector.
    e_fs: f64,
    hv: f64,
    /// Per-symbol relative rms intensity fluctuation from laser RIN.
    rin_sigma: f64,
    /// Mean ASE photons arriving per symbol slot.
    ase_photons_per_symbol: f64,
    chi: f64,
}

impl Frontend {
    fn new(sc: &Scenario, mean_product: f64) -> Result<Frontend> {
        sc.validate()?;
        let hv = photon_energy(sc.link.wavelength_m());
        let e_fs = match sc.energy_reference {
            EnergyReference::FullScale => sc.e_mac_target,
            EnergyReference::MeanMac => {
                if mean_product <= 0.0 {
                    return Err(Error::config(
                        "mean-MAC energy reference needs a positive measured mean product",
                    ));
                }
                sc.e_mac_target / mean_product
            }
        };
        let rin_sigma = match sc.link.rin_dbc_per_hz {
            Some(dbc) if sc.noise.rin => {
                rin_dimensionless(dbc, 1.0 / sc.link.symbol_period_s).sqrt()
            }
            _ => 0.0,
        };
        let ase_photons_per_symbol = match &sc.amplifier {
            Some(amp) => {
                let out = edfa_output(0.0, amp, sc.link.wavelength_m());
                out.p_ase * sc.link.symbol_period_s / hv
            }
            None => 0.0,
        };
        Ok(Frontend {
            sc: sc.clone(),
            e_fs,
            hv,
            rin_sigma,
            ase_photons_per_symbol,
            chi: sc.crosstalk_chi.unwrap_or(0.0),
        })
    }

    /// Full-scale photons per MAC arriving at the detector.
    fn photons_full_scale(&self) -> f64 {
        self.e_fs / self.hv
    }

    /// Encode one normalized value to a transmitted intensity in [0,1].
    fn encode(&self, v: f64) -> Result<f64> {
        let v = if self.sc.clip_encoding {
            v.clamp(0.0, 1.0)
        } else {
            if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                return Err(Error::Range {
                    value: v,
                    min: 0.0,
                    max: 1.0,
                });
            }
            v
        };
        Ok(match self.sc.dac_bits {
            Some(bits) => quantize_unit(v, bits),
            None => v,
        })
    }

    /// Intensity products for one pass after encoding and weight-stream
    /// crosstalk; shared by the noisy path and the dry measurement pass.
    fn pass_products(&self, w: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let w_enc: Vec<f64> = w.iter().map(|&v| self.encode(v)).collect::<Result<_>>()?;
        let x_enc: Vec<f64> = x.iter().map(|&v| self.encode(v)).collect::<Result<_>>()?;
        let w_link = if self.chi > 0.0 {
            apply_temporal_crosstalk(&w_enc, self.chi)
        } else {
            w_enc
        };
        Ok(w_link.iter().zip(&x_enc).map(|(a, b)| a * b).collect())
    }
}

/// Detected-electron statistics of one simulated window.
#[derive(Clone, Copy, Debug, Default)]
struct WindowStats {
    macs: u64,
    /// Mean signal photons at the detector (before quantum efficiency).
    photons_mean: f64,
    breakdown: NoiseBreakdown,
    saturation: bool,
}

/// Simulate one integration window over non-negative symbol products.
/// Returns the decoded value in MAC units plus diagnostics.
fn simulate_window(
    fe: &Frontend,
    products: &[f64],
    rng: &mut StreamRng,
) -> Result<(f64, WindowStats)> {
    let sc = &fe.sc;
    let noise = &sc.noise;
    let n_fs = fe.photons_full_scale();
    let window_s = sc.window_macs as f64 * sc.link.symbol_period_s;
    let filled = products.len();
    let sum_p: f64 = products.iter().sum();
    let sum_p2: f64 = products.iter().map(|p| p * p).sum();

    let mut stats = WindowStats {
        macs: filled as u64,
        photons_mean: sum_p * n_fs,
        ..WindowStats::default()
    };

    // Per-detector electron bookkeeping: slope (electrons per full-scale
    // MAC), deterministic window offset, and noise injection.
    let (slope_e, offset_e, mut electrons, quant_span_e): (f64, f64, f64, f64);
    match &sc.detector {
        DetectorModel::TimeIntegrator(det) => {
            let eta = det.quantum_efficiency;
            let s1 = eta * n_fs;
            let signal_mean = eta * sum_p * n_fs;
            let dark_mean = det.dark_current_a * window_s / ELECTRON_CHARGE;
            let ase_mean = eta * fe.ase_photons_per_symbol * sc.window_macs as f64;
            let mut e = dark_mean + ase_mean;

            e += draw_counts(signal_mean, noise.shot, &mut stats.breakdown.shot, rng);
            if dark_mean > 0.0 {
                let extra = draw_counts(dark_mean, noise.dark, &mut stats.breakdown.dark, rng);
                e += extra - dark_mean;
            }
            if ase_mean > 0.0 {
                let extra = draw_counts(ase_mean, noise.ase, &mut stats.breakdown.ase, rng);
                e += extra - ase_mean;
            }
            if fe.rin_sigma > 0.0 {
                let sigma = eta * n_fs * fe.rin_sigma * sum_p2.sqrt();
                e += draw_gauss(sigma, &mut stats.breakdown.rin, rng);
            }
            if noise.thermal {
                let sigma_e = det.readout_noise() * det.capacitance_f / ELECTRON_CHARGE;
                e += draw_gauss(sigma_e, &mut stats.breakdown.thermal, rng);
            }
            slope_e = s1;
            offset_e = dark_mean + ase_mean;
            electrons = e;
            quant_span_e = sc.window_macs as f64 * s1;
        }
        DetectorModel::AmplifiedTia(det) | DetectorModel::LinearApd(crate::receiver::LinearApd { tia: det, .. }) => {
            // electrons are referred to the TIA input; internal APD gain
            // scales signal and input-referred noise identically, except
            // where it beats the amplifier floor.
            let gain_extra = match &sc.detector {
                DetectorModel::LinearApd(apd) => apd.internal_gain,
                _ => 1.0,
            };
            let t_sym = sc.link.symbol_period_s;
            let couple = det.coupling_efficiency;
            // full-scale optical power over a symbol -> electrons per symbol
            let s1 = det.responsivity_a_per_w * couple * fe.e_fs / ELECTRON_CHARGE;
            let signal_mean = s1 * sum_p;
            let ase_e =
                det.responsivity_a_per_w * fe.ase_photons_per_symbol * fe.hv / ELECTRON_CHARGE
                    * filled as f64;
            let mut e = ase_e;

            e += draw_counts(signal_mean, noise.shot, &mut stats.breakdown.shot, rng);
            if ase_e > 0.0 {
                let extra = draw_counts(ase_e, noise.ase, &mut stats.breakdown.ase, rng);
                e += extra - ase_e;
            }
            if fe.rin_sigma > 0.0 {
                let sigma = s1 * fe.rin_sigma * sum_p2.sqrt();
                e += draw_gauss(sigma, &mut stats.breakdown.rin, rng);
            }
            if noise.thermal {
                // one amplified sample per filled symbol, summed digitally;
                // input-referred electron noise per sample
                let sigma_sym = det.v_rms * det.termination_factor * t_sym
                    / (det.gain_v_per_a * gain_extra * ELECTRON_CHARGE);
                let sigma = sigma_sym * (filled as f64).sqrt();
                e += draw_gauss(sigma, &mut stats.breakdown.thermal, rng);
            }
            slope_e = s1;
            offset_e = ase_e;
            electrons = e;
            quant_span_e = sc.window_macs as f64 * s1;
        }
        DetectorModel::Snspd(det) => {
            let eta = det.quantum_efficiency;
            let s1 = eta * n_fs;
            let signal_mean = eta * sum_p * n_fs;
            let dark_mean = det.dark_count_rate_hz * window_s;
            let ase_mean = eta * fe.ase_photons_per_symbol * sc.window_macs as f64;
            let mut e = dark_mean + ase_mean;

            let rate = (signal_mean + dark_mean + ase_mean) / window_s;
            if rate > det.saturation_rate_hz {
                stats.saturation = true;
            }

            e += draw_counts(signal_mean, noise.shot, &mut stats.breakdown.shot, rng);
            if dark_mean > 0.0 {
                let extra = draw_counts(dark_mean, noise.dark, &mut stats.breakdown.dark, rng);
                e += extra - dark_mean;
            }
            if ase_mean > 0.0 {
                let extra = draw_counts(ase_mean, noise.ase, &mut stats.breakdown.ase, rng);
                e += extra - ase_mean;
            }
            if fe.rin_sigma > 0.0 {
                let sigma = eta * n_fs * fe.rin_sigma * sum_p2.sqrt();
                e += draw_gauss(sigma, &mut stats.breakdown.rin, rng);
            }
            // photon counting is discrete
            if noise.any() {
                electrons = e.round().max(0.0);
            } else {
                electrons = e;
            }
            slope_e = s1;
            offset_e = dark_mean + ase_mean;
            quant_span_e = 0.0; // no analog ADC in the counting path
        }
        DetectorModel::CoherentHomodyne(det) => {
            let eta = det.quantum_efficiency;
            let t_sym = sc.link.symbol_period_s;
            let n_lo = det.lo_power_w * t_sym / fe.hv;
            // fields carry the encoded values; the beat term is linear in
            // the product
            let s1 = 2.0 * eta * (n_fs * n_lo).sqrt();
            let signal_mean = s1 * sum_p;
            let mut e = 0.0;
            e += signal_mean;
            if noise.shot {
                // LO shot noise dominates; Gaussian limit of the balanced
                // photocurrent difference
                let var = eta * n_lo * filled as f64;
                stats.breakdown.shot = var;
                let normal = Normal::new(0.0, var.sqrt()).unwrap();
                e += normal.sample(rng);
            }
            if fe.rin_sigma > 0.0 {
                let sigma = s1 * fe.rin_sigma * sum_p2.sqrt();
                e += draw_gauss(sigma, &mut stats.breakdown.rin, rng);
            }
            slope_e = s1;
            offset_e = 0.0;
            electrons = e;
            quant_span_e = sc.window_macs as f64 * s1;
        }
    }

    // ADC quantization on the analog readings
    if let (Some(bits), true) = (sc.adc_bits, quant_span_e > 0.0) {
        let step = quant_span_e / ((1u64 << bits) as f64 - 1.0);
        electrons = offset_e + ((electrons - offset_e) / step).round() * step;
    }

    Ok(((electrons - offset_e) / slope_e, stats))
}

fn draw_counts(mean: f64, sample: bool, var_slot: &mut f64, rng: &mut StreamRng) -> f64 {
    if !sample || mean <= 0.0 {
        return mean;
    }
    *var_slot += mean; // Poisson variance equals its mean
    sample_shot(mean, rng) as f64
}

fn draw_gauss(sigma: f64, var_slot: &mut f64, rng: &mut StreamRng) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    *var_slot += sigma * sigma;
    Normal::new(0.0, sigma).unwrap().sample(rng)
}

/// Running totals across many windows.
#[derive(Clone, Copy, Debug, Default)]
pub struct DotStats {
    pub macs: u64,
    pub readouts: u64,
    pub photons_mean: f64,
    pub breakdown_sum: NoiseBreakdown,
    pub saturation: bool,
}

impl DotStats {
    fn absorb(&mut self, w: &WindowStats) {
        self.macs += w.macs;
        self.readouts += 1;
        self.photons_mean += w.photons_mean;
        self.breakdown_sum.thermal += w.breakdown.thermal;
        self.breakdown_sum.shot += w.breakdown.shot;
        self.breakdown_sum.dark += w.breakdown.dark;
        self.breakdown_sum.ase += w.breakdown.ase;
        self.breakdown_sum.rin += w.breakdown.rin;
        self.breakdown_sum.flicker += w.breakdown.flicker;
        self.saturation |= w.saturation;
    }

    fn merge(&mut self, other: &DotStats) {
        self.macs += other.macs;
        self.readouts += other.readouts;
        self.photons_mean += other.photons_mean;
        self.breakdown_sum.thermal += other.breakdown_sum.thermal;
        self.breakdown_sum.shot += other.breakdown_sum.shot;
        self.breakdown_sum.dark += other.breakdown_sum.dark;
        self.breakdown_sum.ase += other.breakdown_sum.ase;
        self.breakdown_sum.rin += other.breakdown_sum.rin;
        self.breakdown_sum.flicker += other.breakdown_sum.flicker;
        self.saturation |= other.saturation;
    }
}

const PASS_SIGNS: [(usize, usize, f64); 4] = [
    (0, 0, 1.0),  // w+ x+
    (0, 1, -1.0), // w+ x-
    (1, 0, -1.0), // w- x+
    (1, 1, 1.0),  // w- x-
];

fn run_pass(
    fe: &Frontend,
    w: &[f64],
    x: &[f64],
    seed_path: &[u64],
    pass_id: u64,
    stats: &mut DotStats,
) -> Result<f64> {
    let products = fe.pass_products(w, x)?;
    let plan = chunk_columns(products.len(), fe.sc.window_macs)?;
    let mut acc = 0.0;
    for (widx, &(lo, hi)) in plan.chunk_ranges.iter().enumerate() {
        let mut path = seed_path.to_vec();
        path.push(pass_id);
        path.push(widx as u64);
        let mut rng = StreamRng::derive(fe.sc.seed, &path);
        let (value, wstats) = simulate_window(fe, &products[lo..hi], &mut rng)?;
        stats.absorb(&wstats);
        acc += value;
    }
    Ok(acc)
}

/// Simulate one signed dot product through the full optical pipeline.
///
/// Signed values run as up to four non-negative passes (a pass is skipped
/// only when its operand part is identically zero, i.e. the hardware never
/// schedules it). Inputs must be normalized to [-1, 1].
fn simulate_dot_with(
    fe: &Frontend,
    w: &[f64],
    x: &[f64],
    seed_path: &[u64],
    stats: &mut DotStats,
) -> Result<f64> {
    if w.len() != x.len() {
        return Err(Error::invalid("simulate_dot: length mismatch"));
    }
    let sw = split_signed(w);
    let sx = split_signed(x);
    let w_parts = [&sw.positive, &sw.negative];
    let x_parts = [&sx.positive, &sx.negative];
    let w_nonzero = [
        sw.positive.iter().any(|&v| v > 0.0),
        sw.negative.iter().any(|&v| v > 0.0),
    ];
    let x_nonzero = [
        sx.positive.iter().any(|&v| v > 0.0),
        sx.negative.iter().any(|&v| v > 0.0),
    ];

    let mut total = 0.0;
    for (pi, &(wi, xi, sign)) in PASS_SIGNS.iter().enumerate() {
        if !w_nonzero[wi] || !x_nonzero[xi] {
            continue;
        }
        total += sign * run_pass(fe, w_parts[wi], x_parts[xi], seed_path, pi as u64, stats)?;
    }
    Ok(total)
}

/// One-shot signed dot product under a scenario. For mean-referenced
/// energy the pass stream itself provides the mean-product estimate.
pub fn simulate_dot(w: &[f64], x: &[f64], sc: &Scenario, seed_path: &[u64]) -> Result<f64> {
    let mean = match sc.energy_reference {
        EnergyReference::FullScale => 1.0,
        EnergyReference::MeanMac => mean_product_of(sc, &[(w, x)])?,
    };
    let fe = Frontend::new(sc, mean)?;
    let mut stats = DotStats::default();
    simulate_dot_with(&fe, w, x, seed_path, &mut stats)
}

/// Simulated matrix-vector product: rows map onto wavelength channels in
/// batches of at most N; each row is an independent dot product.
pub fn simulate_matvec(
    weights: &[f64],
    rows: usize,
    cols: usize,
    x: &[f64],
    sc: &Scenario,
    seed_path: &[u64],
) -> Result<Vec<f64>> {
    if x.len() != cols || weights.len() != rows * cols {
        return Err(Error::invalid("simulate_matvec: dim mismatch"));
    }
    let mean = match sc.energy_reference {
        EnergyReference::FullScale => 1.0,
        EnergyReference::MeanMac => {
            let pairs: Vec<(&[f64], &[f64])> = (0..rows)
                .map(|r| (&weights[r * cols..(r + 1) * cols], x))
                .collect();
            mean_product_of(sc, &pairs)?
        }
    };
    let fe = Frontend::new(sc, mean)?;
    let mut y = vec![0.0; rows];
    let mut stats = DotStats::default();
    for batch in (0..rows).collect::<Vec<_>>().chunks(sc.n_wavelengths) {
        for &r in batch {
            let row = &weights[r * cols..(r + 1) * cols];
            let mut path = seed_path.to_vec();
            path.push(r as u64);
            y[r] = simulate_dot_with(&fe, row, x, &path, &mut stats)?;
        }
    }
    Ok(y)
}

/// Mean encoded product over the scheduled passes of the given (w, x)
/// pairs: the dry measurement used to anchor mean-referenced energy.
fn mean_product_of(sc: &Scenario, pairs: &[(&[f64], &[f64])]) -> Result<f64> {
    let mut dry = sc.clone();
    dry.noise = NoiseFlags::all_off();
    dry.energy_reference = EnergyReference::FullScale;
    let fe = Frontend::new(&dry, 1.0)?;
    let mut sum = 0.0;
    let mut count = 0u64;
    for &(w, x) in pairs {
        let sw = split_signed(w);
        let sx = split_signed(x);
        let w_parts = [&sw.positive, &sw.negative];
        let x_parts = [&sx.positive, &sx.negative];
        for &(wi, xi, _) in &PASS_SIGNS {
            if !w_parts[wi].iter().any(|&v| v > 0.0) || !x_parts[xi].iter().any(|&v| v > 0.0) {
                continue;
            }
            let products = fe.pass_products(w_parts[wi], x_parts[xi])?;
            sum += products.iter().sum::<f64>();
            count += products.len() as u64;
        }
    }
    if count == 0 {
        return Err(Error::config("mean product measurement saw no scheduled MACs"));
    }
    Ok(sum / count as f64)
}

// ---------------------------------------------------------------------------
// Full-model inference
// ---------------------------------------------------------------------------

/// Outcome of one simulated inference run.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub accuracy: f64,
    /// confusion[predicted][true_label]; columns are normalized to sum to 1.
    pub confusion: [[f64; 10]; 10],
    /// Top-1 minus top-2 output per image.
    pub per_image_margins: Vec<f64>,
    pub predictions: Vec<u8>,
    pub photons_per_mac: f64,
    pub photons_per_readout: f64,
    pub macs_total: u64,
    pub readouts_total: u64,
    /// Mean per-readout variance by source, detected-electron units squared.
    pub noise_breakdown: NoiseBreakdown,
    pub saturation_flagged: bool,
}

struct LayerScales {
    w_scale: Vec<f64>,
}

fn layer_scales(model: &Model) -> LayerScales {
    let w_scale = model
        .layers
        .iter()
        .map(|l| {
            l.weights
                .iter()
                .fold(0.0f64, |m, &w| m.max(w.abs()))
                .max(f64::MIN_POSITIVE)
        })
        .collect();
    LayerScales { w_scale }
}

fn infer_one_image(
    fe: &Frontend,
    model: &Model,
    scales: &LayerScales,
    image: &[f64],
    image_idx: u64,
) -> Result<(Vec<f64>, DotStats)> {
    let mut stats = DotStats::default();
    let mut act = image.to_vec();
    for (li, layer) in model.layers.iter().enumerate() {
        let w_scale = scales.w_scale[li];
        let x_scale = act.iter().fold(0.0f64, |m, &v| m.max(v));
        let mut out = vec![0.0; layer.rows];
        if x_scale > 0.0 {
            let x_norm: Vec<f64> = act.iter().map(|&v| v / x_scale).collect();
            let row_order: Vec<usize> = (0..layer.rows).collect();
            for batch in row_order.chunks(fe.sc.n_wavelengths) {
                for &r in batch {
                    let w_norm: Vec<f64> = layer.row(r).iter().map(|&w| w / w_scale).collect();
                    let path = [image_idx, li as u64, r as u64];
                    let y = simulate_dot_with(fe, &w_norm, &x_norm, &path, &mut stats)?;
                    out[r] = y * w_scale * x_scale;
                }
            }
        }
        for (o, b) in out.iter_mut().zip(&layer.bias) {
            *o += b;
        }
        layer.activation.apply(&mut out);
        act = out;
    }
    Ok((act, stats))
}

/// Measure the workload mean product for mean-referenced runs on a small
/// deterministic sample of images.
fn measure_mean_product(sc: &Scenario, model: &Model, data: &Dataset) -> Result<f64> {
    let mut dry = sc.clone();
    dry.noise = NoiseFlags::all_off();
    dry.energy_reference = EnergyReference::FullScale;
    let fe = Frontend::new(&dry, 1.0)?;
    let scales = layer_scales(model);
    let sample = data.len().min(32);
    let mut sum = 0.0;
    let mut count = 0u64;
    for idx in 0..sample {
        // reuse the inference path; photons_mean under full-scale unit
        // energy integrates the encoded products directly
        let mut probe = fe.sc.clone();
        probe.e_mac_target = 1.0;
        let probe_fe = Frontend::new(&probe, 1.0)?;
        let (_, stats) = infer_one_image(&probe_fe, model, &scales, &data.images[idx], idx as u64)?;
        sum += stats.photons_mean * probe_fe.hv; // back to product units
        count += stats.macs;
    }
    if count == 0 {
        return Err(Error::config("mean product measurement saw no MACs"));
    }
    Ok(sum / count as f64)
}

/// Layer-by-layer simulated inference over a dataset; deterministic for a
/// fixed (scenario, seed) regardless of thread count.
pub fn run_inference(model: &Model, data: &Dataset, sc: &Scenario) -> Result<RunReport> {
    model.validate()?;
    sc.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("run_inference: empty dataset"));
    }
    let mean = match sc.energy_reference {
        EnergyReference::FullScale => 1.0,
        EnergyReference::MeanMac => measure_mean_product(sc, model, data)?,
    };
    let fe = Frontend::new(sc, mean)?;
    let scales = layer_scales(model);

    let results: Vec<Result<(Vec<f64>, DotStats)>> = data
        .images
        .par_iter()
        .enumerate()
        .map(|(idx, img)| infer_one_image(&fe, model, &scales, img, idx as u64))
        .collect();

    let mut predictions = Vec::with_capacity(data.len());
    let mut margins = Vec::with_capacity(data.len());
    let mut totals = DotStats::default();
    let mut counts = [[0u64; 10]; 10];
    let mut label_counts = [0u64; 10];
    let mut correct = 0u64;

    for (idx, res) in results.into_iter().enumerate() {
        let (logits, stats) = res?;
        totals.merge(&stats);
        let pred = argmax(&logits);
        let mut sorted = logits.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        margins.push(sorted[0] - sorted.get(1).copied().unwrap_or(sorted[0]));
        let label = data.labels[idx] as usize;
        counts[pred][label] += 1;
        label_counts[label] += 1;
        if pred == label {
            correct += 1;
        }
        predictions.push(pred as u8);
    }

    let mut confusion = [[0.0; 10]; 10];
    for t in 0..10 {
        if label_counts[t] > 0 {
            for p in 0..10 {
                confusion[p][t] = counts[p][t] as f64 / label_counts[t] as f64;
            }
        }
    }

    let readouts = totals.readouts.max(1);
    let macs = totals.macs.max(1);
    Ok(RunReport {
        accuracy: correct as f64 / data.len() as f64,
        confusion,
        per_image_margins: margins,
        predictions,
        photons_per_mac: totals.photons_mean / macs as f64,
        photons_per_readout: totals.photons_mean / readouts as f64,
        macs_total: totals.macs,
        readouts_total: totals.readouts,
        noise_breakdown: NoiseBreakdown {
            thermal: totals.breakdown_sum.thermal / readouts as f64,
            shot: totals.breakdown_sum.shot / readouts as f64,
            dark: totals.breakdown_sum.dark / readouts as f64,
            ase: totals.breakdown_sum.ase / readouts as f64,
            rin: totals.breakdown_sum.rin / readouts as f64,
            flicker: totals.breakdown_sum.flicker / readouts as f64,
        },
        saturation_flagged: totals.saturation,
    })
}

/// One record of an accuracy-vs-energy curve.
#[derive(Clone, Debug)]
pub struct CurvePoint {
    pub e_mac_j: f64,
    pub photons_per_mac: f64,
    pub accuracy: f64,
    pub detector: &'static str,
    pub saturation_flagged: bool,
}

/// Accuracy as a function of per-MAC optical energy over an ascending grid.
pub fn sweep_energy(
    model: &Model,
    data: &Dataset,
    sc: &Scenario,
    e_mac_grid: &[f64],
) -> Result<Vec<CurvePoint>> {
    if e_mac_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("sweep_energy: grid must be sorted ascending"));
    }
    let mut out = Vec::with_capacity(e_mac_grid.len());
    for &e in e_mac_grid {
        let mut point_sc = sc.clone();
        point_sc.e_mac_target = e;
        let report = run_inference(model, data, &point_sc)?;
        out.push(CurvePoint {
            e_mac_j: e,
            photons_per_mac: report.photons_per_mac,
            accuracy: report.accuracy,
            detector: sc.detector.name(),
            saturation_flagged: report.saturation_flagged,
        });
    }
    Ok(out)
}

/// Scalar-product precision report.
#[derive(Clone, Debug)]
pub struct PrecisionReport {
    pub sigma_rms: f64,
    pub residuals: Vec<f64>,
    /// 41-bin histogram of residuals over [-5 sigma, +5 sigma].
    pub histogram: Vec<u64>,
}

/// Uniform random scalar products in [0,1]; reports the rms residual of the
/// optical result against exact floating point.
pub fn precision_test(n_pairs: usize, sc: &Scenario) -> Result<PrecisionReport> {
    if n_pairs < 1 {
        return Err(Error::invalid("precision_test: need at least one pair"));
    }
    let fe = Frontend::new(sc, 1.0)?;
    let residuals: Vec<f64> = (0..n_pairs)
        .into_par_iter()
        .map(|k| {
            let mut gen = StreamRng::derive(sc.seed, &[0x5ca1a5, k as u64]);
            let u = gen.next_f64();
            let v = gen.next_f64();
            let mut stats = DotStats::default();
            let got = simulate_dot_with(&fe, &[u], &[v], &[0x5ca1a5, k as u64], &mut stats)?;
            Ok(got - u * v)
        })
        .collect::<Result<_>>()?;

    let sigma_rms =
        (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let mut histogram = vec![0u64; 41];
    if sigma_rms > 0.0 {
        for &r in &residuals {
            let bin = ((r / sigma_rms + 5.0) / 10.0 * 41.0).floor();
            let bin = (bin.max(0.0) as usize).min(40);
            histogram[bin] += 1;
        }
    }
    Ok(PrecisionReport {
        sigma_rms,
        residuals,
        histogram,
    })
}

/// Monte Carlo photon accumulation over a window of MACs.
#[derive(Clone, Copy, Debug)]
pub struct PhotonTrace {
    pub total_photons: u64,
    pub snr: f64,
}

/// Accumulate `n_macs` shot-noise-limited MACs at the given mean photon
/// number each; SNR is total/sqrt(total) for the shot-limited case.
pub fn photon_trace(n_macs: usize, mean_photons_per_mac: f64, rng: &mut StreamRng) -> PhotonTrace {
    let mut total = 0u64;
    for _ in 0..n_macs {
        total += sample_shot(mean_photons_per_mac, rng);
    }
    PhotonTrace {
        total_photons: total,
        snr: (total as f64).sqrt(),
    }
}

/// Accuracy as a function of the temporal crosstalk factor.
pub fn crosstalk_accuracy_study(
    model: &Model,
    data: &Dataset,
    sc: &Scenario,
    chi_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if chi_grid.iter().any(|&c| !(0.0..0.5).contains(&c)) {
        return Err(Error::invalid("crosstalk study: chi values must lie in [0, 0.5)"));
    }
    let mut out = Vec::with_capacity(chi_grid.len());
    for &chi in chi_grid {
        let mut point = sc.clone();
        point.crosstalk_chi = Some(chi);
        let report = run_inference(model, data, &point)?;
        out.push((chi, report.accuracy));
    }
    Ok(out)
}

/// Repeated identical constant-level windows; returns (mean, std) of the
/// decoded values. Drives the SNR-vs-M scaling measurements.
pub fn window_snr_experiment(sc: &Scenario, level: f64, n_windows: usize) -> Result<(f64, f64)> {
    let fe = Frontend::new(sc, 1.0)?;
    let products = vec![level; sc.window_macs];
    let values: Vec<f64> = (0..n_windows)
        .into_par_iter()
        .map(|k| {
            let mut rng = StreamRng::derive(sc.seed, &[0x57a7, k as u64]);
            let (v, _) = simulate_window(&fe, &products, &mut rng)?;
            Ok(v)
        })
        .collect::<Result<_>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// Sample one window repeatedly and compare empirical variance to the
/// analytic noise budget; returns (empirical, budget) in MAC units squared.
/// ADC quantization is deterministic, not a noise source, so the probe
/// always runs with the converter at full resolution.
pub fn noise_budget_probe(sc: &Scenario, level: f64, n_windows: usize) -> Result<(f64, f64)> {
    let mut sc = sc.clone();
    sc.adc_bits = None;
    let fe = Frontend::new(&sc, 1.0)?;
    let products = vec![level; sc.window_macs];
    let mut values = Vec::with_capacity(n_windows);
    let mut budget_e2 = 0.0;
    for k in 0..n_windows {
        let mut rng = StreamRng::derive(sc.seed, &[0xb0d9e7, k as u64]);
        let (v, stats) = simulate_window(&fe, &products, &mut rng)?;
        values.push(v);
        if k == 0 {
            budget_e2 = stats.breakdown.total();
        }
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    // the breakdown is in detected electrons; convert to MAC units through
    // the detector's electron slope
    let slope_e = detector_slope_e(&fe);
    let budget_mac2 = if slope_e > 0.0 {
        budget_e2 / (slope_e * slope_e)
    } else {
        0.0
    };
    Ok((var, budget_mac2))
}

fn detector_slope_e(fe: &Frontend) -> f64 {
    let n_fs = fe.photons_full_scale();
    match &fe.sc.detector {
        DetectorModel::TimeIntegrator(d) => d.quantum_efficiency * n_fs,
        DetectorModel::AmplifiedTia(d) => {
            d.responsivity_a_per_w * d.coupling_efficiency * fe.e_fs / ELECTRON_CHARGE
        }
        DetectorModel::LinearApd(d) => {
            d.tia.responsivity_a_per_w * d.tia.coupling_efficiency * fe.e_fs / ELECTRON_CHARGE
        }
        DetectorModel::Snspd(d) => d.quantum_efficiency * n_fs,
        DetectorModel::CoherentHomodyne(d) => {
            let n_lo = d.lo_power_w * fe.sc.link.symbol_period_s / fe.hv;
            2.0 * d.quantum_efficiency * (n_fs * n_lo).sqrt()
        }
    }
}

/// Scenario presets used by the CLI and the verification suites.
pub mod presets {
    use super::*;
    use crate::channel::presets as links;
    use crate::receiver::presets as detectors;

    /// Noiseless oracle bench.
    pub fn ideal() -> Scenario {
        Scenario::ideal()
    }

    /// Scalar-product precision bench: measured 10 pF integrator, 8-bit
    /// converters, full-scale window voltage sized so readout noise sits at
    /// about half a percent of full scale.
    pub fn fig3b_precision() -> Scenario {
        Scenario {
            detector: detectors::time_integrator_10pf_measured(),
            window_macs: 1,
            e_mac_target: 4.8e-13,
            dac_bits: Some(8),
            adc_bits: Some(8),
            noise: NoiseFlags::all_on(),
            link: LinkConfig {
                symbol_period_s: 10e-6,
                ..LinkConfig::ideal()
            },
            ..Scenario::ideal()
        }
    }

    /// Local-lab inference at a generous photon budget.
    pub fn local_lab() -> Scenario {
        Scenario {
            link: links::local_lab(),
            detector: detectors::time_integrator_10pf_measured(),
            window_macs: 100,
            e_mac_target: 1e-13,
            energy_reference: EnergyReference::MeanMac,
            dac_bits: Some(8),
            adc_bits: Some(8),
            noise: NoiseFlags::all_on(),
            ..Scenario::ideal()
        }
    }

    /// Deployed two-strand metro fiber run (same client as local_lab; the
    /// extra loss is made up at the launch side).
    pub fn deployed_86km() -> Scenario {
        Scenario {
            link: links::deployed_86km(),
            ..local_lab()
        }
    }

    /// Single-photon regime with the nanowire counter at its 30 kHz clock.
    pub fn snspd_subphoton() -> Scenario {
        Scenario {
            detector: detectors::snspd(),
            window_macs: 100,
            e_mac_target: photon_energy(1550e-9),
            energy_reference: EnergyReference::MeanMac,
            noise: NoiseFlags::all_on(),
            link: LinkConfig {
                symbol_period_s: 1.0 / 30e3,
                ..LinkConfig::ideal()
            },
            ..Scenario::ideal()
        }
    }

    /// Detector-ladder sweep scenario for a named detector preset.
    pub fn ladder(detector: DetectorModel) -> Scenario {
        let symbol_period_s = match &detector {
            DetectorModel::AmplifiedTia(d) => 1.0 / d.bandwidth_hz,
            DetectorModel::LinearApd(d) => 1.0 / d.tia.bandwidth_hz,
            _ => 1e-9,
        };
        Scenario {
            detector,
            window_macs: 100,
            energy_reference: EnergyReference::MeanMac,
            noise: NoiseFlags::all_on(),
            link: LinkConfig {
                symbol_period_s,
                ..LinkConfig::ideal()
            },
            ..Scenario::ideal()
        }
    }

    pub fn by_name(name: &str) -> Option<Scenario> {
        Some(match name {
            "ideal" => ideal(),
            "fig3b-precision" | "fig3b_precision" => fig3b_precision(),
            "local-lab" | "local_lab" => local_lab(),
            "deployed-86km" | "deployed_86km" => deployed_86km(),
            "snspd-subphoton" | "snspd_subphoton" => snspd_subphoton(),
            _ => return None,
        })
    }

    pub const NAMES: &[&str] = &[
        "ideal",
        "fig3b-precision",
        "local-lab",
        "deployed-86km",
        "snspd-subphoton",
    ];
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::matvec_reference;
    use approx::assert_relative_eq;

    #[test]
    fn noiseless_dot_is_exact() {
        let sc = Scenario::ideal();
        let w = vec![1.0; 100];
        let x = vec![1.0; 100];
        let y = simulate_dot(&w, &x, &sc, &[0]).unwrap();
        assert_relative_eq!(y, 100.0, max_relative = 1e-6);
    }

    #[test]
    fn zero_inputs_give_zero() {
        let sc = Scenario::ideal();
        let w = vec![0.0; 50];
        let x = vec![0.5; 50];
        assert_eq!(simulate_dot(&w, &x, &sc, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn signed_dot_matches_reference() {
        let sc = Scenario::ideal();
        let mut r = StreamRng::derive(7, &[1]);
        let w: Vec<f64> = (0..230).map(|_| r.next_f64() * 2.0 - 1.0).collect();
        let x: Vec<f64> = (0..230).map(|_| r.next_f64()).collect();
        let y = simulate_dot(&w, &x, &sc, &[0]).unwrap();
        let want: f64 = w.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert_relative_eq!(y, want, max_relative = 1e-9);
    }

    #[test]
    fn noiseless_matvec_matches_oracle() {
        let sc = Scenario {
            n_wavelengths: 16,
            ..Scenario::ideal()
        };
        let (rows, cols) = (10, 37);
        let mut r = StreamRng::derive(13, &[2]);
        let w: Vec<f64> = (0..rows * cols).map(|_| r.next_f64() * 2.0 - 1.0).collect();
        let x: Vec<f64> = (0..cols).map(|_| r.next_f64()).collect();
        let got = simulate_matvec(&w, rows, cols, &x, &sc, &[0]).unwrap();
        let want = matvec_reference(&w, rows, cols, &x).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_matvec_noiseless() {
        let sc = Scenario::ideal();
        let n = 10;
        let mut ident = vec![0.0; n * n];
        for i in 0..n {
            ident[i * n + i] = 1.0;
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let y = simulate_matvec(&ident, n, n, &x, &sc, &[0]).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn shot_noise_follows_poisson_prediction() {
        // decoded variance of a shot-limited window is (total detected
        // photons) / (detected photons per full-scale MAC)^2
        let mut sc = presets::snspd_subphoton();
        sc.energy_reference = EnergyReference::FullScale;
        sc.e_mac_target = 100.0 * photon_energy(1550e-9);
        sc.noise = NoiseFlags {
            shot: true,
            thermal: false,
            dark: false,
            ase: false,
            rin: false,
        };
        let n = 3000;
        let w = vec![1.0; 100];
        let x = vec![1.0; 100];
        let mut errs = Vec::with_capacity(n);
        for k in 0..n {
            let y = simulate_dot(&w, &x, &sc, &[k as u64]).unwrap();
            errs.push(y - 100.0);
        }
        let var = errs.iter().map(|e| e * e).sum::<f64>() / n as f64;
        let eta = 0.9;
        let per_mac_detected = eta * 100.0;
        let expected_var = eta * 100.0 * 100.0 / (per_mac_detected * per_mac_detected);
        assert!(
            (var - expected_var).abs() / expected_var < 0.15,
            "var {var} vs predicted {expected_var}"
        );
    }

    #[test]
    fn mean_reference_hits_target_flux() {
        let mut sc = presets::snspd_subphoton();
        sc.e_mac_target = photon_energy(1550e-9); // 1 photon per MAC mean
        let w: Vec<f64> = (0..100).map(|k| 0.3 + 0.4 * ((k % 3) as f64) / 2.0).collect();
        let x: Vec<f64> = (0..100).map(|k| 0.1 + 0.8 * ((k % 5) as f64) / 4.0).collect();
        let pairs: Vec<(&[f64], &[f64])> = vec![(&w, &x)];
        let mean = mean_product_of(&sc, &pairs).unwrap();
        let fe = Frontend::new(&sc, mean).unwrap();
        // mean photons per MAC = mean product * full-scale photons
        let achieved = mean * fe.photons_full_scale();
        assert_relative_eq!(achieved, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn determinism_across_calls() {
        let mut sc = presets::fig3b_precision();
        sc.seed = 99;
        let w = vec![0.7; 64];
        let x = vec![0.4; 64];
        let a = simulate_dot(&w, &x, &sc, &[5]).unwrap();
        let b = simulate_dot(&w, &x, &sc, &[5]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = simulate_dot(&w, &x, &sc, &[6]).unwrap();
        assert_ne!(a.to_bits(), c.to_bits());
    }

    #[test]
    fn photon_trace_reference() {
        let mut rng = StreamRng::derive(17, &[0]);
        let mut totals = 0u64;
        let trials = 5000;
        for _ in 0..trials {
            totals += photon_trace(30, 0.5, &mut rng).total_photons;
        }
        let mean = totals as f64 / trials as f64;
        assert!((mean - 15.0).abs() < 0.2, "mean {mean}");
        assert!((mean.sqrt() - 3.9).abs() < 0.1);

        let zero = photon_trace(100, 0.0, &mut rng);
        assert_eq!(zero.total_photons, 0);
    }

    #[test]
    fn precision_noiseless_unquantized_is_tiny() {
        let mut sc = Scenario::ideal();
        sc.window_macs = 1;
        let rep = precision_test(2000, &sc).unwrap();
        assert!(rep.sigma_rms < 1e-6, "sigma {}", rep.sigma_rms);
    }

    #[test]
    fn precision_five_bit_quantization_scale() {
        let mut sc = Scenario::ideal();
        sc.window_macs = 1;
        sc.dac_bits = Some(5);
        let rep = precision_test(20000, &sc).unwrap();
        // residual of q(u)q(v) - uv: two independent uniform quantization
        // errors propagated through the product
        let h = 1.0 / ((1u64 << 5) - 1) as f64;
        let predict = (2.0f64 / 3.0).sqrt() * h / 12f64.sqrt();
        assert!(
            (rep.sigma_rms - predict).abs() / predict < 0.2,
            "sigma {} vs predicted {predict}",
            rep.sigma_rms
        );
    }

    #[test]
    fn window_snr_doubles_with_m_under_thermal_noise() {
        let mut sc = Scenario::ideal();
        sc.detector = crate::receiver::presets::time_integrator_10pf_measured();
        sc.noise = NoiseFlags {
            thermal: true,
            shot: false,
            dark: false,
            ase: false,
            rin: false,
        };
        sc.e_mac_target = 1e-15;
        sc.window_macs = 50;
        let (m1, s1) = window_snr_experiment(&sc, 1.0, 4000).unwrap();
        sc.window_macs = 100;
        let (m2, s2) = window_snr_experiment(&sc, 1.0, 4000).unwrap();
        let snr1 = m1 / s1;
        let snr2 = m2 / s2;
        assert!((snr2 / snr1 - 2.0).abs() < 0.2, "ratio {}", snr2 / snr1);
    }

    #[test]
    fn budget_closure_on_sampled_windows() {
        let mut sc = presets::fig3b_precision();
        sc.window_macs = 20;
        let (empirical, budget) = noise_budget_probe(&sc, 0.8, 30_000).unwrap();
        assert!(
            (empirical - budget).abs() / budget < 0.05,
            "empirical {empirical} vs budget {budget}"
        );
    }
}
