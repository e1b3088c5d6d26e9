//! Float <-> optical intensity mapping: calibration fitting, linear
//! encode/decode, negative-number splitting, and the shifted-zero error
//! analysis.
//!
//! Encoding follows the two-stage scheme used on real modulator hardware:
//! a linear map takes a float in [float_min, float_max] to a target
//! intensity in [i_min, i_max], then a fitted cubic converts the target
//! intensity to a drive voltage. The voltage sweep of the modulator (its
//! transfer curve) closes the loop back to a physical intensity.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Measured modulator transfer: (drive voltage, transmitted intensity)
/// samples sorted by voltage.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransferCurve {
    pub samples: Vec<(f64, f64)>,
}

impl TransferCurve {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        let curve = TransferCurve { samples };
        curve.validate()?;
        Ok(curve)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < 4 {
            return Err(Error::calibration(format!(
                "transfer curve needs >= 4 samples, got {}",
                self.samples.len()
            )));
        }
        if self.samples.iter().any(|&(_, i)| i < 0.0 || !i.is_finite()) {
            return Err(Error::calibration("transfer curve has negative or non-finite intensity"));
        }
        if self.samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::calibration("transfer curve voltages must be strictly increasing"));
        }
        Ok(())
    }

    /// Identity transfer I = V sampled on [0, 1].
    pub fn linear(n: usize) -> Self {
        let samples = (0..n)
            .map(|k| {
                let v = k as f64 / (n - 1) as f64;
                (v, v)
            })
            .collect();
        TransferCurve { samples }
    }

    /// Interferometric raised-sine transfer I = (1 - cos(pi V)) / 2 on [0, 1].
    pub fn raised_sine(n: usize) -> Self {
        let samples = (0..n)
            .map(|k| {
                let v = k as f64 / (n - 1) as f64;
                (v, 0.5 * (1.0 - (std::f64::consts::PI * v).cos()))
            })
            .collect();
        TransferCurve { samples }
    }

    /// Index range [lo, hi] (inclusive) between the intensity extrema.
    pub fn monotone_section(&self) -> Result<(usize, usize)> {
        let mut imin = 0;
        let mut imax = 0;
        for (k, &(_, i)) in self.samples.iter().enumerate() {
            if i < self.samples[imin].1 {
                imin = k;
            }
            if i > self.samples[imax].1 {
                imax = k;
            }
        }
        let (lo, hi) = if imin <= imax { (imin, imax) } else { (imax, imin) };
        if hi - lo < 3 {
            return Err(Error::calibration("monotone section has fewer than 4 samples"));
        }
        let inc = self.samples[hi].1 > self.samples[lo].1;
        for w in self.samples[lo..=hi].windows(2) {
            let rising = w[1].1 > w[0].1;
            if rising != inc {
                return Err(Error::calibration(format!(
                    "transfer not strictly monotone between extrema near V={}",
                    w[0].0
                )));
            }
        }
        Ok((lo, hi))
    }

    /// Physical intensity produced by a drive voltage (linear interpolation,
    /// clamped to the swept range).
    pub fn intensity_at(&self, v: f64) -> f64 {
        let s = &self.samples;
        if v <= s[0].0 {
            return s[0].1;
        }
        if v >= s[s.len() - 1].0 {
            return s[s.len() - 1].1;
        }
        let k = s.partition_point(|&(sv, _)| sv <= v) - 1;
        let (v0, i0) = s[k];
        let (v1, i1) = s[k + 1];
        i0 + (i1 - i0) * (v - v0) / (v1 - v0)
    }
}

/// Fitted encoder plus decode line endpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodecCalibration {
    /// Power-basis cubic v(i) = c0 + c1 i + c2 i^2 + c3 i^3 mapping a desired
    /// intensity to drive voltage.
    pub encoder_poly: [f64; 4],
    pub i_min: f64,
    pub i_max: f64,
    pub float_min: f64,
    pub float_max: f64,
    /// Measured receiver reading when all modulators encode float 0.
    pub reading_at_zero: f64,
    /// Measured receiver reading for a single full-scale product.
    pub reading_at_one: f64,
    /// Full-scale decode value of an M-step window; `None` means M.
    pub integration_scale: Option<f64>,
}

impl CodecCalibration {
    /// Identity calibration on [0, 1]: encode and decode are exact lines.
    pub fn ideal() -> Self {
        CodecCalibration {
            encoder_poly: [0.0, 1.0, 0.0, 0.0],
            i_min: 0.0,
            i_max: 1.0,
            float_min: 0.0,
            float_max: 1.0,
            reading_at_zero: 0.0,
            reading_at_one: 1.0,
            integration_scale: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.i_min >= self.i_max {
            return Err(Error::calibration("i_min must be < i_max"));
        }
        if self.reading_at_zero == self.reading_at_one {
            return Err(Error::calibration("degenerate decode line: equal endpoint readings"));
        }
        Ok(())
    }

    /// Drive voltage for a desired intensity.
    pub fn drive_voltage(&self, intensity: f64) -> f64 {
        let [c0, c1, c2, c3] = self.encoder_poly;
        ((c3 * intensity + c2) * intensity + c1) * intensity + c0
    }
}

/// Fit the encoder cubic from a measured voltage sweep.
///
/// The cubic maps intensity -> voltage over the strictly monotone section
/// between the transfer extrema. Samples are weighted by their local
/// intensity spacing so the fit minimizes round-trip intensity error
/// uniformly over the intensity range rather than over the voltage sweep.
pub fn fit_transfer(curve: &TransferCurve) -> Result<CodecCalibration> {
    curve.validate()?;
    let (lo, hi) = curve.monotone_section()?;
    let sec = &curve.samples[lo..=hi];

    let i_lo = sec.iter().map(|&(_, i)| i).fold(f64::INFINITY, f64::min);
    let i_hi = sec.iter().map(|&(_, i)| i).fold(f64::NEG_INFINITY, f64::max);
    let span = i_hi - i_lo;
    if span <= 0.0 {
        return Err(Error::calibration("zero intensity span on monotone section"));
    }

    // Chebyshev design on t in [-1,1]; weights = local |dI| spacing.
    let t_of = |i: f64| (2.0 * i - (i_hi + i_lo)) / span;
    let mut ata = [[0.0f64; 4]; 4];
    let mut atb = [0.0f64; 4];
    for (k, &(v, i)) in sec.iter().enumerate() {
        let prev = if k == 0 { i } else { sec[k - 1].1 };
        let next = if k + 1 == sec.len() { i } else { sec[k + 1].1 };
        let w = ((next - prev).abs() / 2.0).max(span * 1e-6);
        let t = t_of(i);
        let basis = [1.0, t, 2.0 * t * t - 1.0, 4.0 * t * t * t - 3.0 * t];
        for r in 0..4 {
            for c in 0..4 {
                ata[r][c] += w * basis[r] * basis[c];
            }
            atb[r] += w * basis[r] * v;
        }
    }
    let cheb = solve4(ata, atb)
        .ok_or_else(|| Error::calibration("singular system while fitting transfer cubic"))?;

    // Chebyshev -> power basis in t, then compose with t = a*i + b.
    let pt = [
        cheb[0] - cheb[2],
        cheb[1] - 3.0 * cheb[3],
        2.0 * cheb[2],
        4.0 * cheb[3],
    ];
    let a = 2.0 / span;
    let b = -(i_hi + i_lo) / span;
    let encoder_poly = compose_affine(pt, a, b);

    Ok(CodecCalibration {
        encoder_poly,
        i_min: i_lo,
        i_max: i_hi,
        float_min: 0.0,
        float_max: 1.0,
        reading_at_zero: 0.0,
        reading_at_one: 1.0,
        integration_scale: None,
    })
}

/// Gaussian elimination with partial pivoting for the 4x4 normal equations.
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let mut acc = b[r];
        for c in r + 1..4 {
            acc -= a[r][c] * x[c];
        }
        x[r] = acc / a[r][r];
    }
    Some(x)
}

/// Expand p(a*i + b) for a power-basis cubic p.
fn compose_affine(p: [f64; 4], a: f64, b: f64) -> [f64; 4] {
    let (a2, a3) = (a * a, a * a * a);
    let (b2, b3) = (b * b, b * b * b);
    [
        p[0] + p[1] * b + p[2] * b2 + p[3] * b3,
        p[1] * a + 2.0 * p[2] * a * b + 3.0 * p[3] * a * b2,
        p[2] * a2 + 3.0 * p[3] * a2 * b,
        p[3] * a3,
    ]
}

/// Linear float -> intensity map over the calibrated ranges.
///
/// Out-of-range floats are an error unless `clip` is set; clipping is an
/// explicit caller option, never silent.
pub fn float_to_intensity(f: f64, cal: &CodecCalibration, clip: bool) -> Result<f64> {
    let f = if clip {
        f.clamp(cal.float_min, cal.float_max)
    } else {
        if f < cal.float_min || f > cal.float_max || !f.is_finite() {
            return Err(Error::Range {
                value: f,
                min: cal.float_min,
                max: cal.float_max,
            });
        }
        f
    };
    let slope = (cal.i_max - cal.i_min) / (cal.float_max - cal.float_min);
    Ok(slope * f + cal.i_min - slope * cal.float_min)
}

/// Affine decode: reading_at_zero maps to 0, an M-step full-scale window maps
/// to the integration scale (default M).
pub fn decode_reading(reading: f64, cal: &CodecCalibration, integrated_over: usize) -> Result<f64> {
    cal.validate()?;
    let m = integrated_over.max(1) as f64;
    let scale = cal.integration_scale.unwrap_or(m);
    let per_mac = cal.reading_at_one - cal.reading_at_zero;
    Ok(scale * (reading - cal.reading_at_zero) / (per_mac * m))
}

/// Quantize a normalized value in [0,1] to 2^bits uniform levels.
pub fn quantize_unit(v: f64, bits: u8) -> f64 {
    let levels = (1u64 << bits) as f64 - 1.0;
    (v.clamp(0.0, 1.0) * levels).round() / levels
}

/// Non-negative decomposition of a signed vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SignedSplit {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// Split into element-wise positive/negative parts so that
/// `original == positive - negative` and the parts never overlap.
pub fn split_signed(x: &[f64]) -> SignedSplit {
    let positive = x.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
    let negative = x.iter().map(|&v| if v < 0.0 { -v } else { 0.0 }).collect();
    SignedSplit { positive, negative }
}

/// Term-by-term account of calibration-offset error for the two encodings.
#[derive(Clone, Debug)]
pub struct ShiftedErrorReport {
    /// Error of the absence-of-photons-zero encoding.
    pub unshifted_error: f64,
    /// Error of the shifted-zero encoding (zero at mid-transmission).
    pub shifted_error: f64,
    /// Sum of eps * x_i terms.
    pub eps_x: f64,
    /// Sum of eps * w_i terms.
    pub eps_w: f64,
    /// Sum of eps^2 terms.
    pub eps_sq: f64,
    /// Sum of eps * |x_min| terms (shifted scheme only).
    pub eps_xmin: f64,
    /// Sum of eps * |w_min| terms (shifted scheme only).
    pub eps_wmin: f64,
}

/// Accumulated-product error when both modulators carry a calibration offset
/// `eps`, for the plain encoding and for the shifted-zero encoding that
/// moves float zero to mid-transmission by the range minima.
///
/// Both expansions are exact: they equal the brute-force difference between
/// the perturbed and clean accumulated products of their encodings.
pub fn shifted_encoding_error(
    x: &[f64],
    w: &[f64],
    eps: f64,
    x_min: f64,
    w_min: f64,
) -> Result<ShiftedErrorReport> {
    if x.len() != w.len() {
        return Err(Error::invalid("shifted_encoding_error: length mismatch"));
    }
    let n = x.len() as f64;
    let sx = -x_min; // shift magnitude moving x_min to zero transmission
    let sw = -w_min;

    let eps_x: f64 = x.iter().map(|&v| eps * v).sum();
    let eps_w: f64 = w.iter().map(|&v| eps * v).sum();
    let eps_sq = n * eps * eps;
    let eps_xmin = n * eps * sx;
    let eps_wmin = n * eps * sw;

    Ok(ShiftedErrorReport {
        unshifted_error: eps_x + eps_w + eps_sq,
        shifted_error: eps_x + eps_w + eps_sq + eps_xmin + eps_wmin,
        eps_x,
        eps_w,
        eps_sq,
        eps_xmin,
        eps_wmin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use approx::assert_relative_eq;

    #[test]
    fn linear_transfer_fits_identity() {
        let cal = fit_transfer(&TransferCurve::linear(51)).unwrap();
        assert_relative_eq!(cal.encoder_poly[0], 0.0, epsilon = 1e-9);
        assert_relative_eq!(cal.encoder_poly[1], 1.0, epsilon = 1e-9);
        assert!(cal.encoder_poly[2].abs() < 1e-9);
        assert!(cal.encoder_poly[3].abs() < 1e-9);
    }

    #[test]
    fn exact_cubic_is_recovered() {
        // voltage is a cubic in intensity; sampling is monotone in both
        let c = [0.1, 0.8, 0.3, 0.2];
        let samples: Vec<(f64, f64)> = (0..60)
            .map(|k| {
                let i = k as f64 / 59.0;
                let v = c[0] + c[1] * i + c[2] * i * i + c[3] * i * i * i;
                (v, i)
            })
            .collect();
        let cal = fit_transfer(&TransferCurve::new(samples).unwrap()).unwrap();
        for (got, want) in cal.encoder_poly.iter().zip(&c) {
            assert_relative_eq!(got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn raised_sine_round_trip_under_one_percent_midrange() {
        let curve = TransferCurve::raised_sine(201);
        let cal = fit_transfer(&curve).unwrap();
        // dense numeric inversion oracle: drive through fitted cubic, read
        // physical intensity off the sampled curve
        let mut worst: f64 = 0.0;
        for k in 0..=1800 {
            let target = 0.05 + 0.9 * k as f64 / 1800.0;
            let v = cal.drive_voltage(target);
            let actual = curve.intensity_at(v);
            worst = worst.max((actual - target).abs());
        }
        assert!(worst < 0.01, "max round-trip error {worst}");
    }

    #[test]
    fn non_monotone_and_short_curves_are_rejected() {
        let zigzag = TransferCurve {
            samples: vec![(0.0, 0.0), (0.2, 0.5), (0.4, 0.3), (0.6, 0.8), (0.8, 1.0)],
        };
        assert!(fit_transfer(&zigzag).is_err());
        assert!(TransferCurve::new(vec![(0.0, 0.0), (1.0, 1.0)]).is_err());
    }

    #[test]
    fn encode_endpoints_and_midpoint() {
        let mut cal = CodecCalibration::ideal();
        cal.i_min = 0.2;
        cal.i_max = 0.8;
        assert_relative_eq!(float_to_intensity(0.0, &cal, false).unwrap(), 0.2);
        assert_relative_eq!(float_to_intensity(1.0, &cal, false).unwrap(), 0.8);
        assert_relative_eq!(float_to_intensity(0.5, &cal, false).unwrap(), 0.5);
    }

    #[test]
    fn encode_out_of_range_errors_unless_clipped() {
        let cal = CodecCalibration::ideal();
        assert!(float_to_intensity(1.5, &cal, false).is_err());
        assert_relative_eq!(float_to_intensity(1.5, &cal, true).unwrap(), 1.0);
        assert_relative_eq!(float_to_intensity(-0.3, &cal, true).unwrap(), 0.0);
    }

    #[test]
    fn encode_is_monotone() {
        let cal = CodecCalibration::ideal();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=100 {
            let i = float_to_intensity(k as f64 / 100.0, &cal, false).unwrap();
            assert!(i >= prev);
            prev = i;
        }
    }

    #[test]
    fn decode_endpoints() {
        let cal = CodecCalibration::ideal();
        assert_relative_eq!(decode_reading(cal.reading_at_zero, &cal, 1).unwrap(), 0.0);
        assert_relative_eq!(decode_reading(cal.reading_at_one, &cal, 1).unwrap(), 1.0);
    }

    #[test]
    fn decode_rejects_degenerate_calibration() {
        let mut cal = CodecCalibration::ideal();
        cal.reading_at_one = cal.reading_at_zero;
        assert!(decode_reading(0.5, &cal, 1).is_err());
    }

    #[test]
    fn decode_noiseless_integration_matches_dot() {
        // u,v in [0,1]^100: decode of the summed per-symbol readings == u.v
        let cal = CodecCalibration::ideal();
        let mut r = StreamRng::derive(5, &[1]);
        let u: Vec<f64> = (0..100).map(|_| r.next_f64()).collect();
        let v: Vec<f64> = (0..100).map(|_| r.next_f64()).collect();
        let m = 100;
        let reading: f64 = u
            .iter()
            .zip(&v)
            .map(|(&a, &b)| {
                let ia = float_to_intensity(a, &cal, false).unwrap();
                let ib = float_to_intensity(b, &cal, false).unwrap();
                cal.reading_at_zero + ia * ib * (cal.reading_at_one - cal.reading_at_zero)
            })
            .sum::<f64>()
            - (m as f64 - 1.0) * cal.reading_at_zero;
        let decoded = decode_reading(reading, &cal, m).unwrap();
        let want: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert_relative_eq!(decoded, want, max_relative = 1e-6);
    }

    #[test]
    fn split_signed_basics() {
        let s = split_signed(&[-1.0, 2.0]);
        assert_eq!(s.positive, vec![0.0, 2.0]);
        assert_eq!(s.negative, vec![1.0, 0.0]);

        let allpos = split_signed(&[0.5, 0.0, 3.0]);
        assert!(allpos.negative.iter().all(|&v| v == 0.0));
        // idempotent on non-negative input
        let again = split_signed(&allpos.positive);
        assert_eq!(again.positive, allpos.positive);
    }

    #[test]
    fn four_pass_signed_dot_reconstructs() {
        let mut r = StreamRng::derive(9, &[2]);
        let w: Vec<f64> = (0..64).map(|_| r.next_f64() * 2.0 - 1.0).collect();
        let x: Vec<f64> = (0..64).map(|_| r.next_f64() * 2.0 - 1.0).collect();
        let sw = split_signed(&w);
        let sx = split_signed(&x);
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
        let reconstructed = dot(&sw.positive, &sx.positive) + dot(&sw.negative, &sx.negative)
            - dot(&sw.positive, &sx.negative)
            - dot(&sw.negative, &sx.positive);
        let direct = dot(&w, &x);
        assert!((reconstructed - direct).abs() < 1e-12);
    }

    #[test]
    fn shifted_error_zero_eps() {
        let rep = shifted_encoding_error(&[0.4, 0.0], &[0.1, 0.9], 0.0, -1.0, -1.0).unwrap();
        assert_eq!(rep.unshifted_error, 0.0);
        assert_eq!(rep.shifted_error, 0.0);
    }

    #[test]
    fn shifted_error_single_element() {
        let rep = shifted_encoding_error(&[0.5], &[0.5], 0.01, 0.0, 0.0).unwrap();
        assert_relative_eq!(rep.unshifted_error, 0.0101, epsilon = 1e-15);
        assert_relative_eq!(rep.shifted_error, 0.0101, epsilon = 1e-15);
    }

    #[test]
    fn both_expansions_match_brute_force() {
        let mut r = StreamRng::derive(31, &[7]);
        let n = 100;
        // 90% sparse vectors
        let gen = |r: &mut StreamRng| {
            (0..n)
                .map(|_| if r.next_f64() < 0.9 { 0.0 } else { r.next_f64() })
                .collect::<Vec<f64>>()
        };
        let x = gen(&mut r);
        let w = gen(&mut r);
        let eps = 0.01;
        let (x_min, w_min) = (-1.0, -1.0);
        let rep = shifted_encoding_error(&x, &w, eps, x_min, w_min).unwrap();

        let clean: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
        let pert_unshifted: f64 = x.iter().zip(&w).map(|(a, b)| (a + eps) * (b + eps)).sum();
        assert!((rep.unshifted_error - (pert_unshifted - clean)).abs() < 1e-12);

        let (sx, sw) = (-x_min, -w_min);
        let clean_shift: f64 = x.iter().zip(&w).map(|(a, b)| (a + sx) * (b + sw)).sum();
        let pert_shift: f64 = x
            .iter()
            .zip(&w)
            .map(|(a, b)| (a + sx + eps) * (b + sw + eps))
            .sum();
        assert!((rep.shifted_error - (pert_shift - clean_shift)).abs() < 1e-12);

        // fat zero: shift terms dominate the data-dependent terms
        assert!(rep.shifted_error.abs() > rep.unshifted_error.abs());
        assert!(rep.eps_xmin > rep.eps_x * 5.0);
        assert!(rep.eps_wmin > rep.eps_w * 5.0);
    }

    #[test]
    fn quantize_unit_levels() {
        assert_eq!(quantize_unit(0.0, 8), 0.0);
        assert_eq!(quantize_unit(1.0, 8), 1.0);
        let q = quantize_unit(0.5, 1);
        assert!(q == 0.0 || q == 1.0);
        assert!((quantize_unit(0.37, 8) - 0.37).abs() <= 0.5 / 255.0 + 1e-12);
    }
}
