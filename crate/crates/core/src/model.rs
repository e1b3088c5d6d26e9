//! Reference neural network, dataset access, and matrix tiling.
//!
//! The model is a plain fully connected stack; the reference artifact is the
//! 784-100-100-10 digit classifier checked into `data/`. Matrix-vector
//! products here are the exact digital oracle against which every optical
//! simulation is compared.

use crate::error::{Error, Result};
use std::io::Read;
use std::path::Path;

/// Element-wise nonlinearity applied after a layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(&self, v: &mut [f64]) {
        if let Activation::Relu = self {
            for x in v.iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
        }
    }
}

/// One dense layer: row-major weights plus bias.
#[derive(Clone, Debug)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, length rows*cols.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.cols..(r + 1) * self.cols]
    }
}

/// Fully connected network with chained layer dimensions.
#[derive(Clone, Debug)]
pub struct Model {
    pub layers: Vec<Layer>,
}

impl Model {
    /// Validate dimension chaining and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("model has no layers"));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if layer.weights.len() != layer.rows * layer.cols {
                return Err(Error::invalid(format!(
                    "layer {k}: weight array length {} != rows*cols {}",
                    layer.weights.len(),
                    layer.rows * layer.cols
                )));
            }
            if layer.bias.len() != layer.rows {
                return Err(Error::invalid(format!(
                    "layer {k}: bias length {} != rows {}",
                    layer.bias.len(),
                    layer.rows
                )));
            }
            if !layer.weights.iter().chain(layer.bias.iter()).all(|w| w.is_finite()) {
                return Err(Error::invalid(format!("layer {k}: non-finite weight")));
            }
            if k > 0 && self.layers[k - 1].rows != layer.cols {
                return Err(Error::invalid(format!(
                    "layer {k}: input dim {} does not chain with previous output {}",
                    layer.cols,
                    self.layers[k - 1].rows
                )));
            }
        }
        Ok(())
    }

    /// Layer widths as [in, hidden..., out], e.g. [784, 100, 100, 10].
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.layers[0].cols];
        s.extend(self.layers.iter().map(|l| l.rows));
        s
    }

    /// Digital forward pass: the noiseless oracle.
    pub fn infer(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut act = input.to_vec();
        for layer in &self.layers {
            let mut out = matvec_reference(&layer.weights, layer.rows, layer.cols, &act)?;
            for (o, b) in out.iter_mut().zip(&layer.bias) {
                *o += b;
            }
            layer.activation.apply(&mut out);
            act = out;
        }
        Ok(act)
    }

    /// Digital prediction (argmax of the final layer).
    pub fn predict(&self, input: &[f64]) -> Result<usize> {
        Ok(argmax(&self.infer(input)?))
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Exact real-arithmetic matrix-vector product; the noiseless oracle.
///
/// Accumulates in column order per row so results are deterministic.
pub fn matvec_reference(weights: &[f64], rows: usize, cols: usize, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != cols {
        return Err(Error::invalid(format!(
            "matvec dim mismatch: matrix cols {} vs vector length {}",
            cols,
            x.len()
        )));
    }
    if weights.len() != rows * cols {
        return Err(Error::invalid("matvec: weight array length != rows*cols"));
    }
    let mut y = vec![0.0; rows];
    for r in 0..rows {
        let row = &weights[r * cols..(r + 1) * cols];
        let mut acc = 0.0;
        for (w, xv) in row.iter().zip(x) {
            acc += w * xv;
        }
        y[r] = acc;
    }
    Ok(y)
}

/// How a dimension of length `total` is split into chunks of width `width`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TilingPlan {
    /// Rows handled together per chunk (whole matrix height here).
    pub rows_per_chunk: usize,
    /// Chunk width, i.e. parallel channels available.
    pub width: usize,
    /// Number of integration windows, ceil(total / width).
    pub steps: usize,
    /// Per-chunk half-open column ranges partitioning [0, total).
    pub chunk_ranges: Vec<(usize, usize)>,
}

/// Partition `b` columns into chunks of at most `d` for hardware with `d`
/// parallel channels. The last chunk may be narrower.
pub fn chunk_columns(b: usize, d: usize) -> Result<TilingPlan> {
    if b == 0 || d == 0 {
        return Err(Error::invalid(format!("chunk_columns: b={b}, d={d} must be >= 1")));
    }
    let steps = b.div_ceil(d);
    let chunk_ranges = (0..steps).map(|i| (i * d, ((i + 1) * d).min(b))).collect();
    Ok(TilingPlan {
        rows_per_chunk: 0,
        width: d,
        steps,
        chunk_ranges,
    })
}

/// Chunked matrix-vector product: per-chunk partial products summed in
/// column order. Used to check that tiling never changes the math.
pub fn matvec_tiled(
    weights: &[f64],
    rows: usize,
    cols: usize,
    x: &[f64],
    plan: &TilingPlan,
) -> Result<Vec<f64>> {
    if x.len() != cols {
        return Err(Error::invalid("matvec_tiled: dim mismatch"));
    }
    let mut y = vec![0.0; rows];
    for &(lo, hi) in &plan.chunk_ranges {
        for r in 0..rows {
            let row = &weights[r * cols..(r + 1) * cols];
            let mut partial = 0.0;
            for j in lo..hi {
                partial += row[j] * x[j];
            }
            y[r] += partial;
        }
    }
    Ok(y)
}

/// Digit image set: pixels scaled to [0,1], labels in [0,10).
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.len() != self.labels.len() {
            return Err(Error::invalid(format!(
                "dataset: {} images vs {} labels",
                self.images.len(),
                self.labels.len()
            )));
        }
        for (i, img) in self.images.iter().enumerate() {
            if !img.iter().all(|p| (0.0..=1.0).contains(p)) {
                return Err(Error::invalid(format!("image {i}: pixel outside [0,1]")));
            }
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= 10) {
            return Err(Error::invalid(format!("label {l} outside [0,10)")));
        }
        Ok(())
    }

    /// Keep only the first `n` samples.
    pub fn take(&self, n: usize) -> Dataset {
        Dataset {
            images: self.images.iter().take(n).cloned().collect(),
            labels: self.labels.iter().take(n).cloned().collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Model file format
//
// Little-endian binary container:
//   bytes 0..8   magic "NCASTMD1"
//   u32          layer count
//   per layer:   u32 rows, u32 cols, u8 activation (0 identity, 1 relu),
//                f64[rows*cols] weights row-major, f64[rows] bias
// ---------------------------------------------------------------------------

const MODEL_MAGIC: &[u8; 8] = b"NCASTMD1";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        location: location.into(),
        message: message.into(),
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return None;
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    fn u32_le(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn f64_slice(&mut self, n: usize) -> Option<Vec<f64>> {
        self.take(8 * n).map(|b| {
            b.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect()
        })
    }
}

/// Load a model container, validating invariants.
pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let mut cur = Cursor { buf: &buf, pos: 0 };

    let magic = cur
        .take(8)
        .ok_or_else(|| parse_err(path, "header", "file shorter than magic"))?;
    if magic != MODEL_MAGIC {
        return Err(parse_err(path, "header", "bad magic, not a model file"));
    }
    let n_layers = cur
        .u32_le()
        .ok_or_else(|| parse_err(path, "header", "missing layer count"))? as usize;
    if n_layers == 0 || n_layers > 64 {
        return Err(parse_err(path, "header", format!("implausible layer count {n_layers}")));
    }

    let mut layers = Vec::with_capacity(n_layers);
    for k in 0..n_layers {
        let loc = format!("layer {k}");
        let rows = cur
            .u32_le()
            .ok_or_else(|| parse_err(path, &loc, "truncated before rows"))? as usize;
        let cols = cur
            .u32_le()
            .ok_or_else(|| parse_err(path, &loc, "truncated before cols"))? as usize;
        let act = cur
            .u8()
            .ok_or_else(|| parse_err(path, &loc, "truncated before activation"))?;
        let activation = match act {
            0 => Activation::Identity,
            1 => Activation::Relu,
            other => return Err(parse_err(path, &loc, format!("unknown activation id {other}"))),
        };
        let weights = cur
            .f64_slice(rows * cols)
            .ok_or_else(|| parse_err(path, &loc, "truncated weight array"))?;
        let bias = cur
            .f64_slice(rows)
            .ok_or_else(|| parse_err(path, &loc, "truncated bias array"))?;
        layers.push(Layer {
            rows,
            cols,
            weights,
            bias,
            activation,
        });
    }
    if cur.pos != buf.len() {
        return Err(parse_err(
            path,
            "trailer",
            format!("{} trailing bytes after last layer", buf.len() - cur.pos),
        ));
    }

    let model = Model { layers };
    model.validate()?;
    Ok(model)
}

/// Write a model container; `load_model` round-trips it bit-exactly.
pub fn save_model(path: impl AsRef<Path>, model: &Model) -> Result<()> {
    let path = path.as_ref();
    model.validate()?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        buf.extend_from_slice(&(layer.rows as u32).to_le_bytes());
        buf.extend_from_slice(&(layer.cols as u32).to_le_bytes());
        buf.push(match layer.activation {
            Activation::Identity => 0,
            Activation::Relu => 1,
        });
        for w in &layer.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        for b in &layer.bias {
            buf.extend_from_slice(&b.to_le_bytes());
        }
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------------------------
// IDX dataset files (standard MNIST layout, big-endian headers)
// ---------------------------------------------------------------------------

fn read_be_u32(r: &mut impl Read, path: &Path, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| parse_err(path, "header", format!("truncated before {what}")))?;
    Ok(u32::from_be_bytes(b))
}

/// Read paired IDX image/label files; pixel bytes are scaled by 1/255.
pub fn load_dataset(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let ipath = images_path.as_ref();
    let lpath = labels_path.as_ref();

    let mut f = std::fs::File::open(ipath).map_err(|e| io_err(ipath, e))?;
    let magic = read_be_u32(&mut f, ipath, "magic")?;
    if magic != 0x0000_0803 {
        return Err(parse_err(ipath, "header", format!("bad image magic {magic:#x}")));
    }
    let n = read_be_u32(&mut f, ipath, "count")? as usize;
    let rows = read_be_u32(&mut f, ipath, "rows")? as usize;
    let cols = read_be_u32(&mut f, ipath, "cols")? as usize;
    let mut raw = vec![0u8; n * rows * cols];
    f.read_exact(&mut raw)
        .map_err(|_| parse_err(ipath, "pixels", "truncated pixel data"))?;
    let images = raw
        .chunks_exact(rows * cols)
        .map(|img| img.iter().map(|&p| p as f64 / 255.0).collect())
        .collect();

    let mut f = std::fs::File::open(lpath).map_err(|e| io_err(lpath, e))?;
    let magic = read_be_u32(&mut f, lpath, "magic")?;
    if magic != 0x0000_0801 {
        return Err(parse_err(lpath, "header", format!("bad label magic {magic:#x}")));
    }
    let ln = read_be_u32(&mut f, lpath, "count")? as usize;
    if ln != n {
        return Err(parse_err(
            lpath,
            "header",
            format!("label count {ln} != image count {n}"),
        ));
    }
    let mut labels = vec![0u8; ln];
    f.read_exact(&mut labels)
        .map_err(|_| parse_err(lpath, "labels", "truncated label data"))?;

    let ds = Dataset { images, labels };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
        let mut r = StreamRng::derive(seed, &[rows as u64, cols as u64]);
        (0..rows * cols).map(|_| r.next_f64() * 2.0 - 1.0).collect()
    }

    #[test]
    fn chunking_784_by_16_takes_49_steps() {
        let plan = chunk_columns(784, 16).unwrap();
        assert_eq!(plan.steps, 49);
        assert_eq!(plan.chunk_ranges.len(), 49);
        assert_eq!(plan.chunk_ranges[48], (768, 784));
    }

    #[test]
    fn chunking_single_chunk() {
        let plan = chunk_columns(100, 100).unwrap();
        assert_eq!(plan.steps, 1);
        assert_eq!(plan.chunk_ranges, vec![(0, 100)]);
    }

    #[test]
    fn chunking_rejects_zero() {
        assert!(chunk_columns(0, 5).is_err());
        assert!(chunk_columns(5, 0).is_err());
    }

    #[test]
    fn chunks_partition_without_overlap() {
        for (b, d) in [(13, 5), (784, 16), (100, 7), (1, 1), (9, 100)] {
            let plan = chunk_columns(b, d).unwrap();
            let mut covered = vec![false; b];
            for (lo, hi) in plan.chunk_ranges {
                for slot in covered.iter_mut().take(hi).skip(lo) {
                    assert!(!*slot, "overlap at b={b} d={d}");
                    *slot = true;
                }
            }
            assert!(covered.iter().all(|&c| c));
        }
    }

    #[test]
    fn tiled_matvec_matches_direct_8x13_d5() {
        let (rows, cols) = (8, 13);
        let w = random_matrix(rows, cols, 11);
        let mut r = StreamRng::derive(12, &[]);
        let x: Vec<f64> = (0..cols).map(|_| r.next_f64()).collect();
        let direct = matvec_reference(&w, rows, cols, &x).unwrap();
        let plan = chunk_columns(cols, 5).unwrap();
        let tiled = matvec_tiled(&w, rows, cols, &x, &plan).unwrap();
        for (a, b) in direct.iter().zip(&tiled) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }
    }

    #[test]
    fn matvec_identity_and_zero() {
        let n = 6;
        let mut ident = vec![0.0; n * n];
        for i in 0..n {
            ident[i * n + i] = 1.0;
        }
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 2.5).collect();
        assert_eq!(matvec_reference(&ident, n, n, &x).unwrap(), x);
        let zeros = vec![0.0; n * n];
        assert!(matvec_reference(&zeros, n, n, &x).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matvec_matches_independent_triple_loop() {
        // second implementation, deliberately written differently:
        // accumulate over rows inside the column loop
        let (rows, cols) = (10, 10);
        let w = random_matrix(rows, cols, 3);
        let mut r = StreamRng::derive(4, &[]);
        let x: Vec<f64> = (0..cols).map(|_| r.next_f64() * 4.0 - 2.0).collect();

        let mut expected = vec![0.0; rows];
        for j in 0..cols {
            for (i, e) in expected.iter_mut().enumerate() {
                *e += w[i * cols + j] * x[j];
            }
        }
        let got = matvec_reference(&w, rows, cols, &x).unwrap();
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-12));
        }
    }

    #[test]
    fn matvec_rejects_dim_mismatch() {
        let w = vec![1.0; 6];
        assert!(matvec_reference(&w, 2, 3, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let model = Model {
            layers: vec![
                Layer {
                    rows: 3,
                    cols: 4,
                    weights: random_matrix(3, 4, 77),
                    bias: vec![0.25, -1.5, 3.0],
                    activation: Activation::Relu,
                },
                Layer {
                    rows: 2,
                    cols: 3,
                    weights: random_matrix(2, 3, 78),
                    bias: vec![1e-300, -0.0],
                    activation: Activation::Identity,
                },
            ],
        };
        let dir = std::env::temp_dir().join("netcast_model_roundtrip.ncm");
        save_model(&dir, &model).unwrap();
        let back = load_model(&dir).unwrap();
        assert_eq!(back.layers.len(), 2);
        for (a, b) in model.layers.iter().zip(&back.layers) {
            assert_eq!(a.rows, b.rows);
            assert_eq!(a.cols, b.cols);
            assert_eq!(a.activation, b.activation);
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in a.bias.iter().zip(&b.bias) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn truncated_model_names_missing_layer() {
        let model = Model {
            layers: vec![Layer {
                rows: 2,
                cols: 2,
                weights: vec![1.0, 2.0, 3.0, 4.0],
                bias: vec![0.0, 0.0],
                activation: Activation::Identity,
            }],
        };
        let path = std::env::temp_dir().join("netcast_model_truncated.ncm");
        save_model(&path, &model).unwrap();
        let full = std::fs::read(&path).unwrap();
        std::fs::write(&path, &full[..full.len() - 9]).unwrap();
        let err = load_model(&path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("layer 0"), "error should name the layer: {msg}");
    }
}
