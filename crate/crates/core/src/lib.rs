//! Physics-level simulator for broadcast-weight photonic inference links.
//!
//! A server streams neural-network weights over optical (or RF) links; a
//! thin client modulates its activations onto the incoming light and
//! accumulates dot products on analog receivers. This crate models that
//! pipeline end to end: float/intensity codecs with calibration fitting,
//! link impairments (loss, dispersion crosstalk, amplifier ASE, laser RIN),
//! five detector families with their noise floors, full-model inference
//! with per-seed determinism, and the client energy / link budget
//! arithmetic.

pub mod budget;
pub mod channel;
pub mod codec;
pub mod constants;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod receiver;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
