//! Appearance-based multi-camera person tracking, end to end:
//!
//! * [`nn`] — a small four-layer scoring net (affine + batchnorm + ReLU)
//!   with exact reverse-mode gradients and a finite-difference audit.
//! * [`agg`] — learned template aggregation: the net scores every detection
//!   of a gallery template against a probe, softmax turns scores into
//!   weights, and the weighted sum forms a composite appearance feature.
//!   Includes the joint match/classification training objective.
//! * [`assoc`] — greedy data association: IoU-gated single-camera tracking
//!   over sliding windows, then inter-camera trajectory merging with
//!   union-find. Every decision is recorded as an association event.
//! * [`metrics`] — identity measures (IDP/IDR/IDF1), MOTA, MCTA, and the
//!   inference-error rate computed by replaying association event logs.
//! * [`synth`] — a deterministic synthetic world generator for experiments:
//!   scripted box motion, per-camera feature bias, size-dependent noise.
//! * [`io`] — file formats: detection/trajectory CSV, binary feature files,
//!   model JSON, event-log JSON lines.
//!
//! All numerics are `f64`. Given the same seeds and inputs, every public
//! operation is deterministic, bit for bit, including under the optional
//! `parallel` feature (kernels parallelize only across independent output
//! slots; see `par`).

pub mod agg;
pub mod assoc;
pub mod error;
pub mod feat;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod nn;
mod par;
pub mod synth;

pub use error::{Error, Result};
