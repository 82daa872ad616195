//! Four-layer perceptron used to score template detections.
//!
//! Layout is fixed: three affine+batchnorm+ReLU blocks followed by a plain
//! affine layer that emits one scalar logit per input row. Everything is
//! `f64` and pure: forward passes never mutate parameters, running-statistic
//! updates are returned in the cache and committed explicitly by the
//! training loop. That keeps gradient checking honest (the loss is a pure
//! function of the parameter vector) and makes reruns reproducible.

mod backward;
mod forward;
mod ops;
mod optim;

pub use backward::{backprop, LayerGrads, MlpGrads};
pub use forward::{mlp_forward, ForwardCache, LayerCache};
pub use ops::{affine, affine_seq, batch_norm, relu, softmax_normalize, BnCache};
pub use optim::{finite_difference_check, sgd_momentum_step, FiniteDiffReport};

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Batch-normalization epsilon.
pub const BN_EPS: f64 = 1e-5;
/// Running-statistic update momentum: `running = (1-m)*running + m*batch`.
pub const BN_MOMENTUM: f64 = 0.1;

/// Number of affine layers in the net.
pub const NUM_LAYERS: usize = 4;

/// Whether batch normalization uses statistics of the current batch
/// (training) or the stored running statistics (inference).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Infer,
}

/// Layer widths: input, three hidden, and the fixed scalar output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpDims {
    pub input: usize,
    pub hidden: [usize; 3],
}

impl MlpDims {
    pub fn new(input: usize, hidden: [usize; 3]) -> Result<Self> {
        if input == 0 || hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        Ok(MlpDims { input, hidden })
    }

    /// All five widths in order, ending in the scalar output.
    pub fn widths(&self) -> [usize; 5] {
        [self.input, self.hidden[0], self.hidden[1], self.hidden[2], 1]
    }

    /// Input/output width of layer `l` in `0..4`.
    pub fn layer_io(&self, l: usize) -> (usize, usize) {
        let w = self.widths();
        (w[l], w[l + 1])
    }
}

/// Parameters of one affine + batchnorm block.
///
/// The last layer carries `gamma`/`beta`/running statistics too so the
/// on-disk layout stays uniform, but the forward pass never applies them
/// there and their gradients are identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Weights, row-major `(out, in)`.
    pub w: Matrix,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

impl LayerParams {
    fn fresh(rng: &mut impl Rng, fan_in: usize, fan_out: usize) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let data: Vec<f64> = (0..fan_out * fan_in).map(|_| dist.sample(rng)).collect();
        LayerParams {
            w: Matrix::from_vec(fan_out, fan_in, data).expect("sized above"),
            b: vec![0.0; fan_out],
            gamma: vec![1.0; fan_out],
            beta: vec![0.0; fan_out],
            running_mean: vec![0.0; fan_out],
            running_var: vec![1.0; fan_out],
        }
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    fn validate(&self, l: usize, fan_in: usize, fan_out: usize) -> Result<()> {
        if self.w.rows() != fan_out || self.w.cols() != fan_in {
            return Err(Error::shape(format!(
                "layer {l}: weights {}x{}, expected {fan_out}x{fan_in}",
                self.w.rows(),
                self.w.cols()
            )));
        }
        for (name, v) in [
            ("b", &self.b),
            ("gamma", &self.gamma),
            ("beta", &self.beta),
            ("running_mean", &self.running_mean),
            ("running_var", &self.running_var),
        ] {
            if v.len() != fan_out {
                return Err(Error::shape(format!(
                    "layer {l}: {name} has {} entries, expected {fan_out}",
                    v.len()
                )));
            }
        }
        if self.running_var.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::invalid(format!("layer {l}: running_var must be >= 0")));
        }
        Ok(())
    }
}

/// Full parameter set of the scoring net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub dims: MlpDims,
    pub layers: Vec<LayerParams>,
}

impl MlpParams {
    /// Seeded initialization: weights uniform in `±sqrt(6/(fan_in+fan_out))`,
    /// biases and beta zero, gamma one, running stats at the identity.
    /// Layers are drawn in order, weights in row-major element order.
    pub fn init(dims: MlpDims, rng: &mut impl Rng) -> Self {
        let layers = (0..NUM_LAYERS)
            .map(|l| {
                let (fan_in, fan_out) = dims.layer_io(l);
                LayerParams::fresh(rng, fan_in, fan_out)
            })
            .collect();
        MlpParams { dims, layers }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.len() != NUM_LAYERS {
            return Err(Error::shape(format!(
                "net must have exactly {NUM_LAYERS} layers, got {}",
                self.layers.len()
            )));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            let (fan_in, fan_out) = self.dims.layer_io(l);
            layer.validate(l, fan_in, fan_out)?;
        }
        Ok(())
    }

    /// Number of trainable scalars (weights, biases, gamma, beta).
    /// Running statistics are buffers, not parameters.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.w.data().len() + l.b.len() + l.gamma.len() + l.beta.len())
            .sum()
    }

    /// Packs trainable parameters into one vector, layer by layer in
    /// `w, b, gamma, beta` order. `assign_params` is the exact inverse.
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.w.data());
            out.extend_from_slice(&l.b);
            out.extend_from_slice(&l.gamma);
            out.extend_from_slice(&l.beta);
        }
        out
    }

    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape(format!(
                "parameter vector has {} entries, net needs {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut at = 0;
        for l in &mut self.layers {
            let nw = l.w.data().len();
            l.w.data_mut().copy_from_slice(&flat[at..at + nw]);
            at += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&flat[at..at + nb]);
            at += nb;
            let ng = l.gamma.len();
            l.gamma.copy_from_slice(&flat[at..at + ng]);
            at += ng;
            let nz = l.beta.len();
            l.beta.copy_from_slice(&flat[at..at + nz]);
            at += nz;
        }
        Ok(())
    }
}
