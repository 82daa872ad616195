use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{ForwardCache, MlpParams, BN_EPS, NUM_LAYERS};

/// Gradients for one layer, same shapes as the corresponding parameters.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub w: Matrix,
    pub b: Vec<f64>,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MlpGrads {
    pub layers: Vec<LayerGrads>,
}

impl MlpGrads {
    /// Same packing order as [`MlpParams::flatten_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(l.w.data());
            out.extend_from_slice(&l.b);
            out.extend_from_slice(&l.gamma);
            out.extend_from_slice(&l.beta);
        }
        out
    }
}

/// Exact reverse-mode gradients of the scalar quantity whose per-logit
/// derivatives are `dlogits`, with respect to every parameter and the input.
///
/// `cache` must come from a forward pass of `params` on the same batch;
/// anything else is reported as a shape error.
pub fn backprop(
    params: &MlpParams,
    cache: &ForwardCache,
    dlogits: &[f64],
) -> Result<(MlpGrads, Matrix)> {
    params.validate()?;
    if cache.layers.len() != NUM_LAYERS {
        return Err(Error::shape("backprop: cache does not hold 4 layers"));
    }
    let n = cache.x.rows();
    if dlogits.len() != n {
        return Err(Error::shape(format!(
            "backprop: {} upstream gradients for batch of {n}",
            dlogits.len()
        )));
    }
    if cache.x.cols() != params.dims.input {
        return Err(Error::shape("backprop: cache input width does not match net"));
    }
    for (l, lc) in cache.layers.iter().enumerate() {
        let (_, fan_out) = params.dims.layer_io(l);
        if lc.z.rows() != n || lc.z.cols() != fan_out || lc.a.cols() != fan_out {
            return Err(Error::shape(format!("backprop: stale cache at layer {l}")));
        }
    }

    let mut grads: Vec<LayerGrads> = Vec::with_capacity(NUM_LAYERS);
    // Gradient w.r.t. the current layer's output, walked back to front.
    let mut d_out = Matrix::zeros(n, 1);
    for (r, g) in dlogits.iter().enumerate() {
        d_out.set(r, 0, *g);
    }

    for l in (0..NUM_LAYERS).rev() {
        let layer = &params.layers[l];
        let lc = &cache.layers[l];
        let out_dim = layer.out_dim();

        let mut dgamma = vec![0.0; out_dim];
        let mut dbeta = vec![0.0; out_dim];

        // Through ReLU and batch norm down to the affine output z.
        let dz = match &lc.bn {
            None => d_out,
            Some(bn) => {
                let mut d_bn = d_out;
                for r in 0..n {
                    let act = lc.a.row(r);
                    let row = d_bn.row_mut(r);
                    for j in 0..out_dim {
                        if act[j] <= 0.0 {
                            row[j] = 0.0;
                        }
                    }
                }
                for r in 0..n {
                    let d = d_bn.row(r);
                    let xh = bn.x_hat.row(r);
                    for j in 0..out_dim {
                        dgamma[j] += d[j] * xh[j];
                        dbeta[j] += d[j];
                    }
                }
                let mut dz = Matrix::zeros(n, out_dim);
                if bn.used_batch_stats {
                    // Batch statistics took part in the forward pass, so every
                    // row's gradient feeds back into every other row.
                    let nf = n as f64;
                    for r in 0..n {
                        let d = d_bn.row(r);
                        let xh = bn.x_hat.row(r);
                        let out = dz.row_mut(r);
                        for j in 0..out_dim {
                            let inv_std = 1.0 / (bn.var[j] + BN_EPS).sqrt();
                            out[j] = layer.gamma[j] * inv_std / nf
                                * (nf * d[j] - dbeta[j] - xh[j] * dgamma[j]);
                        }
                    }
                } else {
                    for r in 0..n {
                        let d = d_bn.row(r);
                        let out = dz.row_mut(r);
                        for j in 0..out_dim {
                            out[j] = d[j] * layer.gamma[j] / (bn.var[j] + BN_EPS).sqrt();
                        }
                    }
                }
                dz
            }
        };

        // Affine backward. Layer input is the previous activation.
        let input: &Matrix = if l == 0 { &cache.x } else { &cache.layers[l - 1].a };
        let in_dim = layer.in_dim();

        let mut dw = Matrix::zeros(out_dim, in_dim);
        crate::par::for_each_row(dw.data_mut(), in_dim, n * in_dim, |o, wrow| {
            for r in 0..n {
                let g = dz.get(r, o);
                if g == 0.0 {
                    continue;
                }
                let xr = input.row(r);
                for (slot, xv) in wrow.iter_mut().zip(xr) {
                    *slot += g * xv;
                }
            }
        });

        let mut db = vec![0.0; out_dim];
        for r in 0..n {
            for (j, slot) in db.iter_mut().enumerate() {
                *slot += dz.get(r, j);
            }
        }

        let mut dx = Matrix::zeros(n, in_dim);
        crate::par::for_each_row(dx.data_mut(), in_dim, out_dim * in_dim, |r, xrow| {
            for o in 0..out_dim {
                let g = dz.get(r, o);
                if g == 0.0 {
                    continue;
                }
                let wrow = layer.w.row(o);
                for (slot, wv) in xrow.iter_mut().zip(wrow) {
                    *slot += g * wv;
                }
            }
        });

        grads.push(LayerGrads { w: dw, b: db, gamma: dgamma, beta: dbeta });
        d_out = dx;
    }

    grads.reverse();
    Ok((MlpGrads { layers: grads }, d_out))
}
