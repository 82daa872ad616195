use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::ops::{affine, batch_norm, relu, BnCache};
use super::{BnMode, MlpParams, NUM_LAYERS};

/// Per-layer intermediates kept for backprop.
#[derive(Debug, Clone)]
pub struct LayerCache {
    /// Post-affine pre-normalization values.
    pub z: Matrix,
    /// Batch-norm intermediates; `None` for the final layer.
    pub bn: Option<BnCache>,
    /// Layer output (post-ReLU, or raw logits for the final layer).
    pub a: Matrix,
}

/// Everything a forward pass produced besides the logits.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: BnMode,
    pub x: Matrix,
    pub layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn batch_len(&self) -> usize {
        self.x.rows()
    }
}

/// Runs the four-layer net on a batch of rows and returns one scalar logit
/// per row plus the cache needed for [`super::backprop`].
///
/// Parameters are read-only. In training mode the cache carries the updated
/// batch-norm running statistics; committing them is the caller's decision
/// (see the training loop), so evaluating a loss repeatedly during gradient
/// checks cannot drift the model.
pub fn mlp_forward(params: &MlpParams, x: &Matrix, mode: BnMode) -> Result<(Vec<f64>, ForwardCache)> {
    params.validate()?;
    if x.rows() == 0 {
        return Err(Error::invalid("mlp_forward: empty batch"));
    }
    if x.cols() != params.dims.input {
        return Err(Error::shape(format!(
            "mlp_forward: input width {} but net expects {}",
            x.cols(),
            params.dims.input
        )));
    }

    let mut layers = Vec::with_capacity(NUM_LAYERS);
    let mut cur = x.clone();
    for (l, layer) in params.layers.iter().enumerate() {
        let z = affine(&cur, &layer.w, &layer.b)?;
        let (bn, a) = if l + 1 < NUM_LAYERS {
            let (normed, bn_cache) = batch_norm(
                &z,
                &layer.gamma,
                &layer.beta,
                &layer.running_mean,
                &layer.running_var,
                mode,
            )?;
            (Some(bn_cache), relu(&normed))
        } else {
            (None, z.clone())
        };
        cur = a.clone();
        layers.push(LayerCache { z, bn, a });
    }

    let logits: Vec<f64> = (0..cur.rows()).map(|r| cur.get(r, 0)).collect();
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("mlp_forward: non-finite logit"));
    }
    Ok((logits, ForwardCache { mode, x: x.clone(), layers }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{MlpDims, MlpParams};
    use rand::SeedableRng;

    fn tiny_dims() -> MlpDims {
        MlpDims::new(3, [4, 3, 2]).unwrap()
    }

    #[test]
    fn zeroed_net_emits_zero_logits() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut p = MlpParams::init(tiny_dims(), &mut rng);
        for l in &mut p.layers {
            p_zero(l);
        }
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.1, 0.2, 0.3]]).unwrap();
        let (logits, _) = mlp_forward(&p, &x, BnMode::Train).unwrap();
        assert_eq!(logits, vec![0.0, 0.0]);
    }

    fn p_zero(l: &mut crate::nn::LayerParams) {
        for v in l.w.data_mut() {
            *v = 0.0;
        }
        for v in &mut l.b {
            *v = 0.0;
        }
        for v in &mut l.gamma {
            *v = 0.0;
        }
        for v in &mut l.beta {
            *v = 0.0;
        }
    }

    #[test]
    fn single_row_inference_works() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let p = MlpParams::init(tiny_dims(), &mut rng);
        let x = Matrix::from_rows(&[vec![0.5, -0.5, 0.25]]).unwrap();
        let (logits, cache) = mlp_forward(&p, &x, BnMode::Infer).unwrap();
        assert_eq!(logits.len(), 1);
        assert!(logits[0].is_finite());
        assert_eq!(cache.batch_len(), 1);
    }

    #[test]
    fn inference_logits_do_not_depend_on_batch_composition() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let p = MlpParams::init(tiny_dims(), &mut rng);
        let rows =
            vec![vec![0.5, -0.5, 0.25], vec![1.0, 1.0, 1.0], vec![-0.3, 0.9, 2.0]];
        let batch = Matrix::from_rows(&rows).unwrap();
        let (all, _) = mlp_forward(&p, &batch, BnMode::Infer).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let single = Matrix::from_rows(std::slice::from_ref(row)).unwrap();
            let (one, _) = mlp_forward(&p, &single, BnMode::Infer).unwrap();
            assert!(
                (one[0] - all[i]).abs() <= 1e-9,
                "row {i}: isolated {} vs batched {}",
                one[0],
                all[i]
            );
        }
    }

    /// Straight-line recomputation of the net, written independently of the
    /// layered implementation: explicit loops, no Matrix helpers.
    fn oracle_forward(p: &MlpParams, x: &[Vec<f64>], train: bool) -> Vec<f64> {
        let mut acts: Vec<Vec<f64>> = x.to_vec();
        for (li, layer) in p.layers.iter().enumerate() {
            let out_dim = layer.b.len();
            let mut z = vec![vec![0.0; out_dim]; acts.len()];
            for (row, zrow) in acts.iter().zip(z.iter_mut()) {
                for (o, zo) in zrow.iter_mut().enumerate() {
                    let mut s = layer.b[o];
                    for (i, v) in row.iter().enumerate() {
                        s += v * layer.w.get(o, i);
                    }
                    *zo = s;
                }
            }
            if li == 3 {
                acts = z;
                break;
            }
            let n = z.len() as f64;
            let use_batch = train && z.len() >= 2;
            let mut normed = vec![vec![0.0; out_dim]; z.len()];
            for o in 0..out_dim {
                let (m, v) = if use_batch {
                    let m: f64 = z.iter().map(|r| r[o]).sum::<f64>() / n;
                    let v: f64 = z.iter().map(|r| (r[o] - m) * (r[o] - m)).sum::<f64>() / n;
                    (m, v)
                } else {
                    (layer.running_mean[o], layer.running_var[o])
                };
                for (r, row) in z.iter().enumerate() {
                    let xh = (row[o] - m) / (v + crate::nn::BN_EPS).sqrt();
                    let y = layer.gamma[o] * xh + layer.beta[o];
                    normed[r][o] = if y > 0.0 { y } else { 0.0 };
                }
            }
            acts = normed;
        }
        acts.iter().map(|r| r[0]).collect()
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for trial in 0..10 {
            let p = MlpParams::init(tiny_dims(), &mut rng);
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..3).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect())
                .collect();
            let x = Matrix::from_rows(&rows).unwrap();
            for (mode, train) in [(BnMode::Train, true), (BnMode::Infer, false)] {
                let (got, _) = mlp_forward(&p, &x, mode).unwrap();
                let want = oracle_forward(&p, &rows, train);
                for (g, w) in got.iter().zip(&want) {
                    assert!(
                        (g - w).abs() <= 1e-10,
                        "trial {trial}: logit {g} vs oracle {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_width_mismatch() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = MlpParams::init(tiny_dims(), &mut rng);
        let x = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        assert!(mlp_forward(&p, &x, BnMode::Infer).is_err());
    }
}
