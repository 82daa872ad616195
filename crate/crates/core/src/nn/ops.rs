//! Layer primitives: affine map, batch normalization, ReLU, softmax.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

use super::{BnMode, BN_EPS, BN_MOMENTUM};

/// `y = x * w^T + b` for a batch of rows. `w` is `(out, in)` row-major.
pub fn affine(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    check_affine_shapes(x, w, b)?;
    let mut y = Matrix::zeros(x.rows(), w.rows());
    let cols = w.rows();
    crate::par::for_each_row(y.data_mut(), cols, x.cols() * cols, |n, out_row| {
        let row = x.row(n);
        for (o, slot) in out_row.iter_mut().enumerate() {
            *slot = dot(row, w.row(o)) + b[o];
        }
    });
    Ok(y)
}

/// Single-threaded reference implementation of [`affine`]. The parallel
/// version must produce bitwise-identical output; tests and the bench suite
/// compare the two.
pub fn affine_seq(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<Matrix> {
    check_affine_shapes(x, w, b)?;
    let mut y = Matrix::zeros(x.rows(), w.rows());
    for n in 0..x.rows() {
        let row = x.row(n);
        let out_row = y.row_mut(n);
        for (o, slot) in out_row.iter_mut().enumerate() {
            *slot = dot(row, w.row(o)) + b[o];
        }
    }
    Ok(y)
}

fn check_affine_shapes(x: &Matrix, w: &Matrix, b: &[f64]) -> Result<()> {
    if x.cols() != w.cols() {
        return Err(Error::shape(format!(
            "affine: input width {} vs weight fan-in {}",
            x.cols(),
            w.cols()
        )));
    }
    if b.len() != w.rows() {
        return Err(Error::shape(format!(
            "affine: bias has {} entries, weight fan-out {}",
            b.len(),
            w.rows()
        )));
    }
    Ok(())
}

/// What a batch-norm forward pass needs to remember for backprop, plus the
/// running statistics it would commit. Nothing is mutated here; the caller
/// decides whether to adopt `new_running_*`.
#[derive(Debug, Clone)]
pub struct BnCache {
    /// True when normalization used statistics of this batch. False in
    /// inference mode and for single-row training batches, which fall back
    /// to the stored running statistics.
    pub used_batch_stats: bool,
    /// Statistics actually used for normalization (batch or running).
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub x_hat: Matrix,
    pub new_running_mean: Vec<f64>,
    pub new_running_var: Vec<f64>,
}

/// Column-wise batch normalization: `y = gamma * (x - mean)/sqrt(var + eps) + beta`.
///
/// Training mode normalizes by biased batch statistics and reports updated
/// running statistics (momentum [`BN_MOMENTUM`]); inference mode uses the
/// stored running statistics unchanged. A one-row training batch has no
/// usable variance and falls back to running statistics for that pass.
pub fn batch_norm(
    x: &Matrix,
    gamma: &[f64],
    beta: &[f64],
    running_mean: &[f64],
    running_var: &[f64],
    mode: BnMode,
) -> Result<(Matrix, BnCache)> {
    let (n, d) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::invalid("batch_norm: empty batch"));
    }
    for (name, v) in [
        ("gamma", gamma),
        ("beta", beta),
        ("running_mean", running_mean),
        ("running_var", running_var),
    ] {
        if v.len() != d {
            return Err(Error::shape(format!(
                "batch_norm: {name} has {} entries for width {d}",
                v.len()
            )));
        }
    }

    let use_batch = mode == BnMode::Train && n >= 2;
    let (mean, var) = if use_batch {
        let mut mean = vec![0.0; d];
        for row in x.iter_rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for row in x.iter_rows() {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                let dlt = v - m;
                *s += dlt * dlt;
            }
        }
        for s in &mut var {
            *s /= n as f64;
        }
        (mean, var)
    } else {
        (running_mean.to_vec(), running_var.to_vec())
    };

    let mut x_hat = Matrix::zeros(n, d);
    let mut y = Matrix::zeros(n, d);
    for r in 0..n {
        let src = x.row(r);
        let hat = x_hat.row_mut(r);
        for j in 0..d {
            hat[j] = (src[j] - mean[j]) / (var[j] + BN_EPS).sqrt();
        }
        let out = y.row_mut(r);
        for j in 0..d {
            out[j] = gamma[j] * x_hat.get(r, j) + beta[j];
        }
    }

    let (new_running_mean, new_running_var) = if use_batch {
        let nm = running_mean
            .iter()
            .zip(&mean)
            .map(|(r, b)| (1.0 - BN_MOMENTUM) * r + BN_MOMENTUM * b)
            .collect();
        let nv = running_var
            .iter()
            .zip(&var)
            .map(|(r, b)| (1.0 - BN_MOMENTUM) * r + BN_MOMENTUM * b)
            .collect();
        (nm, nv)
    } else {
        (running_mean.to_vec(), running_var.to_vec())
    };

    Ok((
        y,
        BnCache { used_batch_stats: use_batch, mean, var, x_hat, new_running_mean, new_running_var },
    ))
}

/// Elementwise `max(0, x)`.
pub fn relu(x: &Matrix) -> Matrix {
    let mut y = x.clone();
    for v in y.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    y
}

/// Numerically stable softmax: subtracts the max before exponentiating.
/// Output entries are positive and sum to one.
pub fn softmax_normalize(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::invalid("softmax of an empty list"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("softmax input must be finite"));
    }
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::BnMode;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn affine_identity_passes_input_through() {
        let x = Matrix::from_rows(&[vec![3.0, -4.0], vec![0.5, 2.0]]).unwrap();
        let w = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let y = affine(&x, &w, &[0.0, 0.0]).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn affine_zero_weights_yield_bias_rows() {
        let x = Matrix::from_rows(&[vec![3.0, -4.0], vec![0.5, 2.0]]).unwrap();
        let w = Matrix::zeros(3, 2);
        let y = affine(&x, &w, &[1.0, 2.0, 3.0]).unwrap();
        for r in 0..2 {
            assert_eq!(y.row(r), &[1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn affine_hand_computed_example() {
        // [[1,2],[3,4]] with single output row w = [1,1], b = 0 -> [3, 7]
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let w = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let y = affine(&x, &w, &[0.0]).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn affine_parallel_matches_sequential_bitwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let x = Matrix::from_vec(64, 33, (0..64 * 33).map(|_| rng.gen::<f64>() - 0.5).collect())
            .unwrap();
        let w = Matrix::from_vec(47, 33, (0..47 * 33).map(|_| rng.gen::<f64>() - 0.5).collect())
            .unwrap();
        let b: Vec<f64> = (0..47).map(|_| rng.gen::<f64>()).collect();
        let par = affine(&x, &w, &b).unwrap();
        let seq = affine_seq(&x, &w, &b).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn batch_norm_identical_rows_normalize_to_zero() {
        let x = Matrix::from_rows(&[vec![5.0, -1.0], vec![5.0, -1.0], vec![5.0, -1.0]]).unwrap();
        let (y, cache) =
            batch_norm(&x, &[1.0, 1.0], &[0.0, 0.0], &[0.0, 0.0], &[1.0, 1.0], BnMode::Train)
                .unwrap();
        assert!(cache.used_batch_stats);
        for v in y.data() {
            assert!(close(*v, 0.0, 1e-12), "zero-variance column should map to beta");
        }
    }

    #[test]
    fn batch_norm_two_rows_hand_computed() {
        // Column [1, 3]: mean 2, biased variance 1 -> roughly [-1, 1].
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        let (y, _) = batch_norm(&x, &[1.0], &[0.0], &[0.0], &[1.0], BnMode::Train).unwrap();
        assert!(close(y.get(0, 0), -1.0, 1e-4));
        assert!(close(y.get(1, 0), 1.0, 1e-4));
    }

    #[test]
    fn batch_norm_gamma_zero_outputs_beta() {
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0], vec![-2.0]]).unwrap();
        let (y, _) = batch_norm(&x, &[0.0], &[7.0], &[0.0], &[1.0], BnMode::Train).unwrap();
        for v in y.data() {
            assert_eq!(*v, 7.0);
        }
    }

    #[test]
    fn batch_norm_train_output_has_zero_mean_unit_var() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let x = Matrix::from_vec(64, 5, (0..320).map(|_| rng.gen::<f64>() * 10.0 - 3.0).collect())
            .unwrap();
        let (y, _) =
            batch_norm(&x, &[1.0; 5], &[0.0; 5], &[0.0; 5], &[1.0; 5], BnMode::Train).unwrap();
        for j in 0..5 {
            let mean: f64 = (0..64).map(|r| y.get(r, j)).sum::<f64>() / 64.0;
            let var: f64 = (0..64).map(|r| (y.get(r, j) - mean).powi(2)).sum::<f64>() / 64.0;
            assert!(close(mean, 0.0, 1e-6));
            // eps slightly deflates the variance; that is expected.
            assert!(close(var, 1.0, 1e-3));
        }
    }

    #[test]
    fn batch_norm_infer_uses_running_stats_and_keeps_them() {
        let x = Matrix::from_rows(&[vec![4.0]]).unwrap();
        let (y, cache) =
            batch_norm(&x, &[2.0], &[1.0], &[3.0], &[4.0], BnMode::Infer).unwrap();
        // (4-3)/sqrt(4+eps) * 2 + 1
        assert!(close(y.get(0, 0), 2.0 / (4.0 + BN_EPS).sqrt() + 1.0, 1e-12));
        assert!(!cache.used_batch_stats);
        assert_eq!(cache.new_running_mean, vec![3.0]);
        assert_eq!(cache.new_running_var, vec![4.0]);
    }

    #[test]
    fn batch_norm_single_training_row_falls_back_to_running_stats() {
        let x = Matrix::from_rows(&[vec![4.0]]).unwrap();
        let (train_y, cache) =
            batch_norm(&x, &[2.0], &[1.0], &[3.0], &[4.0], BnMode::Train).unwrap();
        let (infer_y, _) = batch_norm(&x, &[2.0], &[1.0], &[3.0], &[4.0], BnMode::Infer).unwrap();
        assert_eq!(train_y, infer_y);
        assert!(!cache.used_batch_stats);
        assert_eq!(cache.new_running_mean, vec![3.0]);
    }

    #[test]
    fn batch_norm_train_updates_running_stats_with_momentum() {
        let x = Matrix::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        let (_, cache) = batch_norm(&x, &[1.0], &[0.0], &[10.0], &[2.0], BnMode::Train).unwrap();
        // batch mean 2, biased var 1
        assert!(close(cache.new_running_mean[0], 0.9 * 10.0 + 0.1 * 2.0, 1e-12));
        assert!(close(cache.new_running_var[0], 0.9 * 2.0 + 0.1 * 1.0, 1e-12));
    }

    #[test]
    fn relu_clamps_negatives_only() {
        let x = Matrix::from_rows(&[vec![-1.0, 0.0, 2.5]]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.5]);
    }

    #[test]
    fn softmax_single_logit_is_one() {
        assert_eq!(softmax_normalize(&[123.4]).unwrap(), vec![1.0]);
    }

    #[test]
    fn softmax_equal_logits_are_uniform() {
        let e = softmax_normalize(&[7.0, 7.0, 7.0]).unwrap();
        for v in e {
            assert!(close(v, 1.0 / 3.0, 1e-12));
        }
    }

    #[test]
    fn softmax_zero_and_ln2_gives_thirds() {
        let e = softmax_normalize(&[0.0, (2.0f64).ln()]).unwrap();
        assert!(close(e[0], 1.0 / 3.0, 1e-9));
        assert!(close(e[1], 2.0 / 3.0, 1e-9));
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let e = softmax_normalize(&[1e4, 1e4 - 1.0]).unwrap();
        assert!(e.iter().all(|v| v.is_finite()));
        assert!(close(e.iter().sum::<f64>(), 1.0, 1e-12));
        assert!(e[0] > e[1]);
    }

    #[test]
    fn softmax_rejects_empty_and_non_finite() {
        assert!(softmax_normalize(&[]).is_err());
        assert!(softmax_normalize(&[1.0, f64::NAN]).is_err());
    }

    #[test]
    fn softmax_is_permutation_equivariant() {
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.gen_range(2..9);
            let z: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let zp: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
            let e = softmax_normalize(&z).unwrap();
            let ep = softmax_normalize(&zp).unwrap();
            for (k, &i) in idx.iter().enumerate() {
                assert!(close(ep[k], e[i], 1e-12));
            }
        }
    }
}
