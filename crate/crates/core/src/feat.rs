//! Small helpers for appearance feature vectors.

use crate::error::{Error, Result};

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` to unit length. Errors on (near-)zero vectors, where the
/// direction is undefined.
pub fn l2_normalize(v: &mut [f64]) -> Result<()> {
    let n = l2_norm(v);
    if n < 1e-12 || !n.is_finite() {
        return Err(Error::invalid("cannot normalize a zero-length vector"));
    }
    for x in v.iter_mut() {
        *x /= n;
    }
    Ok(())
}

/// Cosine similarity `a.b / (|a||b|)`.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("cosine: lengths {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::invalid("cosine: empty vectors"));
    }
    let na = l2_norm(a);
    let nb = l2_norm(b);
    if na < 1e-12 || nb < 1e-12 {
        return Err(Error::invalid("cosine undefined for zero-length vector"));
    }
    Ok(crate::matrix::dot(a, b) / (na * nb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_of_parallel_vectors_is_one() {
        let c = cosine(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((c - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn cosine_of_orthogonal_vectors_is_zero() {
        let c = cosine(&[1.0, 0.0], &[0.0, 5.0]).unwrap();
        assert_eq!(c, 0.0);
    }

    #[test]
    fn cosine_hand_computed_value() {
        let c = cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() <= 1e-12);
    }

    #[test]
    fn cosine_rejects_zero_vector() {
        assert!(cosine(&[0.0, 0.0], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn normalize_produces_unit_norm() {
        let mut v = vec![3.0, 4.0];
        l2_normalize(&mut v).unwrap();
        assert!((l2_norm(&v) - 1.0).abs() <= 1e-12);
        assert!((v[0] - 0.6).abs() <= 1e-12);
    }

    #[test]
    fn normalize_rejects_zero_vector() {
        assert!(l2_normalize(&mut [0.0, 0.0]).is_err());
    }
}
