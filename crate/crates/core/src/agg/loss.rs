use crate::error::{Error, Result};
use crate::feat::cosine;

use super::ClassifierHead;

/// Squared error between the probe/composite cosine and the 0/1 match
/// label: `(cos(p, f) - y)^2`.
pub fn mse_match_loss(probe: &[f64], composite: &[f64], y: f64) -> Result<f64> {
    if y != 0.0 && y != 1.0 {
        return Err(Error::invalid(format!("match label must be 0 or 1, got {y}")));
    }
    let c = cosine(probe, composite)?;
    if !c.is_finite() {
        return Err(Error::invalid("match loss: non-finite cosine"));
    }
    Ok((c - y) * (c - y))
}

/// Categorical cross-entropy of the head's softmax against the true class:
/// `-log q_hat[class]`, computed via a stable log-sum-exp.
pub fn cce_loss(head: &ClassifierHead, composite: &[f64], class: usize) -> Result<f64> {
    head.validate()?;
    if class >= head.num_classes() {
        return Err(Error::invalid(format!(
            "class {class} out of range for {}-way head",
            head.num_classes()
        )));
    }
    let logits = head.logits(composite)?;
    Ok(log_sum_exp(&logits) - logits[class])
}

pub(crate) fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}
