use crate::error::{Error, Result};

/// One SGD update with classical momentum:
/// `v <- momentum * v - lr * g`, then `theta <- theta + v`.
pub fn sgd_momentum_step(
    theta: &mut [f64],
    velocity: &mut [f64],
    grad: &[f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    if theta.len() != velocity.len() || theta.len() != grad.len() {
        return Err(Error::shape(format!(
            "sgd step: theta {}, velocity {}, grad {}",
            theta.len(),
            velocity.len(),
            grad.len()
        )));
    }
    if !lr.is_finite() || lr < 0.0 || !momentum.is_finite() || momentum < 0.0 {
        return Err(Error::invalid("sgd step: lr and momentum must be finite and >= 0"));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::invalid("sgd step: non-finite gradient"));
    }
    for ((t, v), g) in theta.iter_mut().zip(velocity.iter_mut()).zip(grad) {
        *v = momentum * *v - lr * g;
        *t += *v;
    }
    Ok(())
}

/// Result of a finite-difference gradient audit.
#[derive(Debug, Clone, Copy)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    /// Flat parameter index where the worst disagreement occurred.
    pub worst_index: usize,
    pub checked: usize,
}

/// Compares `analytic` against central finite differences of `loss` around
/// `theta`, perturbing every coordinate by `±step`.
///
/// Relative error per coordinate is `|a - n| / max(1e-8, |a| + |n|)`. The
/// loss must be a pure function of the parameter vector; a non-finite loss
/// value fails the check immediately.
pub fn finite_difference_check(
    theta: &[f64],
    analytic: &[f64],
    step: f64,
    mut loss: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<FiniteDiffReport> {
    if theta.len() != analytic.len() {
        return Err(Error::shape(format!(
            "finite differences: {} parameters but {} analytic gradients",
            theta.len(),
            analytic.len()
        )));
    }
    if !step.is_finite() || step <= 0.0 {
        return Err(Error::invalid("finite differences: step must be positive"));
    }
    let mut probe = theta.to_vec();
    let mut report = FiniteDiffReport { max_rel_error: 0.0, worst_index: 0, checked: theta.len() };
    for i in 0..theta.len() {
        probe[i] = theta[i] + step;
        let plus = loss(&probe)?;
        probe[i] = theta[i] - step;
        let minus = loss(&probe)?;
        probe[i] = theta[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::invalid(format!(
                "finite differences: non-finite loss near parameter {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * step);
        let rel = (analytic[i] - numeric).abs() / f64::max(1e-8, analytic[i].abs() + numeric.abs());
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    Ok(report)
}
