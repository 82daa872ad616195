use crate::error::{Error, Result};
use crate::feat::l2_norm;
use crate::matrix::{dot, Matrix};
use crate::nn::{
    backprop, mlp_forward, sgd_momentum_step, softmax_normalize, BnMode, MlpGrads,
};

use super::loss::log_sum_exp;
use super::{meta_half, CanModel, GalleryTemplate, ProbeSample, SceneInfo};

/// One training batch: every probe is compared against every template.
///
/// The cost stacks all (probe, template) segments into a single net forward
/// pass; batch-norm statistics are computed over that whole stack. Row
/// order is fixed and documented: probes outermost, templates next,
/// detections innermost.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub scene: SceneInfo,
    pub templates: Vec<GalleryTemplate>,
    pub probes: Vec<ProbeSample>,
    /// Match labels, `(probes, templates)`, entries 0 or 1.
    pub y: Matrix,
}

impl TrainBatch {
    /// Checks internal consistency and returns the feature dimension.
    pub fn validate(&self, num_classes: usize) -> Result<usize> {
        if self.templates.is_empty() || self.probes.is_empty() {
            return Err(Error::invalid("training batch needs probes and templates"));
        }
        let d = self.templates[0].validate()?;
        for (j, t) in self.templates.iter().enumerate() {
            let td = t.validate()?;
            if td != d {
                return Err(Error::shape(format!("template {j} has feature dim {td}, expected {d}")));
            }
            match t.class {
                None => return Err(Error::invalid(format!("template {j} has no class label"))),
                Some(c) if c >= num_classes => {
                    return Err(Error::invalid(format!(
                        "template {j} class {c} out of range for {num_classes}-way head"
                    )))
                }
                _ => {}
            }
        }
        for (i, p) in self.probes.iter().enumerate() {
            if p.feature.len() != d {
                return Err(Error::shape(format!("probe {i} has feature dim {}", p.feature.len())));
            }
        }
        if self.y.rows() != self.probes.len() || self.y.cols() != self.templates.len() {
            return Err(Error::shape(format!(
                "match matrix is {}x{}, batch is {}x{}",
                self.y.rows(),
                self.y.cols(),
                self.probes.len(),
                self.templates.len()
            )));
        }
        if self.y.data().iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::invalid("match matrix entries must be 0 or 1"));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Hyper {
    pub lr: f64,
    pub momentum: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper { lr: 0.01, momentum: 0.9 }
    }
}

/// Optimizer state across steps. The velocity vector covers the net
/// parameters followed by the classifier head, in flattening order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub velocity: Vec<f64>,
    pub step: u64,
}

impl TrainState {
    pub fn new(model: &CanModel) -> Result<Self> {
        let head = model
            .head
            .as_ref()
            .ok_or_else(|| Error::invalid("training requires a classifier head"))?;
        Ok(TrainState {
            velocity: vec![0.0; model.mlp.param_count() + head.param_count()],
            step: 0,
        })
    }
}

struct Graph {
    cost: f64,
    mlp_grads: Option<MlpGrads>,
    head_w_grad: Option<Matrix>,
    head_b_grad: Option<Vec<f64>>,
    /// Updated running statistics per batch-normalized layer.
    new_running: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Joint cost over the batch, averaged over all (probe, template) pairs:
/// squared cosine-match error plus cross-entropy of the pair's composite
/// feature under the classifier head.
pub fn batch_cost(model: &CanModel, batch: &TrainBatch) -> Result<f64> {
    Ok(run_graph(model, batch, false)?.cost)
}

/// One optimization step: a single stacked forward pass, exact backprop of
/// the joint cost, and an SGD-with-momentum update. Commits the batch-norm
/// running statistics observed during the pass. Returns the pre-step cost.
pub fn train_step(
    model: &mut CanModel,
    state: &mut TrainState,
    batch: &TrainBatch,
    hyper: &Hyper,
) -> Result<f64> {
    let graph = run_graph(model, batch, true)?;
    let head = model.head.as_mut().expect("run_graph verified the head");

    let mut theta = model.mlp.flatten_params();
    theta.extend(head.flatten_params());
    let mut grad = graph.mlp_grads.expect("requested gradients").flatten();
    grad.extend_from_slice(graph.head_w_grad.as_ref().expect("head grads").data());
    grad.extend_from_slice(graph.head_b_grad.as_ref().expect("head grads"));
    if theta.len() != state.velocity.len() {
        return Err(Error::shape(format!(
            "optimizer state has {} entries for {} parameters",
            state.velocity.len(),
            theta.len()
        )));
    }

    sgd_momentum_step(&mut theta, &mut state.velocity, &grad, hyper.lr, hyper.momentum)?;

    let split = model.mlp.param_count();
    model.mlp.assign_params(&theta[..split])?;
    head.assign_params(&theta[split..])?;
    for (l, (mean, var)) in graph.new_running.into_iter().enumerate() {
        model.mlp.layers[l].running_mean = mean;
        model.mlp.layers[l].running_var = var;
    }
    state.step += 1;
    Ok(graph.cost)
}

fn run_graph(model: &CanModel, batch: &TrainBatch, with_grads: bool) -> Result<Graph> {
    model.validate()?;
    let head = model
        .head
        .as_ref()
        .ok_or_else(|| Error::invalid("training requires a classifier head"))?;
    let num_classes = head.num_classes();
    let d = batch.validate(num_classes)?;
    if d != model.feature_dim()? {
        return Err(Error::shape(format!(
            "batch features are {d}-dimensional, model expects {}",
            model.feature_dim()?
        )));
    }

    let m_p = batch.probes.len();
    let m_g = batch.templates.len();
    let width = d + 10;

    // Normalized metadata halves are probe-independent for gallery rows.
    let gallery_halves: Vec<Vec<[f64; 5]>> = batch
        .templates
        .iter()
        .map(|t| t.metas.iter().map(|m| meta_half(m, &batch.scene)).collect())
        .collect::<Result<_>>()?;
    let probe_halves: Vec<[f64; 5]> = batch
        .probes
        .iter()
        .map(|p| meta_half(&p.meta, &batch.scene))
        .collect::<Result<_>>()?;

    let rows_per_probe: usize = batch.templates.iter().map(GalleryTemplate::len).sum();
    let total_rows = m_p * rows_per_probe;
    let mut x = Matrix::zeros(total_rows, width);
    // Segment start row for pair (i, j), in i-major order.
    let mut seg_start = vec![0usize; m_p * m_g];
    let mut at = 0;
    for i in 0..m_p {
        for j in 0..m_g {
            seg_start[i * m_g + j] = at;
            let t = &batch.templates[j];
            for (k, f) in t.features.iter().enumerate() {
                let row = x.row_mut(at);
                row[..d].copy_from_slice(f);
                row[d..d + 5].copy_from_slice(&gallery_halves[j][k]);
                row[d + 5..].copy_from_slice(&probe_halves[i]);
                at += 1;
            }
        }
    }

    let (logits, cache) = mlp_forward(&model.mlp, &x, BnMode::Train)?;

    let scale = 1.0 / (m_p * m_g) as f64;
    let mut cost = 0.0;
    let mut dlogits = if with_grads { vec![0.0; total_rows] } else { Vec::new() };
    let mut head_w_grad = if with_grads { Some(Matrix::zeros(num_classes, d)) } else { None };
    let mut head_b_grad = if with_grads { Some(vec![0.0; num_classes]) } else { None };

    for i in 0..m_p {
        let probe = &batch.probes[i];
        let p_norm = l2_norm(&probe.feature);
        if p_norm < 1e-12 {
            return Err(Error::invalid(format!("probe {i} has zero-length feature")));
        }
        for j in 0..m_g {
            let t = &batch.templates[j];
            let n_j = t.len();
            let start = seg_start[i * m_g + j];
            let weights = softmax_normalize(&logits[start..start + n_j])?;

            let mut f = vec![0.0; d];
            for (g, &w) in t.features.iter().zip(&weights) {
                for (slot, v) in f.iter_mut().zip(g) {
                    *slot += w * v;
                }
            }
            let f_norm = l2_norm(&f);
            if f_norm < 1e-12 {
                return Err(Error::invalid(format!(
                    "composite feature of template {j} collapsed to zero"
                )));
            }

            let y = batch.y.get(i, j);
            let cos = dot(&probe.feature, &f) / (p_norm * f_norm);
            let class = t.class.expect("validated above");
            let class_logits = head.logits(&f)?;
            let lse = log_sum_exp(&class_logits);
            cost += (cos - y) * (cos - y) + (lse - class_logits[class]);

            if with_grads {
                // d(cos)/dF = P/(|P||F|) - cos * F/|F|^2
                let dmse = scale * 2.0 * (cos - y);
                let probs: Vec<f64> = class_logits.iter().map(|l| (l - lse).exp()).collect();
                let mut df = vec![0.0; d];
                for (idx, slot) in df.iter_mut().enumerate() {
                    *slot = dmse
                        * (probe.feature[idx] / (p_norm * f_norm) - cos * f[idx] / (f_norm * f_norm));
                }
                let hw = head_w_grad.as_mut().expect("allocated");
                let hb = head_b_grad.as_mut().expect("allocated");
                for c in 0..num_classes {
                    let coef = scale * (probs[c] - if c == class { 1.0 } else { 0.0 });
                    hb[c] += coef;
                    let wrow = hw.row_mut(c);
                    for (slot, v) in wrow.iter_mut().zip(&f) {
                        *slot += coef * v;
                    }
                    if coef != 0.0 {
                        let wrow = head.w.row(c);
                        for (slot, v) in df.iter_mut().zip(wrow) {
                            *slot += coef * v;
                        }
                    }
                }

                // Through the weighted sum and the softmax.
                let de: Vec<f64> =
                    t.features.iter().map(|g| dot(&df, g)).collect();
                let mix: f64 = de.iter().zip(&weights).map(|(de, w)| de * w).sum();
                for k in 0..n_j {
                    dlogits[start + k] = weights[k] * (de[k] - mix);
                }
            }
        }
    }
    cost *= scale;

    let new_running = cache
        .layers
        .iter()
        .filter_map(|lc| {
            lc.bn.as_ref().map(|bn| (bn.new_running_mean.clone(), bn.new_running_var.clone()))
        })
        .collect();

    let mlp_grads = if with_grads {
        let (grads, _) = backprop(&model.mlp, &cache, &dlogits)?;
        Some(grads)
    } else {
        None
    };

    Ok(Graph { cost, mlp_grads, head_w_grad, head_b_grad, new_running })
}
