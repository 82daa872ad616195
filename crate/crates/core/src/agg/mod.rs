//! Learned template aggregation.
//!
//! A gallery template is a stack of detections (feature vector plus box
//! metadata) belonging to one track. To compare it against a probe
//! detection, the scoring net rates each gallery detection in the context
//! of the probe's metadata, softmax turns the ratings into weights on the
//! simplex, and the weighted sum of gallery features forms the template's
//! composite feature. Matching then reduces to cosine similarity between
//! the probe feature and that composite.
//!
//! Training moves the weights away from uniform: a joint cost combines a
//! squared cosine-match error for probe/template pairs with a
//! cross-entropy term that keeps composites classifiable by identity.

mod loss;
mod meta;
mod sampler;
mod train;

pub use loss::{cce_loss, mse_match_loss};
pub use meta::{build_meta_rows, meta_half, DetectionMeta, SceneInfo};
pub use sampler::{PairSampler, SamplerConfig, TrainingSet};
pub use train::{batch_cost, train_step, Hyper, TrainBatch, TrainState};

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{mlp_forward, softmax_normalize, BnMode, MlpDims, MlpParams};

/// A stack of detections from one track, used as re-identification gallery.
#[derive(Debug, Clone)]
pub struct GalleryTemplate {
    /// One feature vector per detection, all the same length.
    pub features: Vec<Vec<f64>>,
    pub metas: Vec<DetectionMeta>,
    /// Identity class index for training; `None` outside training.
    pub class: Option<usize>,
}

impl GalleryTemplate {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn validate(&self) -> Result<usize> {
        if self.features.is_empty() {
            return Err(Error::invalid("gallery template has no detections"));
        }
        if self.features.len() != self.metas.len() {
            return Err(Error::shape(format!(
                "template: {} features vs {} metadata entries",
                self.features.len(),
                self.metas.len()
            )));
        }
        let d = self.features[0].len();
        if self.features.iter().any(|f| f.len() != d) {
            return Err(Error::shape("template features have mixed lengths"));
        }
        Ok(d)
    }
}

/// A single detection acting as the probe side of a comparison.
#[derive(Debug, Clone)]
pub struct ProbeSample {
    pub feature: Vec<f64>,
    pub meta: DetectionMeta,
    pub class: Option<usize>,
}

/// Linear classifier over composite features, used only by the training
/// objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierHead {
    /// `(num_classes, feature_dim)` row-major.
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl ClassifierHead {
    pub fn init(num_classes: usize, feature_dim: usize, rng: &mut impl Rng) -> Result<Self> {
        if num_classes < 2 || feature_dim == 0 {
            return Err(Error::invalid("classifier head needs >= 2 classes and a feature dim"));
        }
        let bound = (6.0 / (feature_dim + num_classes) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        let data = (0..num_classes * feature_dim).map(|_| dist.sample(rng)).collect();
        Ok(ClassifierHead {
            w: Matrix::from_vec(num_classes, feature_dim, data).expect("sized above"),
            b: vec![0.0; num_classes],
        })
    }

    pub fn num_classes(&self) -> usize {
        self.w.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn validate(&self) -> Result<()> {
        if self.b.len() != self.w.rows() {
            return Err(Error::shape(format!(
                "classifier head: {} biases for {} classes",
                self.b.len(),
                self.w.rows()
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.w.data().len() + self.b.len()
    }

    pub fn flatten_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(self.w.data());
        out.extend_from_slice(&self.b);
        out
    }

    pub fn assign_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::shape("classifier head parameter vector has wrong length"));
        }
        let nw = self.w.data().len();
        self.w.data_mut().copy_from_slice(&flat[..nw]);
        self.b.copy_from_slice(&flat[nw..]);
        Ok(())
    }

    /// Class logits for one composite feature.
    pub fn logits(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.feature_dim() {
            return Err(Error::shape(format!(
                "classifier head expects dim {}, got {}",
                self.feature_dim(),
                f.len()
            )));
        }
        Ok((0..self.num_classes())
            .map(|c| crate::matrix::dot(self.w.row(c), f) + self.b[c])
            .collect())
    }
}

/// The trained model: scoring net plus (for training) the classifier head.
#[derive(Debug, Clone, PartialEq)]
pub struct CanModel {
    pub mlp: MlpParams,
    pub head: Option<ClassifierHead>,
}

impl CanModel {
    /// Feature dimension implied by the net input width (input is feature
    /// plus the 10 metadata entries).
    pub fn feature_dim(&self) -> Result<usize> {
        let w = self.mlp.dims.input;
        if w <= 10 {
            return Err(Error::invalid(format!("net input width {w} leaves no room for features")));
        }
        Ok(w - 10)
    }

    pub fn validate(&self) -> Result<()> {
        self.mlp.validate()?;
        let d = self.feature_dim()?;
        if let Some(head) = &self.head {
            head.validate()?;
            if head.feature_dim() != d {
                return Err(Error::shape(format!(
                    "classifier head dim {} but features are {d}-dimensional",
                    head.feature_dim()
                )));
            }
        }
        Ok(())
    }

    /// A freshly initialized trainable model for `num_classes` identities,
    /// deterministic in `seed`.
    pub fn init(
        feature_dim: usize,
        hidden: [usize; 3],
        num_classes: usize,
        seed: u64,
    ) -> Result<Self> {
        let dims = MlpDims::new(feature_dim + 10, hidden)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mlp = MlpParams::init(dims, &mut rng);
        let head = ClassifierHead::init(num_classes, feature_dim, &mut rng)?;
        Ok(CanModel { mlp, head: Some(head) })
    }

    /// An untrained model whose final layer is zeroed, so every detection
    /// scores the same logit and the softmax hands out uniform weights.
    /// Aggregating with it is exactly arithmetic mean pooling, which gives
    /// the unweighted baseline a ride through the same code path as a
    /// trained net.
    pub fn mean_baseline(feature_dim: usize, hidden: [usize; 3]) -> Result<Self> {
        let dims = MlpDims::new(feature_dim + 10, hidden)?;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut mlp = MlpParams::init(dims, &mut rng);
        let last = mlp.layers.last_mut().expect("nets always have layers");
        last.w = Matrix::zeros(last.w.rows(), last.w.cols());
        last.b.iter_mut().for_each(|b| *b = 0.0);
        Ok(CanModel { mlp, head: None })
    }
}

/// Scores each gallery detection against the probe and softmax-normalizes
/// the scalar logits into aggregation weights.
///
/// Inference-mode batch norm is used, so the weight of a detection does not
/// depend on which other detections happen to share the template.
pub fn detection_weights(
    template: &GalleryTemplate,
    probe_meta: &DetectionMeta,
    scene: &SceneInfo,
    mlp: &MlpParams,
) -> Result<Vec<f64>> {
    let d = template.validate()?;
    if d + 10 != mlp.dims.input {
        return Err(Error::shape(format!(
            "net expects input width {}, template features give {}",
            mlp.dims.input,
            d + 10
        )));
    }
    let meta_rows = build_meta_rows(&template.metas, probe_meta, scene)?;
    let mut x = Matrix::zeros(template.len(), d + 10);
    for (r, (f, m)) in template.features.iter().zip(&meta_rows).enumerate() {
        let row = x.row_mut(r);
        row[..d].copy_from_slice(f);
        row[d..].copy_from_slice(m);
    }
    let (logits, _) = mlp_forward(mlp, &x, BnMode::Infer)?;
    softmax_normalize(&logits)
}

/// Weighted sum of gallery features. Weights must lie on the simplex
/// (non-negative, summing to 1 within 1e-6); anything else indicates the
/// caller skipped softmax normalization.
pub fn aggregate(features: &[Vec<f64>], weights: &[f64]) -> Result<Vec<f64>> {
    if features.is_empty() {
        return Err(Error::invalid("aggregate: no features"));
    }
    if features.len() != weights.len() {
        return Err(Error::shape(format!(
            "aggregate: {} features vs {} weights",
            features.len(),
            weights.len()
        )));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || weights.iter().any(|w| *w < 0.0) {
        return Err(Error::invalid(format!("aggregate: weights sum to {sum}, not a simplex")));
    }
    let d = features[0].len();
    let mut out = vec![0.0; d];
    for (f, &w) in features.iter().zip(weights) {
        if f.len() != d {
            return Err(Error::shape("aggregate: mixed feature lengths"));
        }
        for (o, v) in out.iter_mut().zip(f) {
            *o += w * v;
        }
    }
    Ok(out)
}

/// Uniform simplex weights, the mean-pooling baseline.
pub fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}
