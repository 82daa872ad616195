use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

use super::{DetectionMeta, GalleryTemplate, ProbeSample, SceneInfo, TrainBatch};

/// Labeled detections grouped by identity, the raw material for batches.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    pub scene: SceneInfo,
    /// `per_identity[c]` holds every detection of identity class `c`,
    /// in temporal order, as (feature, metadata) pairs.
    pub per_identity: Vec<Vec<(Vec<f64>, DetectionMeta)>>,
}

impl TrainingSet {
    pub fn num_identities(&self) -> usize {
        self.per_identity.len()
    }

    /// Checks shape consistency and returns the feature dimension.
    pub fn validate(&self) -> Result<usize> {
        if self.per_identity.is_empty() {
            return Err(Error::invalid("training set has no identities"));
        }
        let first = self
            .per_identity
            .iter()
            .flatten()
            .next()
            .ok_or_else(|| Error::invalid("training set has no detections"))?;
        let d = first.0.len();
        if d == 0 {
            return Err(Error::invalid("training set features are empty vectors"));
        }
        for (c, pool) in self.per_identity.iter().enumerate() {
            if pool.is_empty() {
                return Err(Error::invalid(format!("identity {c} has no detections")));
            }
            if pool.iter().any(|(f, _)| f.len() != d) {
                return Err(Error::shape(format!("identity {c} has mixed feature lengths")));
            }
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SamplerConfig {
    /// Matching probe/template pairs per batch; also the probe count.
    pub positives: usize,
    /// Non-matching pairs per batch. Must be a multiple of `positives`,
    /// because every probe is scored against every template.
    pub negatives: usize,
    /// Upper bound on detections drawn into one gallery template.
    pub max_template_len: usize,
    pub seed: u64,
}

/// Deterministic batch stream over a labeled training set.
///
/// Each batch pairs `positives` probes with a gallery of
/// `1 + negatives / positives` templates of distinct identities. Probe
/// identities advance round-robin so every identity is probed equally
/// often; the remaining gallery slots are filled with random other
/// identities. A probe detection is never placed inside the template of
/// its own identity, so exact self-matches cannot leak into training.
#[derive(Debug, Clone)]
pub struct PairSampler {
    set: TrainingSet,
    cfg: SamplerConfig,
    templates_per_batch: usize,
    rng: ChaCha8Rng,
    cursor: usize,
}

impl PairSampler {
    pub fn new(set: TrainingSet, cfg: SamplerConfig) -> Result<Self> {
        set.validate()?;
        if cfg.positives == 0 {
            return Err(Error::invalid("sampler needs at least one positive pair per batch"));
        }
        if cfg.max_template_len == 0 {
            return Err(Error::invalid("max_template_len must be at least 1"));
        }
        if !cfg.negatives.is_multiple_of(cfg.positives) {
            return Err(Error::invalid(format!(
                "{} negatives cannot be split evenly over {} probes",
                cfg.negatives, cfg.positives
            )));
        }
        let m_g = 1 + cfg.negatives / cfg.positives;
        let k = set.num_identities();
        if m_g > k {
            return Err(Error::invalid(format!(
                "batch needs {m_g} distinct template identities, set has {k}"
            )));
        }
        // Round-robin probing of K identities puts at most this many probes
        // on one identity in a single batch.
        let probes_per_identity = cfg.positives.div_ceil(k);
        if cfg.positives.min(k) > m_g {
            return Err(Error::invalid(format!(
                "{} probes span {} identities but the gallery holds only {m_g}",
                cfg.positives,
                cfg.positives.min(k)
            )));
        }
        for (c, pool) in set.per_identity.iter().enumerate() {
            if pool.len() < probes_per_identity + 1 {
                return Err(Error::invalid(format!(
                    "identity {c} has {} detections; need {} to probe it and still fill a template",
                    pool.len(),
                    probes_per_identity + 1
                )));
            }
        }
        Ok(PairSampler {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            set,
            cfg,
            templates_per_batch: m_g,
            cursor: 0,
        })
    }

    pub fn templates_per_batch(&self) -> usize {
        self.templates_per_batch
    }

    /// Draws `count` distinct indices below `n`, returned in ascending order.
    fn draw_distinct(&mut self, n: usize, count: usize, exclude: &[usize]) -> Vec<usize> {
        let mut avail: Vec<usize> = (0..n).filter(|i| !exclude.contains(i)).collect();
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let i = self.rng.gen_range(0..avail.len());
            out.push(avail.swap_remove(i));
        }
        out.sort_unstable();
        out
    }

    pub fn next_batch(&mut self) -> TrainBatch {
        let k = self.set.num_identities();
        let m_p = self.cfg.positives;
        let m_g = self.templates_per_batch;

        let probe_ids: Vec<usize> = (0..m_p).map(|t| (self.cursor + t) % k).collect();
        self.cursor = (self.cursor + m_p) % k;

        // Distinct probe identities first, then random fillers.
        let mut template_ids: Vec<usize> = Vec::with_capacity(m_g);
        for &id in &probe_ids {
            if !template_ids.contains(&id) {
                template_ids.push(id);
            }
        }
        let mut rest: Vec<usize> = (0..k).filter(|c| !template_ids.contains(c)).collect();
        while template_ids.len() < m_g {
            let i = self.rng.gen_range(0..rest.len());
            template_ids.push(rest.swap_remove(i));
        }

        // Pick probe detections per identity without replacement, so
        // repeated probes of one identity are distinct detections.
        let mut probe_picks: Vec<Vec<usize>> = Vec::with_capacity(k);
        for id in 0..k {
            let count = probe_ids.iter().filter(|p| **p == id).count();
            let picks = if count > 0 {
                self.draw_distinct(self.set.per_identity[id].len(), count, &[])
            } else {
                Vec::new()
            };
            probe_picks.push(picks);
        }
        let mut next_pick = vec![0usize; k];
        let probes: Vec<ProbeSample> = probe_ids
            .iter()
            .map(|&id| {
                let det = probe_picks[id][next_pick[id]];
                next_pick[id] += 1;
                let (f, m) = &self.set.per_identity[id][det];
                ProbeSample { feature: f.clone(), meta: *m, class: Some(id) }
            })
            .collect();

        let templates: Vec<GalleryTemplate> = template_ids
            .iter()
            .map(|&id| {
                let pool_len = self.set.per_identity[id].len();
                let free = pool_len - probe_picks[id].len();
                let cap = self.cfg.max_template_len.min(free);
                let len = self.rng.gen_range(1..=cap);
                let picks = self.draw_distinct(pool_len, len, &probe_picks[id]);
                let pool = &self.set.per_identity[id];
                GalleryTemplate {
                    features: picks.iter().map(|&i| pool[i].0.clone()).collect(),
                    metas: picks.iter().map(|&i| pool[i].1).collect(),
                    class: Some(id),
                }
            })
            .collect();

        let mut y = Matrix::zeros(m_p, m_g);
        for (i, pid) in probe_ids.iter().enumerate() {
            for (j, tid) in template_ids.iter().enumerate() {
                if pid == tid {
                    y.set(i, j, 1.0);
                }
            }
        }

        TrainBatch { scene: self.set.scene, templates, probes, y }
    }
}

impl Iterator for PairSampler {
    type Item = TrainBatch;

    fn next(&mut self) -> Option<TrainBatch> {
        Some(self.next_batch())
    }
}
