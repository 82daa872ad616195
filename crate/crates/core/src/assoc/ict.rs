use crate::agg::{aggregate, detection_weights, CanModel, GalleryTemplate, SceneInfo};
use crate::error::{Error, Result};
use crate::feat::cosine;
use crate::par;

use super::{AssociationEvent, Decision, Score, ScoreMatrix, Stage, Trajectory};

/// Upper bound on gallery rows per trajectory. Long tracks are thinned to
/// this many detections before scoring, which keeps pair cost flat and stops
/// a large stack from drowning its own informative rows.
pub const GALLERY_CAP: usize = 10;

/// Indices of at most `cap` evenly spaced elements out of `len`, always
/// keeping the first and last.
fn spread_indices(len: usize, cap: usize) -> Vec<usize> {
    if len <= cap {
        return (0..len).collect();
    }
    (0..cap).map(|k| (k * (len - 1) + (cap - 1) / 2) / (cap - 1)).collect()
}

fn templates(trajectories: &[Trajectory]) -> Result<Vec<GalleryTemplate>> {
    trajectories
        .iter()
        .map(|t| {
            t.validate()?;
            let keep = spread_indices(t.detections.len(), GALLERY_CAP);
            Ok(GalleryTemplate {
                features: keep.iter().map(|&k| t.detections[k].feature.clone()).collect(),
                metas: keep.iter().map(|&k| t.detections[k].meta()).collect(),
                class: None,
            })
        })
        .collect()
}

fn overlap_in_same_camera(a: &Trajectory, b: &Trajectory) -> bool {
    a.camera == b.camera && a.first_frame() <= b.last_frame() && b.first_frame() <= a.last_frame()
}

/// One direction of a trajectory comparison: `gallery` contributes its
/// thinned detection stack, `probe` only its representative detection.
fn ordered_score(
    gallery: &GalleryTemplate,
    probe: &Trajectory,
    model: &CanModel,
    scene: &SceneInfo,
) -> Result<f64> {
    let rep = probe.representative();
    let weights = detection_weights(gallery, &rep.meta(), scene, &model.mlp)?;
    let composite = aggregate(&gallery.features, &weights)?;
    cosine(&rep.feature, &composite)
}

fn pair_score(
    i: usize,
    j: usize,
    trajectories: &[Trajectory],
    temps: &[GalleryTemplate],
    model: &CanModel,
    scene: &SceneInfo,
) -> Result<Score> {
    let (a, b) = (&trajectories[i], &trajectories[j]);
    if overlap_in_same_camera(a, b) {
        return Ok(Score::Forbidden);
    }
    let ab = ordered_score(&temps[i], b, model, scene)?;
    let ba = ordered_score(&temps[j], a, model, scene)?;
    Ok(Score::Value((ab + ba) / 2.0))
}

/// Symmetric cross-camera score matrix over trajectory pairs.
///
/// Each unordered pair is the mean of its two ordered comparisons, so the
/// matrix does not depend on trajectory order. Pairs that coexist in the
/// same camera are physically distinct people and come back forbidden, as
/// does the diagonal. Pairs are scored in parallel when worthwhile;
/// results are identical to [`ict_score_matrix_seq`] bit for bit.
pub fn ict_score_matrix(
    trajectories: &[Trajectory],
    model: &CanModel,
    scene: &SceneInfo,
) -> Result<ScoreMatrix> {
    let temps = templates(trajectories)?;
    let n = trajectories.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();

    let avg_rows = trajectories.iter().map(|t| t.detections.len()).sum::<usize>().max(1)
        / trajectories.len().max(1);
    let work = 2 * avg_rows * model.mlp.param_count();
    let scored: Vec<Result<Score>> = par::map_indexed(pairs.len(), work, |k| {
        let (i, j) = pairs[k];
        pair_score(i, j, trajectories, &temps, model, scene)
    });

    let mut m = ScoreMatrix::forbidden(n, n);
    for ((i, j), s) in pairs.into_iter().zip(scored) {
        let s = s?;
        m.set(i, j, s);
        m.set(j, i, s);
    }
    Ok(m)
}

/// Sequential reference implementation of [`ict_score_matrix`], kept for
/// benchmarking and for pinning down the parallel version's output.
pub fn ict_score_matrix_seq(
    trajectories: &[Trajectory],
    model: &CanModel,
    scene: &SceneInfo,
) -> Result<ScoreMatrix> {
    let temps = templates(trajectories)?;
    let n = trajectories.len();
    let mut m = ScoreMatrix::forbidden(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let s = pair_score(i, j, trajectories, &temps, model, scene)?;
            m.set(i, j, s);
            m.set(j, i, s);
        }
    }
    Ok(m)
}

struct Dsu {
    parent: Vec<usize>,
    /// Per root: occupied (camera, first frame, last frame) spans of the
    /// whole group, for the physical-consistency check.
    spans: Vec<Vec<(u32, u64, u64)>>,
}

impl Dsu {
    fn new(trajectories: &[Trajectory]) -> Self {
        Dsu {
            parent: (0..trajectories.len()).collect(),
            spans: trajectories
                .iter()
                .map(|t| vec![(t.camera, t.first_frame(), t.last_frame())])
                .collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn groups_conflict(&self, ra: usize, rb: usize) -> bool {
        self.spans[ra].iter().any(|&(ca, a0, a1)| {
            self.spans[rb].iter().any(|&(cb, b0, b1)| ca == cb && a0 <= b1 && b0 <= a1)
        })
    }

    /// Merges the two groups unless that would place one identity in the
    /// same camera twice at the same time. The smaller index becomes the
    /// root, keeping the merge order-independent of internal layout.
    fn try_union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return true;
        }
        if self.groups_conflict(ra, rb) {
            return false;
        }
        let (keep, fold) = (ra.min(rb), ra.max(rb));
        self.parent[fold] = keep;
        let moved = std::mem::take(&mut self.spans[fold]);
        self.spans[keep].extend(moved);
        true
    }
}

/// Merges trajectories into global identities.
///
/// All usable pair scores are visited from highest to lowest (ties prefer
/// the lower trajectory indices); each pair at or above `tau` joins its two
/// groups unless the groups already coexist somewhere in the same camera.
/// Returns one global identity per trajectory, numbered by first
/// appearance, plus the event log: each trajectory is reported at its
/// starting frame, either matched into the identity of an earlier
/// trajectory or opening a new one.
pub fn ict_merge(
    trajectories: &[Trajectory],
    scores: &ScoreMatrix,
    tau: f64,
) -> Result<(Vec<usize>, Vec<AssociationEvent>)> {
    let n = trajectories.len();
    if scores.rows() != n || scores.cols() != n {
        return Err(Error::shape(format!(
            "score matrix is {}x{} for {n} trajectories",
            scores.rows(),
            scores.cols()
        )));
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if scores.get(i, j) != scores.get(j, i) {
                return Err(Error::invalid(format!("score matrix is asymmetric at ({i}, {j})")));
            }
            if let Score::Value(v) = scores.get(i, j) {
                if !v.is_finite() {
                    return Err(Error::internal(format!("non-finite score at ({i}, {j})")));
                }
                if v >= tau {
                    pairs.push((i, j, v));
                }
            }
        }
    }
    pairs.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut dsu = Dsu::new(trajectories);
    for (i, j, _) in pairs {
        dsu.try_union(i, j);
    }

    // Report trajectories in the order the tracker would encounter them.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (trajectories[i].first_frame(), trajectories[i].id));

    let mut assignment = vec![usize::MAX; n];
    let mut root_to_global: Vec<Option<usize>> = vec![None; n];
    let mut next_global = 0usize;
    let mut emitted: Vec<usize> = Vec::new();
    let mut events = Vec::new();
    for &i in &order {
        let t = &trajectories[i];
        let root = dsu.find(i);
        let decision = match root_to_global[root] {
            Some(g) => {
                assignment[i] = g;
                Decision::Matched { track: g }
            }
            None => {
                let g = next_global;
                next_global += 1;
                root_to_global[root] = Some(g);
                assignment[i] = g;
                Decision::NewTrack { track: g }
            }
        };
        let score = match decision {
            Decision::NewTrack { .. } => None,
            Decision::Matched { .. } => emitted
                .iter()
                .filter(|&&e| dsu.find(e) == root)
                .filter_map(|&e| scores.get(i.min(e), i.max(e)).value())
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
        };
        events.push(AssociationEvent {
            stage: Stage::Ict,
            time: t.first_frame(),
            camera: t.camera,
            probe_gt: t.detections[0].gt_identity,
            decision,
            score,
            correct: None,
        });
        emitted.push(i);
    }
    Ok((assignment, events))
}
