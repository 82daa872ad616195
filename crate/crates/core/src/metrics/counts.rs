//! Frame-level correspondence and the accuracy scores built on it.
//!
//! Truth and hypothesis boxes are matched per camera-frame by greedy
//! highest IoU, admitted at 0.5 and up. Each true identity's matched
//! observations then form a timeline; a computed identity that changes
//! between two consecutive observations is an identity switch, charged to
//! the within-camera regime or the handover regime depending on where the
//! two observations live.

use std::collections::BTreeMap;

use crate::assoc::{greedy_associate, iou, BBox, Score, ScoreMatrix};
use crate::error::{Error, Result};

use super::{GroundTruthLog, HypothesisLog};

/// Raw continuity counts feeding the accuracy scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MismatchCounts {
    /// Consecutive matched observations in one camera whose computed
    /// identity changed.
    pub within_switches: usize,
    /// All consecutive matched observation pairs within one camera.
    pub within_pairs: usize,
    /// Camera handovers whose computed identity changed.
    pub cross_switches: usize,
    /// All consecutive matched observation pairs spanning two cameras.
    pub cross_pairs: usize,
    /// Identity switches regardless of regime.
    pub fragmentations: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    /// Truth detections that found a hypothesis box.
    pub matched: usize,
    pub gt_total: usize,
    pub hyp_total: usize,
}

/// One frame's truth-to-hypothesis matching; returns index pairs into the
/// identity-sorted box lists.
fn match_frame(gt: &[(usize, BBox)], hyp: &[(usize, BBox)]) -> Result<Vec<(usize, usize)>> {
    let mut scores = ScoreMatrix::forbidden(gt.len(), hyp.len());
    for (r, (_, gb)) in gt.iter().enumerate() {
        for (c, (_, hb)) in hyp.iter().enumerate() {
            scores.set(r, c, Score::Value(iou(gb, hb)?));
        }
    }
    let (matches, _) = greedy_associate(&scores, 0.5);
    Ok(matches.into_iter().map(|(r, c, _)| (r, c)).collect())
}

/// Scans every true identity's matched timeline and tallies switches,
/// pairs per regime, and the detection-level miss counts.
pub fn count_mismatches(gt: &GroundTruthLog, hyp: &HypothesisLog) -> Result<MismatchCounts> {
    let mut counts = MismatchCounts {
        gt_total: gt.total_detections(),
        hyp_total: hyp.total_detections(),
        ..MismatchCounts::default()
    };

    let mut timelines: BTreeMap<usize, Vec<(u64, u32, usize)>> = BTreeMap::new();
    for (&(camera, frame), gt_boxes) in &gt.frames {
        let hyp_boxes = hyp.frames.get(&(camera, frame)).map(Vec::as_slice).unwrap_or(&[]);
        for (gi, hi) in match_frame(gt_boxes, hyp_boxes)? {
            counts.matched += 1;
            timelines
                .entry(gt_boxes[gi].0)
                .or_default()
                .push((frame, camera, hyp_boxes[hi].0));
        }
    }
    counts.false_negatives = counts.gt_total - counts.matched;
    counts.false_positives = counts.hyp_total - counts.matched;

    for timeline in timelines.values_mut() {
        timeline.sort_unstable();
        for pair in timeline.windows(2) {
            let (_, prev_cam, prev_hyp) = pair[0];
            let (_, cur_cam, cur_hyp) = pair[1];
            if prev_cam == cur_cam {
                counts.within_pairs += 1;
                counts.within_switches += (prev_hyp != cur_hyp) as usize;
            } else {
                counts.cross_pairs += 1;
                counts.cross_switches += (prev_hyp != cur_hyp) as usize;
            }
        }
    }
    counts.fragmentations = counts.within_switches + counts.cross_switches;
    Ok(counts)
}

/// Tracking accuracy: 1 - (FN + FP + switches) / D. Unbounded below, so a
/// tracker drowning the scene in false positives scores negative.
pub fn mota(
    false_negatives: usize,
    false_positives: usize,
    fragmentations: usize,
    gt_detections: usize,
) -> Result<f64> {
    if gt_detections == 0 {
        return Err(Error::invalid("tracking accuracy needs a nonempty ground truth"));
    }
    let bad = (false_negatives + false_positives + fragmentations) as f64;
    Ok(1.0 - bad / gt_detections as f64)
}

/// Multi-camera accuracy: detection F1 scaled by the fraction of
/// identity-preserving transitions, once within cameras and once across
/// handovers. A regime never observed contributes a neutral factor, so the
/// product stays in [0, 1].
pub fn mcta(
    detection_f1: f64,
    within_switches: usize,
    within_pairs: usize,
    cross_switches: usize,
    cross_pairs: usize,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&detection_f1) {
        return Err(Error::invalid(format!(
            "detection F1 must lie in [0, 1], got {detection_f1}"
        )));
    }
    let keep_rate = |switches: usize, pairs: usize| -> Result<f64> {
        if switches > pairs {
            return Err(Error::invalid(format!(
                "{switches} identity switches counted over only {pairs} observation pairs"
            )));
        }
        Ok(if pairs == 0 { 1.0 } else { 1.0 - switches as f64 / pairs as f64 })
    };
    Ok(detection_f1 * keep_rate(within_switches, within_pairs)? * keep_rate(cross_switches, cross_pairs)?)
}
