//! Tracking evaluation.
//!
//! Two complementary views of quality. The log-based view replays the
//! tracker's association decisions against ground truth and charges each
//! timestep for the fraction it got wrong (inference error). The
//! output-based view compares final boxes and identities frame by frame,
//! yielding identification precision/recall/F1 plus the classic accuracy
//! scores built from false negatives, false positives and identity
//! switches.

mod counts;
mod identity;
mod replay;

pub use counts::{count_mismatches, mcta, mota, MismatchCounts};
pub use identity::{id_measures, IdMeasures};
pub use replay::{
    inference_breakdown, inference_error, misassociation_count, EventLog, InferenceBreakdown,
    ReplayState, TimestepCount,
};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::assoc::{BBox, Detection, Trajectory};
use crate::error::{Error, Result};

type FrameKey = (u32, u64);
type FrameBoxes = BTreeMap<FrameKey, Vec<(usize, BBox)>>;

fn push_box(
    frames: &mut FrameBoxes,
    camera: u32,
    frame: u64,
    identity: usize,
    bbox: BBox,
) -> Result<()> {
    bbox.validate()?;
    let slot = frames.entry((camera, frame)).or_default();
    if slot.iter().any(|(id, _)| *id == identity) {
        return Err(Error::invalid(format!(
            "identity {identity} already has a box in camera {camera} frame {frame}"
        )));
    }
    let at = slot.partition_point(|(id, _)| *id < identity);
    slot.insert(at, (identity, bbox));
    Ok(())
}

/// True identities and their boxes, one box per identity per camera-frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthLog {
    frames: FrameBoxes,
}

impl GroundTruthLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, camera: u32, frame: u64, identity: usize, bbox: BBox) -> Result<()> {
        push_box(&mut self.frames, camera, frame, identity, bbox)
    }

    /// Collects labeled detections; every one must carry its true identity.
    pub fn from_detections(detections: &[Detection]) -> Result<Self> {
        let mut log = Self::new();
        for d in detections {
            let identity = d.gt_identity.ok_or_else(|| {
                Error::invalid(format!(
                    "detection in camera {} frame {} has no ground-truth identity",
                    d.camera, d.frame
                ))
            })?;
            log.insert(d.camera, d.frame, identity, d.bbox)?;
        }
        Ok(log)
    }

    pub fn total_detections(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Computed identities and their boxes, same shape as the truth log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HypothesisLog {
    frames: FrameBoxes,
}

impl HypothesisLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, camera: u32, frame: u64, identity: usize, bbox: BBox) -> Result<()> {
        push_box(&mut self.frames, camera, frame, identity, bbox)
    }

    /// Flattens tracker output into per-frame boxes. Identities are the
    /// merged global ones when present, raw track ids otherwise.
    pub fn from_trajectories(trajectories: &[Trajectory]) -> Result<Self> {
        let mut log = Self::new();
        for t in trajectories {
            t.validate()?;
            let identity = t.global_identity.unwrap_or(t.id);
            for d in &t.detections {
                log.insert(d.camera, d.frame, identity, d.bbox)?;
            }
        }
        Ok(log)
    }

    pub fn total_detections(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Harmonic mean of detection precision and recall; with `matched` boxes
/// agreed on both sides this collapses to 2m / (gt + hyp).
pub fn detection_f1(matched: usize, gt_total: usize, hyp_total: usize) -> f64 {
    if gt_total + hyp_total == 0 {
        return 1.0;
    }
    2.0 * matched as f64 / (gt_total + hyp_total) as f64
}

/// Every score and raw count of one evaluation, kept together so published
/// numbers can be audited from the report alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub inference_error: f64,
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub mota: f64,
    pub mcta: f64,
    pub detection_f1: f64,
    pub gt_detections: usize,
    pub hyp_detections: usize,
    pub matched_detections: usize,
    pub false_negatives: usize,
    pub false_positives: usize,
    pub fragmentations: usize,
    pub within_camera_switches: usize,
    pub within_camera_pairs: usize,
    pub cross_camera_switches: usize,
    pub cross_camera_pairs: usize,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
    pub per_timestep: Vec<TimestepCount>,
}

/// Runs the whole evaluation suite over one tracker run.
pub fn compute_report(
    gt: &GroundTruthLog,
    hyp: &HypothesisLog,
    log: &EventLog,
) -> Result<MetricsReport> {
    let counts = count_mismatches(gt, hyp)?;
    let ids = id_measures(gt, hyp)?;
    let breakdown = inference_breakdown(log)?;
    let f1 = detection_f1(counts.matched, counts.gt_total, counts.hyp_total);
    let mota = mota(
        counts.false_negatives,
        counts.false_positives,
        counts.fragmentations,
        counts.gt_total,
    )?;
    let mcta = mcta(
        f1,
        counts.within_switches,
        counts.within_pairs,
        counts.cross_switches,
        counts.cross_pairs,
    )?;
    Ok(MetricsReport {
        inference_error: breakdown.error,
        idp: ids.idp,
        idr: ids.idr,
        idf1: ids.idf1,
        mota,
        mcta,
        detection_f1: f1,
        gt_detections: counts.gt_total,
        hyp_detections: counts.hyp_total,
        matched_detections: counts.matched,
        false_negatives: counts.false_negatives,
        false_positives: counts.false_positives,
        fragmentations: counts.fragmentations,
        within_camera_switches: counts.within_switches,
        within_camera_pairs: counts.within_pairs,
        cross_camera_switches: counts.cross_switches,
        cross_camera_pairs: counts.cross_pairs,
        idtp: ids.idtp,
        idfp: ids.idfp,
        idfn: ids.idfn,
        per_timestep: breakdown.per_timestep,
    })
}
