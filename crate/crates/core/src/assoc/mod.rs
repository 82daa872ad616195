//! Data association.
//!
//! Two stages. Within one camera, detections of adjacent frames are merged
//! into tracklets over a half-overlapping sliding window, scored by
//! appearance similarity plus a hard location gate. Across cameras, the
//! resulting trajectories are compared via their aggregated template
//! features and merged greedily under union-find, yielding global
//! identities.

mod ict;
mod sct;

pub use ict::{ict_merge, ict_score_matrix, ict_score_matrix_seq, GALLERY_CAP};
pub use sct::build_sct_trajectories;

use serde::{Deserialize, Serialize};

use crate::agg::DetectionMeta;
use crate::error::{Error, Result};
use crate::feat::cosine;

/// Axis-aligned box, top-left corner plus size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0 && self.h > 0.0)
            || !self.x.is_finite()
            || !self.y.is_finite()
            || !self.w.is_finite()
            || !self.h.is_finite()
        {
            return Err(Error::invalid(format!(
                "box at ({}, {}) must have positive finite size, got {}x{}",
                self.x, self.y, self.w, self.h
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// One detection: where it was seen and what it looked like.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub camera: u32,
    pub frame: u64,
    pub bbox: BBox,
    pub feature: Vec<f64>,
    /// Ground-truth identity when known; drives evaluation only, never
    /// association.
    pub gt_identity: Option<usize>,
}

impl Detection {
    /// Box metadata in the form the aggregation net consumes.
    pub fn meta(&self) -> DetectionMeta {
        DetectionMeta {
            w: self.bbox.w,
            h: self.bbox.h,
            cx: self.bbox.x + self.bbox.w / 2.0,
            cy: self.bbox.y + self.bbox.h / 2.0,
            camera: self.camera,
        }
    }
}

/// A time-ordered run of detections from a single camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub camera: u32,
    pub detections: Vec<Detection>,
    /// Filled by inter-camera merging.
    pub global_identity: Option<usize>,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if self.detections.is_empty() {
            return Err(Error::invalid(format!("trajectory {} has no detections", self.id)));
        }
        if self.detections.iter().any(|d| d.camera != self.camera) {
            return Err(Error::invalid(format!(
                "trajectory {} mixes cameras; it must span exactly one",
                self.id
            )));
        }
        if self.detections.windows(2).any(|p| p[0].frame > p[1].frame) {
            return Err(Error::invalid(format!("trajectory {} is not frame-ordered", self.id)));
        }
        Ok(())
    }

    pub fn first_frame(&self) -> u64 {
        self.detections[0].frame
    }

    pub fn last_frame(&self) -> u64 {
        self.detections[self.detections.len() - 1].frame
    }

    /// The trajectory's representative on the probe side of a comparison:
    /// its largest detection by box area, since bigger crops carry the most
    /// reliable appearance. Ties go to the earliest frame.
    pub fn representative(&self) -> &Detection {
        let mut best = &self.detections[0];
        for det in &self.detections[1..] {
            if det.bbox.area() > best.bbox.area() {
                best = det;
            }
        }
        best
    }
}

/// Association stage an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Sct,
    Ict,
}

/// What the tracker decided for one probe observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Decision {
    Matched { track: usize },
    NewTrack { track: usize },
}

impl Decision {
    pub fn track(&self) -> usize {
        match self {
            Decision::Matched { track } | Decision::NewTrack { track } => *track,
        }
    }
}

/// One logged association decision, the unit the inference-error metric
/// replays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationEvent {
    pub stage: Stage,
    pub time: u64,
    pub camera: u32,
    /// Ground-truth identity of the probe observation, when known.
    pub probe_gt: Option<usize>,
    pub decision: Decision,
    /// Winning association score; absent for new tracks.
    pub score: Option<f64>,
    /// Verdict filled in by evaluation, never by the tracker.
    pub correct: Option<bool>,
}

/// An association score that is either a usable value or a hard exclusion.
///
/// Gated-out and physically impossible pairs are excluded from greedy
/// consideration entirely instead of carrying a floating-point infinity
/// through arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Value(f64),
    Forbidden,
}

impl Score {
    pub fn value(&self) -> Option<f64> {
        match self {
            Score::Value(v) => Some(*v),
            Score::Forbidden => None,
        }
    }
}

/// Dense rectangular score table; rows are existing tracks, columns are
/// incoming observations (or trajectory pairs, symmetrically).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Score>,
}

impl ScoreMatrix {
    pub fn forbidden(rows: usize, cols: usize) -> Self {
        ScoreMatrix { rows, cols, data: vec![Score::Forbidden; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Score {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, s: Score) {
        self.data[r * self.cols + c] = s;
    }
}

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let ix = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let iy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    if ix <= 0.0 || iy <= 0.0 {
        return Ok(0.0);
    }
    let inter = ix * iy;
    Ok(inter / (a.area() + b.area() - inter))
}

/// Hard location gate: 1 when boxes overlap by at least half, else
/// forbidden.
pub fn gate(a: &BBox, b: &BBox) -> Result<Score> {
    Ok(if iou(a, b)? >= 0.5 { Score::Value(1.0) } else { Score::Forbidden })
}

/// Within-camera association score: appearance similarity plus the
/// location gate. Forbidden whenever the gate rejects the pair.
pub fn sct_score(prev: &Detection, cur: &Detection) -> Result<Score> {
    if prev.camera != cur.camera {
        return Err(Error::invalid(format!(
            "within-camera score across cameras {} and {}",
            prev.camera, cur.camera
        )));
    }
    match gate(&prev.bbox, &cur.bbox)? {
        Score::Forbidden => Ok(Score::Forbidden),
        Score::Value(g) => Ok(Score::Value(cosine(&prev.feature, &cur.feature)? + g)),
    }
}

/// Greedy matching: repeatedly take the highest remaining score that is at
/// least `tau`, claiming its row and column. Ties prefer the lowest row,
/// then the lowest column. Returns the matches plus the columns that never
/// found a partner.
pub fn greedy_associate(scores: &ScoreMatrix, tau: f64) -> (Vec<(usize, usize, f64)>, Vec<usize>) {
    let mut row_used = vec![false; scores.rows()];
    let mut col_used = vec![false; scores.cols()];
    let mut matches = Vec::new();
    loop {
        let mut best: Option<(usize, usize, f64)> = None;
        for (r, _) in row_used.iter().enumerate().filter(|(_, used)| !**used) {
            for (c, _) in col_used.iter().enumerate().filter(|(_, used)| !**used) {
                if let Score::Value(v) = scores.get(r, c) {
                    if v >= tau && best.is_none_or(|(_, _, bv)| v > bv) {
                        best = Some((r, c, v));
                    }
                }
            }
        }
        match best {
            Some((r, c, v)) => {
                row_used[r] = true;
                col_used[c] = true;
                matches.push((r, c, v));
            }
            None => break,
        }
    }
    let unmatched = (0..scores.cols()).filter(|c| !col_used[*c]).collect();
    (matches, unmatched)
}

/// Half-overlapping windows of length `len` covering `frames`. Consecutive
/// windows share exactly `len / 2` frames; the final window may extend
/// past the end of the range.
pub fn window_partition(frames: std::ops::Range<u64>, len: u64) -> Result<Vec<std::ops::Range<u64>>> {
    if len < 2 || !len.is_multiple_of(2) {
        return Err(Error::invalid(format!("window length must be even and >= 2, got {len}")));
    }
    if frames.start >= frames.end {
        return Ok(Vec::new());
    }
    let stride = len / 2;
    let mut windows = Vec::new();
    windows.push(frames.start..frames.start + len);
    let mut start = frames.start + stride;
    // Later windows only contribute their second half, so extend while a
    // second half would still contain frames of the range.
    while start + stride < frames.end {
        windows.push(start..start + len);
        start += stride;
    }
    Ok(windows)
}
