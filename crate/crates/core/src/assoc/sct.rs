use std::collections::BTreeMap;

use crate::error::Result;

use super::{
    greedy_associate, sct_score, window_partition, AssociationEvent, Decision, Detection,
    ScoreMatrix, Stage, Trajectory,
};

/// Builds single-camera tracklets over a half-overlapping sliding window.
///
/// Detections are grouped by camera and processed frame by frame. The first
/// window covers all its frames; every later window contributes only its
/// second half, since the first half was handled by its predecessor. At
/// each frame the incoming detections are greedily matched against the
/// open tracklets (those whose last detection falls inside the current
/// window); leftovers open new tracklets. Track ids are unique across
/// cameras and every decision is logged.
pub fn build_sct_trajectories(
    detections: &[Detection],
    window_len: u64,
    tau: f64,
) -> Result<(Vec<Trajectory>, Vec<AssociationEvent>)> {
    let mut per_camera: BTreeMap<u32, Vec<&Detection>> = BTreeMap::new();
    for d in detections {
        per_camera.entry(d.camera).or_default().push(d);
    }

    let mut next_id = 0usize;
    let mut trajectories = Vec::new();
    let mut events = Vec::new();

    for (camera, mut dets) in per_camera {
        dets.sort_by_key(|d| d.frame);
        let mut by_frame: BTreeMap<u64, Vec<&Detection>> = BTreeMap::new();
        for d in &dets {
            by_frame.entry(d.frame).or_default().push(d);
        }
        let first = dets[0].frame;
        let last = dets[dets.len() - 1].frame;
        let windows = window_partition(first..last + 1, window_len)?;
        let stride = window_len / 2;

        let mut tracks: Vec<(usize, Vec<Detection>)> = Vec::new();
        for (wi, win) in windows.iter().enumerate() {
            let lo = if wi == 0 { win.start } else { win.start + stride };
            for t in lo..win.end {
                let Some(cols) = by_frame.get(&t) else { continue };

                // Tracklets still alive in this window, in track-id order.
                let open: Vec<usize> = (0..tracks.len())
                    .filter(|&k| tracks[k].1.last().map(|d| d.frame) >= Some(win.start))
                    .collect();
                let mut scores = ScoreMatrix::forbidden(open.len(), cols.len());
                for (r, &k) in open.iter().enumerate() {
                    let prev = tracks[k].1.last().expect("tracks are never empty");
                    for (c, d) in cols.iter().enumerate() {
                        scores.set(r, c, sct_score(prev, d)?);
                    }
                }

                let (matches, unmatched) = greedy_associate(&scores, tau);
                for (r, c, v) in matches {
                    let k = open[r];
                    tracks[k].1.push(cols[c].clone());
                    events.push(AssociationEvent {
                        stage: Stage::Sct,
                        time: t,
                        camera,
                        probe_gt: cols[c].gt_identity,
                        decision: Decision::Matched { track: tracks[k].0 },
                        score: Some(v),
                        correct: None,
                    });
                }
                for c in unmatched {
                    let id = next_id;
                    next_id += 1;
                    tracks.push((id, vec![cols[c].clone()]));
                    events.push(AssociationEvent {
                        stage: Stage::Sct,
                        time: t,
                        camera,
                        probe_gt: cols[c].gt_identity,
                        decision: Decision::NewTrack { track: id },
                        score: None,
                        correct: None,
                    });
                }
            }
        }

        trajectories.extend(tracks.into_iter().map(|(id, dets)| Trajectory {
            id,
            camera,
            detections: dets,
            global_identity: None,
        }));
    }

    events.sort_by_key(|e| e.time);
    Ok((trajectories, events))
}
