//! Event-log replay and the inference-error score.
//!
//! Tracker decisions are judged against the gallery each stage actually
//! saw: tracklet building keeps one gallery per camera, trajectory merging
//! one global set. A track is labeled by the true identity of its first
//! observation. A decision is a misassociation when it matched a track
//! whose label disagrees, matched while the probe's identity had never
//! been seen, or opened a duplicate track for an identity already in the
//! gallery. The score averages, over timesteps, the fraction of that
//! timestep's decisions that were misassociations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::assoc::{AssociationEvent, Decision, Stage};
use crate::error::{Error, Result};

/// Time-ordered association decisions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<AssociationEvent>,
}

impl EventLog {
    pub fn new(events: Vec<AssociationEvent>) -> Result<Self> {
        if events.windows(2).any(|p| p[0].time > p[1].time) {
            return Err(Error::invalid("event log times must be non-decreasing"));
        }
        Ok(Self { events })
    }

    pub fn events(&self) -> &[AssociationEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Which gallery a decision consulted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Scope {
    Camera(u32),
    Global,
}

fn scope_of(event: &AssociationEvent) -> Scope {
    match event.stage {
        Stage::Sct => Scope::Camera(event.camera),
        Stage::Ict => Scope::Global,
    }
}

#[derive(Debug, Clone, Default)]
struct Gallery {
    label_of: BTreeMap<usize, usize>,
    labeled: BTreeSet<usize>,
}

/// Reconstructed gallery contents as of the current replay position.
#[derive(Debug, Clone, Default)]
pub struct ReplayState {
    galleries: BTreeMap<Scope, Gallery>,
}

impl ReplayState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Applies one decision and reports whether it contradicts ground
    /// truth.
    fn judge(&mut self, event: &AssociationEvent) -> Result<bool> {
        let identity = event.probe_gt.ok_or_else(|| {
            Error::invalid(format!(
                "event at time {} carries no ground-truth identity",
                event.time
            ))
        })?;
        let gallery = self.galleries.entry(scope_of(event)).or_default();
        match event.decision {
            Decision::NewTrack { track } => {
                if gallery.label_of.contains_key(&track) {
                    return Err(Error::invalid(format!(
                        "track {track} opened twice, second time at {}",
                        event.time
                    )));
                }
                let duplicate = gallery.labeled.contains(&identity);
                gallery.label_of.insert(track, identity);
                gallery.labeled.insert(identity);
                Ok(duplicate)
            }
            Decision::Matched { track } => {
                let label = *gallery.label_of.get(&track).ok_or_else(|| {
                    Error::invalid(format!(
                        "event at time {} matched unknown track {track}",
                        event.time
                    ))
                })?;
                Ok(!gallery.labeled.contains(&identity) || label != identity)
            }
        }
    }
}

/// Judges a slice of events, advancing the gallery state, and returns how
/// many contradicted ground truth. The probe's true identity rides on each
/// event.
pub fn misassociation_count(
    events: &[AssociationEvent],
    state: &mut ReplayState,
) -> Result<usize> {
    let mut count = 0;
    for event in events {
        count += state.judge(event)? as usize;
    }
    Ok(count)
}

/// Misassociations and decisions of one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestepCount {
    pub time: u64,
    pub misassociations: usize,
    pub decisions: usize,
}

/// Inference error plus its per-timestep trail and the input events
/// annotated with their verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceBreakdown {
    pub error: f64,
    pub per_timestep: Vec<TimestepCount>,
    pub annotated: Vec<AssociationEvent>,
}

pub fn inference_breakdown(log: &EventLog) -> Result<InferenceBreakdown> {
    if log.is_empty() {
        return Err(Error::invalid("inference error needs at least one event"));
    }
    let mut state = ReplayState::new();
    let mut per_timestep: Vec<TimestepCount> = Vec::new();
    let mut annotated = Vec::with_capacity(log.len());
    for event in log.events() {
        let miss = state.judge(event)?;
        match per_timestep.last_mut() {
            Some(t) if t.time == event.time => {
                t.misassociations += miss as usize;
                t.decisions += 1;
            }
            _ => per_timestep.push(TimestepCount {
                time: event.time,
                misassociations: miss as usize,
                decisions: 1,
            }),
        }
        let mut event = event.clone();
        event.correct = Some(!miss);
        annotated.push(event);
    }
    let sum: f64 =
        per_timestep.iter().map(|t| t.misassociations as f64 / t.decisions as f64).sum();
    Ok(InferenceBreakdown {
        error: sum / per_timestep.len() as f64,
        per_timestep,
        annotated,
    })
}

/// Mean over timesteps of the fraction of decisions contradicting ground
/// truth. Timesteps without decisions never enter the log, so the mean
/// runs over timesteps that decided something.
pub fn inference_error(log: &EventLog) -> Result<f64> {
    Ok(inference_breakdown(log)?.error)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sct(time: u64, camera: u32, gt: usize, decision: Decision) -> AssociationEvent {
        AssociationEvent {
            stage: Stage::Sct,
            time,
            camera,
            probe_gt: Some(gt),
            decision,
            score: None,
            correct: None,
        }
    }

    fn ict(time: u64, gt: usize, decision: Decision) -> AssociationEvent {
        AssociationEvent { stage: Stage::Ict, camera: 0, ..sct(time, 0, gt, decision) }
    }

    fn opened(track: usize) -> Decision {
        Decision::NewTrack { track }
    }

    fn matched(track: usize) -> Decision {
        Decision::Matched { track }
    }

    #[test]
    fn a_faithful_log_has_zero_error() {
        let mut events = Vec::new();
        for identity in 0..3usize {
            events.push(sct(0, 0, identity, opened(identity)));
            for time in 1..5u64 {
                events.push(sct(time, 0, identity, matched(identity)));
            }
        }
        events.sort_by_key(|e| e.time);
        let log = EventLog::new(events).unwrap();
        assert_eq!(inference_error(&log).unwrap(), 0.0);
        let breakdown = inference_breakdown(&log).unwrap();
        assert!(breakdown.annotated.iter().all(|e| e.correct == Some(true)));
        assert_eq!(breakdown.per_timestep.len(), 5);
    }

    #[test]
    fn the_error_averages_each_timesteps_fraction() {
        // first timestep: ids 1..3 open tracks, id 1 then opens a duplicate
        let events = vec![
            sct(0, 0, 1, opened(0)),
            sct(0, 0, 2, opened(1)),
            sct(0, 0, 3, opened(2)),
            sct(0, 0, 1, opened(3)),
            sct(1, 0, 1, matched(0)),
            sct(1, 0, 2, matched(1)),
            sct(1, 0, 3, matched(2)),
            sct(1, 0, 4, opened(4)),
        ];
        let log = EventLog::new(events).unwrap();
        assert_eq!(inference_error(&log).unwrap(), 0.125);
        let breakdown = inference_breakdown(&log).unwrap();
        assert_eq!(breakdown.per_timestep[0].misassociations, 1);
        assert_eq!(breakdown.per_timestep[0].decisions, 4);
        assert_eq!(breakdown.per_timestep[1].misassociations, 0);
    }

    #[test]
    fn a_duplicate_track_for_a_known_identity_is_charged() {
        let mut state = ReplayState::new();
        let first = misassociation_count(&[sct(0, 0, 7, opened(0))], &mut state).unwrap();
        let second = misassociation_count(&[sct(3, 0, 7, opened(1))], &mut state).unwrap();
        assert_eq!((first, second), (0, 1));
    }

    #[test]
    fn matching_the_wrong_track_is_charged() {
        let events = vec![
            sct(0, 0, 1, opened(0)),
            sct(0, 0, 2, opened(1)),
            sct(1, 0, 1, matched(1)),
        ];
        let mut state = ReplayState::new();
        assert_eq!(misassociation_count(&events, &mut state).unwrap(), 1);
    }

    #[test]
    fn matching_before_the_identity_ever_appeared_is_charged() {
        let events = vec![sct(0, 0, 1, opened(0)), sct(2, 0, 9, matched(0))];
        let mut state = ReplayState::new();
        assert_eq!(misassociation_count(&events, &mut state).unwrap(), 1);
    }

    #[test]
    fn cameras_keep_separate_galleries_while_tracklets_build() {
        let events = vec![
            sct(0, 1, 7, opened(0)),
            sct(0, 2, 7, opened(1)),
            sct(1, 1, 7, opened(2)),
        ];
        let mut state = ReplayState::new();
        // the second camera may open its own track, the repeat in camera 1
        // is the duplicate
        assert_eq!(misassociation_count(&events, &mut state).unwrap(), 1);
    }

    #[test]
    fn the_merge_stage_judges_against_one_global_gallery() {
        let events = vec![
            sct(0, 1, 7, opened(0)),
            sct(0, 2, 7, opened(1)),
            ict(5, 7, opened(100)),
            ict(5, 7, opened(101)),
        ];
        let mut state = ReplayState::new();
        assert_eq!(misassociation_count(&events, &mut state).unwrap(), 1);
    }

    #[test]
    fn extra_duplicate_tracks_raise_the_error_strictly() {
        let error_with_fragments = |fragments: usize| {
            let mut events = vec![sct(0, 0, 1, opened(0))];
            let mut track = 0;
            for time in 1..10u64 {
                if (time as usize) < fragments {
                    track += 1;
                    events.push(sct(time, 0, 1, opened(track)));
                } else {
                    events.push(sct(time, 0, 1, matched(track)));
                }
            }
            inference_error(&EventLog::new(events).unwrap()).unwrap()
        };
        let one = error_with_fragments(1);
        let two = error_with_fragments(2);
        let three = error_with_fragments(3);
        assert_eq!(one, 0.0);
        assert!(two > one);
        assert!(three > two);
    }

    #[test]
    fn judging_in_chunks_equals_judging_at_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let events: Vec<AssociationEvent> = (0..12)
            .map(|k| {
                let identity = rng.gen_range(0..3);
                if k < 3 {
                    sct(9, 0, identity, opened(k))
                } else {
                    sct(9, 0, identity, matched(rng.gen_range(0..3)))
                }
            })
            .collect();
        let mut whole = ReplayState::new();
        let mut chunked = ReplayState::new();
        let all = misassociation_count(&events, &mut whole).unwrap();
        let front = misassociation_count(&events[..5], &mut chunked).unwrap();
        let back = misassociation_count(&events[5..], &mut chunked).unwrap();
        assert_eq!(all, front + back);
    }

    #[test]
    fn bad_logs_are_rejected() {
        let unlabeled = AssociationEvent { probe_gt: None, ..sct(0, 0, 0, opened(0)) };
        assert!(misassociation_count(&[unlabeled], &mut ReplayState::new()).is_err());

        assert!(inference_error(&EventLog::default()).is_err());

        let unknown_track = [sct(0, 0, 1, matched(4))];
        assert!(misassociation_count(&unknown_track, &mut ReplayState::new()).is_err());

        let reopened = [sct(0, 0, 1, opened(4)), sct(1, 0, 2, opened(4))];
        assert!(misassociation_count(&reopened, &mut ReplayState::new()).is_err());

        let out_of_order = vec![sct(5, 0, 1, opened(0)), sct(4, 0, 1, matched(0))];
        assert!(EventLog::new(out_of_order).is_err());
    }

    // From-scratch oracle: for each timestep, rebuild every gallery by
    // rescanning all earlier events, then spell the three clauses out.
    fn oracle_error(events: &[AssociationEvent]) -> f64 {
        let times: Vec<u64> = {
            let mut t: Vec<u64> = events.iter().map(|e| e.time).collect();
            t.dedup();
            t
        };
        let scope = |e: &AssociationEvent| match e.stage {
            Stage::Sct => (0u8, e.camera),
            Stage::Ict => (1u8, 0),
        };
        let mut total = 0.0;
        for &now in &times {
            // tracks opened strictly before this timestep, labeled by
            // their first identity
            let mut tracks: Vec<((u8, u32), usize, usize)> = Vec::new();
            for e in events.iter().filter(|e| e.time < now) {
                if let Decision::NewTrack { track } = e.decision {
                    tracks.push((scope(e), track, e.probe_gt.unwrap()));
                }
            }
            let mut m = 0usize;
            let mut d = 0usize;
            for e in events.iter().filter(|e| e.time == now) {
                d += 1;
                let s = scope(e);
                let identity = e.probe_gt.unwrap();
                let seen = tracks.iter().any(|(ts, _, label)| *ts == s && *label == identity);
                match e.decision {
                    Decision::NewTrack { track } => {
                        if seen {
                            m += 1;
                        }
                        tracks.push((s, track, identity));
                    }
                    Decision::Matched { track } => {
                        let label = tracks
                            .iter()
                            .find(|(ts, t, _)| *ts == s && *t == track)
                            .map(|(_, _, label)| *label)
                            .unwrap();
                        if label != identity || !seen {
                            m += 1;
                        }
                    }
                }
            }
            total += m as f64 / d as f64;
        }
        total / times.len() as f64
    }

    #[test]
    fn random_runs_match_a_from_scratch_replay() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..30 {
            let mut events = Vec::new();
            let mut next_track = 0usize;
            // per (stage, camera) scope: identity -> a live track, plus all tracks
            let mut live: BTreeMap<(u8, u32), BTreeMap<usize, usize>> = BTreeMap::new();
            let mut all: BTreeMap<(u8, u32), Vec<usize>> = BTreeMap::new();
            for time in 0..40u64 {
                for camera in 0..2u32 {
                    for identity in 0..5usize {
                        if rng.gen_bool(0.6) {
                            continue;
                        }
                        let key = (0u8, camera);
                        let known = live.entry(key).or_default().get(&identity).copied();
                        let roll: f64 = rng.gen();
                        let decision = match known {
                            Some(track) if roll < 0.7 => matched(track),
                            Some(_) if roll < 0.85 => {
                                let pool = &all[&key];
                                matched(pool[rng.gen_range(0..pool.len())])
                            }
                            _ if roll < 0.9 && known.is_some() => {
                                let track = next_track;
                                next_track += 1;
                                opened(track)
                            }
                            _ => match all.get(&key).filter(|p| roll < 0.2 && !p.is_empty()) {
                                Some(pool) => matched(pool[rng.gen_range(0..pool.len())]),
                                None => {
                                    let track = next_track;
                                    next_track += 1;
                                    opened(track)
                                }
                            },
                        };
                        if let Decision::NewTrack { track } = decision {
                            live.entry(key).or_default().insert(identity, track);
                            all.entry(key).or_default().push(track);
                        }
                        events.push(sct(time, camera, identity, decision));
                    }
                }
                // occasional merge decisions against the global gallery
                if time % 13 == 12 {
                    let identity = rng.gen_range(0..5usize);
                    let key = (1u8, 0);
                    let decision = match live.entry(key).or_default().get(&identity) {
                        Some(&track) if rng.gen_bool(0.5) => matched(track),
                        _ => {
                            let track = next_track;
                            next_track += 1;
                            live.entry(key).or_default().insert(identity, track);
                            all.entry(key).or_default().push(track);
                            opened(track)
                        }
                    };
                    events.push(ict(time, identity, decision));
                }
            }
            let log = EventLog::new(events).unwrap();
            let got = inference_error(&log).unwrap();
            let want = oracle_error(log.events());
            assert_eq!(got, want);
            assert!((0.0..=1.0).contains(&got));
        }
    }
}
