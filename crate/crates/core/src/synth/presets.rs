//! Ready-made worlds.
//!
//! [`WorldConfig::noiseless`] is a clean calibration layout where every
//! stage of the pipeline should come out exact. [`WorldConfig::standard_benchmark`]
//! is the hard scenario the tracker is tuned against: every trajectory mixes
//! tiny far-away views with a few large close-ups, so detection quality
//! swings wildly inside a single track.

use super::{BoxState, IdentityPath, PathSegment, WorldConfig};

/// Shared frame geometry: full HD at 30 fps.
const FRAME_W: f64 = 1920.0;
const FRAME_H: f64 = 1080.0;
const FPS: u32 = 30;

/// Width to height ratio of every scripted person box.
const ASPECT: f64 = 0.42;

// Benchmark visit layout, in frames relative to the visit start. A person
// enters far away and crawls along the back of the scene, walks toward the
// camera through a geometric size ramp, then stands close for a moment.
const CRAWL_LEN: u64 = 34;
const CLIMB_LEN: u64 = 20;
const PLATEAU_LEN: u64 = 6;
const VISIT_LEN: u64 = CRAWL_LEN + CLIMB_LEN + PLATEAU_LEN;
/// Start-to-start spacing of consecutive visits. The slack past
/// `VISIT_LEN` is time spent in no camera at all.
const VISIT_PITCH: u64 = 72;
const VISITS: u64 = 3;

/// Box heights in pixels at the visit milestones.
const H_FAR: f64 = 26.0;
const H_CRAWL_END: f64 = 36.0;
const H_NEAR: f64 = 315.0;
const H_NEAR_END: f64 = 324.0;

/// Horizontal drift in pixels per frame, slow enough that a far-away box
/// still overlaps its own position by half across a two-frame gap.
const SPEED: f64 = 0.8;

fn state(cx: f64, cy: f64, h: f64) -> BoxState {
    BoxState { cx, cy, w: ASPECT * h, h }
}

/// Segments for one benchmark visit in `camera`, starting at absolute frame
/// `at`, walking lane `cy` rightward from `x0`.
fn benchmark_visit(camera: u32, at: u64, x0: f64, cy: f64) -> Vec<PathSegment> {
    let cx = |f: u64| x0 + SPEED * f as f64;
    let mut segs = Vec::with_capacity(2 + CLIMB_LEN as usize);
    segs.push(PathSegment {
        camera,
        entry_frame: at,
        exit_frame: at + CRAWL_LEN,
        start: state(cx(0), cy, H_FAR),
        end: state(cx(CRAWL_LEN - 1), cy, H_CRAWL_END),
    });
    // The climb is scripted frame by frame so the height grows by a constant
    // factor. One linear segment would spend the early frames growing far
    // faster, relative to the still-small box, than the within-camera
    // overlap gate tolerates.
    let ratio = (H_NEAR / H_CRAWL_END).powf(1.0 / CLIMB_LEN as f64);
    for j in 0..CLIMB_LEN {
        let f = CRAWL_LEN + j;
        let s = state(cx(f), cy, H_CRAWL_END * ratio.powi(j as i32 + 1));
        segs.push(PathSegment {
            camera,
            entry_frame: at + f,
            exit_frame: at + f + 1,
            start: s,
            end: s,
        });
    }
    segs.push(PathSegment {
        camera,
        entry_frame: at + CRAWL_LEN + CLIMB_LEN,
        exit_frame: at + VISIT_LEN,
        start: state(cx(CRAWL_LEN + CLIMB_LEN), cy, H_NEAR),
        end: state(cx(VISIT_LEN - 1), cy, H_NEAR_END),
    });
    segs
}

impl WorldConfig {
    /// Eight people rotating through four cameras in two vertical lanes.
    ///
    /// Person `i` starts in camera `1 + i % 4` and moves one camera to the
    /// right each visit, so every camera always hosts exactly two people,
    /// one per lane. Each visit sweeps from a near-useless distant box to a
    /// large reliable close-up, and short blind spots separate the visits.
    pub fn standard_benchmark(seed: u64) -> WorldConfig {
        let identities = (0..8u64)
            .map(|i| {
                let cy = if i < 4 { 300.0 } else { 760.0 };
                let x0 = 360.0 + 35.0 * i as f64;
                let segments = (0..VISITS)
                    .flat_map(|k| {
                        let camera = 1 + ((i + k) % 4) as u32;
                        benchmark_visit(camera, VISIT_PITCH * k, x0, cy)
                    })
                    .collect();
                IdentityPath { segments }
            })
            .collect();
        WorldConfig {
            num_cameras: 4,
            frame_w: FRAME_W,
            frame_h: FRAME_H,
            fps: FPS,
            identities,
            feature_dim: 64,
            noise_sigma: 0.35,
            camera_bias: 0.3,
            occlusion_prob: 0.1,
            seed,
        }
    }

    /// A clean world for exactness checks: no appearance noise, no camera
    /// tint, no occlusion, and one horizontal lane per identity so nobody
    /// ever overlaps anybody else. Everyone walks through every camera in
    /// order, resting out of sight between visits.
    pub fn noiseless(num_identities: usize, num_cameras: u32, seed: u64) -> WorldConfig {
        let pitch = FRAME_H / (num_identities as f64 + 1.0);
        let h = (0.25 * FRAME_H).min(0.8 * pitch);
        let speed = ASPECT * h / 6.0;
        let identities = (0..num_identities)
            .map(|i| {
                let cy = pitch * (i as f64 + 1.0);
                let segments = (0..u64::from(num_cameras))
                    .map(|k| PathSegment {
                        camera: k as u32 + 1,
                        entry_frame: 40 * k,
                        exit_frame: 40 * k + 30,
                        start: state(300.0, cy, h),
                        end: state(300.0 + speed * 29.0, cy, h),
                    })
                    .collect();
                IdentityPath { segments }
            })
            .collect();
        WorldConfig {
            num_cameras,
            frame_w: FRAME_W,
            frame_h: FRAME_H,
            fps: FPS,
            identities,
            feature_dim: 16,
            noise_sigma: 0.0,
            camera_bias: 0.0,
            occlusion_prob: 0.0,
            seed,
        }
    }
}
