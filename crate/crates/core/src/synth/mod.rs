//! Scripted multi-camera worlds with exact ground truth.
//!
//! A [`WorldConfig`] describes identities walking piecewise-linear paths
//! through camera views. [`generate_scenario`] plays the script forward and
//! emits labeled detections whose appearance features are noisy observations
//! of per-identity prototype vectors. Every knob that matters for tracking
//! difficulty is explicit: embedding noise, per-camera appearance tint,
//! occlusion rate, and the paths themselves.

mod presets;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::assoc::{BBox, Detection};
use crate::error::{Error, Result};
use crate::feat::l2_normalize;
use crate::io;
use crate::matrix::dot;
use crate::metrics::GroundTruthLog;

// Separate ChaCha streams per randomness source, so changing one draw
// sequence (more occlusion flips, say) leaves the others untouched.
const PROTOTYPE_STREAM: u64 = 0;
const OCCLUSION_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Config noise is calibrated for a person this tall relative to the frame;
/// smaller boxes get proportionally more. See [`generate_scenario`].
pub const REFERENCE_HEIGHT_FRACTION: f64 = 0.25;

// Camera tint directions are seeded by camera id plus this offset, so they
// can never replay a stream of a small world seed.
const CAMERA_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Box center and size at one end of a path segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxState {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

/// One stay inside a single camera view.
///
/// The box moves and resizes linearly from `start` at `entry_frame` to `end`
/// at `exit_frame - 1`; the frame range is half-open.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSegment {
    pub camera: u32,
    pub entry_frame: u64,
    pub exit_frame: u64,
    pub start: BoxState,
    pub end: BoxState,
}

impl PathSegment {
    /// Interpolated box at `frame`, which must lie in `[entry, exit)`.
    pub fn box_at(&self, frame: u64) -> BBox {
        debug_assert!(frame >= self.entry_frame && frame < self.exit_frame);
        let span = self.exit_frame - self.entry_frame;
        let t = if span <= 1 {
            0.0
        } else {
            (frame - self.entry_frame) as f64 / (span - 1) as f64
        };
        let lerp = |a: f64, b: f64| a + t * (b - a);
        let w = lerp(self.start.w, self.end.w);
        let h = lerp(self.start.h, self.end.h);
        BBox {
            x: lerp(self.start.cx, self.end.cx) - w / 2.0,
            y: lerp(self.start.cy, self.end.cy) - h / 2.0,
            w,
            h,
        }
    }
}

/// Scripted route of one identity through the camera network. Gaps between
/// segments are blind spots: the person exists but no camera sees them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityPath {
    pub segments: Vec<PathSegment>,
}

/// Complete recipe for one synthetic scenario. Serializes to JSON so a run
/// can be reproduced from the config file alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub num_cameras: u32,
    pub frame_w: f64,
    pub frame_h: f64,
    pub fps: u32,
    pub identities: Vec<IdentityPath>,
    /// Appearance feature dimension.
    pub feature_dim: usize,
    /// Expected euclidean norm of the appearance noise for a box at the
    /// reference height.
    pub noise_sigma: f64,
    /// Magnitude of the fixed per-camera appearance tint.
    pub camera_bias: f64,
    /// Chance that any one ground-truth box goes undetected.
    pub occlusion_prob: f64,
    pub seed: u64,
}

impl WorldConfig {
    pub fn num_identities(&self) -> usize {
        self.identities.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_cameras == 0 {
            return Err(Error::invalid("world needs at least one camera"));
        }
        if !(self.frame_w > 0.0 && self.frame_h > 0.0)
            || !self.frame_w.is_finite()
            || !self.frame_h.is_finite()
        {
            return Err(Error::invalid(format!(
                "frame size {}x{} must be positive and finite",
                self.frame_w, self.frame_h
            )));
        }
        if self.fps == 0 {
            return Err(Error::invalid("fps must be positive"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature dimension must be positive"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::invalid(format!(
                "noise sigma must be finite and non-negative, got {}",
                self.noise_sigma
            )));
        }
        if !self.camera_bias.is_finite() || self.camera_bias < 0.0 {
            return Err(Error::invalid(format!(
                "camera bias must be finite and non-negative, got {}",
                self.camera_bias
            )));
        }
        if !(0.0..1.0).contains(&self.occlusion_prob) {
            return Err(Error::invalid(format!(
                "occlusion probability must lie in [0, 1), got {}",
                self.occlusion_prob
            )));
        }
        if self.identities.is_empty() {
            return Err(Error::invalid("world needs at least one identity"));
        }
        for (identity, path) in self.identities.iter().enumerate() {
            if path.segments.is_empty() {
                return Err(Error::invalid(format!("identity {identity} has no path segments")));
            }
            let mut spans_by_camera: BTreeMap<u32, Vec<(u64, u64)>> = BTreeMap::new();
            for seg in &path.segments {
                self.validate_segment(identity, seg)?;
                spans_by_camera
                    .entry(seg.camera)
                    .or_default()
                    .push((seg.entry_frame, seg.exit_frame));
            }
            for (camera, mut spans) in spans_by_camera {
                spans.sort_unstable();
                for pair in spans.windows(2) {
                    if pair[1].0 < pair[0].1 {
                        return Err(Error::invalid(format!(
                            "identity {identity} is in camera {camera} twice around frame {}",
                            pair[1].0
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_segment(&self, identity: usize, seg: &PathSegment) -> Result<()> {
        if seg.camera == 0 || seg.camera > self.num_cameras {
            return Err(Error::invalid(format!(
                "identity {identity}: camera {} outside 1..={}",
                seg.camera, self.num_cameras
            )));
        }
        if seg.exit_frame <= seg.entry_frame {
            return Err(Error::invalid(format!(
                "identity {identity}: segment must exit after it enters, got [{}, {})",
                seg.entry_frame, seg.exit_frame
            )));
        }
        // Corners move linearly between the two endpoint states, so checking
        // both endpoints covers every interpolated frame.
        for state in [&seg.start, &seg.end] {
            let finite = state.cx.is_finite()
                && state.cy.is_finite()
                && state.w.is_finite()
                && state.h.is_finite();
            if !finite || state.w <= 0.0 || state.h <= 0.0 {
                return Err(Error::invalid(format!(
                    "identity {identity}: path box must have positive finite size, got {}x{}",
                    state.w, state.h
                )));
            }
            if state.cx - state.w / 2.0 < 0.0
                || state.cx + state.w / 2.0 > self.frame_w
                || state.cy - state.h / 2.0 < 0.0
                || state.cy + state.h / 2.0 > self.frame_h
            {
                return Err(Error::invalid(format!(
                    "identity {identity}: box centered at ({}, {}) leaves the {}x{} frame",
                    state.cx, state.cy, self.frame_w, self.frame_h
                )));
            }
        }
        Ok(())
    }
}

/// Unit-norm appearance anchor for one identity.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityPrototype {
    pub identity: usize,
    pub mean: Vec<f64>,
}

/// Labeled output of [`generate_scenario`]: every surviving detection with
/// its feature and ground-truth identity, plus the exact log for scoring and
/// the config that produced it all.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub config: WorldConfig,
    pub prototypes: Vec<IdentityPrototype>,
    pub detections: Vec<Detection>,
    pub ground_truth: GroundTruthLog,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn random_unit(dim: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
    l2_normalize(&mut v)?;
    Ok(v)
}

/// Draws unit prototypes with pairwise cosine below 0.5 by rejection. High
/// dimensions accept almost every draw; cramped ones give up after a bounded
/// number of attempts instead of spinning forever.
fn sample_prototypes(count: usize, dim: usize, rng: &mut impl Rng) -> Result<Vec<IdentityPrototype>> {
    let mut accepted: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while accepted.len() < count {
        attempts += 1;
        if attempts > 200 * count {
            return Err(Error::invalid(format!(
                "could not separate {count} identity prototypes below cosine 0.5 in {dim} dimensions"
            )));
        }
        let candidate = random_unit(dim, rng)?;
        if accepted.iter().all(|p| dot(p, &candidate) < 0.5) {
            accepted.push(candidate);
        }
    }
    Ok(accepted
        .into_iter()
        .enumerate()
        .map(|(identity, mean)| IdentityPrototype { identity, mean })
        .collect())
}

/// Fixed unit tint direction for a camera, the same in every scenario, so
/// two worlds agree on what a camera "looks like" regardless of seed.
fn camera_tint(camera: u32, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(CAMERA_SEED_OFFSET.wrapping_add(u64::from(camera)));
    random_unit(dim, &mut rng).expect("gaussian draws cannot all be zero")
}

/// One observed appearance feature: the identity prototype, tinted by the
/// camera that saw it and blurred by gaussian noise, then re-normalized.
///
/// `sigma` is the expected euclidean norm of the noise; each component draws
/// `N(0, sigma^2 / d)`, so the effect on cosine similarity is comparable
/// across feature dimensions. The tint is a fixed unit direction per camera
/// scaled by `beta`. With `sigma` and `beta` both zero the prototype comes
/// back verbatim and no randomness is consumed.
pub fn sample_embedding(
    prototype: &[f64],
    camera: u32,
    sigma: f64,
    beta: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if prototype.is_empty() {
        return Err(Error::invalid("cannot sample an embedding from an empty prototype"));
    }
    if !sigma.is_finite() || sigma < 0.0 || !beta.is_finite() || beta < 0.0 {
        return Err(Error::invalid(format!(
            "noise parameters must be finite and non-negative, got sigma {sigma}, beta {beta}"
        )));
    }
    if sigma == 0.0 && beta == 0.0 {
        return Ok(prototype.to_vec());
    }
    let mut v = prototype.to_vec();
    if beta > 0.0 {
        let tint = camera_tint(camera, v.len());
        for (x, t) in v.iter_mut().zip(&tint) {
            *x += beta * t;
        }
    }
    if sigma > 0.0 {
        let scale = sigma / (v.len() as f64).sqrt();
        for x in v.iter_mut() {
            *x += scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    l2_normalize(&mut v)?;
    Ok(v)
}

fn effective_sigma(sigma: f64, box_h: f64, frame_h: f64) -> f64 {
    sigma * (REFERENCE_HEIGHT_FRACTION * frame_h / box_h)
}

/// Plays the scripted world forward and emits every detection that survives
/// occlusion, in identity-then-frame order, with exact ground truth.
///
/// Distant people are harder to embed well: the noise applied to a box of
/// height `h` is `sigma * (0.25 * frame_h / h)`, i.e. the config value holds
/// for a person a quarter of the frame tall and grows as they shrink.
///
/// Deterministic given the config. Prototype, occlusion, and noise draws
/// come from separate RNG streams of the world seed, so adjusting one knob
/// never reshuffles the draws of another.
pub fn generate_scenario(config: &WorldConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let prototypes = {
        let mut rng = stream_rng(config.seed, PROTOTYPE_STREAM);
        sample_prototypes(config.num_identities(), config.feature_dim, &mut rng)?
    };
    let mut occlusion_rng = stream_rng(config.seed, OCCLUSION_STREAM);
    let mut noise_rng = stream_rng(config.seed, NOISE_STREAM);

    let mut detections = Vec::new();
    for (identity, path) in config.identities.iter().enumerate() {
        for seg in &path.segments {
            for frame in seg.entry_frame..seg.exit_frame {
                if occlusion_rng.gen_bool(config.occlusion_prob) {
                    continue;
                }
                let bbox = seg.box_at(frame);
                let sigma = effective_sigma(config.noise_sigma, bbox.h, config.frame_h);
                let feature = sample_embedding(
                    &prototypes[identity].mean,
                    seg.camera,
                    sigma,
                    config.camera_bias,
                    &mut noise_rng,
                )?;
                detections.push(Detection {
                    camera: seg.camera,
                    frame,
                    bbox,
                    feature,
                    gt_identity: Some(identity),
                });
            }
        }
    }
    if detections.is_empty() {
        return Err(Error::invalid("every ground-truth box was occluded; nothing to track"));
    }
    let ground_truth = GroundTruthLog::from_detections(&detections)?;
    Ok(SyntheticDataset { config: config.clone(), prototypes, detections, ground_truth })
}

/// File names `export_ground_truth` writes into its output directory.
pub const DETECTIONS_FILE: &str = "detections.csv";
pub const FEATURES_FILE: &str = "features.canf";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.csv";

/// Writes a generated dataset to `dir` as the three artifacts the tracker
/// and evaluator consume: a detections CSV, its companion feature table,
/// and a fully labeled ground-truth CSV. Returns the in-memory ground truth
/// so callers can evaluate without re-reading the file.
pub fn export_ground_truth(dataset: &SyntheticDataset, dir: &Path) -> Result<GroundTruthLog> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let features: Vec<Vec<f64>> =
        dataset.detections.iter().map(|d| d.feature.clone()).collect();
    io::write_features(&dir.join(FEATURES_FILE), &features)?;
    io::write_detections(&dir.join(DETECTIONS_FILE), &dataset.detections)?;
    io::write_detections(&dir.join(GROUND_TRUTH_FILE), &dataset.detections)?;
    Ok(dataset.ground_truth.clone())
}
