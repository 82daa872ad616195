//! The run configuration file and the names of everything a run writes.
//!
//! One JSON file names the input artifacts, the output directory, and every
//! hyperparameter. Commands read it through [`RunConfig::load`]; flags
//! override individual values afterwards, so the file can describe a whole
//! experiment while the command line varies one knob at a time.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cantrack_core::{Error, Result};

/// Hidden layer widths of the scoring net. Not a config knob: changing them
/// invalidates every saved model, so they are fixed per repository version.
pub const HIDDEN: [usize; 3] = [64, 32, 16];

pub const MODEL_FILE: &str = "model.json";
pub const TRAINING_LOG_FILE: &str = "training_log.csv";
pub const TRAINING_SUMMARY_FILE: &str = "training_summary.json";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const REPORT_FILE: &str = "report.json";

/// How a trajectory's detection stack is pooled into one template feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Per-detection weights from the trained scoring net.
    Can,
    /// Uniform weights; the unweighted baseline, needs no model file.
    Mean,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Can => "can",
            Mode::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Detections CSV. `train` needs its rows labeled.
    pub detections: Option<PathBuf>,
    /// Feature table the detections point into.
    pub features: Option<PathBuf>,
    /// Labeled ground-truth CSV for `evaluate`.
    pub ground_truth: Option<PathBuf>,
    /// Trained model for `track --mode can`.
    pub model: Option<PathBuf>,
    /// Directory a command writes into, and where `evaluate` finds the
    /// tracker's outputs.
    pub out: Option<PathBuf>,

    /// Expected feature dimension. When set it is checked against the
    /// feature file; when absent the file decides.
    pub feature_dim: Option<usize>,
    /// Within-camera association window length in frames.
    pub window: u64,
    /// Acceptance threshold for within-camera matches.
    pub tau_sct: f64,
    /// Acceptance threshold for cross-camera merges.
    pub tau_ict: f64,
    pub lr: f64,
    pub momentum: f64,
    /// Matching probe/template pairs per training batch.
    pub positives: usize,
    /// Non-matching pairs per training batch; a multiple of `positives`.
    pub negatives: usize,
    /// Cap on detections drawn into one training gallery template.
    pub max_template_len: usize,
    pub steps: u64,
    pub seed: u64,
    pub mode: Mode,
    /// Scene size in pixels. Detection files carry boxes but not the frame
    /// they live in, and the net normalizes box geometry by it.
    pub frame_w: f64,
    pub frame_h: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            detections: None,
            features: None,
            ground_truth: None,
            model: None,
            out: None,
            feature_dim: None,
            window: 60,
            tau_sct: 0.2,
            tau_ict: 0.5,
            lr: 0.01,
            momentum: 0.9,
            positives: 8,
            negatives: 56,
            max_template_len: 10,
            steps: 2000,
            seed: 0,
            mode: Mode::Can,
            frame_w: 1920.0,
            frame_h: 1080.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("window must be at least 1 frame"));
        }
        for (name, tau) in [("tau_sct", self.tau_sct), ("tau_ict", self.tau_ict)] {
            if !tau.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {tau}")));
            }
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::invalid(format!("lr must be finite and >= 0, got {}", self.lr)));
        }
        if !(self.momentum.is_finite() && (0.0..1.0).contains(&self.momentum)) {
            return Err(Error::invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
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
        if self.feature_dim == Some(0) {
            return Err(Error::invalid("feature_dim cannot be 0"));
        }
        Ok(())
    }

    /// The output directory, or a validation error telling the user how to
    /// set one.
    pub fn out_dir(&self) -> Result<&Path> {
        self.require(&self.out, "out", "pass --out DIR or set `out` in the config")
    }

    pub fn require<'a>(
        &self,
        value: &'a Option<PathBuf>,
        field: &str,
        hint: &str,
    ) -> Result<&'a Path> {
        value
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("config does not name `{field}`; {hint}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn a_minimal_file_fills_in_every_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"seed": 9, "mode": "mean"}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.mode, Mode::Mean);
        assert_eq!(cfg.window, 60);
        assert_eq!(cfg.tau_sct, 0.2);
        assert_eq!(cfg.tau_ict, 0.5);
        assert_eq!(cfg.steps, 2000);
        assert_eq!((cfg.positives, cfg.negatives), (8, 56));
        assert!(cfg.detections.is_none());
    }

    #[test]
    fn unknown_fields_are_named_in_the_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        fs::write(&path, r#"{"windw": 10}"#).unwrap();
        let err = RunConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("windw"), "{err}");
    }

    #[test]
    fn bad_values_are_rejected_with_the_field_name() {
        let cases = [
            (r#"{"window": 0}"#, "window"),
            (r#"{"lr": -0.5}"#, "lr"),
            (r#"{"momentum": 1.0}"#, "momentum"),
            (r#"{"frame_w": 0.0}"#, "frame size"),
            (r#"{"feature_dim": 0}"#, "feature_dim"),
        ];
        let dir = tempfile::tempdir().unwrap();
        for (text, word) in cases {
            let path = dir.path().join("run.json");
            fs::write(&path, text).unwrap();
            let err = RunConfig::load(&path).unwrap_err().to_string();
            assert!(err.contains(word), "{text} should mention {word}: {err}");
        }
    }

    #[test]
    fn missing_paths_point_at_the_field() {
        let cfg = RunConfig::default();
        let err = cfg.out_dir().unwrap_err().to_string();
        assert!(err.contains("`out`"), "{err}");
    }

    #[test]
    fn mode_names_round_trip() {
        for mode in [Mode::Can, Mode::Mean] {
            let json = serde_json::to_string(&mode).unwrap();
            assert_eq!(json, format!("\"{mode}\""));
            let back: Mode = serde_json::from_str(&json).unwrap();
            assert_eq!(back, mode);
        }
    }
}
