//! Input loading shared by the train and track commands.

use cantrack_core::agg::SceneInfo;
use cantrack_core::assoc::Detection;
use cantrack_core::{io, Error, Result};

use crate::config::RunConfig;

/// Detections with their features resolved, plus the scene they live in.
#[derive(Debug)]
pub struct Dataset {
    pub detections: Vec<Detection>,
    pub feature_dim: usize,
    pub scene: SceneInfo,
}

/// Reads the detections and feature table named by the config. The scene
/// comes from the config's frame size and the highest camera id present;
/// cameras are numbered from 1.
pub fn load(cfg: &RunConfig) -> Result<Dataset> {
    let features_path =
        cfg.require(&cfg.features, "features", "point it at the feature table")?;
    let detections_path =
        cfg.require(&cfg.detections, "detections", "point it at the detections CSV")?;
    let features = io::read_features(features_path)?;
    let feature_dim = features.first().map_or(0, Vec::len);
    if feature_dim == 0 {
        return Err(Error::invalid(format!(
            "{}: feature table is empty",
            features_path.display()
        )));
    }
    if let Some(d) = cfg.feature_dim {
        if d != feature_dim {
            return Err(Error::invalid(format!(
                "config expects feature_dim {d} but {} holds {feature_dim}-dimensional rows",
                features_path.display()
            )));
        }
    }
    let detections = io::read_detections(detections_path, &features)?;
    if detections.iter().any(|d| d.camera == 0) {
        return Err(Error::invalid(format!(
            "{}: cameras are numbered from 1, found camera 0",
            detections_path.display()
        )));
    }
    let num_cameras = detections.iter().map(|d| d.camera).max().ok_or_else(|| {
        Error::invalid(format!("{}: no detections", detections_path.display()))
    })?;
    Ok(Dataset {
        detections,
        feature_dim,
        scene: SceneInfo { frame_w: cfg.frame_w, frame_h: cfg.frame_h, num_cameras },
    })
}
