use crate::error::{Error, Result};

/// Where and how big a detection is, in pixels, plus which camera saw it.
/// `cx`/`cy` are the box center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMeta {
    pub w: f64,
    pub h: f64,
    pub cx: f64,
    pub cy: f64,
    pub camera: u32,
}

/// Frame geometry and camera count used to normalize metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneInfo {
    pub frame_w: f64,
    pub frame_h: f64,
    pub num_cameras: u32,
}

/// Half of a paired metadata row:
/// `[w/W, h/H, cx/W, cy/H, camera/num_cameras]`, all in `(0, 1]`.
pub fn meta_half(m: &DetectionMeta, scene: &SceneInfo) -> Result<[f64; 5]> {
    if m.camera == 0 || m.camera > scene.num_cameras {
        return Err(Error::invalid(format!(
            "camera id {} out of range 1..={}",
            m.camera, scene.num_cameras
        )));
    }
    let half = [
        m.w / scene.frame_w,
        m.h / scene.frame_h,
        m.cx / scene.frame_w,
        m.cy / scene.frame_h,
        m.camera as f64 / scene.num_cameras as f64,
    ];
    if half.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
        return Err(Error::invalid(format!(
            "metadata outside (0,1] after normalization: box {}x{} at ({},{}) in {}x{} frame",
            m.w, m.h, m.cx, m.cy, scene.frame_w, scene.frame_h
        )));
    }
    Ok(half)
}

/// One row of net metadata input per gallery detection: the detection's
/// normalized half followed by the probe's.
pub fn build_meta_rows(
    gallery: &[DetectionMeta],
    probe: &DetectionMeta,
    scene: &SceneInfo,
) -> Result<Vec<[f64; 10]>> {
    let probe_half = meta_half(probe, scene)?;
    gallery
        .iter()
        .map(|g| {
            let gh = meta_half(g, scene)?;
            let mut row = [0.0; 10];
            row[..5].copy_from_slice(&gh);
            row[5..].copy_from_slice(&probe_half);
            Ok(row)
        })
        .collect()
}
