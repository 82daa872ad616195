//! The `track` command: detections in, trajectories and decisions out.
//!
//! Two stages, matching the library: tracklets per camera from windowed
//! IoU association, then appearance-based merging of tracklets into global
//! identities. Both event streams land in one chronological log.

use std::collections::BTreeSet;
use std::fs;

use log::info;

use cantrack_core::agg::CanModel;
use cantrack_core::assoc::{build_sct_trajectories, ict_merge, ict_score_matrix};
use cantrack_core::{io, Error, Result};

use crate::config::{Mode, RunConfig, EVENTS_FILE, HIDDEN, TRAJECTORIES_FILE};
use crate::data;

pub fn run(cfg: &RunConfig, threads: Option<usize>) -> Result<()> {
    let out = cfg.out_dir()?.to_path_buf();
    cap_threads(threads)?;
    let dataset = data::load(cfg)?;

    let model = match cfg.mode {
        Mode::Can => {
            let path = cfg.require(
                &cfg.model,
                "model",
                "mode `can` scores with a trained net; train one or pass --mode mean",
            )?;
            let (model, _trainer) = io::read_model(path)?;
            if model.feature_dim()? != dataset.feature_dim {
                return Err(Error::shape(format!(
                    "model expects {}-dimensional features, dataset has {}",
                    model.feature_dim()?,
                    dataset.feature_dim
                )));
            }
            model
        }
        Mode::Mean => CanModel::mean_baseline(dataset.feature_dim, HIDDEN)?,
    };

    let (mut trajectories, sct_events) =
        build_sct_trajectories(&dataset.detections, cfg.window, cfg.tau_sct)?;
    info!("{} tracklets from {} detections", trajectories.len(), dataset.detections.len());
    let scores = ict_score_matrix(&trajectories, &model, &dataset.scene)?;
    let (globals, ict_events) = ict_merge(&trajectories, &scores, cfg.tau_ict)?;
    let identities = globals.iter().collect::<BTreeSet<_>>().len();
    for (t, g) in trajectories.iter_mut().zip(&globals) {
        t.global_identity = Some(*g);
    }

    // Merge decisions are stamped with the probe tracklet's first frame;
    // the sort is stable, so equal-time decisions keep tracklet order
    // before merge order and the log replays the same way every run.
    let mut events = sct_events;
    events.extend(ict_events);
    events.sort_by_key(|e| e.time);

    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    io::write_trajectories(&out.join(TRAJECTORIES_FILE), &trajectories)?;
    io::write_events(&out.join(EVENTS_FILE), &events)?;
    println!(
        "tracked {} tracklets into {} identities (mode {}, seed {}) -> {}",
        trajectories.len(),
        identities,
        cfg.mode,
        cfg.seed,
        out.display()
    );
    Ok(())
}

#[cfg(feature = "parallel")]
fn cap_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::invalid("--threads needs at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::internal(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn cap_threads(threads: Option<usize>) -> Result<()> {
    if threads.is_some() {
        log::warn!("built without the parallel feature; --threads has no effect");
    }
    Ok(())
}
