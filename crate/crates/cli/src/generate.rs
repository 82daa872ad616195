//! The `generate` command: world description in, dataset on disk out.

use std::path::Path;

use log::info;

use cantrack_core::synth::{self, DETECTIONS_FILE, FEATURES_FILE, GROUND_TRUTH_FILE};
use cantrack_core::{io, Result};

pub fn run(world_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut world = io::read_world_config(world_path)?;
    if let Some(seed) = seed {
        world.seed = seed;
    }
    let dataset = synth::generate_scenario(&world)?;
    synth::export_ground_truth(&dataset, out)?;
    info!(
        "wrote {DETECTIONS_FILE}, {FEATURES_FILE}, {GROUND_TRUTH_FILE} under {}",
        out.display()
    );
    println!(
        "generated {} detections of {} identities across {} cameras (seed {}) -> {}",
        dataset.detections.len(),
        world.num_identities(),
        world.num_cameras,
        world.seed,
        out.display()
    );
    Ok(())
}
