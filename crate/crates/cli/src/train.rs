//! The `train` command: fit the scoring net to a labeled dataset.
//!
//! Writes three artifacts into the output directory: the model (with
//! optimizer state, so a later run can resume it), a CSV of the cost at
//! every step, and a summary that pins down the seed the run used.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use log::info;
use serde::Serialize;

use cantrack_core::agg::{
    batch_cost, train_step, CanModel, DetectionMeta, Hyper, PairSampler, SamplerConfig,
    TrainState, TrainingSet,
};
use cantrack_core::{io, Error, Result};

use crate::config::{RunConfig, HIDDEN, MODEL_FILE, TRAINING_LOG_FILE, TRAINING_SUMMARY_FILE};
use crate::data::{self, Dataset};

#[derive(Serialize)]
struct Summary {
    seed: u64,
    steps: u64,
    steps_this_run: u64,
    identities: usize,
    feature_dim: usize,
    lr: f64,
    momentum: f64,
    initial_cost: Option<f64>,
    final_cost: Option<f64>,
}

pub fn run(cfg: &RunConfig, resume: Option<&Path>) -> Result<()> {
    let out = cfg.out_dir()?.to_path_buf();
    let dataset = data::load(cfg)?;
    let feature_dim = dataset.feature_dim;
    let set = training_set(dataset)?;
    let identities = set.num_identities();

    let (mut model, mut state) = match resume {
        Some(path) => {
            let (model, trainer) = io::read_model(path)?;
            let trainer = trainer.ok_or_else(|| {
                Error::invalid(format!(
                    "{}: no trainer state to resume; the file holds only the net",
                    path.display()
                ))
            })?;
            if model.feature_dim()? != feature_dim {
                return Err(Error::shape(format!(
                    "resumed model expects {}-dimensional features, dataset has {feature_dim}",
                    model.feature_dim()?
                )));
            }
            (model, trainer)
        }
        None => {
            let model = CanModel::init(feature_dim, HIDDEN, identities, cfg.seed)?;
            let state = TrainState::new(&model)?;
            (model, state)
        }
    };

    let mut sampler = PairSampler::new(
        set,
        SamplerConfig {
            positives: cfg.positives,
            negatives: cfg.negatives,
            max_template_len: cfg.max_template_len,
            seed: cfg.seed,
        },
    )?;
    // Replay the batches an interrupted run already consumed, so a resumed
    // run reproduces the uninterrupted one bit for bit.
    for _ in 0..state.step.min(cfg.steps) {
        sampler.next_batch();
    }

    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let log_path = out.join(TRAINING_LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| Error::io(&log_path, e))?);
    writeln!(log, "step,cost").map_err(|e| Error::io(&log_path, e))?;

    let hyper = Hyper { lr: cfg.lr, momentum: cfg.momentum };
    let started_at = state.step;
    let mut initial_cost = None;
    let mut final_cost = None;
    while state.step < cfg.steps {
        let batch = sampler.next_batch();
        let at = state.step;
        // lr 0 means "do not learn": report costs without touching the
        // model, so not even batch-norm statistics drift.
        let cost = if cfg.lr == 0.0 {
            state.step += 1;
            batch_cost(&model, &batch)?
        } else {
            train_step(&mut model, &mut state, &batch, &hyper)?
        };
        writeln!(log, "{at},{cost}").map_err(|e| Error::io(&log_path, e))?;
        if at % 200 == 0 {
            info!("step {at}: J = {cost:.6}");
        }
        initial_cost.get_or_insert(cost);
        final_cost = Some(cost);
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    io::write_model(&out.join(MODEL_FILE), &model, Some(&state))?;
    let summary = Summary {
        seed: cfg.seed,
        steps: state.step,
        steps_this_run: state.step - started_at,
        identities,
        feature_dim,
        lr: cfg.lr,
        momentum: cfg.momentum,
        initial_cost,
        final_cost,
    };
    let summary_path = out.join(TRAINING_SUMMARY_FILE);
    let text = serde_json::to_string_pretty(&summary)
        .map_err(|e| Error::internal(format!("summary serialization: {e}")))?;
    fs::write(&summary_path, text + "\n").map_err(|e| Error::io(&summary_path, e))?;

    println!(
        "trained {} steps ({} total) on {} identities, d={} (seed {}) -> {}",
        summary.steps_this_run,
        summary.steps,
        identities,
        feature_dim,
        cfg.seed,
        out.display()
    );
    Ok(())
}

/// Groups labeled detections by identity, in file order. Class indices are
/// assigned by first appearance, so they are stable across reruns.
fn training_set(dataset: Dataset) -> Result<TrainingSet> {
    let mut class_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut per_identity: Vec<Vec<(Vec<f64>, DetectionMeta)>> = Vec::new();
    for det in &dataset.detections {
        let gt = det.gt_identity.ok_or_else(|| {
            Error::invalid("training needs labels: the detections carry no gt_identity column")
        })?;
        let next = per_identity.len();
        let class = *class_of.entry(gt).or_insert(next);
        if class == next {
            per_identity.push(Vec::new());
        }
        per_identity[class].push((det.feature.clone(), det.meta()));
    }
    if per_identity.len() < 2 {
        return Err(Error::invalid(format!(
            "training needs at least 2 identities, the dataset has {}",
            per_identity.len()
        )));
    }
    Ok(TrainingSet { scene: dataset.scene, per_identity })
}
