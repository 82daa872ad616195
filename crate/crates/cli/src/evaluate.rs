//! The `evaluate` command: score a tracker run, or diff two reports.

use std::path::Path;

use cantrack_core::metrics::{compute_report, EventLog, HypothesisLog, MetricsReport};
use cantrack_core::{io, Result};

use crate::config::{RunConfig, EVENTS_FILE, REPORT_FILE, TRAJECTORIES_FILE};

/// Row accessors for the headline metrics, in display order.
const METRICS: [(&str, fn(&MetricsReport) -> f64); 7] = [
    ("IE", |r| r.inference_error),
    ("IDF1", |r| r.idf1),
    ("IDP", |r| r.idp),
    ("IDR", |r| r.idr),
    ("MOTA", |r| r.mota),
    ("MCTA", |r| r.mcta),
    ("det F1", |r| r.detection_f1),
];

/// Scores the tracker outputs in the run directory against ground truth,
/// writes the report there, and prints the human-readable table.
pub fn run(cfg: &RunConfig) -> Result<()> {
    let out = cfg.out_dir()?;
    let gt_path =
        cfg.require(&cfg.ground_truth, "ground_truth", "point it at the labeled CSV")?;
    let gt = io::read_ground_truth(gt_path)?;
    let trajectories = io::read_trajectories(&out.join(TRAJECTORIES_FILE))?;
    let hyp = HypothesisLog::from_trajectories(&trajectories)?;
    let events = EventLog::new(io::read_events(&out.join(EVENTS_FILE))?)?;
    let report = compute_report(&gt, &hyp, &events)?;
    io::write_report(&out.join(REPORT_FILE), &report)?;

    println!("seed {}  mode {}", cfg.seed, cfg.mode);
    for (name, value) in &METRICS {
        println!("{name:<8} {:>9.4}", value(&report));
    }
    println!(
        "detections: gt {}  hyp {}  matched {}  FP {}  FN {}  fragmentations {}",
        report.gt_detections,
        report.hyp_detections,
        report.matched_detections,
        report.false_positives,
        report.false_negatives,
        report.fragmentations
    );
    println!(
        "switches: within {}/{}  cross {}/{}",
        report.within_camera_switches,
        report.within_camera_pairs,
        report.cross_camera_switches,
        report.cross_camera_pairs
    );
    Ok(())
}

/// Prints both reports side by side; deltas are A minus B.
pub fn compare(a: &Path, b: &Path) -> Result<()> {
    let ra = io::read_report(a)?;
    let rb = io::read_report(b)?;
    let col = |p: &Path| -> String {
        let stem = p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        stem.chars().take(12).collect()
    };
    println!("{:<8} {:>12} {:>12} {:>9}", "", col(a), col(b), "delta");
    for (name, value) in &METRICS {
        let (va, vb) = (value(&ra), value(&rb));
        println!("{name:<8} {va:>12.4} {vb:>12.4} {:>+9.4}", va - vb);
    }
    Ok(())
}
