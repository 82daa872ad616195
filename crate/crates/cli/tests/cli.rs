//! End-to-end tests of the cantrack binary: every command is driven as a
//! child process and judged on exit code, outputs, and error wording.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cantrack_core::agg::CanModel;
use cantrack_core::io;
use cantrack_core::synth::WorldConfig;

const HIDDEN: [usize; 3] = [64, 32, 16];

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cantrack"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn cantrack")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Writes a noiseless world and a run config pointing at its dataset, both
/// with paths relative to `dir`, and generates the dataset.
fn scaffold(dir: &Path, world: &WorldConfig, run_extra: serde_json::Value) -> PathBuf {
    io::write_world_config(&dir.join("world.json"), world).unwrap();
    let out = run_in(dir, &["generate", "--config", "world.json", "--out", "data"]);
    assert_ok(&out);

    let mut run = serde_json::json!({
        "detections": "data/detections.csv",
        "features": "data/features.canf",
        "ground_truth": "data/ground_truth.csv",
        "model": "run/model.json",
        "out": "run",
    });
    for (k, v) in run_extra.as_object().unwrap() {
        run[k] = v.clone();
    }
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&run).unwrap()).unwrap();
    path
}

#[test]
fn generate_writes_exactly_three_files_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let world = WorldConfig::noiseless(3, 2, 11);
    io::write_world_config(&dir.path().join("world.json"), &world).unwrap();

    for out in ["a", "b"] {
        assert_ok(&run_in(dir.path(), &["generate", "--config", "world.json", "--out", out]));
    }
    let names = |sub: &str| {
        let mut v: Vec<String> = fs::read_dir(dir.path().join(sub))
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    assert_eq!(names("a"), ["detections.csv", "features.canf", "ground_truth.csv"]);
    for name in names("a") {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert_eq!(a, b, "{name} must be byte-identical across reruns");
    }

    // a different seed reaches the files
    assert_ok(&run_in(
        dir.path(),
        &["generate", "--config", "world.json", "--out", "c", "--seed", "99"],
    ));
    let a = fs::read(dir.path().join("a/features.canf")).unwrap();
    let c = fs::read(dir.path().join("c/features.canf")).unwrap();
    assert_ne!(a, c, "--seed must override the world seed");
}

#[test]
fn malformed_world_configs_name_the_problem_and_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("unknown.json"), r#"{"frame_width": 640}"#).unwrap();
    let out = run_in(dir.path(), &["generate", "--config", "unknown.json", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("frame_width"), "{}", stderr_of(&out));

    let mut world = WorldConfig::noiseless(2, 2, 0);
    world.noise_sigma = -1.0;
    io::write_world_config(&dir.path().join("bad.json"), &world).unwrap();
    let out = run_in(dir.path(), &["generate", "--config", "bad.json", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("sigma"), "{}", stderr_of(&out));

    let out = run_in(dir.path(), &["generate", "--config", "absent.json", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2), "missing file is an I/O failure");
}

#[test]
fn training_lowers_the_cost_and_resuming_matches_a_straight_run() {
    let dir = tempfile::tempdir().unwrap();
    let world = WorldConfig::noiseless(4, 2, 7);
    let extra = serde_json::json!({"positives": 4, "negatives": 12, "steps": 160, "seed": 5});
    scaffold(dir.path(), &world, extra);

    assert_ok(&run_in(dir.path(), &["train", "--config", "run.json"]));
    let log = fs::read_to_string(dir.path().join("run/training_log.csv")).unwrap();
    let costs: Vec<f64> = log
        .lines()
        .skip(1)
        .map(|l| l.split_once(',').unwrap().1.parse().unwrap())
        .collect();
    assert_eq!(costs.len(), 160);
    let window = |range: std::ops::Range<usize>| {
        costs[range.clone()].iter().sum::<f64>() / range.len() as f64
    };
    assert!(
        window(150..160) < window(0..10),
        "10-step moving average must fall: {} -> {}",
        window(0..10),
        window(150..160)
    );
    assert!(
        costs[159] < 0.5 * costs[0],
        "final cost {} must undercut half the initial {}",
        costs[159],
        costs[0]
    );
    let summary = fs::read_to_string(dir.path().join("run/training_summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 5"), "summaries must pin the seed: {summary}");

    // interrupted halfway and resumed, the model file comes out identical
    let extra = serde_json::json!({"positives": 4, "negatives": 12, "steps": 80, "seed": 5, "out": "half"});
    scaffold(dir.path(), &world, extra);
    assert_ok(&run_in(dir.path(), &["train", "--config", "run.json"]));
    let out = run_in(
        dir.path(),
        &["train", "--config", "run.json", "--resume", "half/model.json", "--out", "resumed"],
    );
    assert_ok(&out);
    let resumed = fs::read(dir.path().join("resumed/model.json")).unwrap();
    let half = fs::read(dir.path().join("half/model.json")).unwrap();
    assert_eq!(resumed, half, "resuming a finished run must be a no-op");

    let extra = serde_json::json!({"positives": 4, "negatives": 12, "steps": 160, "seed": 5, "out": "cont"});
    scaffold(dir.path(), &world, extra);
    let out = run_in(
        dir.path(),
        &["train", "--config", "run.json", "--resume", "half/model.json"],
    );
    assert_ok(&out);
    let log = fs::read_to_string(dir.path().join("cont/training_log.csv")).unwrap();
    assert!(log.lines().nth(1).unwrap().starts_with("80,"), "resume continues the step count");
    let straight = fs::read(dir.path().join("run/model.json")).unwrap();
    let continued = fs::read(dir.path().join("cont/model.json")).unwrap();
    assert_eq!(continued, straight, "80 + 80 resumed steps must equal 160 straight steps");
}

#[test]
fn training_rejects_a_single_identity_dataset() {
    let dir = tempfile::tempdir().unwrap();
    scaffold(dir.path(), &WorldConfig::noiseless(1, 2, 3), serde_json::json!({}));
    let out = run_in(dir.path(), &["train", "--config", "run.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("at least 2 identities"), "{}", stderr_of(&out));
}

#[test]
fn lr_zero_training_leaves_the_net_exactly_at_its_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let extra = serde_json::json!({"positives": 4, "negatives": 12, "steps": 10, "seed": 21, "lr": 0.0});
    scaffold(dir.path(), &WorldConfig::noiseless(4, 2, 8), extra);
    assert_ok(&run_in(dir.path(), &["train", "--config", "run.json"]));

    let (model, trainer) = io::read_model(&dir.path().join("run/model.json")).unwrap();
    let fresh = CanModel::init(16, HIDDEN, 4, 21).unwrap();
    assert_eq!(model.mlp.flatten_params(), fresh.mlp.flatten_params());
    assert_eq!(
        model.head.as_ref().unwrap().flatten_params(),
        fresh.head.as_ref().unwrap().flatten_params()
    );
    for (got, want) in model.mlp.layers.iter().zip(&fresh.mlp.layers) {
        assert_eq!(got.running_mean, want.running_mean, "running stats must not drift");
        assert_eq!(got.running_var, want.running_var);
    }
    let trainer = trainer.unwrap();
    assert_eq!(trainer.step, 10, "the step count still advances");
}

#[test]
fn resume_needs_a_trainer_section() {
    let dir = tempfile::tempdir().unwrap();
    scaffold(dir.path(), &WorldConfig::noiseless(4, 2, 2), serde_json::json!({"positives": 4, "negatives": 12}));
    let lean = CanModel::init(16, HIDDEN, 4, 0).unwrap();
    io::write_model(&dir.path().join("lean.json"), &lean, None).unwrap();
    let out = run_in(dir.path(), &["train", "--config", "run.json", "--resume", "lean.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("no trainer state"), "{}", stderr_of(&out));
}

#[test]
fn mean_mode_tracks_one_person_into_one_identity_without_a_model() {
    let dir = tempfile::tempdir().unwrap();
    scaffold(dir.path(), &WorldConfig::noiseless(1, 2, 13), serde_json::json!({}));
    assert_ok(&run_in(dir.path(), &["track", "--config", "run.json", "--mode", "mean"]));

    let rows = fs::read_to_string(dir.path().join("run/trajectories.csv")).unwrap();
    let mut globals: Vec<&str> =
        rows.lines().skip(1).map(|l| l.rsplit_once(',').unwrap().1).collect();
    globals.sort();
    globals.dedup();
    assert_eq!(globals, ["0"], "one person in two cameras is one global identity");
}

#[test]
fn can_mode_without_a_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    scaffold(dir.path(), &WorldConfig::noiseless(2, 2, 1), serde_json::json!({}));
    let mut run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    run.as_object_mut().unwrap().remove("model");
    fs::write(dir.path().join("run.json"), run.to_string()).unwrap();

    let out = run_in(dir.path(), &["track", "--config", "run.json", "--mode", "can"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("`model`"), "{}", stderr_of(&out));
}

#[test]
fn evaluate_scores_a_perfect_run_and_compares_reports() {
    let dir = tempfile::tempdir().unwrap();
    scaffold(dir.path(), &WorldConfig::noiseless(5, 2, 4), serde_json::json!({}));
    assert_ok(&run_in(dir.path(), &["track", "--config", "run.json", "--mode", "mean"]));
    let out = run_in(dir.path(), &["evaluate", "--config", "run.json"]);
    assert_ok(&out);
    let table = stdout_of(&out);
    assert!(table.contains("seed 0  mode"), "table must carry the seed: {table}");
    assert!(table.contains("IDF1"), "{table}");

    let report = io::read_report(&dir.path().join("run/report.json")).unwrap();
    assert_eq!(report.inference_error, 0.0);
    assert_eq!(report.idf1, 1.0);
    assert_eq!(report.mota, 1.0);
    assert_eq!(report.mcta, 1.0);

    fs::copy(dir.path().join("run/report.json"), dir.path().join("again.json")).unwrap();
    let out = run_in(
        dir.path(),
        &["evaluate", "--compare", "run/report.json", "again.json"],
    );
    assert_ok(&out);
    let table = stdout_of(&out);
    assert!(table.contains("delta") && table.contains("+0.0000"), "{table}");
}

#[test]
fn evaluate_rejects_a_broken_hypothesis_file_with_its_line() {
    let dir = tempfile::tempdir().unwrap();
    scaffold(dir.path(), &WorldConfig::noiseless(2, 2, 6), serde_json::json!({}));
    fs::create_dir_all(dir.path().join("run")).unwrap();
    fs::write(dir.path().join("run/trajectories.csv"), "camera,frame,bogus\n").unwrap();
    fs::write(dir.path().join("run/events.jsonl"), "").unwrap();
    let out = run_in(dir.path(), &["evaluate", "--config", "run.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains(":1:"), "{}", stderr_of(&out));
}

#[test]
fn flag_parsing_exits_zero_for_help_and_one_for_misuse() {
    let dir = tempfile::tempdir().unwrap();
    let help = run_in(dir.path(), &["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout_of(&help).contains("generate"));

    let unknown = run_in(dir.path(), &["track", "--no-such-flag"]);
    assert_eq!(unknown.status.code(), Some(1));

    let missing = run_in(dir.path(), &["generate"]);
    assert_eq!(missing.status.code(), Some(1), "generate needs --config and --out");

    let bad_mode = run_in(dir.path(), &["track", "--mode", "median"]);
    assert_eq!(bad_mode.status.code(), Some(1));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    scaffold(dir.path(), &WorldConfig::noiseless(2, 2, 9), serde_json::json!({"tau_ict": 0.4}));
    // an impossible threshold forced by flag keeps every tracklet separate
    assert_ok(&run_in(
        dir.path(),
        &["track", "--config", "run.json", "--mode", "mean", "--tau-ict", "1.5"],
    ));
    let rows = fs::read_to_string(dir.path().join("run/trajectories.csv")).unwrap();
    let mut globals: Vec<&str> =
        rows.lines().skip(1).map(|l| l.rsplit_once(',').unwrap().1).collect();
    globals.sort();
    globals.dedup();
    assert_eq!(globals.len(), 4, "2 people x 2 cameras stay 4 identities at tau > 1");
}
