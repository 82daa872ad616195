//! On-disk formats for every pipeline artifact.
//!
//! * Appearance features: a binary file (magic `CANF`) of 32-bit reals,
//!   plus a CSV twin for eyeballing.
//! * Detections and ground truth: CSV keyed into the feature file by row.
//! * Tracker output: trajectory CSV and an event log of one JSON object
//!   per line.
//! * Model: JSON with every real written to 17 significant digits, so a
//!   load-save cycle reproduces the file and a save-load cycle reproduces
//!   the parameters, bit for bit.
//!
//! Writers emit fully deterministic bytes for identical inputs. Readers
//! never guess: schema problems fail with the file, line, and field.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::agg::{CanModel, ClassifierHead, TrainState};
use crate::assoc::{AssociationEvent, BBox, Detection, Trajectory};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics::{GroundTruthLog, MetricsReport};
use crate::nn::{LayerParams, MlpDims, MlpParams, NUM_LAYERS};
use crate::synth::WorldConfig;

/// Leading bytes of a binary feature file.
pub const FEATURE_MAGIC: [u8; 4] = *b"CANF";
/// Only version this build reads or writes.
pub const FEATURE_VERSION: u16 = 1;
/// `schema_version` of the model file.
pub const MODEL_SCHEMA_VERSION: u64 = 1;

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn finish(mut w: BufWriter<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

// --- binary feature file ---------------------------------------------------

/// Writes `features` as the documented binary layout: magic, version,
/// row count, dimension, then row-major little-endian 32-bit reals.
pub fn write_features(path: &Path, features: &[Vec<f64>]) -> Result<()> {
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::shape("feature rows have mixed lengths"));
    }
    if features.len() > u32::MAX as usize || dim > u32::MAX as usize {
        return Err(Error::invalid("feature table too large for the file format"));
    }
    let mut w = create(path)?;
    let err = |e| Error::io(path, e);
    w.write_all(&FEATURE_MAGIC).map_err(err)?;
    w.write_all(&FEATURE_VERSION.to_le_bytes()).map_err(err)?;
    w.write_all(&(features.len() as u32).to_le_bytes()).map_err(err)?;
    w.write_all(&(dim as u32).to_le_bytes()).map_err(err)?;
    for row in features {
        for v in row {
            w.write_all(&(*v as f32).to_le_bytes()).map_err(err)?;
        }
    }
    finish(w, path)
}

/// Reads a binary feature file back into 64-bit rows. The stored values
/// are 32-bit, so what comes back is each original value rounded once.
pub fn read_features(path: &Path) -> Result<Vec<Vec<f64>>> {
    let bad = |msg: String| Error::parse(path, 0, msg);
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 14 {
        return Err(bad(format!("feature file header needs 14 bytes, file has {}", bytes.len())));
    }
    if bytes[0..4] != FEATURE_MAGIC {
        return Err(bad("not a feature file: bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FEATURE_VERSION {
        return Err(bad(format!("unsupported feature file version {version}")));
    }
    let count = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let expected = 14 + 4 * count * dim;
    if bytes.len() != expected {
        return Err(bad(format!(
            "feature file should be {expected} bytes for {count}x{dim}, found {}",
            bytes.len()
        )));
    }
    let mut body = &bytes[14..];
    let mut features = Vec::with_capacity(count);
    for _ in 0..count {
        let mut row = Vec::with_capacity(dim);
        for _ in 0..dim {
            let mut quad = [0u8; 4];
            body.read_exact(&mut quad).expect("length checked above");
            row.push(f64::from(f32::from_le_bytes(quad)));
        }
        features.push(row);
    }
    Ok(features)
}

/// The plain-text twin of [`write_features`]: header `id,v1..vd`, one row
/// per feature, full 64-bit precision.
pub fn write_features_csv(path: &Path, features: &[Vec<f64>]) -> Result<()> {
    let dim = features.first().map_or(0, Vec::len);
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::shape("feature rows have mixed lengths"));
    }
    let mut w = create(path)?;
    let err = |e| Error::io(path, e);
    let mut header = String::from("id");
    for k in 1..=dim {
        header.push_str(&format!(",v{k}"));
    }
    writeln!(w, "{header}").map_err(err)?;
    for (id, row) in features.iter().enumerate() {
        write!(w, "{id}").map_err(err)?;
        for v in row {
            write!(w, ",{v}").map_err(err)?;
        }
        writeln!(w).map_err(err)?;
    }
    finish(w, path)
}

struct CsvFile {
    path: PathBuf,
    header: csv::StringRecord,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl CsvFile {
    fn open(path: &Path) -> Result<CsvFile> {
        let mut rdr = csv::ReaderBuilder::new()
            .flexible(true)
            .from_path(path)
            .map_err(|e| csv_error(path, e))?;
        let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            if rec.len() != header.len() {
                return Err(Error::parse(
                    path,
                    line,
                    format!("row has {} fields, header has {}", rec.len(), header.len()),
                ));
            }
            rows.push((line, rec));
        }
        Ok(CsvFile { path: path.to_path_buf(), header, rows })
    }

    fn expect_header(&self, wanted: &[&str]) -> Result<()> {
        let got: Vec<&str> = self.header.iter().collect();
        if got != wanted {
            return Err(Error::parse(
                &self.path,
                1,
                format!("header should be `{}`, found `{}`", wanted.join(","), got.join(",")),
            ));
        }
        Ok(())
    }

    fn field<T: std::str::FromStr>(&self, line: u64, rec: &csv::StringRecord, col: usize) -> Result<T> {
        rec[col].parse().map_err(|_| {
            Error::parse(
                &self.path,
                line,
                format!("field `{}` cannot be read as a {}", &rec[col], std::any::type_name::<T>()),
            )
        })
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = match e.position() {
        Some(p) => p.line(),
        None => 0,
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Reads the `id,v1..vd` twin. Ids must run 0..n in order, matching the
/// row indices a detections file refers to.
pub fn read_features_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let file = CsvFile::open(path)?;
    let dim = file.header.len().saturating_sub(1);
    let mut wanted = vec!["id".to_string()];
    wanted.extend((1..=dim).map(|k| format!("v{k}")));
    file.expect_header(&wanted.iter().map(String::as_str).collect::<Vec<_>>())?;
    let mut features = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        let id: usize = file.field(*line, rec, 0)?;
        if id != features.len() {
            return Err(Error::parse(
                &file.path,
                *line,
                format!("feature ids must run 0,1,2,..; expected {}, found {id}", features.len()),
            ));
        }
        let mut row = Vec::with_capacity(dim);
        for col in 1..=dim {
            row.push(file.field::<f64>(*line, rec, col)?);
        }
        features.push(row);
    }
    Ok(features)
}

// --- detections and ground truth -------------------------------------------

const DETECTION_COLUMNS: [&str; 7] = ["camera", "frame", "x", "y", "w", "h", "feature_id"];

/// Writes detections with `feature_id` equal to row position, pairing the
/// file with a feature table written in the same order. The `gt_identity`
/// column appears when every detection is labeled and is dropped when none
/// is; a mix is refused rather than silently half-labeled.
pub fn write_detections(path: &Path, detections: &[Detection]) -> Result<()> {
    let labeled = detections.iter().filter(|d| d.gt_identity.is_some()).count();
    if labeled != 0 && labeled != detections.len() {
        return Err(Error::invalid(format!(
            "{labeled} of {} detections are labeled; label all or none",
            detections.len()
        )));
    }
    let with_gt = labeled > 0;
    let mut w = create(path)?;
    let err = |e| Error::io(path, e);
    let mut header = DETECTION_COLUMNS.join(",");
    if with_gt {
        header.push_str(",gt_identity");
    }
    writeln!(w, "{header}").map_err(err)?;
    for (id, d) in detections.iter().enumerate() {
        let b = &d.bbox;
        write!(w, "{},{},{},{},{},{},{id}", d.camera, d.frame, b.x, b.y, b.w, b.h).map_err(err)?;
        match d.gt_identity {
            Some(gt) if with_gt => writeln!(w, ",{gt}").map_err(err)?,
            _ => writeln!(w).map_err(err)?,
        }
    }
    finish(w, path)
}

fn parse_detection_row(
    file: &CsvFile,
    line: u64,
    rec: &csv::StringRecord,
    with_gt: bool,
) -> Result<(Detection, usize)> {
    let bbox = BBox {
        x: file.field(line, rec, 2)?,
        y: file.field(line, rec, 3)?,
        w: file.field(line, rec, 4)?,
        h: file.field(line, rec, 5)?,
    };
    bbox.validate().map_err(|e| Error::parse(&file.path, line, e.to_string()))?;
    let d = Detection {
        camera: file.field(line, rec, 0)?,
        frame: file.field(line, rec, 1)?,
        bbox,
        feature: Vec::new(),
        gt_identity: if with_gt { Some(file.field(line, rec, 7)?) } else { None },
    };
    let feature_id: usize = file.field(line, rec, 6)?;
    Ok((d, feature_id))
}

fn open_detections(path: &Path) -> Result<(CsvFile, bool)> {
    let file = CsvFile::open(path)?;
    let with_gt = match file.header.len() {
        7 => false,
        8 => true,
        n => {
            return Err(Error::parse(
                path,
                1,
                format!("detections need 7 or 8 columns, header has {n}"),
            ))
        }
    };
    let mut wanted: Vec<&str> = DETECTION_COLUMNS.to_vec();
    if with_gt {
        wanted.push("gt_identity");
    }
    file.expect_header(&wanted)?;
    Ok((file, with_gt))
}

/// Reads a detections file, resolving each row's `feature_id` against
/// `features`. Labels come back when the file has the `gt_identity` column.
pub fn read_detections(path: &Path, features: &[Vec<f64>]) -> Result<Vec<Detection>> {
    let (file, with_gt) = open_detections(path)?;
    let mut detections = Vec::with_capacity(file.rows.len());
    for (line, rec) in &file.rows {
        let (mut d, feature_id) = parse_detection_row(&file, *line, rec, with_gt)?;
        d.feature = features
            .get(feature_id)
            .ok_or_else(|| {
                Error::parse(
                    &file.path,
                    *line,
                    format!("feature_id {feature_id} but the feature file has {}", features.len()),
                )
            })?
            .clone();
        detections.push(d);
    }
    Ok(detections)
}

/// Reads a ground-truth file: the detections schema with `gt_identity`
/// mandatory. Features are not resolved, only boxes and identities.
pub fn read_ground_truth(path: &Path) -> Result<GroundTruthLog> {
    let (file, with_gt) = open_detections(path)?;
    if !with_gt {
        return Err(Error::parse(path, 1, "ground truth requires the gt_identity column"));
    }
    let mut log = GroundTruthLog::new();
    for (line, rec) in &file.rows {
        let (d, _) = parse_detection_row(&file, *line, rec, true)?;
        log.insert(d.camera, d.frame, d.gt_identity.expect("column enforced above"), d.bbox)
            .map_err(|e| Error::parse(&file.path, *line, e.to_string()))?;
    }
    Ok(log)
}

// --- trajectories -----------------------------------------------------------

const TRAJECTORY_COLUMNS: [&str; 8] =
    ["camera", "frame", "x", "y", "w", "h", "track_id", "global_identity"];

/// Writes tracker output, one row per detection. Every trajectory must
/// already carry a global identity; raw single-camera output is not a
/// publishable result.
pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = create(path)?;
    let err = |e| Error::io(path, e);
    writeln!(w, "{}", TRAJECTORY_COLUMNS.join(",")).map_err(err)?;
    for t in trajectories {
        t.validate()?;
        let gid = t.global_identity.ok_or_else(|| {
            Error::invalid(format!("trajectory {} has no global identity; merge cameras first", t.id))
        })?;
        for d in &t.detections {
            let b = &d.bbox;
            writeln!(w, "{},{},{},{},{},{},{},{gid}", d.camera, d.frame, b.x, b.y, b.w, b.h, t.id)
                .map_err(err)?;
        }
    }
    finish(w, path)
}

/// Reads tracker output back. Rows group by `track_id` in first-appearance
/// order; the detections carry no appearance features, which evaluation
/// never needs.
pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let file = CsvFile::open(path)?;
    file.expect_header(&TRAJECTORY_COLUMNS)?;
    let mut order: Vec<usize> = Vec::new();
    let mut by_id: std::collections::BTreeMap<usize, Trajectory> = std::collections::BTreeMap::new();
    for (line, rec) in &file.rows {
        let bbox = BBox {
            x: file.field(*line, rec, 2)?,
            y: file.field(*line, rec, 3)?,
            w: file.field(*line, rec, 4)?,
            h: file.field(*line, rec, 5)?,
        };
        bbox.validate().map_err(|e| Error::parse(&file.path, *line, e.to_string()))?;
        let camera: u32 = file.field(*line, rec, 0)?;
        let frame: u64 = file.field(*line, rec, 1)?;
        let track_id: usize = file.field(*line, rec, 6)?;
        let gid: usize = file.field(*line, rec, 7)?;
        let d = Detection { camera, frame, bbox, feature: Vec::new(), gt_identity: None };
        let t = by_id.entry(track_id).or_insert_with(|| {
            order.push(track_id);
            Trajectory { id: track_id, camera, detections: Vec::new(), global_identity: Some(gid) }
        });
        if t.global_identity != Some(gid) {
            return Err(Error::parse(
                &file.path,
                *line,
                format!("track {track_id} switches global identity mid-file"),
            ));
        }
        t.detections.push(d);
    }
    let mut trajectories = Vec::with_capacity(order.len());
    for id in order {
        let mut t = by_id.remove(&id).expect("collected above");
        t.detections.sort_by_key(|d| d.frame);
        t.validate()?;
        trajectories.push(t);
    }
    Ok(trajectories)
}

// --- event log ---------------------------------------------------------------

/// Writes the association event log, one JSON object per line in decision
/// order.
pub fn write_events(path: &Path, events: &[AssociationEvent]) -> Result<()> {
    let mut w = create(path)?;
    for e in events {
        let json = serde_json::to_string(e)
            .map_err(|err| Error::internal(format!("event serialization failed: {err}")))?;
        writeln!(w, "{json}").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

/// Reads an event log. Any unreadable line fails with its line number.
pub fn read_events(path: &Path) -> Result<Vec<AssociationEvent>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut events = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let event = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, idx as u64 + 1, e.to_string()))?;
        events.push(event);
    }
    Ok(events)
}

// --- model file ----------------------------------------------------------------

/// One real with 17 significant digits, enough to reproduce any 64-bit
/// value exactly on read.
fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn real_array(vs: &[f64]) -> String {
    let body: Vec<String> = vs.iter().map(|v| real(*v)).collect();
    format!("[{}]", body.join(", "))
}

fn real_rows(m: &Matrix) -> String {
    let rows: Vec<String> = m.iter_rows().map(real_array).collect();
    format!("[\n        {}\n      ]", rows.join(",\n        "))
}

/// Writes a model file, optionally with optimizer state so training can
/// resume where it stopped.
pub fn write_model(path: &Path, model: &CanModel, trainer: Option<&TrainState>) -> Result<()> {
    let mut out = String::new();
    out.push_str("{\n");
    out.push_str(&format!("  \"schema_version\": {MODEL_SCHEMA_VERSION},\n"));
    let widths = model.mlp.dims.widths();
    let dims: Vec<String> = widths.iter().map(|w| w.to_string()).collect();
    out.push_str(&format!("  \"dims\": [{}],\n", dims.join(", ")));
    out.push_str("  \"layers\": [\n");
    for (l, layer) in model.mlp.layers.iter().enumerate() {
        out.push_str("    {\n");
        out.push_str(&format!("      \"w\": {},\n", real_rows(&layer.w)));
        out.push_str(&format!("      \"b\": {},\n", real_array(&layer.b)));
        out.push_str(&format!("      \"gamma\": {},\n", real_array(&layer.gamma)));
        out.push_str(&format!("      \"beta\": {},\n", real_array(&layer.beta)));
        out.push_str(&format!("      \"running_mean\": {},\n", real_array(&layer.running_mean)));
        out.push_str(&format!("      \"running_var\": {}\n", real_array(&layer.running_var)));
        out.push_str(if l + 1 < model.mlp.layers.len() { "    },\n" } else { "    }\n" });
    }
    out.push_str("  ]");
    if let Some(head) = &model.head {
        out.push_str(",\n  \"head\": {\n");
        out.push_str(&format!("    \"w_c\": {},\n", real_rows(&head.w)));
        out.push_str(&format!("    \"b_c\": {}\n", real_array(&head.b)));
        out.push_str("  }");
    }
    if let Some(state) = trainer {
        out.push_str(",\n  \"trainer\": {\n");
        out.push_str(&format!("    \"step\": {},\n", state.step));
        out.push_str(&format!("    \"velocity\": {}\n", real_array(&state.velocity)));
        out.push_str("  }");
    }
    out.push_str("\n}\n");
    let mut w = create(path)?;
    w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

struct ModelReader<'a> {
    path: &'a Path,
}

impl ModelReader<'_> {
    fn bad(&self, msg: impl Into<String>) -> Error {
        Error::parse(self.path, 0, msg.into())
    }

    fn member<'v>(&self, v: &'v serde_json::Value, key: &str) -> Result<&'v serde_json::Value> {
        v.get(key).ok_or_else(|| self.bad(format!("missing `{key}`")))
    }

    fn reals(&self, v: &serde_json::Value, key: &str, want: usize) -> Result<Vec<f64>> {
        let arr = self
            .member(v, key)?
            .as_array()
            .ok_or_else(|| self.bad(format!("`{key}` must be an array")))?;
        if arr.len() != want {
            return Err(self.bad(format!("`{key}` has {} entries, expected {want}", arr.len())));
        }
        arr.iter()
            .map(|x| x.as_f64().ok_or_else(|| self.bad(format!("`{key}` holds a non-number"))))
            .collect()
    }

    fn matrix(&self, v: &serde_json::Value, key: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let arr = self
            .member(v, key)?
            .as_array()
            .ok_or_else(|| self.bad(format!("`{key}` must be an array of rows")))?;
        if arr.len() != rows {
            return Err(self.bad(format!("`{key}` has {} rows, expected {rows}", arr.len())));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for (r, row) in arr.iter().enumerate() {
            let row = row
                .as_array()
                .ok_or_else(|| self.bad(format!("`{key}` row {r} must be an array")))?;
            if row.len() != cols {
                return Err(self.bad(format!(
                    "`{key}` row {r} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            for x in row {
                data.push(x.as_f64().ok_or_else(|| self.bad(format!("`{key}` holds a non-number")))?);
            }
        }
        Matrix::from_vec(rows, cols, data)
    }
}

/// Reads a model file, returning the model and, when the file carries one,
/// the optimizer state it was saved with.
pub fn read_model(path: &Path) -> Result<(CanModel, Option<TrainState>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))?;
    let r = ModelReader { path };

    let version = r.member(&root, "schema_version")?.as_u64();
    if version != Some(MODEL_SCHEMA_VERSION) {
        return Err(r.bad(format!(
            "schema_version {:?} unsupported, this build reads {MODEL_SCHEMA_VERSION}",
            version
        )));
    }
    let dims_arr = r.member(&root, "dims")?.as_array().cloned().unwrap_or_default();
    let dims: Vec<usize> = dims_arr.iter().filter_map(|v| v.as_u64()).map(|v| v as usize).collect();
    if dims.len() != 5 || dims.len() != dims_arr.len() {
        return Err(r.bad("`dims` must be five positive integers"));
    }
    if dims[4] != 1 {
        return Err(r.bad(format!("the net ends in a scalar score; last dim is {}", dims[4])));
    }
    let mlp_dims = MlpDims::new(dims[0], [dims[1], dims[2], dims[3]])?;

    let layers_json = r
        .member(&root, "layers")?
        .as_array()
        .ok_or_else(|| r.bad("`layers` must be an array"))?;
    if layers_json.len() != NUM_LAYERS {
        return Err(r.bad(format!("{} layers in file, the net has {NUM_LAYERS}", layers_json.len())));
    }
    let mut layers = Vec::with_capacity(NUM_LAYERS);
    for (l, layer) in layers_json.iter().enumerate() {
        let (fan_in, fan_out) = mlp_dims.layer_io(l);
        layers.push(LayerParams {
            w: r.matrix(layer, "w", fan_out, fan_in)?,
            b: r.reals(layer, "b", fan_out)?,
            gamma: r.reals(layer, "gamma", fan_out)?,
            beta: r.reals(layer, "beta", fan_out)?,
            running_mean: r.reals(layer, "running_mean", fan_out)?,
            running_var: r.reals(layer, "running_var", fan_out)?,
        });
    }
    let mlp = MlpParams { dims: mlp_dims, layers };

    let head = match root.get("head") {
        None => None,
        Some(h) => {
            let classes = r
                .member(h, "w_c")?
                .as_array()
                .map(Vec::len)
                .ok_or_else(|| r.bad("`w_c` must be an array of rows"))?;
            let feature_dim = mlp.dims.input.checked_sub(10).filter(|d| *d > 0).ok_or_else(
                || r.bad(format!("input width {} leaves no feature room", mlp.dims.input)),
            )?;
            Some(ClassifierHead {
                w: r.matrix(h, "w_c", classes, feature_dim)?,
                b: r.reals(h, "b_c", classes)?,
            })
        }
    };
    let model = CanModel { mlp, head };

    let trainer = match root.get("trainer") {
        None => None,
        Some(t) => {
            let step = r
                .member(t, "step")?
                .as_u64()
                .ok_or_else(|| r.bad("`trainer.step` must be a non-negative integer"))?;
            let params = model.mlp.param_count()
                + model.head.as_ref().map_or(0, ClassifierHead::param_count);
            let velocity = r.reals(t, "velocity", params)?;
            Some(TrainState { velocity, step })
        }
    };
    Ok((model, trainer))
}

// --- reports and configs ----------------------------------------------------

fn write_pretty_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::internal(format!("serialization failed: {e}")))?;
    let mut w = create(path)?;
    writeln!(w, "{text}").map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

pub fn write_report(path: &Path, report: &MetricsReport) -> Result<()> {
    write_pretty_json(path, report)
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    read_json(path)
}

pub fn write_world_config(path: &Path, config: &WorldConfig) -> Result<()> {
    write_pretty_json(path, config)
}

/// Reads and validates a scenario config, so every caller gets a world
/// that is actually generatable.
pub fn read_world_config(path: &Path) -> Result<WorldConfig> {
    let config: WorldConfig = read_json(path)?;
    config.validate()?;
    Ok(config)
}
