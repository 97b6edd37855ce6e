//! Versioned JSON containers for datasets, predictions, checkpoints and
//! reports, plus plain-text depth maps.
//!
//! Every container carries `schema_version`, a `kind` tag and the hash of the
//! configuration that produced it. Floats are written in shortest round-trip
//! decimal form and parsed exactly, so a save/load cycle is bit-exact; model
//! weights are stored as base64 little-endian `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{validate_frame, CameraModel, Frame};
use crate::model::{EpochRecord, FramePredictions, GroundTruthOracle, ModelConfig, PredictionStore, Predictor, ToyModel};
use crate::synth::{Dataset, SceneSpec, Split};

pub const DATASET_VERSION: u32 = 1;
pub const PREDICTIONS_VERSION: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

/// Hex sha256 of the canonical JSON form (sorted keys, no whitespace).
pub fn canonical_hash<T: Serialize>(value: &T) -> String {
    let canonical = serde_json::to_value(value).and_then(|v| serde_json::to_vec(&v)).expect("serializable");
    Sha256::digest(canonical)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn byte_offset(text: &[u8], line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive(|b| *b == b'\n')
        .take(line - 1)
        .map(<[u8]>::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn parse_error(path: &Path, text: &[u8], e: &serde_json::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Write `bytes`, creating parent directories.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Numeric(format!("{}: {e}", path.display())))?;
    bytes.push(b'\n');
    write_bytes(path, &bytes)
}

#[derive(Deserialize)]
struct Header {
    schema_version: u32,
    kind: String,
}

/// Check the header before decoding the body, so that a newer file yields a
/// version error instead of a confusing field error.
fn read_versioned<T: DeserializeOwned>(path: &Path, kind: &'static str, supported: u32) -> Result<T> {
    let text = read_bytes(path)?;
    let header: Header = serde_json::from_slice(&text).map_err(|e| parse_error(path, &text, &e))?;
    if header.kind != kind {
        return Err(Error::Corrupt {
            path: path.to_path_buf(),
            message: format!("expected a {kind} file, found kind '{}'", header.kind),
        });
    }
    if header.schema_version != supported {
        return Err(Error::SchemaVersion {
            path: path.to_path_buf(),
            kind,
            found: header.schema_version,
            supported,
        });
    }
    serde_json::from_slice(&text).map_err(|e| parse_error(path, &text, &e))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    schema_version: u32,
    kind: String,
    config_hash: String,
    spec_hash: String,
    spec: SceneSpec,
    camera: CameraModel,
    split: Split,
    frames: Vec<Frame>,
}

pub fn save_dataset(path: &Path, dataset: &Dataset, config_hash: &str) -> Result<()> {
    write_json(
        path,
        &DatasetFile {
            schema_version: DATASET_VERSION,
            kind: "dataset".into(),
            config_hash: config_hash.into(),
            spec_hash: canonical_hash(&dataset.spec),
            spec: dataset.spec.clone(),
            camera: dataset.spec.camera,
            split: dataset.split.clone(),
            frames: dataset.frames.clone(),
        },
    )
}

/// Load and validate every frame and the split.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file: DatasetFile = read_versioned(path, "dataset", DATASET_VERSION)?;
    for (i, f) in file.frames.iter().enumerate() {
        validate_frame(i, f)?;
    }
    let corrupt = |message: String| Error::Corrupt {
        path: path.to_path_buf(),
        message,
    };
    if file.spec_hash != canonical_hash(&file.spec) {
        return Err(corrupt("spec_hash does not match the stored scene spec".into()));
    }
    let known: std::collections::BTreeSet<u32> = file.frames.iter().map(|f| f.id).collect();
    if known.len() != file.frames.len() {
        return Err(corrupt("duplicate frame ids".into()));
    }
    let split = &file.split;
    if let Some(id) = split.train.iter().chain(&split.val).chain(&split.test).find(|id| !known.contains(id)) {
        return Err(corrupt(format!("split references unknown frame {id}")));
    }
    Ok(Dataset {
        spec: file.spec,
        frames: file.frames,
        split: file.split,
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionsFile {
    schema_version: u32,
    kind: String,
    config_hash: String,
    frames: BTreeMap<u32, FramePredictions>,
}

pub fn save_predictions(path: &Path, store: &PredictionStore, config_hash: &str) -> Result<()> {
    write_json(
        path,
        &PredictionsFile {
            schema_version: PREDICTIONS_VERSION,
            kind: "predictions".into(),
            config_hash: config_hash.into(),
            frames: store.iter().map(|(id, f)| (id, f.clone())).collect(),
        },
    )
}

pub fn load_predictions(path: &Path) -> Result<PredictionStore> {
    let file: PredictionsFile = read_versioned(path, "predictions", PREDICTIONS_VERSION)?;
    let mut store = PredictionStore::default();
    for (id, f) in file.frames {
        if let Some(p) = f.points.iter().find(|p| !(p.height.is_finite() && p.height >= 0.0)) {
            return Err(Error::Invariant {
                frame: id as usize,
                field: format!("predictions[{}].height", p.id),
                message: format!("{} is not a finite non-negative height", p.height),
            });
        }
        store.insert(id, f);
    }
    Ok(store)
}

/// A model that can be saved and restored.
#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Toy(ToyModel),
    /// Ground-truth stand-in; useful to validate the evaluation path.
    Oracle,
}

impl Checkpoint {
    pub fn predictor(&self) -> &dyn Predictor {
        match self {
            Checkpoint::Toy(m) => m,
            Checkpoint::Oracle => &GroundTruthOracle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    name: String,
    weight_shape: [usize; 4],
    weight_offset: usize,
    bias_offset: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    schema_version: u32,
    kind: String,
    config_hash: String,
    model_kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_dims: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    layers: Vec<LayerRecord>,
    #[serde(default)]
    num_params: usize,
    /// Base64 of little-endian f64 parameters.
    #[serde(default)]
    weights: String,
}

fn layer_records(model: &ToyModel) -> Vec<LayerRecord> {
    model
        .layout()
        .slots()
        .iter()
        .map(|s| LayerRecord {
            name: s.layer.name().into(),
            weight_shape: s.weight_shape(),
            weight_offset: s.weight_offset,
            bias_offset: s.bias_offset,
        })
        .collect()
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint, config_hash: &str) -> Result<()> {
    let mut file = CheckpointFile {
        schema_version: CHECKPOINT_VERSION,
        kind: "checkpoint".into(),
        config_hash: config_hash.into(),
        model_kind: "oracle".into(),
        model: None,
        image_dims: None,
        layers: vec![],
        num_params: 0,
        weights: String::new(),
    };
    if let Checkpoint::Toy(m) = checkpoint {
        let bytes: Vec<u8> = m.params.iter().flat_map(|v| v.to_le_bytes()).collect();
        file.model_kind = "toy".into();
        file.model = Some(m.config.clone());
        file.image_dims = Some([m.height, m.width]);
        file.layers = layer_records(m);
        file.num_params = m.params.len();
        file.weights = B64.encode(bytes);
    }
    write_json(path, &file)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file: CheckpointFile = read_versioned(path, "checkpoint", CHECKPOINT_VERSION)?;
    let corrupt = |message: String| Error::Corrupt {
        path: path.to_path_buf(),
        message,
    };
    match file.model_kind.as_str() {
        "oracle" => Ok(Checkpoint::Oracle),
        "toy" => {
            let (Some(config), Some([h, w])) = (file.model, file.image_dims) else {
                return Err(corrupt("toy checkpoint lacks model config or image_dims".into()));
            };
            let bytes = B64
                .decode(file.weights.as_bytes())
                .map_err(|e| corrupt(format!("weights: {e}")))?;
            if bytes.len() != 8 * file.num_params {
                return Err(corrupt(format!(
                    "weights hold {} bytes, expected {} for {} parameters",
                    bytes.len(),
                    8 * file.num_params,
                    file.num_params
                )));
            }
            let params = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            let model = ToyModel::from_params(config, h, w, params).map_err(|e| corrupt(e.to_string()))?;
            if layer_records(&model) != file.layers {
                return Err(corrupt("layer shapes disagree with the model config".into()));
            }
            Ok(Checkpoint::Toy(model))
        }
        other => Err(corrupt(format!("unknown model_kind '{other}'"))),
    }
}

/// Any serializable report, wrapped with version and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile<T> {
    pub schema_version: u32,
    pub kind: String,
    pub config_hash: String,
    pub report: T,
}

pub fn save_report<T: Serialize>(path: &Path, report: &T, config_hash: &str) -> Result<()> {
    write_json(
        path,
        &ReportFile {
            schema_version: REPORT_VERSION,
            kind: "report".into(),
            config_hash: config_hash.into(),
            report,
        },
    )
}

pub fn load_report<T: DeserializeOwned>(path: &Path) -> Result<ReportFile<T>> {
    read_versioned(path, "report", REPORT_VERSION)
}

/// One JSON record per line.
pub fn save_train_log(path: &Path, log: &[EpochRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in log {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Numeric(e.to_string()))?;
        out.write_all(b"\n").expect("in-memory write");
    }
    write_bytes(path, &out)
}

pub fn load_train_log(path: &Path) -> Result<Vec<EpochRecord>> {
    let text = read_bytes(path)?;
    let mut offset = 0;
    let mut log = Vec::new();
    for line in text.split_inclusive(|b| *b == b'\n') {
        if !line.iter().all(u8::is_ascii_whitespace) {
            let r = serde_json::from_slice(line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                offset: offset + byte_offset(line, e.line(), e.column()),
                message: e.to_string(),
            })?;
            log.push(r);
        }
        offset += line.len();
    }
    Ok(log)
}

/// Whitespace- or comma-separated matrix, one row per line; `#` starts a
/// comment. This is what `numpy.savetxt` writes.
pub fn load_depth_map(path: &Path) -> Result<Array2<f64>> {
    let text = read_bytes(path)?;
    let text_str = std::str::from_utf8(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        offset: e.valid_up_to(),
        message: "not UTF-8".into(),
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut line_start = 0;
    for line in text_str.split_inclusive('\n') {
        let body = line.split('#').next().unwrap_or("");
        let mut row = Vec::new();
        let mut pos = 0;
        for tok in body.split(|c: char| c.is_whitespace() || c == ',') {
            if !tok.is_empty() {
                let at = line_start + pos;
                row.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    offset: at,
                    message: format!("'{tok}': {e}"),
                })?);
            }
            pos += tok.len() + 1;
        }
        if !row.is_empty() {
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        offset: line_start,
                        message: format!("row has {} values, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        line_start += line.len();
    }
    let (h, w) = (rows.len(), rows.first().map_or(0, Vec::len));
    Array2::from_shape_vec((h, w), rows.concat()).map_err(|e| Error::Corrupt {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn save_depth_map(path: &Path, map: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in map.rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    write_bytes(path, out.as_bytes())
}

/// Fixed output layout under one root directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset").join("dataset.json")
    }

    pub fn checkpoint(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{name}.json"))
    }

    pub fn train_log(&self, name: &str) -> PathBuf {
        self.root.join("checkpoints").join(format!("{name}.log.jsonl"))
    }

    pub fn predictions(&self, name: &str) -> PathBuf {
        self.root.join("predictions").join(format!("{name}.json"))
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.root.join("reports").join(format!("{name}.json"))
    }

    pub fn renders(&self) -> PathBuf {
        self.root.join("renders")
    }
}
