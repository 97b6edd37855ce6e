//! Experiment configuration (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{canonical_hash, read_bytes};
use crate::model::TrainConfig;
use crate::radar::ExtensionSpec;
use crate::synth::SceneSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Heights swept for the fixed-height baseline table.
    pub fixed_sweep: Vec<f64>,
    /// A model whose mean |Ĥ| at RAD pixels is below this fraction of the
    /// ground truth there is flagged as collapsed.
    pub collapse_threshold: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            fixed_sweep: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            collapse_threshold: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// When set, overrides both `scene.seed` and `train.seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub output_dir: PathBuf,
    /// Train/val/test ratios.
    pub split: [f64; 3],
    pub scene: SceneSpec,
    pub train: TrainConfig,
    pub extension: ExtensionSpec,
    pub eval: EvalConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: None,
            output_dir: PathBuf::from("out"),
            split: [3.0, 1.0, 1.0],
            scene: SceneSpec::default(),
            train: TrainConfig::default(),
            extension: ExtensionSpec::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        // A malformed config is a usage problem, not a damaged artifact.
        toml::from_str(text).map_err(|e| {
            Error::Config(format!(
                "{}: parse error at byte {}: {}",
                origin.display(),
                e.span().map_or(0, |s| s.start),
                e.message()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            offset: e.utf8_error().valid_up_to(),
            message: "not UTF-8".into(),
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    /// Apply the master seed and validate every section.
    pub fn resolved(mut self) -> Result<Self> {
        if let Some(seed) = self.seed {
            self.scene.seed = seed;
            self.train.seed = seed;
        }
        self.scene.validate()?;
        self.train.validate()?;
        self.extension.validate()?;
        if self.split.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::Config(format!("split ratios must be positive, got {:?}", self.split)));
        }
        if let Some(h) = self.eval.fixed_sweep.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::Config(format!("eval.fixed_sweep heights must be > 0, got {h}")));
        }
        let (h, w) = self.scene.camera.dims();
        if h % 4 != 0 || w % 4 != 0 {
            return Err(Error::Config(format!("image dims {h}x{w} must be multiples of 4")));
        }
        Ok(self)
    }

    /// Hash of everything that influences artifact contents; the output
    /// directory is excluded so relocating a run does not change it.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        canonical_hash(&c)
    }
}
