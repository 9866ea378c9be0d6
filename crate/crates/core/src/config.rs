//! Pipeline configuration file (TOML).
//!
//! ```toml
//! schema_version = 1
//! workers = 4
//! classes = ["walk", "jump"]       # optional, enables class names
//!
//! [io]
//! appearance = "appearance.jsonl"
//! motion = "motion.jsonl"
//! out = "tubes.jsonl"
//! gt = "gt.jsonl"                  # optional, evaluate after the pipeline
//! report = "report.json"
//!
//! [fusion]
//! tau = 0.3
//!
//! [pathing]
//! lambda_o = 1.0
//! max_paths_per_class = 10
//! empty_frame_policy = "skip-class"  # or "stop"
//! score_floor = 0.05                 # optional
//!
//! [trimming]
//! lambda_l = 1.0
//! alpha_default = 1.0
//! alpha = { jump = 2.5, "0" = 0.5 }  # class name or id
//! background_score = "complement"    # or { constant = 0.4 }
//! foreground_score = "augmented"     # or "raw"
//! top_k = 40
//!
//! [evaluation]
//! deltas = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
//! ```
//!
//! Every key is optional and defaults to the values shown above (without
//! the optional ones). Command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{EvalConfig, EvalError};
use crate::fusion::{FusionConfig, FusionError};
use crate::model::{ClassCatalog, ModelError};
use crate::pathing::{EmptyFramePolicy, PathConfig, PathError};
use crate::trimming::{BackgroundScore, ForegroundScore, TrimConfig, TrimError};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("unsupported schema_version {0}, expected {SCHEMA_VERSION}")]
    Version(u32),
    #[error("worker count must be at least 1")]
    ZeroWorkers,
    #[error("unknown class {0:?} in alpha table")]
    UnknownClass(String),
    #[error(transparent)]
    Catalog(#[from] ModelError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Trim(#[from] TrimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoSection {
    pub appearance: Option<PathBuf>,
    pub motion: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathingSection {
    pub lambda_o: f64,
    pub max_paths_per_class: usize,
    pub empty_frame_policy: EmptyFramePolicy,
    pub score_floor: Option<f64>,
}

impl Default for PathingSection {
    fn default() -> Self {
        let d = PathConfig::default();
        Self {
            lambda_o: d.lambda_o,
            max_paths_per_class: d.max_paths_per_class,
            empty_frame_policy: d.empty_frame_policy,
            score_floor: d.score_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrimmingSection {
    pub lambda_l: f64,
    pub alpha_default: f64,
    /// Keyed by class name or numeric class id.
    pub alpha: BTreeMap<String, f64>,
    pub background_score: BackgroundScore,
    pub foreground_score: ForegroundScore,
    pub top_k: usize,
}

impl Default for TrimmingSection {
    fn default() -> Self {
        let d = TrimConfig::default();
        Self {
            lambda_l: d.lambda_l,
            alpha_default: d.alpha_default,
            alpha: BTreeMap::new(),
            background_score: d.background_score,
            foreground_score: d.foreground_score,
            top_k: d.top_k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub deltas: Vec<f64>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        Self {
            deltas: EvalConfig::default().deltas,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub schema_version: u32,
    pub workers: Option<usize>,
    pub classes: Option<Vec<String>>,
    pub io: IoSection,
    pub fusion: FusionConfig,
    pub pathing: PathingSection,
    pub trimming: TrimmingSection,
    pub evaluation: EvaluationSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            workers: None,
            classes: None,
            io: IoSection::default(),
            fusion: FusionConfig::default(),
            pathing: PathingSection::default(),
            trimming: TrimmingSection::default(),
            evaluation: EvaluationSection::default(),
        }
    }
}

/// Validated stage parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub catalog: Option<ClassCatalog>,
    pub fusion: FusionConfig,
    pub pathing: PathConfig,
    pub trimming: TrimConfig,
    pub evaluation: EvalConfig,
    pub workers: usize,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source: Box::new(source),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn catalog(&self) -> Result<Option<ClassCatalog>, ConfigError> {
        Ok(match &self.classes {
            Some(names) => Some(ClassCatalog::new(names.iter().cloned())?),
            None => None,
        })
    }

    /// Class id from a name in the catalog or a plain integer.
    pub fn class_id(&self, key: &str) -> Result<usize, ConfigError> {
        if let Some(id) = self.catalog()?.and_then(|c| c.id(key)) {
            return Ok(id);
        }
        key.parse()
            .map_err(|_| ConfigError::UnknownClass(key.to_owned()))
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Version(self.schema_version));
        }
        let workers = self.workers.unwrap_or(1);
        if workers == 0 {
            return Err(ConfigError::ZeroWorkers);
        }
        self.fusion.validate()?;
        let pathing = PathConfig {
            lambda_o: self.pathing.lambda_o,
            max_paths_per_class: self.pathing.max_paths_per_class,
            empty_frame_policy: self.pathing.empty_frame_policy,
            score_floor: self.pathing.score_floor,
        };
        pathing.validate()?;
        let t = &self.trimming;
        let mut alpha = BTreeMap::new();
        for (key, &value) in &t.alpha {
            alpha.insert(self.class_id(key)?, value);
        }
        let trimming = TrimConfig {
            lambda_l: t.lambda_l,
            alpha_default: t.alpha_default,
            alpha,
            background_score: t.background_score,
            foreground_score: t.foreground_score,
            top_k: t.top_k,
        };
        trimming.validate()?;
        let evaluation = EvalConfig::new(self.evaluation.deltas.clone())?;
        Ok(Resolved {
            catalog: self.catalog()?,
            fusion: self.fusion,
            pathing,
            trimming,
            evaluation,
            workers,
        })
    }
}
