//! Run configuration: built-in defaults, overridden by an optional TOML file,
//! overridden in turn by command-line flags.

use crate::model::{MethodParams, MethodTag, PriorSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// Every field optional; used both for the config file and for flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub method: Option<MethodTag>,
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub g: Option<f64>,
    pub prior: Option<PriorSpec>,
    pub learning_rate: Option<f64>,
    pub min_samples_leaf: Option<usize>,
    pub residual_targets: Option<bool>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub cv_folds: Option<usize>,
    pub cv_repeats: Option<usize>,
    pub data_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })
    }

    /// `self` wins wherever it has a value.
    pub fn or(self, other: Overrides) -> Overrides {
        Overrides {
            method: self.method.or(other.method),
            n_trees: self.n_trees.or(other.n_trees),
            max_depth: self.max_depth.or(other.max_depth),
            g: self.g.or(other.g),
            prior: self.prior.or(other.prior),
            learning_rate: self.learning_rate.or(other.learning_rate),
            min_samples_leaf: self.min_samples_leaf.or(other.min_samples_leaf),
            residual_targets: self.residual_targets.or(other.residual_targets),
            seed: self.seed.or(other.seed),
            threads: self.threads.or(other.threads),
            cv_folds: self.cv_folds.or(other.cv_folds),
            cv_repeats: self.cv_repeats.or(other.cv_repeats),
            data_dir: self.data_dir.or(other.data_dir),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: MethodParams,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub cv: CvConfig,
    pub data_dir: PathBuf,
}

impl RunConfig {
    /// Resolves flags over file over defaults. Learning rate and leaf size
    /// default per method.
    pub fn resolve(flags: Overrides, file: Option<Overrides>) -> Result<Self, ConfigError> {
        let o = flags.or(file.unwrap_or_default());
        let method = o.method.unwrap_or(MethodTag::MtUniUni);
        let d = MethodParams::defaults(method);
        let params = MethodParams {
            method,
            n_trees: o.n_trees.unwrap_or(d.n_trees),
            max_depth: o.max_depth.unwrap_or(d.max_depth),
            g: o.g.unwrap_or(d.g),
            prior: o.prior.unwrap_or(d.prior),
            learning_rate: o.learning_rate.unwrap_or(d.learning_rate),
            min_samples_leaf: o.min_samples_leaf.unwrap_or(d.min_samples_leaf),
            residual_targets: o.residual_targets.unwrap_or(d.residual_targets),
        };
        validate_params(&params)?;
        let cv = CvConfig { folds: o.cv_folds.unwrap_or(5), repeats: o.cv_repeats.unwrap_or(3) };
        if cv.folds < 2 || cv.repeats == 0 {
            return Err(ConfigError::Invalid(format!("cv needs ≥ 2 folds and ≥ 1 repeat, got {cv:?}")));
        }
        Ok(Self {
            params,
            seed: o.seed.unwrap_or(0),
            threads: o.threads.unwrap_or(0),
            cv,
            data_dir: o.data_dir.unwrap_or_else(crate::manifest::data_dir),
        })
    }
}

pub fn validate_params(p: &MethodParams) -> Result<(), ConfigError> {
    p.prior.params().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if p.method.meta().is_some() {
        p.ensemble_config().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    } else if !(p.learning_rate > 0.0 && p.learning_rate <= 1.0) {
        return Err(ConfigError::Invalid(format!("learning rate must lie in (0, 1], got {}", p.learning_rate)));
    }
    if p.min_samples_leaf == 0 {
        return Err(ConfigError::Invalid("min_samples_leaf must be ≥ 1".into()));
    }
    Ok(())
}

/// First 16 hex digits of the SHA-256 of the value's JSON form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serializes");
    hex::encode(&Sha256::digest(&bytes)[..8])
}
