//! Method tags and a single entry point for training any of them.

use metatree_core::{
    Dataset, Ensemble, EnsembleConfig, FitTarget, GbdtBaseline, GbdtBaselineConfig, Method, NormalGammaParams,
    Regressor,
};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodTag {
    MtGbdt,
    MtUniUni,
    MtUniPos,
    MtPosPos,
    GbdtBaseline,
}

impl MethodTag {
    pub const ALL: [MethodTag; 5] =
        [MethodTag::MtGbdt, MethodTag::MtUniUni, MethodTag::MtUniPos, MethodTag::MtPosPos, MethodTag::GbdtBaseline];

    pub fn as_str(self) -> &'static str {
        match self.meta() {
            Some(m) => m.tag(),
            None => "gbdt_baseline",
        }
    }

    pub fn meta(self) -> Option<Method> {
        match self {
            MethodTag::MtGbdt => Some(Method::MtGbdt),
            MethodTag::MtUniUni => Some(Method::MtUniUni),
            MethodTag::MtUniPos => Some(Method::MtUniPos),
            MethodTag::MtPosPos => Some(Method::MtPosPos),
            MethodTag::GbdtBaseline => None,
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        self.meta().map_or(0.1, Method::default_learning_rate)
    }

    pub fn default_min_samples_leaf(self) -> usize {
        match self {
            MethodTag::GbdtBaseline => GbdtBaselineConfig::default().min_samples_leaf,
            _ => 5,
        }
    }
}

impl fmt::Display for MethodTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MethodTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MethodTag::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let known: Vec<&str> = MethodTag::ALL.iter().map(|m| m.as_str()).collect();
            format!("unknown method {s:?}; expected one of {}", known.join(", "))
        })
    }
}

impl Serialize for MethodTag {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for MethodTag {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub m: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { m: 0.0, kappa: 2.0, alpha: 2.0, beta: 2.0 }
    }
}

impl PriorSpec {
    pub fn params(&self) -> metatree_core::Result<NormalGammaParams> {
        NormalGammaParams::new(self.m, self.kappa, self.alpha, self.beta)
    }
}

impl From<NormalGammaParams> for PriorSpec {
    fn from(p: NormalGammaParams) -> Self {
        Self { m: p.m, kappa: p.kappa, alpha: p.alpha, beta: p.beta }
    }
}

/// Fully resolved hyperparameters for one method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MethodParams {
    pub method: MethodTag,
    pub n_trees: usize,
    pub max_depth: usize,
    pub g: f64,
    pub prior: PriorSpec,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    /// Fit probability-weighted trees on residuals instead of raw targets.
    pub residual_targets: bool,
}

impl MethodParams {
    pub fn defaults(method: MethodTag) -> Self {
        Self {
            method,
            n_trees: 100,
            max_depth: 5,
            g: 0.6,
            prior: PriorSpec::default(),
            learning_rate: method.default_learning_rate(),
            min_samples_leaf: method.default_min_samples_leaf(),
            residual_targets: false,
        }
    }

    /// The same settings for another method, with that method's learning
    /// rate and leaf-size defaults.
    pub fn for_method(&self, method: MethodTag) -> Self {
        Self {
            method,
            learning_rate: method.default_learning_rate(),
            min_samples_leaf: method.default_min_samples_leaf(),
            ..*self
        }
    }

    pub fn ensemble_config(&self) -> metatree_core::Result<EnsembleConfig> {
        let method = self.method.meta().ok_or_else(|| {
            metatree_core::Error::InvalidParameter("the GBDT baseline has no meta-tree configuration".into())
        })?;
        let cfg = EnsembleConfig {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            g: self.g,
            leaf_prior: self.prior.params()?,
            scheme: method.scheme(),
            learning_rate: self.learning_rate,
            min_samples_leaf: self.min_samples_leaf,
            fit_target: if self.residual_targets { FitTarget::Residual } else { FitTarget::Raw },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn baseline_config(&self) -> GbdtBaselineConfig {
        GbdtBaselineConfig {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            learning_rate: self.learning_rate,
            min_samples_leaf: self.min_samples_leaf,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Ensemble(Ensemble),
    Baseline(GbdtBaseline),
}

impl Regressor for TrainedModel {
    fn predict(&self, x: &[f64]) -> metatree_core::Result<f64> {
        match self {
            TrainedModel::Ensemble(e) => e.predict(x),
            TrainedModel::Baseline(b) => b.predict(x),
        }
    }
}

pub fn train_model(data: &Dataset, params: &MethodParams) -> metatree_core::Result<TrainedModel> {
    match params.method {
        MethodTag::GbdtBaseline => GbdtBaseline::train(data, &params.baseline_config()).map(TrainedModel::Baseline),
        _ => Ensemble::train(data, &params.ensemble_config()?).map(TrainedModel::Ensemble),
    }
}
