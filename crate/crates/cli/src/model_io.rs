//! JSON model files. Floats are written in shortest round-trip form, so a
//! saved and reloaded model predicts bit-for-bit identically.

use crate::data::Transformer;
use crate::model::{MethodParams, PriorSpec, TrainedModel};
use metatree_core::cart::RepresentativeNode;
use metatree_core::{
    Ensemble, FitTarget, GbdtBaseline, MetaTree, MetaTreeNode, RepresentativeTree, Schema, Split, SufficientStats,
    WeightScheme, Weighting,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const FORMAT: &str = "metatree-model";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelIoError {
    #[error("cannot access {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid model file: {0}")]
    Format(String),
    #[error("invalid model: {0}")]
    Model(#[from] metatree_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemaDto {
    pub continuous: usize,
    pub binary: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitDto {
    pub feature: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaNodeDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<[usize; 2]>,
    pub g_prior: f64,
    pub g_post: f64,
    pub n: u64,
    pub sum_y: f64,
    pub sum_y_sq: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaTreeDto {
    pub schema: SchemaDto,
    pub prior: PriorSpec,
    pub log_marginal_likelihood: f64,
    pub nodes: Vec<MetaNodeDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDto {
    pub learning: String,
    pub prediction: String,
    pub learning_rate: f64,
    pub base: f64,
    pub residual_targets: bool,
    pub weights: Vec<f64>,
    pub trees: Vec<MetaTreeDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepNodeDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub children: Option<[usize; 2]>,
    pub n_samples: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepTreeDto {
    pub schema: SchemaDto,
    pub nodes: Vec<RepNodeDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineDto {
    pub base: f64,
    pub learning_rate: f64,
    pub trees: Vec<RepTreeDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelDto {
    Ensemble(EnsembleDto),
    GbdtBaseline(BaselineDto),
}

/// Everything needed to predict on raw CSV rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub params: MethodParams,
    pub seed: u64,
    pub transformer: Transformer,
    pub model: ModelDto,
}

fn schema_dto(s: Schema) -> SchemaDto {
    SchemaDto { continuous: s.continuous, binary: s.binary }
}

fn split_dto(s: &Split) -> SplitDto {
    SplitDto { feature: s.feature, threshold: s.threshold }
}

fn split_from(d: SplitDto) -> Split {
    Split { feature: d.feature, threshold: d.threshold }
}

pub fn meta_tree_to_dto(t: &MetaTree) -> MetaTreeDto {
    MetaTreeDto {
        schema: schema_dto(t.schema()),
        prior: (*t.prior()).into(),
        log_marginal_likelihood: t.log_marginal_likelihood(),
        nodes: t
            .nodes()
            .iter()
            .map(|n| MetaNodeDto {
                split: n.split().map(split_dto),
                children: n.children(),
                g_prior: n.g_prior(),
                g_post: n.g_post(),
                n: n.stats().n,
                sum_y: n.stats().sum_y,
                sum_y_sq: n.stats().sum_y_sq,
            })
            .collect(),
    }
}

pub fn meta_tree_from_dto(d: &MetaTreeDto) -> Result<MetaTree, ModelIoError> {
    let nodes = d
        .nodes
        .iter()
        .map(|n| {
            let stats = SufficientStats { n: n.n, sum_y: n.sum_y, sum_y_sq: n.sum_y_sq };
            let node = match (n.split, n.children) {
                (Some(s), Some([l, r])) => MetaTreeNode::internal(split_from(s), l, r, n.g_prior),
                (None, None) => MetaTreeNode::leaf(),
                _ => return Err(ModelIoError::Format("node needs both split and children, or neither".into())),
            };
            Ok(node.with_state(n.g_post, stats))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let schema = Schema::new(d.schema.continuous, d.schema.binary);
    Ok(MetaTree::from_nodes(schema, d.prior.params()?, nodes, d.log_marginal_likelihood)?)
}

fn weighting(name: &str) -> Result<Weighting, ModelIoError> {
    Weighting::from_name(name).ok_or_else(|| ModelIoError::Format(format!("unknown weighting {name:?}")))
}

pub fn model_to_dto(m: &TrainedModel) -> ModelDto {
    match m {
        TrainedModel::Ensemble(e) => ModelDto::Ensemble(EnsembleDto {
            learning: e.scheme().learning().name().into(),
            prediction: e.scheme().prediction().name().into(),
            learning_rate: e.learning_rate(),
            base: e.base(),
            residual_targets: e.fit_target() == FitTarget::Residual,
            weights: e.weights().to_vec(),
            trees: e.trees().iter().map(meta_tree_to_dto).collect(),
        }),
        TrainedModel::Baseline(b) => ModelDto::GbdtBaseline(BaselineDto {
            base: b.base(),
            learning_rate: b.learning_rate(),
            trees: b
                .trees()
                .iter()
                .map(|t| RepTreeDto {
                    schema: schema_dto(t.schema()),
                    nodes: t
                        .nodes()
                        .iter()
                        .map(|n| RepNodeDto {
                            split: n.split.as_ref().map(split_dto),
                            children: n.children,
                            n_samples: n.n_samples,
                            value: n.value,
                        })
                        .collect(),
                })
                .collect(),
        }),
    }
}

pub fn model_from_dto(d: &ModelDto) -> Result<TrainedModel, ModelIoError> {
    match d {
        ModelDto::Ensemble(e) => {
            let scheme = WeightScheme::new(weighting(&e.learning)?, weighting(&e.prediction)?)?;
            let trees = e.trees.iter().map(meta_tree_from_dto).collect::<Result<Vec<_>, _>>()?;
            let fit_target = if e.residual_targets { FitTarget::Residual } else { FitTarget::Raw };
            Ok(TrainedModel::Ensemble(Ensemble::from_parts(
                trees,
                scheme,
                e.learning_rate,
                e.weights.clone(),
                e.base,
                fit_target,
            )?))
        }
        ModelDto::GbdtBaseline(b) => {
            let trees = b
                .trees
                .iter()
                .map(|t| {
                    let nodes = t
                        .nodes
                        .iter()
                        .map(|n| RepresentativeNode {
                            split: n.split.map(split_from),
                            children: n.children,
                            depth: 0,
                            n_samples: n.n_samples,
                            value: n.value,
                        })
                        .collect();
                    RepresentativeTree::from_nodes(Schema::new(t.schema.continuous, t.schema.binary), nodes)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(TrainedModel::Baseline(GbdtBaseline::from_parts(b.base, b.learning_rate, trees)?))
        }
    }
}

impl ModelFile {
    pub fn new(params: MethodParams, seed: u64, transformer: Transformer, model: &TrainedModel) -> Self {
        Self { format: FORMAT.into(), version: VERSION, params, seed, transformer, model: model_to_dto(model) }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("model DTOs serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ModelIoError> {
        let file: Self = serde_json::from_str(text).map_err(|e| ModelIoError::Format(e.to_string()))?;
        if file.format != FORMAT || file.version != VERSION {
            return Err(ModelIoError::Format(format!(
                "unsupported format {:?} version {}",
                file.format, file.version
            )));
        }
        Ok(file)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelIoError> {
        std::fs::write(path, self.to_json())
            .map_err(|source| ModelIoError::Io { path: path.display().to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ModelIoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ModelIoError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    pub fn model(&self) -> Result<TrainedModel, ModelIoError> {
        let model = model_from_dto(&self.model)?;
        let schema = match &model {
            TrainedModel::Ensemble(e) => e.trees().first().map(|t| t.schema()),
            TrainedModel::Baseline(b) => b.trees().first().map(|t| t.schema()),
        };
        if let Some(s) = schema {
            if s != self.transformer.schema() {
                return Err(ModelIoError::Format("model schema does not match the transformer".into()));
            }
        }
        Ok(model)
    }
}
