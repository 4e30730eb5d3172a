//! Bayes-optimal regression over meta-trees.
//!
//! A meta-tree is a fixed representative tree together with the set of all of
//! its rooted subtrees. Each node carries a conjugate normal-gamma leaf model
//! and a posterior probability of being internal, which lets the posterior
//! predictive mixture over every subtree be evaluated along a single
//! root-to-leaf path. Ensembles of meta-trees are grown sequentially on
//! residuals in the style of gradient boosting.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, experiments and
//! the command-line interface live in the `metatree` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cart;
pub mod dataset;
pub mod ensemble;
mod error;
pub mod leaf_model;
pub mod math;
pub mod metatree;
pub mod metrics;
pub mod synthetic;

pub use crate::cart::{build_meta_tree, build_tree, best_split, RepresentativeTree, SplitCandidate};
pub use crate::dataset::{Dataset, FeatureMatrix, Schema};
pub use crate::ensemble::{
    posterior_over_k, Ensemble, EnsembleConfig, FitTarget, GbdtBaseline, GbdtBaselineConfig,
    Method, TrainingTrace, WeightScheme, Weighting,
};
pub use crate::error::{Error, Result};
pub use crate::leaf_model::{NormalGammaParams, SufficientStats};
pub use crate::metatree::{MetaTree, MetaTreeNode, Split};
pub use crate::synthetic::{sample_dataset, sample_true_tree, TrueModelTree, TrueNode};

/// Anything that maps a feature vector to a real-valued prediction.
pub trait Regressor {
    fn predict(&self, x: &[f64]) -> Result<f64>;
}
