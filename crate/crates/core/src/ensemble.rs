//! Sequentially constructed ensembles of meta-trees.
//!
//! Tree `b` is grown by CART on the residuals of the current ensemble and then
//! turned into a meta-tree. How the previous trees are combined while learning
//! (`w'`) and at prediction time (`w`) is set by a [`WeightScheme`]:
//!
//! * `gbdt`: every tree predicts a residual; `F = F_0 + γ Σ f_j`.
//! * `uniform`: every tree predicts `y`; `F = Σ f_j / B`.
//! * `posterior`: every tree predicts `y`; weights are the posterior over the
//!   trees' feature assignments, i.e. the softmax of their log marginal
//!   likelihoods.

use crate::cart::{build_meta_tree, build_tree, RepresentativeTree};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::leaf_model::NormalGammaParams;
use crate::math;
use crate::metatree::MetaTree;
use crate::Regressor;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weighting {
    Gbdt,
    Uniform,
    Posterior,
}

impl Weighting {
    pub fn name(self) -> &'static str {
        match self {
            Weighting::Gbdt => "gbdt",
            Weighting::Uniform => "uniform",
            Weighting::Posterior => "posterior",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gbdt" => Some(Weighting::Gbdt),
            "uniform" => Some(Weighting::Uniform),
            "posterior" => Some(Weighting::Posterior),
            _ => None,
        }
    }
}

/// Learning and prediction weightings. Only `(gbdt, gbdt)`,
/// `(uniform, uniform)`, `(uniform, posterior)` and `(posterior, posterior)`
/// are valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WeightScheme {
    learning: Weighting,
    prediction: Weighting,
}

impl WeightScheme {
    pub const GBDT: Self = Self { learning: Weighting::Gbdt, prediction: Weighting::Gbdt };
    pub const UNI_UNI: Self = Self { learning: Weighting::Uniform, prediction: Weighting::Uniform };
    pub const UNI_POS: Self = Self { learning: Weighting::Uniform, prediction: Weighting::Posterior };
    pub const POS_POS: Self = Self { learning: Weighting::Posterior, prediction: Weighting::Posterior };

    pub fn new(learning: Weighting, prediction: Weighting) -> Result<Self> {
        use Weighting::*;
        match (learning, prediction) {
            (Gbdt, Gbdt) | (Uniform, Uniform) | (Uniform, Posterior) | (Posterior, Posterior) => {
                Ok(Self { learning, prediction })
            }
            _ => Err(Error::InvalidScheme { learning: learning.name(), prediction: prediction.name() }),
        }
    }

    pub fn learning(&self) -> Weighting {
        self.learning
    }

    pub fn prediction(&self) -> Weighting {
        self.prediction
    }

    pub fn is_gbdt(&self) -> bool {
        self.learning == Weighting::Gbdt
    }
}

/// The four meta-tree ensemble variants with their customary learning rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    MtGbdt,
    MtUniUni,
    MtUniPos,
    MtPosPos,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MtGbdt, Method::MtUniUni, Method::MtUniPos, Method::MtPosPos];

    pub fn scheme(self) -> WeightScheme {
        match self {
            Method::MtGbdt => WeightScheme::GBDT,
            Method::MtUniUni => WeightScheme::UNI_UNI,
            Method::MtUniPos => WeightScheme::UNI_POS,
            Method::MtPosPos => WeightScheme::POS_POS,
        }
    }

    pub fn default_learning_rate(self) -> f64 {
        match self {
            Method::MtGbdt => 0.1,
            _ => 1.0,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Method::MtGbdt => "mt_gbdt",
            Method::MtUniUni => "mt_uni_uni",
            Method::MtUniPos => "mt_uni_pos",
            Method::MtPosPos => "mt_pos_pos",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.tag() == tag)
    }
}

/// Which targets the meta-trees condition on in the probability-weighted
/// schemes. Residual targets are always used in gbdt mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FitTarget {
    #[default]
    Raw,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub g: f64,
    pub leaf_prior: NormalGammaParams,
    pub scheme: WeightScheme,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub fit_target: FitTarget,
}

impl EnsembleConfig {
    pub fn for_method(method: Method) -> Self {
        Self {
            n_trees: 100,
            max_depth: 5,
            g: 0.6,
            leaf_prior: NormalGammaParams { m: 0.0, kappa: 2.0, alpha: 2.0, beta: 2.0 },
            scheme: method.scheme(),
            learning_rate: method.default_learning_rate(),
            min_samples_leaf: 5,
            fit_target: FitTarget::Raw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.leaf_prior;
        NormalGammaParams::new(p.m, p.kappa, p.alpha, p.beta)?;
        WeightScheme::new(self.scheme.learning, self.scheme.prediction)?;
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.g) {
            return Err(Error::InvalidParameter(format!("g must lie in [0, 1], got {}", self.g)));
        }
        if self.n_trees == 0 && !self.scheme.is_gbdt() {
            return Err(Error::InvalidParameter(
                "probability-weighted ensembles need at least one tree".into(),
            ));
        }
        Ok(())
    }
}

/// Posterior over the feature assignments of `trees` under a uniform prior:
/// the softmax of their log marginal likelihoods.
pub fn posterior_over_k(trees: &[MetaTree]) -> Result<Vec<f64>> {
    if let Some(i) = trees.iter().position(|t| t.n_fitted() == 0) {
        return Err(Error::Unfitted(i));
    }
    let log_ml: Vec<f64> = trees.iter().map(MetaTree::log_marginal_likelihood).collect();
    Ok(math::softmax(&log_ml))
}

/// Per-step record of a training run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    /// `learning_weights[b - 1]` holds `w'_1..w'_{b-1}` used to form the
    /// residuals for tree `b`.
    pub learning_weights: Vec<Vec<f64>>,
    /// Sum of squared residuals handed to CART for each tree.
    pub residual_sse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    trees: Vec<MetaTree>,
    scheme: WeightScheme,
    learning_rate: f64,
    weights: Vec<f64>,
    base: f64,
    fit_target: FitTarget,
}

impl Ensemble {
    pub fn train(data: &Dataset, config: &EnsembleConfig) -> Result<Self> {
        Self::train_traced(data, config).map(|(e, _)| e)
    }

    pub fn train_traced(data: &Dataset, config: &EnsembleConfig) -> Result<(Self, TrainingTrace)> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::Empty);
        }
        let n = data.len();
        let y = &data.targets;
        let gbdt = config.scheme.is_gbdt();
        let fit_target = if gbdt { FitTarget::Residual } else { config.fit_target };
        let base = if gbdt { y.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let gamma = config.learning_rate;

        let mut trees: Vec<MetaTree> = Vec::with_capacity(config.n_trees);
        let mut train_preds: Vec<Vec<f64>> = Vec::with_capacity(config.n_trees);
        let mut trace = TrainingTrace::default();
        let mut residuals = vec![0.0; n];

        for b in 1..=config.n_trees {
            let learning = match config.scheme.learning {
                Weighting::Gbdt => vec![1.0; b - 1],
                Weighting::Uniform => vec![1.0 / (b - 1).max(1) as f64; b - 1],
                Weighting::Posterior => posterior_over_k(&trees)?,
            };
            debug_assert_eq!(learning.len(), trees.len());
            for (i, r) in residuals.iter_mut().enumerate() {
                let previous: f64 = learning.iter().zip(&train_preds).map(|(w, p)| w * p[i]).sum();
                *r = y[i] - base - gamma * previous;
            }
            trace.residual_sse.push(residuals.iter().map(|r| r * r).sum());
            trace.learning_weights.push(learning);

            let rep = build_tree(&data.features, &residuals, config.max_depth, config.min_samples_leaf)?;
            let mut tree = build_meta_tree(&rep, config.g, config.leaf_prior)?;
            match fit_target {
                FitTarget::Residual => tree.fit(&data.features, &residuals)?,
                FitTarget::Raw => tree.fit(&data.features, y)?,
            }
            let preds = data.features.rows().map(|x| tree.predict(x)).collect::<Result<Vec<_>>>()?;
            train_preds.push(preds);
            trees.push(tree);
        }

        let weights = match config.scheme.prediction {
            Weighting::Gbdt => vec![1.0; trees.len()],
            Weighting::Uniform => vec![1.0 / trees.len() as f64; trees.len()],
            Weighting::Posterior => posterior_over_k(&trees)?,
        };
        let ensemble = Self { trees, scheme: config.scheme, learning_rate: gamma, weights, base, fit_target };
        Ok((ensemble, trace))
    }

    /// Reassembles a trained ensemble, checking the weight invariants.
    pub fn from_parts(
        trees: Vec<MetaTree>,
        scheme: WeightScheme,
        learning_rate: f64,
        weights: Vec<f64>,
        base: f64,
        fit_target: FitTarget,
    ) -> Result<Self> {
        let scheme = WeightScheme::new(scheme.learning, scheme.prediction)?;
        if weights.len() != trees.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} trees",
                weights.len(),
                trees.len()
            )));
        }
        if !(learning_rate > 0.0 && learning_rate <= 1.0) || !base.is_finite() {
            return Err(Error::InvalidParameter("learning rate or base prediction out of range".into()));
        }
        if scheme.is_gbdt() {
            if weights.iter().any(|&w| w != 1.0) || fit_target != FitTarget::Residual {
                return Err(Error::InvalidParameter(
                    "gbdt ensembles use unit weights on residual trees".into(),
                ));
            }
        } else {
            let total: f64 = weights.iter().sum();
            if weights.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 || base != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "prediction weights must be a probability vector, sum = {total}"
                )));
            }
        }
        if let Some(t) = trees.windows(2).find(|w| w[0].schema() != w[1].schema()) {
            return Err(Error::InvalidParameter(format!(
                "trees disagree on the feature schema: {:?}",
                t[1].schema()
            )));
        }
        Ok(Self { trees, scheme, learning_rate, weights, base, fit_target })
    }

    pub fn trees(&self) -> &[MetaTree] {
        &self.trees
    }

    pub fn scheme(&self) -> WeightScheme {
        self.scheme
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `F_0`; zero outside gbdt mode.
    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn fit_target(&self) -> FitTarget {
        self.fit_target
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (tree, w) in self.trees.iter().zip(&self.weights) {
            acc += w * tree.predict(x)?;
        }
        Ok(if self.scheme.is_gbdt() { self.base + self.learning_rate * acc } else { acc })
    }
}

impl Regressor for Ensemble {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        Ensemble::predict(self, x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GbdtBaselineConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
}

impl Default for GbdtBaselineConfig {
    fn default() -> Self {
        Self { n_trees: 100, max_depth: 5, learning_rate: 0.1, min_samples_leaf: 1 }
    }
}

/// Classical gradient boosting with squared loss and mean-valued leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtBaseline {
    base: f64,
    learning_rate: f64,
    trees: Vec<RepresentativeTree>,
}

impl GbdtBaseline {
    pub fn train(data: &Dataset, config: &GbdtBaselineConfig) -> Result<Self> {
        Self::train_traced(data, config).map(|(m, _)| m)
    }

    /// Also returns the training error `Σ (y_i − F_b(x_i))²` after each stage,
    /// starting with `F_0`.
    pub fn train_traced(data: &Dataset, config: &GbdtBaselineConfig) -> Result<(Self, Vec<f64>)> {
        if !(config.learning_rate > 0.0 && config.learning_rate <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must lie in (0, 1], got {}",
                config.learning_rate
            )));
        }
        if data.is_empty() {
            return Err(Error::Empty);
        }
        let y = &data.targets;
        let base = y.iter().sum::<f64>() / y.len() as f64;
        let mut fitted = vec![base; y.len()];
        let sse = |f: &[f64]| y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut errors = vec![sse(&fitted)];
        let mut trees = Vec::with_capacity(config.n_trees);
        for _ in 0..config.n_trees {
            let residuals: Vec<f64> = y.iter().zip(&fitted).map(|(a, f)| a - f).collect();
            let tree = build_tree(&data.features, &residuals, config.max_depth, config.min_samples_leaf)?;
            for (i, f) in fitted.iter_mut().enumerate() {
                *f += config.learning_rate * tree.predict(data.x(i))?;
            }
            errors.push(sse(&fitted));
            trees.push(tree);
        }
        Ok((Self { base, learning_rate: config.learning_rate, trees }, errors))
    }

    pub fn from_parts(base: f64, learning_rate: f64, trees: Vec<RepresentativeTree>) -> Result<Self> {
        if !base.is_finite() || !(learning_rate > 0.0 && learning_rate <= 1.0) {
            return Err(Error::InvalidParameter("learning rate or base prediction out of range".into()));
        }
        Ok(Self { base, learning_rate, trees })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn trees(&self) -> &[RepresentativeTree] {
        &self.trees
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for tree in &self.trees {
            acc += tree.predict(x)?;
        }
        Ok(self.base + self.learning_rate * acc)
    }
}

impl Regressor for GbdtBaseline {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        GbdtBaseline::predict(self, x)
    }
}
