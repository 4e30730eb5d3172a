//! Exact posterior mixture over all rooted subtrees of a representative tree.
//!
//! Every node keeps conjugate statistics of the samples routed through it and
//! the posterior probability `g_post` that it is an internal node of the true
//! subtree, given that it is present. For a query `x` only the nodes on the
//! root-to-leaf path of `x` matter:
//!
//! ```text
//! q̃_s = q_s                              s a leaf of the representative tree
//! q̃_s = (1 - g_s) q_s + g_s q̃_child      otherwise, child on the path of x
//! ```
//!
//! Sequential fitting multiplies `g_s` by `q̃_child(y) / q̃_s(y)` along the path
//! of each new sample, and the running sum of `ln q̃_root(y_i)` is the log
//! marginal likelihood of the data under the meta-tree.

use crate::dataset::{Dataset, FeatureMatrix, Schema};
use crate::error::{check_finite, Error, Result};
use crate::leaf_model::{NormalGammaParams, SufficientStats};
use crate::math;
use crate::Regressor;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Feature test at an internal node. Continuous features carry a threshold
/// and go left when `x[feature] <= threshold`; binary features go left on 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: Option<f64>,
}

impl Split {
    pub fn binary(feature: usize) -> Self {
        Self { feature, threshold: None }
    }

    pub fn continuous(feature: usize, threshold: f64) -> Self {
        Self { feature, threshold: Some(threshold) }
    }

    #[inline]
    pub fn goes_left(&self, x: &[f64]) -> bool {
        match self.threshold {
            Some(t) => x[self.feature] <= t,
            None => x[self.feature] == 0.0,
        }
    }

    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.feature >= schema.n_features() {
            return Err(Error::MalformedTree(format!(
                "split feature {} out of range for {} features",
                self.feature,
                schema.n_features()
            )));
        }
        match (schema.is_binary(self.feature), self.threshold) {
            (true, None) => Ok(()),
            (false, Some(t)) if t.is_finite() => Ok(()),
            (true, Some(_)) => Err(Error::MalformedTree(format!(
                "binary feature {} must not carry a threshold",
                self.feature
            ))),
            (false, _) => Err(Error::MalformedTree(format!(
                "continuous feature {} needs a finite threshold",
                self.feature
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaTreeNode {
    split: Option<Split>,
    children: Option<[usize; 2]>,
    depth: usize,
    g_prior: f64,
    g_post: f64,
    stats: SufficientStats,
}

impl MetaTreeNode {
    pub fn leaf() -> Self {
        Self {
            split: None,
            children: None,
            depth: 0,
            g_prior: 0.0,
            g_post: 0.0,
            stats: SufficientStats::EMPTY,
        }
    }

    /// Internal node whose children live at arena indices `left` and `right`.
    pub fn internal(split: Split, left: usize, right: usize, g_prior: f64) -> Self {
        Self {
            split: Some(split),
            children: Some([left, right]),
            depth: 0,
            g_prior,
            g_post: g_prior,
            stats: SufficientStats::EMPTY,
        }
    }

    /// Overrides the fitted state, e.g. when loading a saved tree.
    pub fn with_state(mut self, g_post: f64, stats: SufficientStats) -> Self {
        self.g_post = g_post;
        self.stats = stats;
        self
    }

    pub fn split(&self) -> Option<&Split> {
        self.split.as_ref()
    }

    pub fn children(&self) -> Option<[usize; 2]> {
        self.children
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn g_prior(&self) -> f64 {
        self.g_prior
    }

    pub fn g_post(&self) -> f64 {
        self.g_post
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaTree {
    nodes: Vec<MetaTreeNode>,
    schema: Schema,
    prior: NormalGammaParams,
    depth: usize,
    log_marginal_likelihood: f64,
}

impl MetaTree {
    /// A single-node meta-tree.
    pub fn stump(schema: Schema, prior: NormalGammaParams) -> Self {
        Self {
            nodes: vec![MetaTreeNode::leaf()],
            schema,
            prior,
            depth: 0,
            log_marginal_likelihood: 0.0,
        }
    }

    /// Assembles a tree from an arena whose root is `nodes[0]`. The arena must
    /// describe a binary regular tree in which every node is reachable exactly
    /// once. Leaves are forced to `g = 0`.
    pub fn from_nodes(
        schema: Schema,
        prior: NormalGammaParams,
        mut nodes: Vec<MetaTreeNode>,
        log_marginal_likelihood: f64,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedTree("no nodes".into()));
        }
        check_finite("log marginal likelihood", log_marginal_likelihood)?;
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![(0usize, 0usize)];
        let mut depth = 0;
        seen[0] = true;
        while let Some((idx, d)) = stack.pop() {
            depth = depth.max(d);
            let node = &mut nodes[idx];
            node.depth = d;
            for (what, g) in [("g_prior", node.g_prior), ("g_post", node.g_post)] {
                if !(0.0..=1.0).contains(&g) {
                    return Err(Error::MalformedTree(format!("node {idx}: {what} = {g} outside [0, 1]")));
                }
            }
            check_finite("stats.sum_y", node.stats.sum_y)?;
            check_finite("stats.sum_y_sq", node.stats.sum_y_sq)?;
            match (node.split, node.children) {
                (None, None) => {
                    if node.g_prior != 0.0 || node.g_post != 0.0 {
                        return Err(Error::MalformedTree(format!("leaf {idx} must have g = 0")));
                    }
                }
                (Some(split), Some(children)) => {
                    split.validate(&schema)?;
                    for c in children {
                        if c >= seen.len() || seen[c] {
                            return Err(Error::MalformedTree(format!(
                                "node {idx}: child {c} missing or shared"
                            )));
                        }
                        seen[c] = true;
                        stack.push((c, d + 1));
                    }
                }
                _ => {
                    return Err(Error::MalformedTree(format!(
                        "node {idx}: split and children must both be present or absent"
                    )))
                }
            }
        }
        if let Some(orphan) = seen.iter().position(|s| !s) {
            return Err(Error::MalformedTree(format!("node {orphan} is unreachable")));
        }
        let tree = Self { nodes, schema, prior, depth, log_marginal_likelihood };
        tree.check_stat_counts()?;
        Ok(tree)
    }

    fn check_stat_counts(&self) -> Result<()> {
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Some([l, r]) = node.children {
                let below = self.nodes[l].stats.n + self.nodes[r].stats.n;
                if below != node.stats.n {
                    return Err(Error::MalformedTree(format!(
                        "node {idx} saw {} samples but its children saw {below}",
                        node.stats.n
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn nodes(&self) -> &[MetaTreeNode] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &MetaTreeNode {
        &self.nodes[idx]
    }

    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn prior(&self) -> &NormalGammaParams {
        &self.prior
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Number of samples fitted so far.
    pub fn n_fitted(&self) -> u64 {
        self.nodes[0].stats.n
    }

    /// Posterior leaf-model parameters at a node.
    pub fn node_posterior(&self, idx: usize) -> NormalGammaParams {
        self.prior.posterior(&self.nodes[idx].stats)
    }

    /// Sets the prior probability that `idx` is internal. Only allowed before
    /// any data has been fitted; leaves must stay at 0.
    pub fn set_g_prior(&mut self, idx: usize, g: f64) -> Result<()> {
        if self.n_fitted() > 0 {
            return Err(Error::InvalidParameter("cannot change g_prior after fitting".into()));
        }
        if !(0.0..=1.0).contains(&g) {
            return Err(Error::InvalidParameter(format!("g must lie in [0, 1], got {g}")));
        }
        let node = &mut self.nodes[idx];
        if node.is_leaf() && g != 0.0 {
            return Err(Error::InvalidParameter(format!("node {idx} is a leaf; its g is fixed at 0")));
        }
        node.g_prior = g;
        node.g_post = g;
        Ok(())
    }

    /// Node indices from the root to the representative-tree leaf reached by `x`.
    pub fn route(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.schema.validate(x)?;
        Ok(self.route_unchecked(x))
    }

    fn route_unchecked(&self, x: &[f64]) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.depth + 1);
        let mut idx = 0;
        loop {
            path.push(idx);
            let node = &self.nodes[idx];
            match (node.split, node.children) {
                (Some(split), Some([l, r])) => idx = if split.goes_left(x) { l } else { r },
                _ => return path,
            }
        }
    }

    /// `ln q_s(y)` for each node on `path` and the bottom-up `ln q̃_s(y)`.
    fn path_log_densities(&self, path: &[usize], y: f64) -> (Vec<f64>, Vec<f64>) {
        let log_q: Vec<f64> = path
            .iter()
            .map(|&s| self.node_posterior(s).predictive_log_density_unchecked(y))
            .collect();
        let mut log_tilde = log_q.clone();
        for i in (0..path.len() - 1).rev() {
            let g = self.nodes[path[i]].g_post;
            log_tilde[i] = math::log_add_exp(
                math::ln_1p(-g) + log_q[i],
                math::ln(g) + log_tilde[i + 1],
            );
        }
        (log_q, log_tilde)
    }

    /// Log posterior-predictive density of `y` at `x`, mixed over all subtrees.
    pub fn predictive_log_density(&self, x: &[f64], y: f64) -> Result<f64> {
        check_finite("y", y)?;
        let path = self.route(x)?;
        Ok(self.path_log_densities(&path, y).1[0])
    }

    /// Posterior-predictive mean at `x`: the same recursion as the density with
    /// each node's predictive mean in place of its density.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let path = self.route(x)?;
        let (&leaf, internal) = path.split_last().expect("path contains the root");
        let mut mean = self.node_posterior(leaf).predictive_mean();
        for &s in internal.iter().rev() {
            let g = self.nodes[s].g_post;
            mean = (1.0 - g) * self.node_posterior(s).predictive_mean() + g * mean;
        }
        Ok(mean)
    }

    /// Mixture weight of each node on the path of `x`: the posterior
    /// probability that it is the leaf of the true subtree reached by `x`.
    pub fn path_weights(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        let path = self.route(x)?;
        let mut reach = 1.0;
        let mut out = Vec::with_capacity(path.len());
        for &s in &path {
            let g = self.nodes[s].g_post;
            out.push((s, reach * (1.0 - g)));
            reach *= g;
        }
        Ok(out)
    }

    /// Sequential Bayes update with one sample. All predictive terms are
    /// evaluated at the pre-update state; then `g_post` is updated along the
    /// path, then the statistics.
    pub fn fit_one(&mut self, x: &[f64], y: f64) -> Result<()> {
        check_finite("y", y)?;
        self.schema.validate(x)?;
        self.fit_one_unchecked(x, y);
        Ok(())
    }

    fn fit_one_unchecked(&mut self, x: &[f64], y: f64) {
        let path = self.route_unchecked(x);
        let (_, log_tilde) = self.path_log_densities(&path, y);
        self.log_marginal_likelihood += log_tilde[0];
        for i in 0..path.len() - 1 {
            let node = &mut self.nodes[path[i]];
            if node.g_post > 0.0 && node.g_post < 1.0 {
                let g = node.g_post * math::exp(log_tilde[i + 1] - log_tilde[i]);
                node.g_post = g.clamp(0.0, 1.0);
            }
        }
        for &s in &path {
            let node = &mut self.nodes[s];
            node.stats = node.stats.updated_unchecked(y);
        }
    }

    /// Folds [`fit_one`](Self::fit_one) over the rows in order. Every row is
    /// validated before the tree is touched.
    pub fn fit(&mut self, features: &FeatureMatrix, targets: &[f64]) -> Result<()> {
        if features.n_rows() != targets.len() {
            return Err(Error::InvalidParameter(format!(
                "{} feature rows but {} targets",
                features.n_rows(),
                targets.len()
            )));
        }
        if features.schema() != self.schema {
            return Err(Error::Arity {
                expected: self.schema.n_features(),
                got: features.schema().n_features(),
            });
        }
        for &y in targets {
            check_finite("y", y)?;
        }
        for (x, &y) in features.rows().zip(targets) {
            self.fit_one_unchecked(x, y);
        }
        Ok(())
    }

    pub fn fit_dataset(&mut self, data: &Dataset) -> Result<()> {
        self.fit(&data.features, &data.targets)
    }
}

impl Regressor for MetaTree {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        MetaTree::predict(self, x)
    }
}
