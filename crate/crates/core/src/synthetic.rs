//! Random true model trees over binary features and data drawn from them.

use crate::dataset::{Dataset, FeatureMatrix, Schema};
use crate::error::{Error, Result};
use crate::leaf_model::NormalGammaParams;
use crate::math;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrueNode {
    /// `children[0]` receives `x[feature] == 0`.
    Internal { feature: usize, children: [usize; 2] },
    Leaf { mu: f64, tau: f64 },
}

/// A sampled tree shape, feature assignment and leaf parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueModelTree {
    nodes: Vec<TrueNode>,
    n_features: usize,
}

impl TrueModelTree {
    /// Builds a tree from an arena whose root is node 0.
    pub fn from_nodes(n_features: usize, nodes: Vec<TrueNode>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedTree("empty arena".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if core::mem::replace(&mut seen[i], true) {
                return Err(Error::MalformedTree(format!("node {i} reached twice")));
            }
            match nodes[i] {
                TrueNode::Internal { feature, children } => {
                    if feature >= n_features {
                        return Err(Error::MalformedTree(format!("feature {feature} out of range")));
                    }
                    for c in children {
                        if c >= nodes.len() {
                            return Err(Error::MalformedTree(format!("child {c} out of range")));
                        }
                        stack.push(c);
                    }
                }
                TrueNode::Leaf { mu, tau } => {
                    if !mu.is_finite() || !(tau > 0.0 && tau.is_finite()) {
                        return Err(Error::MalformedTree(format!("leaf {i} has (μ, τ) = ({mu}, {tau})")));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::MalformedTree("unreachable nodes".into()));
        }
        Ok(Self { nodes, n_features })
    }

    pub fn nodes(&self) -> &[TrueNode] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TrueNode], i: usize) -> usize {
            match nodes[i] {
                TrueNode::Leaf { .. } => 0,
                TrueNode::Internal { children, .. } => 1 + go(nodes, children[0]).max(go(nodes, children[1])),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TrueNode::Leaf { .. })).count()
    }

    /// Leaf `(μ, τ)` governing `x`.
    pub fn leaf_params(&self, x: &[f64]) -> (f64, f64) {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TrueNode::Internal { feature, children } => {
                    i = children[usize::from(x[feature] != 0.0)];
                }
                TrueNode::Leaf { mu, tau } => return (mu, tau),
            }
        }
    }

    /// `E[y | x]`.
    pub fn conditional_mean(&self, x: &[f64]) -> f64 {
        self.leaf_params(x).0
    }

    /// Expected squared error of the conditional mean under uniform `x`:
    /// `Σ_leaves P(reach) / τ`. Paths that test a feature twice only follow
    /// the branch consistent with the first test.
    pub fn noise_floor(&self) -> f64 {
        fn go(nodes: &[TrueNode], i: usize, fixed: &mut [Option<bool>], p: f64) -> f64 {
            match nodes[i] {
                TrueNode::Leaf { tau, .. } => p / tau,
                TrueNode::Internal { feature, children } => match fixed[feature] {
                    Some(bit) => go(nodes, children[usize::from(bit)], fixed, p),
                    None => {
                        let mut acc = 0.0;
                        for (bit, &c) in [false, true].iter().zip(&children) {
                            fixed[feature] = Some(*bit);
                            acc += go(nodes, c, fixed, 0.5 * p);
                        }
                        fixed[feature] = None;
                        acc
                    }
                },
            }
        }
        go(&self.nodes, 0, &mut vec![None; self.n_features], 1.0)
    }
}

/// Samples a tree: each node at depth `< d_max_star` is internal with
/// probability `g_star`, internal nodes test a uniformly chosen feature in
/// `0..n_features`, and every leaf draws `τ ~ Gamma(α, rate β)` and
/// `μ | τ ~ N(m, 1/(κτ))`.
pub fn sample_true_tree<R: Rng + ?Sized>(
    rng: &mut R,
    n_features: usize,
    d_max_star: usize,
    g_star: f64,
    prior: &NormalGammaParams,
) -> Result<TrueModelTree> {
    let prior = NormalGammaParams::new(prior.m, prior.kappa, prior.alpha, prior.beta)?;
    if !(0.0..=1.0).contains(&g_star) {
        return Err(Error::InvalidParameter(format!("g_star must lie in [0, 1], got {g_star}")));
    }
    if n_features == 0 && d_max_star > 0 && g_star > 0.0 {
        return Err(Error::InvalidParameter("cannot split without features".into()));
    }
    let gamma = Gamma::new(prior.alpha, 1.0 / prior.beta)
        .map_err(|e| Error::InvalidParameter(format!("{e}")))?;

    let mut nodes = Vec::new();
    // (node index, depth); placeholders are overwritten when popped
    let mut stack = vec![(0usize, 0usize)];
    nodes.push(TrueNode::Leaf { mu: 0.0, tau: 1.0 });
    while let Some((i, depth)) = stack.pop() {
        let split = depth < d_max_star && rng.random_bool(g_star);
        if split {
            let feature = rng.random_range(0..n_features);
            let left = nodes.len();
            nodes.push(TrueNode::Leaf { mu: 0.0, tau: 1.0 });
            nodes.push(TrueNode::Leaf { mu: 0.0, tau: 1.0 });
            nodes[i] = TrueNode::Internal { feature, children: [left, left + 1] };
            stack.push((left + 1, depth + 1));
            stack.push((left, depth + 1));
        } else {
            let tau: f64 = gamma.sample(rng).max(f64::MIN_POSITIVE);
            let sd = 1.0 / math::sqrt(prior.kappa * tau);
            let mu = Normal::new(prior.m, sd)
                .map_err(|e| Error::InvalidParameter(format!("{e}")))?
                .sample(rng);
            nodes[i] = TrueNode::Leaf { mu, tau };
        }
    }
    TrueModelTree::from_nodes(n_features, nodes)
}

/// Draws `n` samples with `x` uniform on `{0,1}^K` and
/// `y ~ N(μ_s(x), 1/τ_s(x))`.
pub fn sample_dataset<R: Rng + ?Sized>(rng: &mut R, tree: &TrueModelTree, n: usize) -> Result<Dataset> {
    let k = tree.n_features();
    let mut features = FeatureMatrix::new(Schema::binary_only(k));
    let mut targets = Vec::with_capacity(n);
    let mut x = vec![0.0; k];
    for _ in 0..n {
        for v in x.iter_mut() {
            *v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        }
        let (mu, tau) = tree.leaf_params(&x);
        let normal = Normal::new(mu, 1.0 / math::sqrt(tau))
            .map_err(|e| Error::InvalidParameter(format!("{e}")))?;
        targets.push(normal.sample(rng));
        features.push_row(&x)?;
    }
    Dataset::new(features, targets)
}
