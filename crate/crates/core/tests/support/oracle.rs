//! Brute-force posterior over every subtree of a meta-tree.
//!
//! Each subtree `T` gets prior `Π_{internal} g_s Π_{leaves} (1 − g_s)`; its
//! likelihood is the product over its leaves of the closed-form normal-gamma
//! marginal likelihood of the targets routed there. Predictive quantities are
//! ratios of marginal likelihoods averaged over the subtree posterior.

use metatree_core::{MetaTree, NormalGammaParams};

/// `ln p(ys)` under the normal-gamma prior, computed from scratch.
pub fn leaf_log_ml(p: &NormalGammaParams, ys: &[f64]) -> f64 {
    if ys.is_empty() {
        return 0.0;
    }
    let n = ys.len() as f64;
    let mean = ys.iter().sum::<f64>() / n;
    let ss: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let kappa_n = p.kappa + n;
    let alpha_n = p.alpha + n / 2.0;
    let beta_n = p.beta + 0.5 * ss + p.kappa * n * (mean - p.m).powi(2) / (2.0 * kappa_n);
    libm::lgamma(alpha_n) - libm::lgamma(p.alpha) + p.alpha * p.beta.ln() - alpha_n * beta_n.ln()
        + 0.5 * (p.kappa / kappa_n).ln()
        - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
}

fn leaf_mean(p: &NormalGammaParams, ys: &[f64]) -> f64 {
    (p.kappa * p.m + ys.iter().sum::<f64>()) / (p.kappa + ys.len() as f64)
}

#[derive(Debug, Clone)]
pub struct Subtree {
    pub log_prior: f64,
    /// `is_leaf[s]` / `is_internal[s]` over the meta-tree arena.
    pub is_leaf: Vec<bool>,
    pub is_internal: Vec<bool>,
}

fn children(tree: &MetaTree, s: usize) -> Option<[usize; 2]> {
    tree.node(s).children()
}

fn goes_left(tree: &MetaTree, s: usize, x: &[f64]) -> bool {
    let split = tree.node(s).split().unwrap();
    match split.threshold {
        Some(t) => x[split.feature] <= t,
        None => x[split.feature] == 0.0,
    }
}

/// Every subtree containing the root, with its prior log probability taken
/// from the nodes' current `g_prior`.
pub fn enumerate_subtrees(tree: &MetaTree) -> Vec<Subtree> {
    fn go(tree: &MetaTree, s: usize) -> Vec<(f64, Vec<usize>, Vec<usize>)> {
        let g = tree.node(s).g_prior();
        let mut out = Vec::new();
        if g < 1.0 {
            out.push(((1.0 - g).ln(), vec![s], vec![]));
        }
        if let (Some([l, r]), true) = (children(tree, s), g > 0.0) {
            for (pl, ll, il) in go(tree, l) {
                for (pr, lr, ir) in go(tree, r) {
                    let leaves = ll.iter().chain(&lr).copied().collect();
                    let internal = std::iter::once(s).chain(il.iter().copied()).chain(ir.iter().copied()).collect();
                    out.push((g.ln() + pl + pr, leaves, internal));
                }
            }
        }
        out
    }
    let n = tree.nodes().len();
    go(tree, 0)
        .into_iter()
        .map(|(log_prior, leaves, internal)| {
            let mut is_leaf = vec![false; n];
            let mut is_internal = vec![false; n];
            leaves.iter().for_each(|&s| is_leaf[s] = true);
            internal.iter().for_each(|&s| is_internal[s] = true);
            Subtree { log_prior, is_leaf, is_internal }
        })
        .collect()
}

fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior over the subtrees of `tree` after observing `data`.
pub struct Oracle<'a> {
    tree: &'a MetaTree,
    prior: NormalGammaParams,
    data: Vec<(Vec<f64>, f64)>,
    subtrees: Vec<Subtree>,
    /// `ln p(T) + ln p(D | T)`.
    log_joint: Vec<f64>,
}

impl<'a> Oracle<'a> {
    /// `tree` supplies the structure and prior `g`; its fitted state is ignored.
    pub fn new(tree: &'a MetaTree, data: &[(Vec<f64>, f64)]) -> Self {
        let prior = *tree.prior();
        let subtrees = enumerate_subtrees(tree);
        let data = data.to_vec();
        let log_joint = subtrees
            .iter()
            .map(|t| {
                let mut per_leaf: Vec<Vec<f64>> = vec![Vec::new(); tree.nodes().len()];
                for (x, y) in &data {
                    per_leaf[Self::leaf_of(tree, t, x)].push(*y);
                }
                t.log_prior + per_leaf.iter().map(|ys| leaf_log_ml(&prior, ys)).sum::<f64>()
            })
            .collect();
        Self { tree, prior, data, subtrees, log_joint }
    }

    pub fn n_subtrees(&self) -> usize {
        self.subtrees.len()
    }

    fn leaf_of(tree: &MetaTree, t: &Subtree, x: &[f64]) -> usize {
        let mut s = 0;
        while !t.is_leaf[s] {
            let [l, r] = children(tree, s).unwrap();
            s = if goes_left(tree, s, x) { l } else { r };
        }
        s
    }

    fn targets_at(&self, t: &Subtree, leaf: usize) -> Vec<f64> {
        self.data
            .iter()
            .filter(|(x, _)| Self::leaf_of(self.tree, t, x) == leaf)
            .map(|(_, y)| *y)
            .collect()
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        log_sum_exp(self.log_joint.iter().copied())
    }

    fn log_posterior(&self) -> Vec<f64> {
        let z = self.log_marginal_likelihood();
        self.log_joint.iter().map(|l| l - z).collect()
    }

    pub fn predictive_log_density(&self, x: &[f64], y: f64) -> f64 {
        let terms = self.subtrees.iter().zip(self.log_posterior()).map(|(t, lp)| {
            let ys = self.targets_at(t, Self::leaf_of(self.tree, t, x));
            let mut with_y = ys.clone();
            with_y.push(y);
            lp + leaf_log_ml(&self.prior, &with_y) - leaf_log_ml(&self.prior, &ys)
        });
        log_sum_exp(terms)
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.subtrees
            .iter()
            .zip(self.log_posterior())
            .map(|(t, lp)| lp.exp() * leaf_mean(&self.prior, &self.targets_at(t, Self::leaf_of(self.tree, t, x))))
            .sum()
    }

    /// `P(s is internal | D) / P(s is in the subtree | D)`.
    pub fn g_post(&self, s: usize) -> f64 {
        let lp = self.log_posterior();
        let internal = log_sum_exp(self.subtrees.iter().zip(&lp).filter(|(t, _)| t.is_internal[s]).map(|(_, l)| *l));
        let present = log_sum_exp(
            self.subtrees.iter().zip(&lp).filter(|(t, _)| t.is_internal[s] || t.is_leaf[s]).map(|(_, l)| *l),
        );
        (internal - present).exp()
    }
}
