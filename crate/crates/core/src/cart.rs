//! Greedy variance-reduction trees used as meta-tree skeletons and as the
//! base learner of the plain boosting baseline.

use crate::dataset::{FeatureMatrix, Schema};
use crate::error::{Error, Result};
use crate::leaf_model::NormalGammaParams;
use crate::metatree::{MetaTree, MetaTreeNode, Split};
use crate::Regressor;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Reductions closer than this are treated as ties.
pub const IMPURITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub split: Split,
    /// `n·Var(all) − n_L·Var(left) − n_R·Var(right)`.
    pub impurity_reduction: f64,
    pub left_count: usize,
    pub right_count: usize,
}

/// Between-group sum of squares `n_L n_R / n · (ȳ_L − ȳ_R)²`, which equals the
/// drop in within-group sum of squared deviations.
#[inline]
fn reduction(n_left: usize, sum_left: f64, n_right: usize, sum_right: f64) -> f64 {
    let (nl, nr) = (n_left as f64, n_right as f64);
    let diff = sum_left / nl - sum_right / nr;
    (nl * nr / (nl + nr) * diff * diff).max(0.0)
}

/// Best variance-reducing split of `rows`, or `None` when no admissible split
/// reduces impurity. Ties go to the lower feature index, then the lower
/// threshold.
pub fn best_split(
    features: &FeatureMatrix,
    targets: &[f64],
    rows: &[usize],
    min_samples_leaf: usize,
) -> Result<Option<SplitCandidate>> {
    if rows.is_empty() {
        return Err(Error::Empty);
    }
    if features.n_rows() != targets.len() {
        return Err(Error::InvalidParameter(format!(
            "{} feature rows but {} targets",
            features.n_rows(),
            targets.len()
        )));
    }
    let min_leaf = min_samples_leaf.max(1);
    let n = rows.len();
    if n < 2 * min_leaf {
        return Ok(None);
    }
    let schema = features.schema();
    let mean = rows.iter().map(|&i| targets[i]).sum::<f64>() / n as f64;
    let total: f64 = rows.iter().map(|&i| targets[i] - mean).sum();

    let mut best: Option<SplitCandidate> = None;
    let mut consider = |cand: SplitCandidate| {
        let threshold = best.map_or(IMPURITY_TOLERANCE, |b| b.impurity_reduction + IMPURITY_TOLERANCE);
        if cand.impurity_reduction > threshold {
            best = Some(cand);
        }
    };

    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..schema.n_features() {
        if schema.is_binary(feature) {
            let (mut n_left, mut sum_left) = (0usize, 0.0);
            for &i in rows {
                if features.get(i, feature) == 0.0 {
                    n_left += 1;
                    sum_left += targets[i] - mean;
                }
            }
            let n_right = n - n_left;
            if n_left >= min_leaf && n_right >= min_leaf {
                consider(SplitCandidate {
                    split: Split::binary(feature),
                    impurity_reduction: reduction(n_left, sum_left, n_right, total - sum_left),
                    left_count: n_left,
                    right_count: n_right,
                });
            }
        } else {
            sorted.clear();
            sorted.extend(rows.iter().map(|&i| (features.get(i, feature), targets[i] - mean)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut sum_left = 0.0;
            for i in 0..n - 1 {
                sum_left += sorted[i].1;
                let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
                let n_left = i + 1;
                let n_right = n - n_left;
                if lo == hi || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                consider(SplitCandidate {
                    split: Split::continuous(feature, threshold),
                    impurity_reduction: reduction(n_left, sum_left, n_right, total - sum_left),
                    left_count: n_left,
                    right_count: n_right,
                });
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeNode {
    pub split: Option<Split>,
    pub children: Option<[usize; 2]>,
    pub depth: usize,
    pub n_samples: usize,
    /// Mean target of the training rows reaching the node.
    pub value: f64,
}

/// A grown CART tree: the skeleton `(T, k)` of a meta-tree.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentativeTree {
    schema: Schema,
    nodes: Vec<RepresentativeNode>,
}

impl RepresentativeTree {
    pub fn schema(&self) -> Schema {
        self.schema
    }

    pub fn nodes(&self) -> &[RepresentativeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.children.is_none()).count()
    }

    pub fn route(&self, x: &[f64]) -> Result<Vec<usize>> {
        self.schema.validate(x)?;
        let mut path = vec![0];
        let mut idx = 0;
        while let (Some(split), Some([l, r])) = (self.nodes[idx].split, self.nodes[idx].children) {
            idx = if split.goes_left(x) { l } else { r };
            path.push(idx);
        }
        Ok(path)
    }

    /// Rebuilds a tree from stored nodes (used when loading models). Node
    /// depths are recomputed from the structure.
    pub fn from_nodes(schema: Schema, mut nodes: Vec<RepresentativeNode>) -> Result<Self> {
        let skeleton = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| match (n.split, n.children) {
                (Some(s), Some([l, r])) => Ok(MetaTreeNode::internal(s, l, r, 0.0)),
                (None, None) => Ok(MetaTreeNode::leaf()),
                _ => Err(Error::MalformedTree(format!("node {i}: split and children must match"))),
            })
            .collect::<Result<Vec<_>>>()?;
        // structural validation is shared with the meta-tree arena
        let prior = NormalGammaParams::new(0.0, 1.0, 1.0, 1.0)?;
        let checked = MetaTree::from_nodes(schema, prior, skeleton, 0.0)?;
        if nodes.iter().any(|n| !n.value.is_finite()) {
            return Err(Error::MalformedTree("non-finite leaf value".into()));
        }
        for (i, n) in nodes.iter_mut().enumerate() {
            n.depth = checked.node(i).depth();
        }
        Ok(Self { schema, nodes })
    }
}

impl Regressor for RepresentativeTree {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        let path = self.route(x)?;
        Ok(self.nodes[*path.last().expect("non-empty path")].value)
    }
}

/// Grows a tree on `(features, targets)` to at most `max_depth` levels.
/// A node stays a leaf at the depth cap, when fewer than
/// `2 · min_samples_leaf` rows reach it, or when no split reduces impurity.
pub fn build_tree(
    features: &FeatureMatrix,
    targets: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<RepresentativeTree> {
    if targets.is_empty() {
        return Err(Error::Empty);
    }
    let all: Vec<usize> = (0..targets.len()).collect();
    let mean_of = |rows: &[usize]| rows.iter().map(|&i| targets[i]).sum::<f64>() / rows.len() as f64;

    let mut nodes = vec![RepresentativeNode {
        split: None,
        children: None,
        depth: 0,
        n_samples: all.len(),
        value: mean_of(&all),
    }];
    let mut stack = vec![(0usize, all)];
    while let Some((idx, rows)) = stack.pop() {
        let depth = nodes[idx].depth;
        if depth >= max_depth {
            continue;
        }
        let Some(cand) = best_split(features, targets, &rows, min_samples_leaf)? else {
            continue;
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&i| cand.split.goes_left(features.row(i)));
        let (l, r) = (nodes.len(), nodes.len() + 1);
        for part in [&left, &right] {
            nodes.push(RepresentativeNode {
                split: None,
                children: None,
                depth: depth + 1,
                n_samples: part.len(),
                value: mean_of(part),
            });
        }
        nodes[idx].split = Some(cand.split);
        nodes[idx].children = Some([l, r]);
        stack.push((r, right));
        stack.push((l, left));
    }
    Ok(RepresentativeTree { schema: features.schema(), nodes })
}

/// Unfitted meta-tree over the skeleton of `rep`: internal nodes get prior
/// `g`, leaves 0, and every node starts from `leaf_prior`.
pub fn build_meta_tree(rep: &RepresentativeTree, g: f64, leaf_prior: NormalGammaParams) -> Result<MetaTree> {
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::InvalidParameter(format!("g must lie in [0, 1], got {g}")));
    }
    let nodes = rep
        .nodes
        .iter()
        .map(|n| match (n.split, n.children) {
            (Some(split), Some([l, r])) => MetaTreeNode::internal(split, l, r, g),
            _ => MetaTreeNode::leaf(),
        })
        .collect();
    MetaTree::from_nodes(rep.schema, leaf_prior, nodes, 0.0)
}
