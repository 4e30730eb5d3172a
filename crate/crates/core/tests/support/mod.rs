#![allow(dead_code)]

pub mod cart_oracle;
pub mod checks;
pub mod oracle;
pub mod quadrature;

use metatree_core::{MetaTree, MetaTreeNode, NormalGammaParams, Schema, Split};
use rand::Rng;

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

pub fn random_prior<R: Rng>(rng: &mut R) -> NormalGammaParams {
    NormalGammaParams::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(0.3..3.0),
        rng.random_range(0.8..4.0),
        rng.random_range(0.3..3.0),
    )
    .unwrap()
}

pub fn random_row<R: Rng>(rng: &mut R, schema: Schema) -> Vec<f64> {
    (0..schema.n_features())
        .map(|j| {
            if schema.is_binary(j) {
                f64::from(rng.random_bool(0.5))
            } else {
                rng.random_range(-1.0..1.0)
            }
        })
        .collect()
}

/// Random unfitted meta-tree of depth at most `max_depth`; internal nodes get
/// `g` in `[0.05, 0.95]`.
pub fn random_meta_tree<R: Rng>(rng: &mut R, schema: Schema, prior: NormalGammaParams, max_depth: usize) -> MetaTree {
    let mut nodes = vec![MetaTreeNode::leaf()];
    let mut stack = vec![(0usize, 0usize)];
    while let Some((i, d)) = stack.pop() {
        if d < max_depth && rng.random_bool(0.7) {
            let feature = rng.random_range(0..schema.n_features());
            let split = if schema.is_binary(feature) {
                Split::binary(feature)
            } else {
                Split::continuous(feature, rng.random_range(-0.7..0.7))
            };
            let l = nodes.len();
            nodes.push(MetaTreeNode::leaf());
            nodes.push(MetaTreeNode::leaf());
            nodes[i] = MetaTreeNode::internal(split, l, l + 1, rng.random_range(0.05..0.95));
            stack.push((l, d + 1));
            stack.push((l + 1, d + 1));
        }
    }
    MetaTree::from_nodes(schema, prior, nodes, 0.0).unwrap()
}

/// Targets that depend on the features so that splits carry signal.
pub fn random_target<R: Rng>(rng: &mut R, x: &[f64]) -> f64 {
    let signal: f64 = x.iter().enumerate().map(|(j, v)| if j % 2 == 0 { 1.5 * v } else { -v }).sum();
    signal + rng.random_range(-1.0..1.0) + rng.random_range(-1.0..1.0)
}
