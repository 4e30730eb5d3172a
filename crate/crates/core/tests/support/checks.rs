//! Seeded comparison routines shared by the unit-level and acceptance suites.
//! Each returns `Err` with a description of the first mismatch.

use super::cart_oracle::exhaustive_best_split;
use super::oracle::Oracle;
use super::quadrature::{integrate_real_line, predictive_density_2d};
use super::{random_meta_tree, random_prior, random_row, random_target, rel_close};
use metatree_core::{best_split, build_tree, FeatureMatrix, MetaTree, NormalGammaParams, Schema};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Log-scale quantities are compared relative to `max(|a|, |b|, 1)`, which
/// bounds the relative error of the underlying density.
fn close_log(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn compare_fitted(tree: &MetaTree, data: &[(Vec<f64>, f64)], rng: &mut ChaCha8Rng, tol: f64) -> Result<(), String> {
    let oracle = Oracle::new(tree, data);
    let (got, want) = (tree.log_marginal_likelihood(), oracle.log_marginal_likelihood());
    if !close_log(got, want, tol) {
        return Err(format!("log ML {got} vs oracle {want} (n = {})", data.len()));
    }
    for (s, node) in tree.nodes().iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        let (got, want) = (node.g_post(), oracle.g_post(s));
        if !rel_close(got, want, tol) {
            return Err(format!("g_post at node {s}: {got} vs oracle {want} (n = {})", data.len()));
        }
    }
    for _ in 0..5 {
        let x = random_row(rng, tree.schema());
        let y = random_target(rng, &x);
        let (got, want) = (tree.predictive_log_density(&x, y).unwrap(), oracle.predictive_log_density(&x, y));
        if !close_log(got, want, tol) {
            return Err(format!("log density at {x:?}, {y}: {got} vs oracle {want}"));
        }
        let (got, want) = (tree.predict(&x).unwrap(), oracle.predict(&x));
        if !close_log(got, want, tol) {
            return Err(format!("mean at {x:?}: {got} vs oracle {want}"));
        }
    }
    Ok(())
}

/// A random meta-tree of depth ≤ 3 fitted on up to 30 points, compared with
/// subtree enumeration after a random prefix and after all the data.
pub fn oracle_case(seed: u64, tol: f64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::new(2, 2);
    let prior = random_prior(&mut rng);
    let mut tree = random_meta_tree(&mut rng, schema, prior, 3);
    let n = rng.random_range(1..=30);
    let data: Vec<(Vec<f64>, f64)> = (0..n)
        .map(|_| {
            let x = random_row(&mut rng, schema);
            let y = random_target(&mut rng, &x);
            (x, y)
        })
        .collect();
    let prefix = rng.random_range(0..n);
    for (i, (x, y)) in data.iter().enumerate() {
        if i == prefix {
            compare_fitted(&tree, &data[..i], &mut rng, tol)?;
        }
        tree.fit_one(x, *y).unwrap();
    }
    compare_fitted(&tree, &data, &mut rng, tol)
}

/// Largest change in the log marginal likelihood of a depth-2 meta-tree over
/// `perms` reorderings of 30 points.
pub fn exchangeability_case(seed: u64, perms: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::new(1, 2);
    let prior = random_prior(&mut rng);
    let base = loop {
        let t = random_meta_tree(&mut rng, schema, prior, 2);
        if t.depth() == 2 {
            break t;
        }
    };
    let mut data: Vec<(Vec<f64>, f64)> = (0..30)
        .map(|_| {
            let x = random_row(&mut rng, schema);
            let y = random_target(&mut rng, &x);
            (x, y)
        })
        .collect();
    let log_ml = |d: &[(Vec<f64>, f64)]| {
        let mut t = base.clone();
        for (x, y) in d {
            t.fit_one(x, *y).unwrap();
        }
        t.log_marginal_likelihood()
    };
    let reference = log_ml(&data);
    let mut worst: f64 = 0.0;
    for _ in 0..perms {
        data.shuffle(&mut rng);
        worst = worst.max((log_ml(&data) - reference).abs());
    }
    worst
}

/// Worst absolute gap between the Student-t predictive and 2-D quadrature
/// over `points` random (prior, y) pairs.
pub fn leaf_quadrature_case(seed: u64, points: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let p = random_prior(&mut rng);
        let y = p.m + rng.random_range(-4.0..4.0);
        let closed = p.predictive_log_density(y).unwrap().exp();
        worst = worst.max((closed - predictive_density_2d(&p, y)).abs());
    }
    worst
}

/// Worst `|∫ q − 1|` over a grid of priors, including heavy-tailed ones.
pub fn normalization_case() -> f64 {
    let mut worst: f64 = 0.0;
    for &alpha in &[0.6, 1.0, 2.0, 7.5] {
        for &(m, kappa, beta) in &[(0.0, 1.0, 1.0), (3.0, 0.2, 5.0), (-2.0, 10.0, 0.1)] {
            let p = NormalGammaParams::new(m, kappa, alpha, beta).unwrap();
            let s = (p.degrees_of_freedom() * p.predictive_scale_sq()).sqrt();
            let total = integrate_real_line(|y| p.predictive_log_density(y).unwrap().exp(), m, s, 20_000);
            worst = worst.max((total - 1.0).abs());
        }
    }
    worst
}

/// One random table: `best_split` against exhaustive search, and repeat
/// builds compared for equality.
pub fn cart_case(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::new(rng.random_range(1..=3), rng.random_range(0..=3));
    let n = rng.random_range(2..=25);
    let coarse = rng.random_bool(0.5);
    let mut fm = FeatureMatrix::new(schema);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = random_row(&mut rng, schema);
        if coarse {
            // small integer grid to force duplicate values and ties
            for v in x.iter_mut().take(schema.continuous) {
                *v = (*v * 3.0).round();
            }
        }
        y.push(if coarse { random_target(&mut rng, &x).round() } else { random_target(&mut rng, &x) });
        fm.push_row(&x).unwrap();
    }
    let rows: Vec<usize> = (0..n).collect();
    let min_leaf = rng.random_range(1..=4);
    let got = best_split(&fm, &y, &rows, min_leaf).unwrap();
    let want = exhaustive_best_split(&fm, &y, &rows, min_leaf);
    match (&got, &want) {
        (None, None) => {}
        (Some(g), Some((split, red))) => {
            if g.split != *split {
                return Err(format!("split {:?} vs oracle {:?}", g.split, split));
            }
            if !rel_close(g.impurity_reduction, *red, 1e-9) && (g.impurity_reduction - red).abs() > 1e-9 {
                return Err(format!("reduction {} vs oracle {red}", g.impurity_reduction));
            }
        }
        _ => return Err(format!("best_split {got:?} vs oracle {want:?}")),
    }
    let d_max = rng.random_range(0..=4);
    let a = build_tree(&fm, &y, d_max, min_leaf).unwrap();
    let b = build_tree(&fm, &y, d_max, min_leaf).unwrap();
    if a != b {
        return Err("repeated build_tree differs".into());
    }
    if a.depth() > d_max {
        return Err(format!("depth {} exceeds {d_max}", a.depth()));
    }
    for node in a.nodes() {
        if node.depth > 0 && node.children.is_none() && node.n_samples < min_leaf {
            return Err(format!("leaf with {} rows, min {min_leaf}", node.n_samples));
        }
    }
    Ok(())
}

/// Largest `|∫ q̃(y | x) dy − 1|` over a few inputs of a fitted random
/// meta-tree.
pub fn tree_normalization_case(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schema = Schema::new(2, 2);
    let prior = random_prior(&mut rng);
    let mut tree = random_meta_tree(&mut rng, schema, prior, 3);
    for _ in 0..rng.random_range(0..=30) {
        let x = random_row(&mut rng, schema);
        let y = random_target(&mut rng, &x);
        tree.fit_one(&x, y).unwrap();
    }
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let x = random_row(&mut rng, schema);
        let scale = tree
            .route(&x)
            .unwrap()
            .iter()
            .map(|&s| {
                let p = tree.node_posterior(s);
                (p.degrees_of_freedom() * p.predictive_scale_sq()).sqrt()
            })
            .fold(0.0, f64::max);
        let centre = tree.predict(&x).unwrap();
        let total = integrate_real_line(|y| tree.predictive_log_density(&x, y).unwrap().exp(), centre, scale, 40_000);
        worst = worst.max((total - 1.0).abs());
    }
    worst
}
