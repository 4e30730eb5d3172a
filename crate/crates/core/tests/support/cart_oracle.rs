//! Exhaustive split search with naive two-pass sums of squares.

use metatree_core::{FeatureMatrix, Split};

fn sse(ys: &[f64]) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    ys.iter().map(|y| (y - mean) * (y - mean)).sum()
}

/// Best `(split, reduction)` over every feature and every midpoint between
/// distinct observed values; ties within `1e-9` relative go to the lowest
/// feature, then the lowest threshold.
pub fn exhaustive_best_split(fm: &FeatureMatrix, y: &[f64], rows: &[usize], min_leaf: usize) -> Option<(Split, f64)> {
    let schema = fm.schema();
    let all: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let parent = sse(&all);
    let mut candidates: Vec<(usize, f64, Split, f64)> = Vec::new();
    for f in 0..schema.n_features() {
        let splits: Vec<(Split, f64)> = if schema.is_binary(f) {
            vec![(Split::binary(f), 0.0)]
        } else {
            let mut vals: Vec<f64> = rows.iter().map(|&i| fm.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            vals.windows(2).map(|w| {
                let t = (w[0] + w[1]) / 2.0;
                let t = if t >= w[1] { w[0] } else { t };
                (Split::continuous(f, t), t)
            }).collect()
        };
        for (split, t) in splits {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| split.goes_left(fm.row(i)));
            if l.len() < min_leaf || r.len() < min_leaf || l.is_empty() || r.is_empty() {
                continue;
            }
            let yl: Vec<f64> = l.iter().map(|&i| y[i]).collect();
            let yr: Vec<f64> = r.iter().map(|&i| y[i]).collect();
            candidates.push((f, t, split, parent - sse(&yl) - sse(&yr)));
        }
    }
    let best = candidates.iter().map(|c| c.3).fold(f64::NEG_INFINITY, f64::max);
    if !(best > 1e-12) {
        return None;
    }
    candidates
        .into_iter()
        .filter(|c| c.3 >= best - 1e-9 * best.abs().max(1.0))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)))
        .map(|c| (c.2, c.3))
}
