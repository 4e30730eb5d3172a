use metatree_core::synthetic::TrueNode;
use metatree_core::{sample_dataset, sample_true_tree, NormalGammaParams, TrueModelTree};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `(Σ P(x)/τ(x), Σ P(x)(μ(x)² + 1/τ(x)))` by enumerating `{0,1}^K`.
fn enumerate_moments(tree: &TrueModelTree) -> (f64, f64) {
    let k = tree.n_features();
    let p = 0.5f64.powi(k as i32);
    let (mut floor, mut second) = (0.0, 0.0);
    for bits in 0..(1u32 << k) {
        let x: Vec<f64> = (0..k).map(|j| f64::from((bits >> j) & 1)).collect();
        let (mu, tau) = tree.leaf_params(&x);
        floor += p / tau;
        second += p * (mu * mu + 1.0 / tau);
    }
    (floor, second)
}

#[test]
fn noise_floor_matches_enumeration() {
    let prior = NormalGammaParams::new(0.0, 2.0, 2.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..200 {
        let t = sample_true_tree(&mut rng, 4, 4, 0.8, &prior).unwrap();
        let (floor, _) = enumerate_moments(&t);
        assert!((t.noise_floor() - floor).abs() < 1e-12 * floor.max(1.0));
    }
}

#[test]
fn oracle_and_zero_predictor_risks() {
    let prior = NormalGammaParams::new(0.0, 2.0, 2.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..5 {
        let t = sample_true_tree(&mut rng, 5, 3, 0.9, &prior).unwrap();
        let (floor, second) = enumerate_moments(&t);
        let d = sample_dataset(&mut rng, &t, 40_000).unwrap();
        let n = d.len() as f64;
        let oracle: f64 = d.features.rows().zip(&d.targets).map(|(x, y)| (y - t.conditional_mean(x)).powi(2)).sum::<f64>() / n;
        let zero: f64 = d.targets.iter().map(|y| y * y).sum::<f64>() / n;
        // Gamma(2, 2) leaves can have small τ; allow a few standard errors
        assert!((oracle - floor).abs() < 0.05 * floor + 0.02, "{oracle} vs {floor}");
        assert!((zero - second).abs() < 0.05 * second + 0.02, "{zero} vs {second}");
        assert!(oracle <= zero + 1e-9 || (oracle - floor).abs() < 0.05 * floor);
    }
}

#[test]
fn leaf_parameters_follow_the_prior() {
    // E[τ] = α/β = 1 and E[μ] = m = 0 for the (0, 2, 2, 2) prior
    let prior = NormalGammaParams::new(0.0, 2.0, 2.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (mut sum_tau, mut sum_mu, mut count) = (0.0, 0.0, 0.0);
    for _ in 0..20_000 {
        let t = sample_true_tree(&mut rng, 3, 0, 0.0, &prior).unwrap();
        if let TrueNode::Leaf { mu, tau } = t.nodes()[0] {
            sum_tau += tau;
            sum_mu += mu;
            count += 1.0;
        }
    }
    assert!((sum_tau / count - 1.0).abs() < 0.03);
    assert!((sum_mu / count).abs() < 0.03);
}
