//! t-SNE affinities and descent on a suite of 50-point inputs.

use alertclf::numerics::{seeded_rng, Rng};
use alertclf::tsne::{affinities, project, TsneConfig};
use rand_distr::{Distribution, Normal};

/// Three Gaussian clusters in 6 dimensions.
fn blobs(n: usize, spread: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, spread).unwrap();
    (0..n)
        .map(|i| (0..6).map(|k| if k == i % 3 { 4.0 } else { 0.0 } + noise.sample(rng)).collect())
        .collect()
}

fn suite() -> Vec<(Vec<Vec<f64>>, f64)> {
    let mut out = Vec::new();
    for seed in 0..3 {
        let data = blobs(50, 0.5 + seed as f64, &mut seeded_rng(seed));
        for perplexity in [2.0, 5.0, 15.0, 30.0, 49.0, 50.0, 80.0] {
            out.push((data.clone(), perplexity));
        }
    }
    out
}

#[test]
fn affinities_are_symmetric_normalized_and_calibrated() {
    for (data, perplexity) in suite().into_iter().filter(|(_, p)| *p <= 49.0) {
        let a = affinities(&data, perplexity).unwrap();
        let n = data.len();
        let mut total = 0.0;
        for i in 0..n {
            assert_eq!(a.p.get(i, i), 0.0);
            for j in 0..n {
                assert!((a.p.get(i, j) - a.p.get(j, i)).abs() <= 1e-9);
                total += a.p.get(i, j);
            }
        }
        assert!((total - 1.0).abs() <= 1e-9, "{total}");
        for h in &a.entropies {
            assert!((h - perplexity.ln()).abs() <= 1e-4, "perplexity {perplexity}: {h}");
        }
    }
}

#[test]
fn kl_falls_on_every_accepted_run() {
    let mut accepted = 0;
    for (i, (data, perplexity)) in suite().into_iter().enumerate() {
        let cfg = TsneConfig {
            perplexity,
            seed: i as u64,
            ..TsneConfig::default()
        };
        match project(&data, None, &cfg) {
            Ok(p) => {
                accepted += 1;
                assert!(p.kl_final < p.kl_initial, "run {i}: {} → {}", p.kl_initial, p.kl_final);
                assert_eq!(p.points.len(), 50);
            }
            Err(_) => assert!(perplexity > 49.0, "run {i} rejected at perplexity {perplexity}"),
        }
    }
    assert_eq!(accepted, 15);
}

#[test]
fn too_few_points_are_rejected() {
    let data = blobs(2, 1.0, &mut seeded_rng(9));
    let cfg = TsneConfig {
        perplexity: 1.5,
        ..TsneConfig::default()
    };
    assert!(project(&data, None, &cfg).is_err());
}

#[test]
fn identical_points_are_rejected() {
    let data = vec![vec![1.0, 2.0]; 10];
    assert!(affinities(&data, 3.0).is_err());
}
