use rcd_core::sampler::make_partition;
use rcd_core::{BlockSampler, SamplingScheme};

const DRAWS: usize = 100_000;

/// Inclusion counts of every coordinate and the number of draws holding both
/// the first and the last coordinate.
fn subset_counts(n: usize, tau: usize, seed: u64) -> (Vec<usize>, usize) {
    let mut s = BlockSampler::new(&SamplingScheme::TauSubset { tau }, n, seed).unwrap();
    let mut counts = vec![0usize; n];
    let mut pair = 0usize;
    for _ in 0..DRAWS {
        let b = s.sample();
        assert_eq!(b.len(), tau);
        for j in b.iter() {
            counts[j] += 1;
        }
        if b.indices().contains(&0) && b.indices().contains(&(n - 1)) {
            pair += 1;
        }
    }
    (counts, pair)
}

#[test]
fn subset_inclusion_within_three_sigma() {
    let (n, tau) = (50, 10);
    let (counts, _) = subset_counts(n, tau, 2);
    let p = tau as f64 / n as f64;
    let sigma = (DRAWS as f64 * p * (1.0 - p)).sqrt();
    for (j, &c) in counts.iter().enumerate() {
        let dev = (c as f64 - DRAWS as f64 * p).abs();
        assert!(
            dev <= 3.0 * sigma,
            "coord {j}: {c} draws, {dev} > 3σ = {}",
            3.0 * sigma
        );
    }
}

#[test]
fn subset_inclusion_goodness_of_fit() {
    // counts share a common total with covariance Dp(1-p)·n/(n-1)·(I - 11ᵀ/n),
    // so the Pearson sum times (n-1)/(n-τ) is χ² with n - 1 degrees of freedom;
    // critical values are the 99.9% quantiles
    for (n, tau, seed, critical) in [(20, 3, 1, 43.820), (7, 6, 3, 22.458), (100, 1, 4, 148.230)] {
        let (counts, pair) = subset_counts(n, tau, seed);
        let scaled = chi_square(&counts) * (n - 1) as f64 / (n - tau) as f64;
        assert!(scaled < critical, "n={n} tau={tau}: χ² = {scaled}");

        // joint inclusion of two fixed coordinates
        let p2 = (tau * (tau - 1)) as f64 / (n * (n - 1)) as f64;
        let sigma2 = (DRAWS as f64 * p2 * (1.0 - p2)).sqrt();
        assert!(
            (pair as f64 - DRAWS as f64 * p2).abs() <= 3.0 * sigma2,
            "n={n} tau={tau} pair {pair}"
        );
    }
}

#[test]
fn single_coordinate_is_uniform() {
    let n = 10;
    let mut s = BlockSampler::new(&SamplingScheme::SingleCoordinate, n, 5).unwrap();
    let mut counts = vec![0usize; n];
    for _ in 0..10 * DRAWS {
        let b = s.sample();
        assert_eq!(b.len(), 1);
        counts[b.indices()[0]] += 1;
    }
    // 99.9% quantile of χ² with 9 degrees of freedom
    assert!(chi_square(&counts) < 27.877, "{counts:?}");
}

#[test]
fn uniform_partition_chi_square() {
    let (n, tau) = (95, 10);
    let blocks = make_partition(n, tau).unwrap();
    assert_eq!(blocks.len(), 10);
    let scheme = SamplingScheme::FixedPartition {
        tau,
        probabilities: None,
    };
    let mut s = BlockSampler::new(&scheme, n, 11).unwrap();
    let mut counts = vec![0usize; blocks.len()];
    for _ in 0..DRAWS {
        let b = s.sample();
        let k = blocks
            .iter()
            .position(|p| *p == b)
            .expect("drawn block is not in the partition");
        counts[k] += 1;
    }
    assert!(chi_square(&counts) < 27.877, "{counts:?}");
}

#[test]
fn weighted_partition_frequencies() {
    let probabilities = vec![0.1, 0.2, 0.3, 0.4];
    let scheme = SamplingScheme::FixedPartition {
        tau: 3,
        probabilities: Some(probabilities.clone()),
    };
    let mut s = BlockSampler::new(&scheme, 12, 8).unwrap();
    let mut counts = [0usize; 4];
    for _ in 0..DRAWS {
        counts[s.sample().indices()[0] / 3] += 1;
    }
    for (c, p) in counts.iter().zip(&probabilities) {
        let sigma = (DRAWS as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (*c as f64 - DRAWS as f64 * p).abs() <= 3.0 * sigma,
            "{counts:?}"
        );
    }
}

fn chi_square(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum()
}
