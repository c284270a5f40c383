use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use smaup::statistic::{scan_k, DecisionBasis};
use smaup::stats::{levene_test, welch_t_test};
use smaup::*;

/// Concentrated log-likelihood with an intercept, log-determinant from a
/// dense LU factorization of I - rho W.
fn lu_log_likelihood(w: &SpatialWeights, y: &[f64], rho: f64) -> f64 {
    let n = y.len();
    let a = DMatrix::identity(n, n) - w.to_dense() * rho;
    let det = a.clone().lu().determinant();
    let mut e: Vec<f64> = (a * DMatrix::from_column_slice(n, 1, y)).iter().copied().collect();
    let mean = e.iter().sum::<f64>() / n as f64;
    e.iter_mut().for_each(|v| *v -= mean);
    let sse: f64 = e.iter().map(|v| v * v).sum();
    -0.5 * n as f64 * (sse / n as f64).ln() + det.abs().ln()
}

#[test]
fn estimate_matches_lu_grid_search() {
    let w = SpatialWeights::lattice_rook(8, 8).unwrap();
    for (seed, rho) in [(1u64, -0.6), (2, 0.0), (3, 0.4), (4, 0.85)] {
        let y = generate_sar(&w, &SarSpec::new(rho, seed).unwrap()).unwrap();
        let grid_best = (-998..=998)
            .map(|i| i as f64 / 1000.0)
            .map(|r| (r, lu_log_likelihood(&w, y.values(), r)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        let est = estimate_rho(&w, &y).unwrap();
        assert!((est - grid_best).abs() <= 0.001 + 1e-6, "seed {seed}: {est} vs grid {grid_best}");
    }
}

#[test]
fn rho_zero_is_unbiased_on_average() {
    let w = SpatialWeights::lattice_rook(10, 10).unwrap();
    let total: f64 = (0..100)
        .map(|s| estimate_rho(&w, &generate_sar(&w, &SarSpec::new(0.0, s).unwrap()).unwrap()).unwrap())
        .sum();
    assert!((total / 100.0).abs() < 0.05, "mean {}", total / 100.0);
}

#[test]
fn strong_positive_rho_recovered_on_30x30() {
    let w = SpatialWeights::lattice_rook(30, 30).unwrap();
    let hits = (0..100)
        .filter(|&s| {
            let est = estimate_rho(&w, &generate_sar(&w, &SarSpec::new(0.9, s).unwrap()).unwrap()).unwrap();
            est > 0.8 && est < 0.975
        })
        .count();
    assert!(hits >= 95, "{hits}/100 inside (0.8, 0.975)");
}

#[test]
fn bias_is_small_across_rho() {
    let w = SpatialWeights::lattice_rook(15, 15).unwrap();
    for rho in [-0.9, 0.0, 0.9] {
        let mean = (0..40)
            .map(|s| estimate_rho(&w, &generate_sar(&w, &SarSpec::new(rho, s).unwrap()).unwrap()).unwrap())
            .sum::<f64>()
            / 40.0;
        assert!((mean - rho).abs() < 0.05, "rho {rho}: mean estimate {mean}");
    }
}

#[test]
fn tests_hold_their_size_on_iid_normals() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let trials = 2000;
    let (mut t_rej, mut l_rej) = (0, 0);
    for _ in 0..trials {
        let a: Vec<f64> = (0..40).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..25).map(|_| StandardNormal.sample(&mut rng)).collect();
        t_rej += usize::from(welch_t_test(&a, &b).unwrap().rejects(0.05));
        l_rej += usize::from(levene_test(&a, &b).unwrap().rejects(0.05));
    }
    for (name, count) in [("welch", t_rej), ("levene", l_rej)] {
        let rate = count as f64 / trials as f64;
        assert!((0.03..0.07).contains(&rate), "{name} size {rate}");
    }
}

#[test]
fn min_safe_k_matches_exhaustive_scan_on_206_areas() {
    let w = SpatialWeights::lattice_rook(2, 103).unwrap();
    for seed in 0..5 {
        let y = generate_sar(&w, &SarSpec::new(0.0, seed).unwrap()).unwrap();
        for level in Level::ALL {
            let got = min_safe_k(&y, &w, level, 1..=206, &TestOptions::default()).unwrap();
            // brute force: evaluate every k independently, walk down from the top
            let rejects: Vec<bool> =
                (1..=206).map(|k| smaup_test(&y, &w, k, &TestOptions::default()).unwrap().decision(level).reject).collect();
            let expected = match (1..=206usize).rev().find(|&k| rejects[k - 1]) {
                None => SafeK::Safe(1),
                Some(206) => SafeK::NoSafeK,
                Some(k) => SafeK::Safe(k + 1),
            };
            assert_eq!(got, expected, "seed {seed} level {level:?}");
        }
    }
}

#[test]
fn scan_edge_verdicts() {
    let w = SpatialWeights::lattice_rook(10, 10).unwrap();
    let y = generate_sar(&w, &SarSpec::new(0.0, 3).unwrap()).unwrap();
    // small k always rejects at rho 0
    let all_reject = scan_k(&y, &w, Level::P10, 2..=5, DecisionBasis::CriticalValue, &TestOptions::default()).unwrap();
    assert_eq!(all_reject.verdict, SafeK::NoSafeK);
    let none_reject = scan_k(&y, &w, Level::P01, 90..=100, DecisionBasis::CriticalValue, &TestOptions::default()).unwrap();
    assert_eq!(none_reject.verdict, SafeK::Safe(90));
    assert_eq!(none_reject.rows.first().unwrap().k, 100);
}
