use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use smaup::experiments::{levene_rejections, Acceptance, Recipe};
use smaup::seeds::SeedKey;
use smaup::statistic::SmaupParams;
use smaup::stats::pseudo_p;
use smaup::*;

const RHOS: [f64; 5] = [-0.9, -0.5, 0.0, 0.5, 0.9];
const THETAS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[test]
fn partitions_valid_over_1000_seeds() {
    let w = SpatialWeights::lattice_rook(10, 10).unwrap();
    for seed in 0..1000u64 {
        let k = 2 + (seed as usize * 7) % 98;
        let r = random_regions(&w, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(r.n(), 100);
        assert_eq!(r.k(), k);
        let mut sizes = vec![0; k];
        for &l in r.assignment() {
            sizes[l] += 1;
        }
        assert!(sizes.iter().all(|&s| s > 0), "seed {seed}: empty region");
        assert!(r.is_contiguous(&w), "seed {seed}: non-contiguous region");
    }
}

#[test]
fn partitions_valid_on_irregular_graph() {
    // 30x30 lattice with a few extra diagonal links
    let base = SpatialWeights::lattice_rook(30, 30).unwrap();
    let mut nbrs: Vec<Vec<usize>> = (0..900).map(|i| base.neighbors(i).to_vec()).collect();
    for i in (0..870).step_by(37) {
        nbrs[i].push(i + 31);
    }
    let (w, _) = SpatialWeights::from_neighbors(nbrs, true).unwrap();
    for seed in 0..50 {
        let r = random_regions(&w, 90, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert!(r.is_contiguous(&w));
    }
}

#[test]
fn isolated_area_breaks_connectivity() {
    let base = SpatialWeights::lattice_rook(30, 30).unwrap();
    let mut nbrs: Vec<Vec<usize>> = (0..900).map(|i| base.neighbors(i).to_vec()).collect();
    let cut = 465;
    for list in nbrs.iter_mut() {
        list.retain(|&j| j != cut);
    }
    nbrs[cut].clear();
    let (w, _) = SpatialWeights::from_neighbors(nbrs, true).unwrap();
    assert!(!w.is_connected());
    assert!(matches!(
        random_regions(&w, 10, &mut ChaCha8Rng::seed_from_u64(0)),
        Err(Error::ContiguityImpossible)
    ));
}

#[test]
fn target_rho_preserves_values_exactly() {
    let w = SpatialWeights::lattice_rook(10, 10).unwrap();
    for seed in 0..20 {
        let base = generate_sar(&w, &SarSpec::new(0.9, seed).unwrap()).unwrap();
        for target in [-0.7, 0.0, 0.5] {
            let out = generate_with_target_rho(&w, &base, target, 0.5, 200, seed).unwrap();
            let mut a = base.values().to_vec();
            let mut b = out.variable.values().to_vec();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
            // same multiset summed in the same order gives identical moments
            let da = stats::descriptives(&a).unwrap();
            let db = stats::descriptives(&b).unwrap();
            assert_eq!(da, db);
            assert!((out.estimated_rho - target).abs() < 0.5);
        }
    }
}

#[test]
fn m_bounds_and_derivative_sign_on_grid() {
    let p = SmaupParams::default();
    let h = 1e-6;
    for &rho in &RHOS {
        for &theta in &THETAS {
            let m = p.m_statistic(rho, theta);
            assert!(0.0 < m && m < p.l_of_theta(theta) && p.l_of_theta(theta) < 1.0);
            let slope = (p.m_statistic(rho + h, theta) - p.m_statistic(rho - h, theta)) / (2.0 * h);
            assert_eq!(slope.signum(), -p.tau_of_theta(theta).signum(), "rho={rho} theta={theta}");
        }
    }
}

#[test]
fn filters_never_both_accept() {
    let w = SpatialWeights::lattice_rook(10, 10).unwrap();
    let recipe = Recipe::default();
    for seed in 0..40u64 {
        let rho = RHOS[seed as usize % RHOS.len()];
        let y = generate_sar(&w, &SarSpec::new(rho, seed).unwrap()).unwrap();
        let k = 11 + (seed as usize * 13) % 88;
        let rej = levene_rejections(&w, &y, k, &recipe, SeedKey::new(seed), None).unwrap();
        assert!(!(Acceptance::NoRejection.accepts(rej, 30) && Acceptance::AllRejected.accepts(rej, 30)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rank_permute_keeps_multiset(values in prop::collection::vec(-1e6f64..1e6, 1..200), seed in any::<u64>()) {
        let src = AreaVariable::new(values.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reference: Vec<f64> = (0..values.len()).map(|_| rand::Rng::random_range(&mut rng, -3.0..3.0)).collect();
        let out = rank_permute(&src, &AreaVariable::new(reference.clone()).unwrap()).unwrap();
        let mut a = values;
        let mut b = out.values().to_vec();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        // ranks follow the reference
        for i in 0..reference.len() {
            for j in 0..reference.len() {
                if reference[i] < reference[j] {
                    prop_assert!(out.values()[i] <= out.values()[j]);
                }
            }
        }
    }

    #[test]
    fn pseudo_p_is_nonincreasing(mut null in prop::collection::vec(0.0f64..1.0, 1..300), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        null.sort_by(f64::total_cmp);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let p_lo = pseudo_p(&null, lo).unwrap();
        let p_hi = pseudo_p(&null, hi).unwrap();
        prop_assert!(p_hi <= p_lo);
        prop_assert!((0.0..=1.0).contains(&p_lo));
    }

    #[test]
    fn m_inside_bounds(rho in -0.99f64..0.99, theta in 1e-6f64..=1.0) {
        let p = SmaupParams::default();
        let m = m_statistic(rho, theta, &p);
        prop_assert!(m > 0.0);
        prop_assert!(m < p.l_of_theta(theta));
        prop_assert!(p.l_of_theta(theta) < 1.0);
    }

    #[test]
    fn derivative_sign_matches_tau(rho in -0.95f64..0.95, theta in 0.01f64..=1.0) {
        let p = SmaupParams::default();
        let tau = p.tau_of_theta(theta);
        prop_assume!(tau.abs() > 1e-3);
        let h = 1e-6;
        let slope = (p.m_statistic(rho + h, theta) - p.m_statistic(rho - h, theta)) / (2.0 * h);
        prop_assert_eq!(slope.signum(), -tau.signum());
    }

    #[test]
    fn random_partitions_are_valid(rows in 2usize..12, cols in 2usize..12, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let w = SpatialWeights::lattice_rook(rows, cols).unwrap();
        let n = rows * cols;
        let k = 1 + ((n - 1) as f64 * frac) as usize;
        let r = random_regions(&w, k, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert!(r.is_contiguous(&w));
        prop_assert!(Regionalization::new(r.assignment().to_vec(), k).is_ok());
    }
}
