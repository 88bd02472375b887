//! Property-based invariants:
//!
//! 1. The conformal quantile is nonincreasing in alpha for fixed scores.
//! 2. The conformal quantile is invariant to score ordering.
//! 3. Shifting all calibration scores and the test score by a common
//!    constant never changes the coverage decision (rank invariance).
//! 4. Intervals are closed: both endpoints count as covered.
//! 5. Random splits partition the dataset: every point lands in exactly one
//!    part, and the union recovers the original multiset.
//! 6. Both optimizers never report a final loss above the initial loss.
//! 7. The composite PINN loss is nonnegative, and zero only when every
//!    component is zero.
//! 8. theoretical_coverage always lies in [1 - alpha, 1 - alpha + 1/(n+1)]
//!    (clamped at 1), the guarantee range of split conformal prediction.

use conformal_pinn::conformal::{
    conformal_quantile, covered, make_interval, theoretical_coverage, ScoreSet,
};
use conformal_pinn::datagen::{self, Dataset, DatasetMeta, SplitSpec};
use conformal_pinn::net;
use conformal_pinn::optim::{minimize_adam, minimize_lbfgs, AdamConfig, LbfgsConfig};
use conformal_pinn::physics::{
    pinn_loss, CollocationGrid, LogisticProblem, LossWeights, PinnProblem,
};
use proptest::prelude::*;

fn scores_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1e3, 1..=max_len)
}

fn meta() -> DatasetMeta {
    DatasetMeta {
        problem: "prop".into(),
        true_beta: None,
        noise_sigma: 0.0,
        seed: 0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn quantile_nonincreasing_in_alpha(
        scores in scores_strategy(200),
        a1 in 0.01f64..0.99,
        a2 in 0.01f64..0.99,
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let set = ScoreSet::new(scores).unwrap();
        let q_lo = conformal_quantile(&set, lo).unwrap();
        let q_hi = conformal_quantile(&set, hi).unwrap();
        prop_assert!(q_hi <= q_lo, "q({hi}) = {q_hi} > q({lo}) = {q_lo}");
    }

    #[test]
    fn quantile_invariant_under_permutation(
        scores in scores_strategy(100),
        alpha in 0.01f64..0.99,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = scores.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        shuffled.shuffle(&mut rng);
        let q_orig = conformal_quantile(&ScoreSet::new(scores).unwrap(), alpha).unwrap();
        let q_shuf = conformal_quantile(&ScoreSet::new(shuffled).unwrap(), alpha).unwrap();
        prop_assert_eq!(q_orig.to_bits(), q_shuf.to_bits());
    }

    #[test]
    fn coverage_decision_is_rank_invariant_under_common_shift(
        scores in scores_strategy(60),
        test_score in 0.0f64..1e3,
        shift in 0.0f64..100.0,
        alpha in 0.05f64..0.95,
    ) {
        let q = conformal_quantile(&ScoreSet::new(scores.clone()).unwrap(), alpha).unwrap();
        let before = test_score <= q;

        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let q_shift = conformal_quantile(&ScoreSet::new(shifted).unwrap(), alpha).unwrap();
        let after = test_score + shift <= q_shift;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn intervals_are_closed(center in -1e6f64..1e6, hw in 0.0f64..1e6, alpha in 0.01f64..0.99) {
        let iv = make_interval(center, hw, alpha).unwrap();
        prop_assert!(covered(&iv, iv.lower()));
        prop_assert!(covered(&iv, iv.upper()));
        if hw > 0.0 {
            prop_assert!(!covered(&iv, iv.upper() + hw * 0.01 + 1e-9));
        }
    }

    #[test]
    fn theoretical_coverage_stays_in_guarantee_range(
        n_c in 1usize..2000,
        alpha in 0.01f64..0.99,
    ) {
        let cov = theoretical_coverage(n_c, alpha).unwrap();
        let slack = 1.0 / (n_c + 1) as f64;
        prop_assert!(cov >= 1.0 - alpha - 1e-12);
        prop_assert!(cov <= (1.0 - alpha + slack).min(1.0) + 1e-12);
    }

    #[test]
    fn split_is_a_partition(
        n_train in 1usize..40,
        n_holdout in 1usize..40,
        n_test in 1usize..40,
        seed in any::<u64>(),
    ) {
        let total = n_train + n_holdout + n_test;
        let ds = Dataset::new((0..total).map(|i| (vec![i as f64], i as f64)).collect(), meta());
        let spec = SplitSpec {
            n_train,
            n_holdout,
            n_test,
            n_calibration: 0,
            n_validation: 0,
            seed,
        };
        let parts = datagen::split(&ds, &spec).unwrap();
        prop_assert_eq!(parts.train.len(), n_train);
        prop_assert_eq!(parts.holdout.len(), n_holdout);
        prop_assert_eq!(parts.test.len(), n_test);
        let mut ids: Vec<usize> = parts
            .train
            .points
            .iter()
            .chain(&parts.holdout.points)
            .chain(&parts.test.points)
            .map(|(x, _)| x[0] as usize)
            .collect();
        ids.sort_unstable();
        let expected: Vec<usize> = (0..total).collect();
        prop_assert_eq!(ids, expected);
    }
}

proptest! {
    // Optimizer and PINN-loss properties run on fewer cases; each case does
    // real numeric work.
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn optimizers_never_worsen_the_initial_loss(
        x0 in -5.0f64..5.0,
        y0 in -5.0f64..5.0,
        cx in -3.0f64..3.0,
        cy in -3.0f64..3.0,
        scale in 0.1f64..30.0,
    ) {
        let mut obj = move |t: &[f64]| {
            let (dx, dy) = (t[0] - cx, t[1] - cy);
            (dx * dx + scale * dy * dy, vec![2.0 * dx, 2.0 * scale * dy])
        };
        let initial = obj(&[x0, y0]).0;

        let mut theta = vec![x0, y0];
        let trace = minimize_adam(&mut theta, &mut obj, &AdamConfig {
            epochs: 30,
            ..AdamConfig::default()
        }).unwrap();
        prop_assert!(trace.final_loss <= initial + 1e-12);

        let mut theta = vec![x0, y0];
        let outcome = minimize_lbfgs(&mut theta, &mut obj, &LbfgsConfig {
            max_iterations: 60,
            ..LbfgsConfig::default()
        }).unwrap();
        prop_assert!(outcome.final_loss <= outcome.initial_loss + 1e-12);
    }

    #[test]
    fn pinn_loss_is_nonnegative_with_nonnegative_components(
        seed in any::<u64>(),
        w_data in 0.0f64..5.0,
        w_phys in 0.0f64..5.0,
        w_ic in 0.0f64..5.0,
        y1 in -2.0f64..2.0,
        y2 in -2.0f64..2.0,
    ) {
        let lp = LogisticProblem::default();
        let problem = PinnProblem::Logistic(lp.clone());
        let model = net::init_model(&[1, 6, 1], seed, false).unwrap();
        let data = Dataset::new(vec![(vec![10.0], y1), (vec![100.0], y2)], meta());
        let grid = CollocationGrid::logistic(&lp, 20);
        let w = LossWeights { data: w_data, physics: w_phys, ic: w_ic };
        let loss = pinn_loss(&model, &problem, &data, &grid, &w).unwrap();
        prop_assert!(loss.data_mse >= 0.0);
        prop_assert!(loss.physics_mse >= 0.0);
        prop_assert!(loss.ic_mse >= 0.0);
        prop_assert!(loss.total >= 0.0);
        let weighted = w_data * loss.data_mse + w_phys * loss.physics_mse + w_ic * loss.ic_mse;
        prop_assert!((loss.total - weighted).abs() <= 1e-12 * weighted.max(1.0));
        if loss.total == 0.0 {
            prop_assert!(w_data * loss.data_mse == 0.0
                && w_phys * loss.physics_mse == 0.0
                && w_ic * loss.ic_mse == 0.0);
        }
    }
}
