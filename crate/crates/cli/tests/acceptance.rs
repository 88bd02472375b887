//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers when it succeeds (run with `-- --nocapture` to see
//! them on success).
//!
//! 1. Exact-coverage reproduction on the noisy logistic forward problem:
//!    10000 splits, n_c = 80, alpha = 0.1, final running mean within
//!    +/-0.01 of 73/81, total runtime under 2 minutes.
//! 2. Buckley-Leverett coverage within +/-0.015 of 73/81 while the
//!    surrogate demonstrably misfits (max error > 10x median error).
//! 3. Inverse fresh-test coverage. Reduced mode here: 200 records,
//!    n_c = 160, alpha = 0.2, 100 fresh tests, within +/-0.06 of 129/161,
//!    under 10 minutes. Full mode (1000 records, n_c = 800, 500 tests,
//!    +/-0.03 of 641/801) runs with `-- --ignored`.
//! 4. Noisy-inverse variant (sigma = 0.03): same coverage targets.
//! 5. Oracle equivalences: (a) autodiff vs central finite differences on
//!    100+ random instances; (b) RK4 vs the analytic logistic solution at
//!    1e-8; (c) conformal quantile vs a sort-based oracle on 1000 random
//!    score sets, exact; (d) theoretical coverage vs direct Monte Carlo at
//!    +/-0.005 over 1e5 trials.
//! 6. Guarantee range: Monte Carlo coverage within
//!    [1 - alpha - 0.01, 1 - alpha + 1/(n_c + 1) + 0.01] for
//!    n_c in {20, 80, 200, 800} x alpha in {0.05, 0.1, 0.2, 0.5}.
//! 7. The noiseless logistic interval at alpha = 0.1 is strictly narrower
//!    than the noisy one.
//! 8. Rerunning every experiment from its config snapshot reproduces all
//!    CSV outputs byte for byte.

use conformal_pinn::ad::{self, Scalar, Var};
use conformal_pinn::conformal::{
    conformal_quantile, covered, make_interval, quantile_rank, theoretical_coverage, ScoreSet,
};
use conformal_pinn::datagen::{self, linspace};
use conformal_pinn::net::{self, Mlp};
use conformal_pinn::physics::{flux, LogisticProblem};
use conformal_pinn_cli::commands;
use conformal_pinn_cli::config::{ExperimentConfig, ExperimentKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::time::Instant;

fn temp_out(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cpinn_acceptance_{tag}_{}", std::process::id()));
    std::fs::remove_dir_all(&dir).ok();
    dir
}

const FIG1B_TARGET: f64 = 73.0 / 81.0;

#[test]
fn criterion_1_exact_coverage_noisy_logistic() {
    let started = Instant::now();
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::ForwardLogistic);
    cfg.experiment.out_dir = temp_out("c1");
    cfg.experiment.no_plots = true;
    cfg.conformal.alphas = vec![0.1];
    assert_eq!(cfg.data.noise_sigma, 0.08);
    assert_eq!(cfg.conformal.n_calibration, 80);
    assert_eq!(cfg.conformal.n_validation, 20);
    assert_eq!(cfg.conformal.trials, 10_000);

    let out = commands::forward_logistic::run(&cfg).unwrap();
    let cov = out.coverage[0];
    let elapsed = started.elapsed();

    assert!((cov.theoretical - FIG1B_TARGET).abs() < 1e-12);
    assert!(
        (cov.final_mean - FIG1B_TARGET).abs() <= 0.01,
        "coverage {} vs {FIG1B_TARGET}",
        cov.final_mean
    );
    assert!(
        elapsed.as_secs() < 120,
        "took {elapsed:?}, budget is 2 minutes"
    );
    println!(
        "criterion 1 (exact coverage, noisy logistic): PASS — mean {:.5} vs 73/81 = {:.5} in {elapsed:.2?}",
        cov.final_mean, FIG1B_TARGET
    );
    std::fs::remove_dir_all(&cfg.experiment.out_dir).ok();
}

#[test]
fn criterion_2_bl_coverage_despite_poor_fit() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::ForwardBl);
    cfg.experiment.out_dir = temp_out("c2");
    cfg.experiment.no_plots = true;
    cfg.conformal.alphas = vec![0.1];
    assert_eq!(cfg.data.noise_sigma, 0.0);

    let out = commands::forward_bl::run(&cfg).unwrap();
    let cov = out.coverage[0];

    // The misfit premise is checked, not assumed.
    assert!(
        out.max_error > 10.0 * out.median_error,
        "surrogate fits too well: max {} vs median {}",
        out.max_error,
        out.median_error
    );
    assert!(
        (cov.final_mean - FIG1B_TARGET).abs() <= 0.015,
        "coverage {} vs {FIG1B_TARGET}",
        cov.final_mean
    );
    println!(
        "criterion 2 (BL coverage despite poor fit): PASS — mean {:.5} vs {:.5}, error ratio {:.1}x",
        cov.final_mean,
        FIG1B_TARGET,
        out.max_error / out.median_error
    );
    std::fs::remove_dir_all(&cfg.experiment.out_dir).ok();
}

fn reduced_inverse_config(tag: &str, noise: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Inverse);
    cfg.experiment.out_dir = temp_out(tag);
    cfg.experiment.no_plots = true;
    cfg.inverse.n_datasets = 200;
    cfg.inverse.n_tests = 100;
    cfg.inverse.n_calibration = 160;
    cfg.inverse.repeated_split_n_calibration = 160;
    cfg.inverse.repeated_split_n_validation = 40;
    cfg.inverse.noise_sigma = noise;
    cfg.inverse.save_models = false;
    cfg
}

const REDUCED_TARGET: f64 = 129.0 / 161.0;
const FULL_TARGET: f64 = 641.0 / 801.0;

#[test]
fn criterion_3_inverse_fresh_test_coverage_reduced() {
    let started = Instant::now();
    let cfg = reduced_inverse_config("c3", 0.0);
    let out = commands::inverse::run(&cfg).unwrap();
    let elapsed = started.elapsed();

    assert!((out.fresh_test.theoretical - REDUCED_TARGET).abs() < 1e-12);
    assert!(
        (out.fresh_test.final_mean - REDUCED_TARGET).abs() <= 0.06,
        "fresh-test coverage {} vs {REDUCED_TARGET}",
        out.fresh_test.final_mean
    );
    assert!(
        elapsed.as_secs() < 600,
        "reduced mode took {elapsed:?}, budget is 10 minutes"
    );
    println!(
        "criterion 3 (inverse fresh-test coverage, reduced): PASS — mean {:.5} vs 129/161 = {:.5} in {elapsed:.2?}",
        out.fresh_test.final_mean, REDUCED_TARGET
    );
    std::fs::remove_dir_all(&cfg.experiment.out_dir).ok();
}

/// Full-scale variant of criterion 3: 1000 noiseless records, n_c = 800,
/// alpha = 0.2, 500 fresh tests, +/-0.03 of 641/801. Roughly 10-20 minutes
/// on two cores; run with `-- --ignored`.
#[test]
#[ignore]
fn criterion_3_inverse_fresh_test_coverage_full() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Inverse);
    cfg.experiment.out_dir = temp_out("c3full");
    cfg.experiment.no_plots = true;
    cfg.inverse.n_tests = 500;
    cfg.inverse.save_models = false;
    let out = commands::inverse::run(&cfg).unwrap();
    assert!((out.fresh_test.theoretical - FULL_TARGET).abs() < 1e-12);
    assert!(
        (out.fresh_test.final_mean - FULL_TARGET).abs() <= 0.03,
        "fresh-test coverage {} vs {FULL_TARGET}",
        out.fresh_test.final_mean
    );
    println!(
        "criterion 3 (inverse fresh-test coverage, full): PASS — mean {:.5} vs 641/801 = {:.5}",
        out.fresh_test.final_mean, FULL_TARGET
    );
    std::fs::remove_dir_all(&cfg.experiment.out_dir).ok();
}

#[test]
fn criterion_4_noisy_inverse_same_target() {
    let cfg = reduced_inverse_config("c4", 0.03);
    let out = commands::inverse::run(&cfg).unwrap();
    assert!((out.fresh_test.theoretical - REDUCED_TARGET).abs() < 1e-12);
    assert!(
        (out.fresh_test.final_mean - REDUCED_TARGET).abs() <= 0.06,
        "noisy fresh-test coverage {} vs {REDUCED_TARGET}",
        out.fresh_test.final_mean
    );
    println!(
        "criterion 4 (noisy inverse, sigma 0.03): PASS — mean {:.5} vs {:.5}",
        out.fresh_test.final_mean, REDUCED_TARGET
    );
    std::fs::remove_dir_all(&cfg.experiment.out_dir).ok();
}

/// Full-scale variant of criterion 4 (sigma = 0.03); run with `-- --ignored`.
#[test]
#[ignore]
fn criterion_4_noisy_inverse_full() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::Inverse);
    cfg.experiment.out_dir = temp_out("c4full");
    cfg.experiment.no_plots = true;
    cfg.inverse.n_tests = 500;
    cfg.inverse.noise_sigma = 0.03;
    cfg.inverse.save_models = false;
    let out = commands::inverse::run(&cfg).unwrap();
    assert!(
        (out.fresh_test.final_mean - FULL_TARGET).abs() <= 0.03,
        "noisy fresh-test coverage {} vs {FULL_TARGET}",
        out.fresh_test.final_mean
    );
    println!(
        "criterion 4 (noisy inverse, full): PASS — mean {:.5} vs {:.5}",
        out.fresh_test.final_mean, FULL_TARGET
    );
    std::fs::remove_dir_all(&cfg.experiment.out_dir).ok();
}

// --- criterion 5: oracle equivalences -----------------------------------

fn finite_diff<F: Fn(&[f64]) -> f64>(f: F, x: &[f64], step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        xp[i] = x[i] + step;
        let fp = f(&xp);
        xp[i] = x[i] - step;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    g
}

fn close(ad: f64, fd: f64) -> bool {
    (ad - fd).abs() <= 1e-4 * fd.abs().max(ad.abs()) + 1e-8
}

/// Three loss families, written once generically so the f64 instantiation
/// drives the finite-difference oracle and the Var instantiation drives the
/// tape.
fn instance_loss<S: Scalar>(kind: usize, net: &Mlp<S>, batch: &[Vec<f64>], beta: f64) -> S {
    let mut acc = S::constant(0.0);
    match kind {
        // Mean squared error against a fixed synthetic target.
        0 => {
            for (i, x) in batch.iter().enumerate() {
                let xs: Vec<S> = x.iter().map(|&v| S::constant(v)).collect();
                let d = net.eval(&xs) - S::constant((i as f64).sin());
                acc = acc + d * d;
            }
        }
        // Squared logistic residual: exercises forward-over-reverse.
        1 => {
            for x in batch {
                let out = net.eval_with_input_derivative(&[S::constant(x[0])], 0);
                let b = net.beta().unwrap_or_else(|| S::constant(beta));
                let r = out.du - b * out.re * (S::constant(1.0) - out.re);
                acc = acc + r * r;
            }
        }
        // Squared Buckley-Leverett residual with the exact flux derivative.
        _ => {
            for x in batch {
                let (u, ut, ux) =
                    net.eval_with_two_input_derivatives([S::constant(x[0]), S::constant(x[1])]);
                let fp = flux(conformal_pinn::ad::Dual::seeded(u)).du;
                let r = ut - fp * ux;
                acc = acc + r * r;
            }
        }
    }
    acc
}

#[test]
fn criterion_5a_autodiff_matches_finite_differences() {
    let mut checked_params = 0usize;
    let mut checked_derivs = 0usize;
    for seed in 0..110u64 {
        let kind = (seed % 3) as usize;
        let input_dim = if kind == 2 { 2 } else { 1 };
        let hidden = 3 + (seed % 5) as usize;
        let sizes = vec![input_dim, hidden, 1];
        let has_beta = kind == 1 && seed % 2 == 0;
        let model = net::init_model(&sizes, seed, has_beta).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
        let batch: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..input_dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();

        // Parameter gradients: tape vs central differences (step 1e-5).
        let theta = model.flat_params();
        let (_, grad) = ad::grad(&theta, |vars| {
            let net = Mlp::from_flat(&sizes, vars, has_beta);
            instance_loss::<Var>(kind, &net, &batch, 0.07)
        });
        let f = |t: &[f64]| {
            let net = Mlp::<f64>::from_flat(&sizes, t, has_beta);
            instance_loss::<f64>(kind, &net, &batch, 0.07)
        };
        let fd = finite_diff(f, &theta, 1e-5);
        for (i, (a, b)) in grad.iter().zip(&fd).enumerate() {
            assert!(
                close(*a, *b),
                "seed {seed} kind {kind} param {i}: tape {a} vs fd {b}"
            );
            checked_params += 1;
        }

        // Input derivatives: dual sweep vs central differences.
        let derivs = model.input_derivatives(&batch, 1).unwrap();
        for (x, dx) in batch.iter().zip(&derivs) {
            for k in 0..input_dim {
                let mut hi = x.clone();
                let mut lo = x.clone();
                hi[k] += 1e-5;
                lo[k] -= 1e-5;
                let fd = (model.forward_point(&hi).unwrap() - model.forward_point(&lo).unwrap())
                    / 2e-5;
                assert!(close(dx[k], fd), "seed {seed} input deriv {k}");
                checked_derivs += 1;
            }
        }
    }
    println!(
        "criterion 5a (autodiff vs finite differences): PASS — 110 instances, {checked_params} partials, {checked_derivs} input derivatives"
    );
}

#[test]
fn criterion_5b_rk4_matches_analytic_logistic() {
    let problem = LogisticProblem::default();
    let grid = linspace(0.0, 150.0, 150);
    let traj = datagen::solve_ode_rk4(problem.beta, problem.n0, &grid).unwrap();
    let sup = grid
        .iter()
        .zip(&traj)
        .map(|(&t, &n)| (n - datagen::logistic_analytic(t, problem.beta, problem.n0)).abs())
        .fold(0.0f64, f64::max);
    assert!(sup <= 1e-8, "sup-norm error {sup}");
    println!("criterion 5b (RK4 vs analytic logistic): PASS — sup-norm error {sup:.2e}");
}

#[test]
fn criterion_5c_quantile_matches_sort_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for case in 0..1000 {
        let n = rng.random_range(1..=500usize);
        let alpha = rng.random_range(0.01..0.99);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();

        // Sort-based oracle with an independently computed rank.
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let mut k = n + 1;
        for cand in 1..=n {
            if cand as f64 >= (1.0 - alpha) * (n + 1) as f64 - 1e-9 {
                k = cand;
                break;
            }
        }
        let expected = if k > n { f64::INFINITY } else { sorted[k - 1] };

        let got = conformal_quantile(&ScoreSet::new(scores).unwrap(), alpha).unwrap();
        assert_eq!(
            got.to_bits(),
            expected.to_bits(),
            "case {case}: n = {n}, alpha = {alpha}: {got} vs oracle {expected}"
        );
        assert_eq!(quantile_rank(n, alpha), k, "rank mismatch at case {case}");
    }
    println!("criterion 5c (quantile vs sort oracle): PASS — 1000 random score sets, exact match");
}

/// Monte Carlo marginal coverage with synthetic i.i.d. continuous scores:
/// per trial, draw n_c calibration scores plus one test score and check the
/// test score against the conformal interval.
fn synthetic_coverage(n_c: usize, alpha: f64, trials: usize, seed: u64) -> f64 {
    let hits: usize = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(conformal_pinn::harness::derive_seed(seed, t as u64));
            let scores: Vec<f64> = (0..n_c).map(|_| rng.random_range(0.0..1.0)).collect();
            let test: f64 = rng.random_range(0.0..1.0);
            let q = conformal_quantile(&ScoreSet::new(scores).unwrap(), alpha).unwrap();
            let interval = make_interval(0.0, q, alpha).unwrap();
            usize::from(covered(&interval, test))
        })
        .sum();
    hits as f64 / trials as f64
}

#[test]
fn criterion_5d_theoretical_coverage_matches_monte_carlo() {
    for (n_c, alpha, seed) in [(80usize, 0.1, 1u64), (20, 0.2, 2)] {
        let expected = theoretical_coverage(n_c, alpha).unwrap();
        let got = synthetic_coverage(n_c, alpha, 100_000, seed);
        assert!(
            (got - expected).abs() <= 0.005,
            "n_c = {n_c}, alpha = {alpha}: MC {got} vs exact {expected}"
        );
        println!(
            "criterion 5d (exact coverage vs Monte Carlo, n_c = {n_c}, alpha = {alpha}): PASS — MC {got:.5} vs {expected:.5}"
        );
    }
}

#[test]
fn criterion_6_guarantee_range() {
    for &n_c in &[20usize, 80, 200, 800] {
        for &alpha in &[0.05, 0.1, 0.2, 0.5] {
            let got = synthetic_coverage(n_c, alpha, 100_000, (n_c as u64) << 8 | 3);
            let lo = 1.0 - alpha - 0.01;
            let hi = 1.0 - alpha + 1.0 / (n_c + 1) as f64 + 0.01;
            assert!(
                got >= lo && got <= hi,
                "n_c = {n_c}, alpha = {alpha}: coverage {got} outside [{lo}, {hi}]"
            );
        }
    }
    println!(
        "criterion 6 (guarantee range over 16 (n_c, alpha) pairs): PASS — all within [1-a-0.01, 1-a+1/(n+1)+0.01]"
    );
}

#[test]
fn criterion_7_noiseless_intervals_shrink() {
    let run = |sigma: f64, tag: &str| {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::ForwardLogistic);
        cfg.experiment.out_dir = temp_out(tag);
        cfg.experiment.no_plots = true;
        cfg.data.noise_sigma = sigma;
        cfg.conformal.alphas = vec![0.1];
        cfg.conformal.trials = 10;
        let out = commands::forward_logistic::run(&cfg).unwrap();
        std::fs::remove_dir_all(&cfg.experiment.out_dir).ok();
        out.half_widths[0].1
    };
    let noisy = run(0.08, "c7noisy");
    let noiseless = run(0.0, "c7clean");
    assert!(
        noiseless < noisy,
        "half-width did not shrink: {noiseless} vs {noisy}"
    );
    println!(
        "criterion 7 (noiseless interval shrinkage): PASS — half-width {noiseless:.6} < {noisy:.6}"
    );
}

// --- criterion 8: byte-for-byte snapshot determinism ---------------------

fn run_binary(args: &[&str]) -> std::process::Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_cpinn"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Compare every file under data/, models/ and reports/ byte for byte.
fn assert_identical_outputs(a: &Path, b: &Path) {
    for sub in ["data", "models", "reports"] {
        let dir_a = a.join(sub);
        if !dir_a.exists() {
            continue;
        }
        let mut names: Vec<_> = std::fs::read_dir(&dir_a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(!names.is_empty() || sub != "reports", "reports must exist");
        for name in names {
            let fa = std::fs::read(dir_a.join(&name)).unwrap();
            let fb = std::fs::read(b.join(sub).join(&name))
                .unwrap_or_else(|_| panic!("missing {sub}/{name:?} in rerun"));
            assert_eq!(fa, fb, "{sub}/{name:?} differs between runs");
        }
    }
}

#[test]
fn criterion_8_snapshot_reruns_are_byte_identical() {
    let out_root = temp_out("c8");
    let out = out_root.to_str().unwrap();

    // A small config exercising every experiment end to end through the
    // real binary. Scale is reduced; determinism is scale-independent.
    let base = [
        ("forward-logistic", vec!["--trials", "500"]),
        (
            "forward-bl",
            vec!["--trials", "300"],
        ),
        ("inverse", vec![]),
    ];
    let inverse_cfg = out_root.join("inverse_small.toml");
    std::fs::create_dir_all(&out_root).unwrap();
    std::fs::write(
        &inverse_cfg,
        "[inverse]\nn_datasets = 12\nn_tests = 4\nn_calibration = 10\n\
         repeated_split_n_calibration = 10\nrepeated_split_n_validation = 2\n\
         repeated_split_trials = 200\n",
    )
    .unwrap();

    for (cmd, extra) in &base {
        let mut args = vec![*cmd, "--out", out, "--label", "first", "--seed", "5"];
        if *cmd == "inverse" {
            args.extend(["--config", inverse_cfg.to_str().unwrap()]);
        }
        args.extend(extra.iter().copied());
        let output = run_binary(&args);
        assert!(
            output.status.success(),
            "{cmd} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );

        // Rerun purely from the snapshot, overriding only the label.
        let snapshot = out_root.join(cmd).join("first/config.toml");
        let rerun = run_binary(&[
            cmd,
            "--config",
            snapshot.to_str().unwrap(),
            "--label",
            "second",
        ]);
        assert!(
            rerun.status.success(),
            "{cmd} rerun failed: {}",
            String::from_utf8_lossy(&rerun.stderr)
        );
        assert_identical_outputs(
            &out_root.join(cmd).join("first"),
            &out_root.join(cmd).join("second"),
        );
    }

    // The coverage command over a persisted predictions file.
    let preds = out_root.join("preds.csv");
    let mut text = String::from("input,truth,prediction\n");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..60 {
        text.push_str(&format!("{i},{},0.0\n", rng.random_range(-1.0..1.0)));
    }
    std::fs::write(&preds, text).unwrap();
    for label in ["first", "second"] {
        let output = run_binary(&[
            "coverage",
            preds.to_str().unwrap(),
            "--out",
            out,
            "--label",
            label,
            "--trials",
            "500",
        ]);
        assert!(output.status.success());
    }
    assert_identical_outputs(
        &out_root.join("coverage/first"),
        &out_root.join("coverage/second"),
    );

    println!(
        "criterion 8 (snapshot determinism): PASS — all four experiments reproduce byte-identical CSV outputs"
    );
    std::fs::remove_dir_all(&out_root).ok();
}
