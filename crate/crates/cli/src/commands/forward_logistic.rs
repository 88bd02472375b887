//! Forward logistic experiment: generate noisy data, train a PINN with the
//! growth rate fixed, conformalize its holdout predictions, and validate
//! coverage over repeated calibration/validation splits.

use super::{alpha_tag, write_coverage_artifacts, write_fit_curve_csv, write_interval_csv, AlphaCoverage};
use crate::config::{prepare_run_dir, ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::svg::{self, Plot};
use conformal_pinn::conformal;
use conformal_pinn::datagen::{self, SplitSpec};
use conformal_pinn::harness::{self, derive_seed};
use conformal_pinn::optim::{AdamConfig, LbfgsConfig};
use conformal_pinn::physics::{CollocationGrid, LogisticProblem, LossWeights, PinnProblem, TrainConfig};
use std::path::PathBuf;

#[derive(Debug)]
pub struct ForwardLogisticOutcome {
    pub run_dir: PathBuf,
    pub coverage: Vec<AlphaCoverage>,
    /// Conformal half-width per alpha on the canonical calibration split.
    pub half_widths: Vec<(f64, f64)>,
    pub final_loss: f64,
}

pub(crate) fn train_config(cfg: &ExperimentConfig) -> TrainConfig {
    let t = &cfg.training;
    TrainConfig {
        hidden: t.hidden.clone(),
        weights: LossWeights {
            data: t.w_data,
            physics: t.w_physics,
            ic: t.w_ic,
        },
        adam: AdamConfig {
            epochs: t.adam_epochs,
            lr_start: t.adam_lr_start,
            lr_end: t.adam_lr_end,
            ..AdamConfig::default()
        },
        lbfgs: LbfgsConfig {
            history_size: t.lbfgs_history,
            max_iterations: t.lbfgs_max_iterations,
            gradient_tolerance: t.lbfgs_gradient_tolerance,
            step_tolerance: t.lbfgs_step_tolerance,
            ..LbfgsConfig::default()
        },
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ForwardLogisticOutcome> {
    cfg.validate()?;
    let run_dir = prepare_run_dir(cfg, ExperimentKind::ForwardLogistic)?;
    let seed = cfg.experiment.seed;
    let lg = &cfg.logistic;

    // Data: RK4 solve on the equispaced grid, then noise.
    let dataset = datagen::logistic_dataset(
        lg.beta,
        lg.n0,
        lg.t_start,
        lg.t_end,
        cfg.data.n_points,
        cfg.data.noise_sigma,
        derive_seed(seed, 0),
    )?;
    dataset.write_csv(&run_dir.join("data/dataset.csv"))?;
    dataset.write_meta(&run_dir.join("data/dataset.meta.json"))?;

    let parts = datagen::split(
        &dataset,
        &SplitSpec {
            n_train: cfg.data.n_train,
            n_holdout: cfg.data.n_holdout,
            n_test: cfg.data.n_test,
            n_calibration: cfg.conformal.n_calibration,
            n_validation: cfg.conformal.n_validation,
            seed: derive_seed(seed, 1),
        },
    )?;
    parts.train.write_csv(&run_dir.join("data/train.csv"))?;
    parts.holdout.write_csv(&run_dir.join("data/holdout.csv"))?;
    parts.test.write_csv(&run_dir.join("data/test.csv"))?;

    // Train with beta fixed.
    let problem_def = LogisticProblem {
        beta: lg.beta,
        n0: lg.n0,
        t_domain: (lg.t_start, lg.t_end),
        inverse_mode: false,
    };
    let grid = CollocationGrid::logistic(&problem_def, cfg.training.collocation_points);
    let problem = PinnProblem::Logistic(problem_def);
    let fit = conformal_pinn::physics::fit_pinn(
        &problem,
        &parts.train,
        &grid,
        &train_config(cfg),
        derive_seed(seed, 2),
    )?;
    fit.model.save(&run_dir.join("models/pinn.txt"))?;
    if cfg.training.emit_loss_trace {
        super::write_loss_trace(&run_dir, &fit.adam)?;
    }

    // Dense fit curve against the clean solution.
    let dense_t = datagen::linspace(lg.t_start, lg.t_end, 256);
    let truth = datagen::solve_ode_rk4(lg.beta, lg.n0, &dense_t)?;
    let dense_inputs: Vec<Vec<f64>> = dense_t.iter().map(|&t| vec![t]).collect();
    let dense_pred = fit.model.forward(&dense_inputs)?;
    let curve: Vec<(f64, f64, f64)> = dense_t
        .iter()
        .zip(&truth)
        .zip(&dense_pred)
        .map(|((&t, &u), &p)| (t, u, p))
        .collect();
    write_fit_curve_csv(&run_dir, "t", &curve)?;

    // Conformal intervals from the canonical calibration split, plotted and
    // tabulated on the dense grid.
    let (calibration, _validation) = datagen::split_holdout(
        &parts.holdout,
        cfg.conformal.n_calibration,
        cfg.conformal.n_validation,
        derive_seed(seed, 3),
    )?;
    let cal_pred = fit.model.forward(&calibration.inputs())?;
    let cal_scores = conformal::nonconformity_scores(&cal_pred, &calibration.observations())?;

    let mut half_widths = Vec::new();
    for &alpha in &cfg.conformal.alphas {
        let q = conformal::conformal_quantile(&cal_scores, alpha)?;
        half_widths.push((alpha, q));
        let rows: Vec<(f64, f64, f64, f64)> = dense_t
            .iter()
            .zip(&dense_pred)
            .map(|(&t, &p)| (t, p, p - q, p + q))
            .collect();
        write_interval_csv(&run_dir, &format!("intervals_{}", alpha_tag(alpha)), "t", &rows)?;
    }

    // Repeated-split coverage on the holdout predictions.
    let holdout_pred = fit.model.forward(&parts.holdout.inputs())?;
    let pairs: Vec<(f64, f64)> = holdout_pred
        .iter()
        .zip(parts.holdout.observations())
        .map(|(&p, y)| (p, y))
        .collect();
    let mut coverage = Vec::new();
    for (i, &alpha) in cfg.conformal.alphas.iter().enumerate() {
        let report = harness::repeated_split_coverage(
            &pairs,
            cfg.conformal.n_calibration,
            cfg.conformal.n_validation,
            alpha,
            cfg.conformal.trials,
            derive_seed(seed, 4 + i as u64),
        )?;
        coverage.push(write_coverage_artifacts(
            cfg,
            &run_dir,
            &format!("coverage_{}", alpha_tag(alpha)),
            &report,
        )?);
    }

    if !cfg.experiment.no_plots {
        let mut plot = Plot::new(
            &format!("Logistic PINN fit (noise {})", cfg.data.noise_sigma),
            "t",
            "N(t)",
        );
        for &(alpha, q) in &half_widths {
            if q.is_finite() {
                let lo: Vec<f64> = dense_pred.iter().map(|p| p - q).collect();
                let hi: Vec<f64> = dense_pred.iter().map(|p| p + q).collect();
                let color = if alpha <= 0.25 { svg::BLUE } else { svg::GREEN };
                plot = plot.band(dense_t.clone(), lo, hi, color);
            }
        }
        plot = plot
            .line(dense_t.iter().zip(&truth).map(|(&t, &u)| (t, u)).collect(), svg::GRAY)
            .line(
                dense_t.iter().zip(&dense_pred).map(|(&t, &p)| (t, p)).collect(),
                svg::BLUE,
            )
            .scatter(
                dataset.points.iter().map(|(x, y)| (x[0], *y)).collect(),
                svg::ORANGE,
            );
        plot.save(&run_dir.join("plots/fit.svg"))?;
    }

    Ok(ForwardLogisticOutcome {
        run_dir,
        coverage,
        half_widths,
        final_loss: fit.final_loss,
    })
}
