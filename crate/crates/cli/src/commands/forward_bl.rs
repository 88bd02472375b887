//! Forward Buckley-Leverett experiment: Godunov reference solution,
//! noiseless training points on the final-time line, a PINN that visibly
//! misfits near the discontinuities, and coverage that stays valid anyway.

use super::{alpha_tag, write_coverage_artifacts, write_fit_curve_csv, write_interval_csv, AlphaCoverage};
use crate::config::{prepare_run_dir, ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::svg::{self, Plot};
use conformal_pinn::conformal;
use conformal_pinn::datagen::{self, SplitSpec};
use conformal_pinn::harness::{self, derive_seed};
use conformal_pinn::physics::{BuckleyLeverettProblem, CollocationGrid, PinnProblem};
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Debug)]
pub struct ForwardBlOutcome {
    pub run_dir: PathBuf,
    pub coverage: Vec<AlphaCoverage>,
    pub half_widths: Vec<(f64, f64)>,
    /// Surrogate error statistics against the reference solution on the
    /// final-time line.
    pub max_error: f64,
    pub median_error: f64,
    pub final_loss: f64,
}

pub fn run(cfg: &ExperimentConfig) -> Result<ForwardBlOutcome> {
    cfg.validate()?;
    let run_dir = prepare_run_dir(cfg, ExperimentKind::ForwardBl)?;
    let seed = cfg.experiment.seed;
    let bl = &cfg.buckley_leverett;

    let problem_def = BuckleyLeverettProblem {
        x_domain: (bl.x_start, bl.x_end),
        t_domain: (0.0, bl.t_end),
        u_left: bl.u_left,
        u_right: bl.u_right,
    };
    let reference = datagen::solve_bl_reference(&problem_def, bl.reference_nx, bl.reference_nt)?;

    // Final-time reference profile is the artifact the surrogate is judged
    // against.
    {
        let path = run_dir.join("data/reference_final.csv");
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,u")?;
        let last = reference.u.last().expect("reference has time levels");
        for (x, u) in reference.x.iter().zip(last) {
            writeln!(out, "{x},{u}")?;
        }
    }

    let dataset = datagen::bl_dataset(
        &problem_def,
        &reference,
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

    let grid = CollocationGrid::buckley_leverett(
        &problem_def,
        cfg.training.bl_collocation_nt,
        cfg.training.bl_collocation_nx,
        cfg.training.bl_ic_points,
    );
    let problem = PinnProblem::BuckleyLeverett(problem_def.clone());
    let fit = conformal_pinn::physics::fit_pinn(
        &problem,
        &parts.train,
        &grid,
        &super::forward_logistic::train_config(cfg),
        derive_seed(seed, 2),
    )?;
    fit.model.save(&run_dir.join("models/pinn.txt"))?;
    if cfg.training.emit_loss_trace {
        super::write_loss_trace(&run_dir, &fit.adam)?;
    }

    // Dense final-time comparison and surrogate error statistics.
    let t_end = bl.t_end;
    let dense_x = datagen::linspace(bl.x_start, bl.x_end, 512);
    let dense_inputs: Vec<Vec<f64>> = dense_x.iter().map(|&x| vec![t_end, x]).collect();
    let dense_pred = fit.model.forward(&dense_inputs)?;
    let dense_truth: Vec<f64> = dense_x.iter().map(|&x| reference.sample(t_end, x)).collect();
    let curve: Vec<(f64, f64, f64)> = dense_x
        .iter()
        .zip(&dense_truth)
        .zip(&dense_pred)
        .map(|((&x, &u), &p)| (x, u, p))
        .collect();
    write_fit_curve_csv(&run_dir, "x", &curve)?;

    let mut errors: Vec<f64> = dense_truth
        .iter()
        .zip(&dense_pred)
        .map(|(u, p)| (u - p).abs())
        .collect();
    errors.sort_by(f64::total_cmp);
    let max_error = *errors.last().expect("dense grid is nonempty");
    let median_error = errors[errors.len() / 2];
    {
        let path = run_dir.join("reports/error_stats.csv");
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "max_error,median_error,ratio")?;
        writeln!(out, "{max_error},{median_error},{}", max_error / median_error)?;
    }

    // Intervals from the canonical calibration split.
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
        let rows: Vec<(f64, f64, f64, f64)> = dense_x
            .iter()
            .zip(&dense_pred)
            .map(|(&x, &p)| (x, p, p - q, p + q))
            .collect();
        write_interval_csv(&run_dir, &format!("intervals_{}", alpha_tag(alpha)), "x", &rows)?;
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
            &format!("Buckley-Leverett PINN fit at t = {t_end}"),
            "x",
            "u(t, x)",
        );
        for &(alpha, q) in &half_widths {
            if q.is_finite() {
                let lo: Vec<f64> = dense_pred.iter().map(|p| p - q).collect();
                let hi: Vec<f64> = dense_pred.iter().map(|p| p + q).collect();
                let color = if alpha <= 0.12 { svg::BLUE } else { svg::GREEN };
                plot = plot.band(dense_x.clone(), lo, hi, color);
            }
        }
        plot = plot
            .line(
                dense_x.iter().zip(&dense_truth).map(|(&x, &u)| (x, u)).collect(),
                svg::GRAY,
            )
            .line(
                dense_x.iter().zip(&dense_pred).map(|(&x, &p)| (x, p)).collect(),
                svg::BLUE,
            )
            .scatter(
                parts.train.points.iter().map(|(x, y)| (x[1], *y)).collect(),
                svg::ORANGE,
            );
        plot.save(&run_dir.join("plots/fit.svg"))?;
    }

    Ok(ForwardBlOutcome {
        run_dir,
        coverage,
        half_widths,
        max_error,
        median_error,
        final_loss: fit.final_loss,
    })
}
