//! Inverse experiment: sample growth rates from the prior, train one
//! freshly initialized PINN per generated dataset, then validate the
//! conformal parameter intervals two ways — against brand-new test draws
//! and over repeated calibration/validation splits of the records.

use super::{write_coverage_artifacts, AlphaCoverage};
use crate::config::{prepare_run_dir, ExperimentConfig, ExperimentKind, SamplingKind};
use crate::error::{CliError, Result};
use crate::svg::{self, Plot};
use conformal_pinn::harness::{
    self, derive_seed, BetaSampling, InversePipelineConfig,
};
use conformal_pinn::optim::LbfgsConfig;
use conformal_pinn::physics::TrainConfig;
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Debug)]
pub struct InverseOutcome {
    pub run_dir: PathBuf,
    pub n_records: usize,
    pub mean_abs_error: f64,
    pub fresh_test: AlphaCoverage,
    pub repeated_split: AlphaCoverage,
}

fn pipeline_config(cfg: &ExperimentConfig, run_dir: &PathBuf) -> InversePipelineConfig {
    let forward_train = super::forward_logistic::train_config(cfg);
    InversePipelineConfig {
        prior_lo: cfg.inverse.prior_lo,
        prior_hi: cfg.inverse.prior_hi,
        sampling: match cfg.inverse.sampling {
            SamplingKind::Uniform => BetaSampling::Uniform,
            SamplingKind::Equispaced => BetaSampling::Equispaced,
        },
        n_datasets: cfg.inverse.n_datasets,
        points_per_dataset: cfg.inverse.points_per_dataset,
        t_domain: (0.0, cfg.inverse.t_end),
        n0: cfg.logistic.n0,
        noise_sigma: cfg.inverse.noise_sigma,
        collocation_points: cfg.training.collocation_points,
        train: TrainConfig {
            lbfgs: LbfgsConfig {
                max_iterations: cfg.inverse.lbfgs_max_iterations,
                gradient_tolerance: 1e-8,
                ..forward_train.lbfgs
            },
            ..forward_train
        },
        seed: derive_seed(cfg.experiment.seed, 10),
        save_models_dir: cfg
            .inverse
            .save_models
            .then(|| run_dir.join("models")),
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<InverseOutcome> {
    cfg.validate()?;
    let run_dir = prepare_run_dir(cfg, ExperimentKind::Inverse)?;
    let seed = cfg.experiment.seed;
    let pipeline = pipeline_config(cfg, &run_dir);

    // Records stream into the CSV as they are finalized, in index order.
    let records_path = run_dir.join("reports/records.csv");
    let mut records_file = std::io::BufWriter::new(std::fs::File::create(&records_path)?);
    harness::write_records_header(&mut records_file)?;
    let records = harness::run_inverse_pipeline(&pipeline, |_, record| {
        harness::write_record_row(&mut records_file, record)?;
        records_file.flush()?;
        Ok(())
    })?;
    drop(records_file);

    let mean_abs_error = records
        .iter()
        .map(|r| (r.beta_true - r.beta_hat).abs())
        .sum::<f64>()
        / records.len() as f64;

    let alpha = cfg.inverse.alpha;

    // Fresh-test coverage: new (beta, dataset, estimate) draws per test.
    let fresh_report = harness::inverse_fresh_test_coverage(
        &records,
        cfg.inverse.n_calibration,
        alpha,
        cfg.inverse.n_tests,
        derive_seed(seed, 11),
        &pipeline,
    )?;
    let fresh_test =
        write_coverage_artifacts(cfg, &run_dir, "coverage_fresh_test", &fresh_report)?;

    // Repeated-split coverage over the fixed record set.
    let split_report = harness::inverse_repeated_split_coverage(
        &records,
        cfg.inverse.repeated_split_n_calibration,
        cfg.inverse.repeated_split_n_validation,
        alpha,
        cfg.inverse.repeated_split_trials,
        derive_seed(seed, 12),
    )?;
    let repeated_split =
        write_coverage_artifacts(cfg, &run_dir, "coverage_repeated_split", &split_report)?;

    // Summary of both procedures for quick inspection.
    {
        let path = run_dir.join("reports/summary.csv");
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "procedure,alpha,n_calibration,trials,final_mean,theoretical")?;
        writeln!(
            out,
            "fresh-test,{alpha},{},{},{},{}",
            cfg.inverse.n_calibration,
            cfg.inverse.n_tests,
            fresh_test.final_mean,
            fresh_test.theoretical
        )?;
        writeln!(
            out,
            "repeated-split,{alpha},{},{},{},{}",
            cfg.inverse.repeated_split_n_calibration,
            cfg.inverse.repeated_split_trials,
            repeated_split.final_mean,
            repeated_split.theoretical
        )?;
    }

    if !cfg.experiment.no_plots {
        let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.beta_true, r.beta_hat)).collect();
        let (lo, hi) = (cfg.inverse.prior_lo, cfg.inverse.prior_hi);
        Plot::new(
            &format!(
                "Inferred vs true growth rate ({} datasets, noise {})",
                records.len(),
                cfg.inverse.noise_sigma
            ),
            "true beta",
            "estimated beta",
        )
        .dashed_line(vec![(lo, lo), (hi, hi)], svg::GRAY)
        .scatter(pts, svg::BLUE)
        .save(&run_dir.join("plots/scatter.svg"))?;
    }

    if records.is_empty() {
        return Err(CliError::Config("inverse pipeline produced no records".into()));
    }
    Ok(InverseOutcome {
        run_dir,
        n_records: records.len(),
        mean_abs_error,
        fresh_test,
        repeated_split,
    })
}
