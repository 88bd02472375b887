//! Coverage validation machinery: repeated calibration/validation splitting
//! with running-mean coverage, and the inverse-problem pipeline with
//! fresh-test-point coverage.
//!
//! All randomness is per-trial (or per-record), derived from a master seed
//! by a counter-based scheme, so trials parallelize freely and every record
//! is reproducible on its own. Reports are assembled in trial order
//! regardless of completion order.

use crate::conformal::{self, ScoreSet};
use crate::datagen::{self, Dataset, DatasetMeta};
use crate::error::{Error, Result};
use crate::optim::TerminationReason;
use crate::physics::{CollocationGrid, LogisticProblem, PinnProblem, TrainConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::{BufRead, Write};
use std::path::Path;

/// Counter-based sub-seed derivation (SplitMix64 finalizer over the master
/// seed and a stream index). Stable across platforms and versions.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E3779B97F4A7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-trial empirical coverages with their running mean, against the exact
/// theoretical target.
#[derive(Debug, Clone)]
pub struct CoverageReport {
    pub per_trial: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub theoretical: f64,
    pub n_calibration: usize,
    pub n_validation: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl CoverageReport {
    fn from_trials(
        per_trial: Vec<f64>,
        theoretical: f64,
        n_calibration: usize,
        n_validation: usize,
        alpha: f64,
        seed: u64,
    ) -> Self {
        let mut running_mean = Vec::with_capacity(per_trial.len());
        let mut acc = 0.0;
        for (i, &c) in per_trial.iter().enumerate() {
            acc += c;
            running_mean.push(acc / (i + 1) as f64);
        }
        CoverageReport {
            per_trial,
            running_mean,
            theoretical,
            n_calibration,
            n_validation,
            alpha,
            seed,
        }
    }

    pub fn trials(&self) -> usize {
        self.per_trial.len()
    }

    pub fn final_running_mean(&self) -> f64 {
        *self.running_mean.last().unwrap_or(&f64::NAN)
    }

    /// `trial,coverage,running_mean,theoretical` rows under a header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "trial,coverage,running_mean,theoretical")?;
        for (i, (c, rm)) in self.per_trial.iter().zip(&self.running_mean).enumerate() {
            writeln!(out, "{},{},{},{}", i, c, rm, self.theoretical)?;
        }
        Ok(())
    }
}

/// Repeated-split coverage for a fixed predictor: per trial, randomly split
/// the holdout pairs into calibration and validation, build the conformal
/// quantile on the calibration scores, and record the fraction of validation
/// truths covered. The predictions are computed once by the caller; only the
/// split is re-randomized.
pub fn repeated_split_coverage(
    pairs: &[(f64, f64)],
    n_calibration: usize,
    n_validation: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<CoverageReport> {
    if pairs.len() != n_calibration + n_validation {
        return Err(Error::shape(
            "holdout pairs",
            n_calibration + n_validation,
            pairs.len(),
        ));
    }
    if n_calibration == 0 || n_validation == 0 || trials == 0 {
        return Err(Error::invalid_config(
            "repeated_split_coverage needs n_calibration, n_validation, trials >= 1",
        ));
    }
    let theoretical = conformal::theoretical_coverage(n_calibration, alpha)?;

    let per_trial: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let mut idx: Vec<usize> = (0..pairs.len()).collect();
            idx.shuffle(&mut rng);
            let scores: Vec<f64> = idx[..n_calibration]
                .iter()
                .map(|&i| (pairs[i].1 - pairs[i].0).abs())
                .collect();
            let q = conformal::conformal_quantile(
                &ScoreSet::new(scores).expect("absolute errors are valid scores"),
                alpha,
            )
            .expect("alpha validated above");
            let covered = idx[n_calibration..]
                .iter()
                .filter(|&&i| {
                    let (pred, truth) = pairs[i];
                    let iv = conformal::make_interval(pred, q, alpha)
                        .expect("quantile is nonnegative");
                    conformal::covered(&iv, truth)
                })
                .count();
            covered as f64 / n_validation as f64
        })
        .collect();

    Ok(CoverageReport::from_trials(
        per_trial,
        theoretical,
        n_calibration,
        n_validation,
        alpha,
        seed,
    ))
}

/// One trained inverse-problem instance: the sampled true growth rate, the
/// estimate a freshly initialized PINN produced for it, and the training
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseRecord {
    pub beta_true: f64,
    pub beta_hat: f64,
    pub seed: u64,
    pub final_loss: f64,
    pub termination: TerminationReason,
}

/// How the per-record true growth rates are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaSampling {
    /// i.i.d. Uniform[lo, hi) draws.
    Uniform,
    /// `beta_j = lo + (hi - lo) j / n` for `j = 0..n-1`.
    Equispaced,
}

/// Configuration of the inverse pipeline: the prior over growth rates, the
/// per-dataset generation setup, and the training schedule.
#[derive(Debug, Clone)]
pub struct InversePipelineConfig {
    pub prior_lo: f64,
    pub prior_hi: f64,
    pub sampling: BetaSampling,
    pub n_datasets: usize,
    pub points_per_dataset: usize,
    pub t_domain: (f64, f64),
    pub n0: f64,
    pub noise_sigma: f64,
    pub collocation_points: usize,
    pub train: TrainConfig,
    pub seed: u64,
    /// When set, every trained model is written here as
    /// `record_<j>.txt` alongside the records.
    pub save_models_dir: Option<std::path::PathBuf>,
}

impl Default for InversePipelineConfig {
    fn default() -> Self {
        InversePipelineConfig {
            prior_lo: 0.0,
            prior_hi: 0.5,
            sampling: BetaSampling::Uniform,
            n_datasets: 1000,
            points_per_dataset: 10,
            t_domain: (0.0, 30.0),
            n0: 0.1,
            noise_sigma: 0.0,
            collocation_points: 200,
            train: Self::default_train(),
            seed: 0,
            save_models_dir: None,
        }
    }
}

impl InversePipelineConfig {
    /// Training schedule for the per-dataset fits. The L-BFGS phase is
    /// capped: estimates near 1e-5 accuracy are already far inside the
    /// interval widths these records produce, and the conformal guarantee
    /// does not depend on estimator quality, so thousands of polishing
    /// iterations per record buy nothing.
    pub fn default_train() -> TrainConfig {
        TrainConfig {
            lbfgs: crate::optim::LbfgsConfig {
                max_iterations: 200,
                gradient_tolerance: 1e-8,
                ..crate::optim::LbfgsConfig::default()
            },
            ..TrainConfig::default()
        }
    }
}

impl InversePipelineConfig {
    fn validate(&self) -> Result<()> {
        if self.n_datasets == 0 || self.points_per_dataset == 0 {
            return Err(Error::invalid_config(
                "inverse pipeline needs n_datasets and points_per_dataset >= 1",
            ));
        }
        if !(self.prior_lo < self.prior_hi) {
            return Err(Error::invalid_config("prior bounds must satisfy lo < hi"));
        }
        Ok(())
    }

    fn beta_for(&self, j: usize) -> f64 {
        match self.sampling {
            BetaSampling::Uniform => {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 4 * j as u64));
                datagen::sample_beta(self.prior_lo, self.prior_hi, &mut rng)
            }
            BetaSampling::Equispaced => {
                self.prior_lo
                    + (self.prior_hi - self.prior_lo) * j as f64 / self.n_datasets as f64
            }
        }
    }
}

/// Generate one inverse record: sample the growth rate, solve the ODE on the
/// configured time grid, add noise, train a freshly initialized inverse-mode
/// PINN, and report its estimate with diagnostics.
pub fn generate_inverse_record(cfg: &InversePipelineConfig, j: usize) -> Result<InverseRecord> {
    let record_seed = derive_seed(cfg.seed, 4 * j as u64 + 1);
    let noise_seed = derive_seed(cfg.seed, 4 * j as u64 + 2);
    let beta_true = cfg.beta_for(j);

    let grid_t = datagen::linspace(cfg.t_domain.0, cfg.t_domain.1, cfg.points_per_dataset);
    let traj = datagen::solve_ode_rk4(beta_true, cfg.n0, &grid_t)?;
    let clean = Dataset::new(
        grid_t.iter().zip(&traj).map(|(&t, &v)| (vec![t], v)).collect(),
        DatasetMeta {
            problem: "logistic-inverse".into(),
            true_beta: Some(beta_true),
            noise_sigma: 0.0,
            seed: noise_seed,
        },
    );
    let data = datagen::add_noise(&clean, cfg.noise_sigma, noise_seed)?;

    let problem_def = LogisticProblem {
        beta: beta_true,
        n0: cfg.n0,
        t_domain: cfg.t_domain,
        inverse_mode: true,
    };
    let grid = CollocationGrid::logistic(&problem_def, cfg.collocation_points);
    let problem = PinnProblem::Logistic(problem_def);
    let fit = crate::physics::fit_pinn(&problem, &data, &grid, &cfg.train, record_seed)?;
    if let Some(dir) = &cfg.save_models_dir {
        fit.model.save(&dir.join(format!("record_{j:04}.txt")))?;
    }
    Ok(InverseRecord {
        beta_true,
        beta_hat: fit.model.beta().expect("inverse-mode model carries beta"),
        seed: record_seed,
        final_loss: fit.final_loss,
        termination: fit.lbfgs.termination,
    })
}

/// Run the whole inverse pipeline. Records are generated in parallel with
/// per-record seeds and streamed to `on_record` in index order as soon as
/// each contiguous prefix completes, so persistence is incremental and
/// append-only. Non-converging trainings are recorded with their
/// diagnostics, never dropped.
pub fn run_inverse_pipeline<S>(
    cfg: &InversePipelineConfig,
    mut on_record: S,
) -> Result<Vec<InverseRecord>>
where
    S: FnMut(usize, &InverseRecord) -> Result<()>,
{
    cfg.validate()?;
    let n = cfg.n_datasets;
    let (tx, rx) = std::sync::mpsc::channel::<(usize, Result<InverseRecord>)>();

    let records = std::thread::scope(|scope| -> Result<Vec<InverseRecord>> {
        scope.spawn(move || {
            (0..n).into_par_iter().for_each_with(tx, |tx, j| {
                let rec = generate_inverse_record(cfg, j);
                // Receiver hangs up only on error; nothing left to do then.
                let _ = tx.send((j, rec));
            });
        });

        let mut pending: Vec<Option<InverseRecord>> = (0..n).map(|_| None).collect();
        let mut next_flush = 0usize;
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let (j, rec) = rx
                .recv()
                .map_err(|_| Error::invalid_config("record generation thread vanished"))?;
            pending[j] = Some(rec?);
            while next_flush < n {
                let Some(slot) = pending[next_flush].take() else {
                    break;
                };
                on_record(next_flush, &slot)?;
                out.push(slot);
                next_flush += 1;
            }
        }
        Ok(out)
    })?;
    Ok(records)
}

/// Fresh-test-point coverage of the inverse intervals: per test, re-draw a
/// calibration subset of the records, build the interval from the
/// `|beta - beta_hat|` score quantile, then sample a brand-new test growth
/// rate, generate its dataset, train a fresh PINN, and check whether the
/// interval around that estimate covers the truth.
pub fn inverse_fresh_test_coverage(
    records: &[InverseRecord],
    n_calibration: usize,
    alpha: f64,
    n_tests: usize,
    seed: u64,
    cfg: &InversePipelineConfig,
) -> Result<CoverageReport> {
    if records.len() < n_calibration {
        return Err(Error::shape(
            "inverse calibration records",
            n_calibration,
            records.len(),
        ));
    }
    if n_tests == 0 || n_calibration == 0 {
        return Err(Error::invalid_config(
            "inverse_fresh_test_coverage needs n_tests and n_calibration >= 1",
        ));
    }
    let theoretical = conformal::theoretical_coverage(n_calibration, alpha)?;

    let per_trial: Vec<f64> = (0..n_tests)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let trial_seed = derive_seed(seed, i as u64);
            // Calibration subset, re-drawn per test.
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
            let mut idx: Vec<usize> = (0..records.len()).collect();
            idx.shuffle(&mut rng);
            let scores: Vec<f64> = idx[..n_calibration]
                .iter()
                .map(|&j| (records[j].beta_true - records[j].beta_hat).abs())
                .collect();
            let q = conformal::conformal_quantile(&ScoreSet::new(scores)?, alpha)?;

            // Fresh (beta_test, D_test) drawn and trained exactly like the
            // pipeline records, from an independent seed stream.
            let test_cfg = InversePipelineConfig {
                seed: derive_seed(seed, 0x5EED_0000 + i as u64),
                sampling: BetaSampling::Uniform,
                n_datasets: 1,
                save_models_dir: None,
                ..cfg.clone()
            };
            let test = generate_inverse_record(&test_cfg, 0)?;
            let interval = conformal::make_interval(test.beta_hat, q, alpha)?;
            Ok(if conformal::covered(&interval, test.beta_true) {
                1.0
            } else {
                0.0
            })
        })
        .collect::<Result<_>>()?;

    Ok(CoverageReport::from_trials(
        per_trial,
        theoretical,
        n_calibration,
        n_tests,
        alpha,
        seed,
    ))
}

/// Repeated-split coverage over the `(beta, beta_hat)` record pairs, exactly
/// as [`repeated_split_coverage`] does for forward predictions.
pub fn inverse_repeated_split_coverage(
    records: &[InverseRecord],
    n_calibration: usize,
    n_validation: usize,
    alpha: f64,
    trials: usize,
    seed: u64,
) -> Result<CoverageReport> {
    let pairs: Vec<(f64, f64)> = records
        .iter()
        .map(|r| (r.beta_hat, r.beta_true))
        .collect();
    repeated_split_coverage(&pairs, n_calibration, n_validation, alpha, trials, seed)
}

/// Write inverse records as `beta_true,beta_hat,seed,final_loss,termination`.
pub fn write_records_csv(records: &[InverseRecord], path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_records_header(&mut out)?;
    for r in records {
        write_record_row(&mut out, r)?;
    }
    Ok(())
}

pub fn write_records_header<W: Write>(out: &mut W) -> Result<()> {
    writeln!(out, "beta_true,beta_hat,seed,final_loss,termination")?;
    Ok(())
}

pub fn write_record_row<W: Write>(out: &mut W, r: &InverseRecord) -> Result<()> {
    writeln!(
        out,
        "{},{},{},{},{}",
        r.beta_true, r.beta_hat, r.seed, r.final_loss, r.termination
    )?;
    Ok(())
}

pub fn read_records_csv(path: &Path) -> Result<Vec<InverseRecord>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse("empty records file".into()))?;
    if header != "beta_true,beta_hat,seed,final_loss,termination" {
        return Err(Error::Parse(format!("unexpected records header {header:?}")));
    }
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::shape("record row", 5, fields.len()));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))
        };
        records.push(InverseRecord {
            beta_true: parse_f(fields[0])?,
            beta_hat: parse_f(fields[1])?,
            seed: fields[2]
                .parse()
                .map_err(|e| Error::Parse(format!("bad seed {:?}: {e}", fields[2])))?,
            final_loss: parse_f(fields[3])?,
            termination: fields[4].parse()?,
        });
    }
    Ok(records)
}
