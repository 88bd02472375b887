//! Experiment configuration: a sectioned TOML file whose resolved form is
//! snapshotted alongside every run's outputs. CLI flags override file
//! values; rerunning from a snapshot reproduces the run byte for byte.

use crate::error::{CliError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    ForwardLogistic,
    ForwardBl,
    Inverse,
    Coverage,
}

impl ExperimentKind {
    pub fn dir_name(self) -> &'static str {
        match self {
            ExperimentKind::ForwardLogistic => "forward-logistic",
            ExperimentKind::ForwardBl => "forward-bl",
            ExperimentKind::Inverse => "inverse",
            ExperimentKind::Coverage => "coverage",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: Option<ExperimentKind>,
    pub label: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub no_plots: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            kind: None,
            label: "run".into(),
            seed: 0,
            out_dir: PathBuf::from("runs"),
            no_plots: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticSection {
    pub beta: f64,
    pub n0: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl Default for LogisticSection {
    fn default() -> Self {
        LogisticSection {
            beta: 0.05,
            n0: 0.1,
            t_start: 0.0,
            t_end: 150.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuckleyLeverettSection {
    pub x_start: f64,
    pub x_end: f64,
    pub t_end: f64,
    pub u_left: f64,
    pub u_right: f64,
    /// Spatial resolution of the Godunov reference solve.
    pub reference_nx: usize,
    /// Stored time levels of the reference solve.
    pub reference_nt: usize,
}

impl Default for BuckleyLeverettSection {
    fn default() -> Self {
        BuckleyLeverettSection {
            x_start: -1.0,
            x_end: 1.0,
            t_end: 1.0,
            u_left: -3.0,
            u_right: 3.0,
            reference_nx: 800,
            reference_nt: 64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub n_points: usize,
    pub noise_sigma: f64,
    pub n_train: usize,
    pub n_holdout: usize,
    pub n_test: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            n_points: 150,
            noise_sigma: 0.08,
            n_train: 25,
            n_holdout: 100,
            n_test: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformalSection {
    pub alphas: Vec<f64>,
    pub n_calibration: usize,
    pub n_validation: usize,
    pub trials: usize,
}

impl Default for ConformalSection {
    fn default() -> Self {
        ConformalSection {
            alphas: vec![0.1, 0.5],
            n_calibration: 80,
            n_validation: 20,
            trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub hidden: Vec<usize>,
    pub collocation_points: usize,
    pub bl_collocation_nt: usize,
    pub bl_collocation_nx: usize,
    pub bl_ic_points: usize,
    pub w_data: f64,
    pub w_physics: f64,
    pub w_ic: f64,
    pub adam_epochs: usize,
    pub adam_lr_start: f64,
    pub adam_lr_end: f64,
    pub lbfgs_history: usize,
    pub lbfgs_max_iterations: usize,
    pub lbfgs_gradient_tolerance: f64,
    pub lbfgs_step_tolerance: f64,
    pub emit_loss_trace: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            hidden: vec![10, 10],
            collocation_points: 200,
            bl_collocation_nt: 50,
            bl_collocation_nx: 50,
            bl_ic_points: 100,
            w_data: 1.0,
            w_physics: 1.0,
            w_ic: 1.0,
            adam_epochs: 100,
            adam_lr_start: 1e-2,
            adam_lr_end: 1e-4,
            lbfgs_history: 50,
            lbfgs_max_iterations: 500,
            lbfgs_gradient_tolerance: 1e-9,
            lbfgs_step_tolerance: 1e-12,
            emit_loss_trace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingKind {
    Uniform,
    Equispaced,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseSection {
    pub prior_lo: f64,
    pub prior_hi: f64,
    pub sampling: SamplingKind,
    pub n_datasets: usize,
    pub points_per_dataset: usize,
    pub t_end: f64,
    pub noise_sigma: f64,
    pub n_calibration: usize,
    pub alpha: f64,
    pub n_tests: usize,
    pub repeated_split_trials: usize,
    pub repeated_split_n_calibration: usize,
    pub repeated_split_n_validation: usize,
    /// Cap on the per-record L-BFGS phase; the full "until convergence"
    /// schedule buys nothing for coverage (it is rank-based) and costs
    /// thousands of iterations per record.
    pub lbfgs_max_iterations: usize,
    pub save_models: bool,
}

impl Default for InverseSection {
    fn default() -> Self {
        InverseSection {
            prior_lo: 0.0,
            prior_hi: 0.5,
            sampling: SamplingKind::Uniform,
            n_datasets: 1000,
            points_per_dataset: 10,
            t_end: 30.0,
            noise_sigma: 0.0,
            n_calibration: 800,
            alpha: 0.2,
            n_tests: 1000,
            repeated_split_trials: 10_000,
            repeated_split_n_calibration: 800,
            repeated_split_n_validation: 200,
            lbfgs_max_iterations: 200,
            save_models: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CoverageSection {
    /// 0 means: use 80% of the file's rows.
    pub n_calibration: usize,
    /// 0 means: the remaining rows.
    pub n_validation: usize,
}

/// The full resolved configuration of one experiment run.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub logistic: LogisticSection,
    pub buckley_leverett: BuckleyLeverettSection,
    pub data: DataSection,
    pub conformal: ConformalSection,
    pub training: TrainingSection,
    pub inverse: InverseSection,
    pub coverage: CoverageSection,
}

/// Flag overrides shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub noise: Option<f64>,
    pub alphas: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub no_plots: bool,
    pub label: Option<String>,
}

impl ExperimentConfig {
    /// Baseline configuration for a given experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let mut cfg = ExperimentConfig::default();
        cfg.experiment.kind = Some(kind);
        match kind {
            ExperimentKind::ForwardLogistic => {}
            ExperimentKind::ForwardBl => {
                // Noiseless data on the final-time line; the second interval
                // level is 85%.
                cfg.data.noise_sigma = 0.0;
                cfg.conformal.alphas = vec![0.1, 0.15];
            }
            ExperimentKind::Inverse => {
                cfg.conformal.alphas = vec![0.2];
            }
            ExperimentKind::Coverage => {
                cfg.conformal.alphas = vec![0.1];
            }
        }
        cfg
    }

    pub fn load(path: &Path, kind: ExperimentKind) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if let Some(stated) = cfg.experiment.kind {
            if stated != kind {
                return Err(CliError::Config(format!(
                    "config file is for experiment `{}`, not `{}`",
                    stated.dir_name(),
                    kind.dir_name()
                )));
            }
        }
        Ok(cfg)
    }

    /// Load the file when given, otherwise take the per-kind defaults; then
    /// apply flag overrides and validate.
    pub fn resolve(
        path: Option<&Path>,
        kind: ExperimentKind,
        overrides: &Overrides,
    ) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::load(p, kind)?,
            None => Self::default_for(kind),
        };
        cfg.experiment.kind = Some(kind);
        if let Some(seed) = overrides.seed {
            cfg.experiment.seed = seed;
        }
        if let Some(out) = &overrides.out {
            cfg.experiment.out_dir = out.clone();
        }
        if let Some(noise) = overrides.noise {
            cfg.data.noise_sigma = noise;
            cfg.inverse.noise_sigma = noise;
        }
        if let Some(alphas) = &overrides.alphas {
            cfg.conformal.alphas = alphas.clone();
            if kind == ExperimentKind::Inverse {
                if let Some(&first) = alphas.first() {
                    cfg.inverse.alpha = first;
                }
            }
        }
        if let Some(trials) = overrides.trials {
            cfg.conformal.trials = trials;
            cfg.inverse.repeated_split_trials = trials;
        }
        if overrides.no_plots {
            cfg.experiment.no_plots = true;
        }
        if let Some(label) = &overrides.label {
            cfg.experiment.label = label.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Cross-field consistency checks, run before any compute.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(CliError::Config(msg));
        if self.experiment.label.is_empty()
            || self.experiment.label.contains('/')
            || self.experiment.label.contains("..")
        {
            return fail(format!(
                "label {:?} must be a plain directory name",
                self.experiment.label
            ));
        }
        if self.data.n_train + self.data.n_holdout + self.data.n_test != self.data.n_points {
            return fail(format!(
                "split sizes {}+{}+{} do not sum to n_points = {}",
                self.data.n_train, self.data.n_holdout, self.data.n_test, self.data.n_points
            ));
        }
        if self.conformal.n_calibration + self.conformal.n_validation != self.data.n_holdout {
            return fail(format!(
                "calibration + validation = {} does not match holdout size {}",
                self.conformal.n_calibration + self.conformal.n_validation,
                self.data.n_holdout
            ));
        }
        if self.conformal.alphas.is_empty() {
            return fail("at least one alpha level is required".into());
        }
        for &a in &self.conformal.alphas {
            if !(a > 0.0 && a < 1.0) {
                return fail(format!("alpha {a} outside (0, 1)"));
            }
        }
        if self.data.noise_sigma < 0.0 || self.inverse.noise_sigma < 0.0 {
            return fail("noise sigma must be >= 0".into());
        }
        if self.conformal.trials == 0 {
            return fail("trials must be >= 1".into());
        }
        if self.inverse.n_calibration > self.inverse.n_datasets {
            return fail(format!(
                "inverse n_calibration {} exceeds n_datasets {}",
                self.inverse.n_calibration, self.inverse.n_datasets
            ));
        }
        if self.inverse.repeated_split_n_calibration + self.inverse.repeated_split_n_validation
            != self.inverse.n_datasets
        {
            return fail(format!(
                "inverse repeated-split sizes {}+{} do not sum to n_datasets = {}",
                self.inverse.repeated_split_n_calibration,
                self.inverse.repeated_split_n_validation,
                self.inverse.n_datasets
            ));
        }
        if !(self.inverse.prior_lo < self.inverse.prior_hi) {
            return fail("inverse prior bounds must satisfy lo < hi".into());
        }
        Ok(())
    }

    pub fn snapshot(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CliError::Parse(format!("config serialization failed: {e}")))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// `<out_dir>/<experiment>/<label>/` with the standard subdirectories.
    pub fn run_dir(&self, kind: ExperimentKind) -> PathBuf {
        self.experiment
            .out_dir
            .join(kind.dir_name())
            .join(&self.experiment.label)
    }
}

/// Create the run directory tree and write the config snapshot.
pub fn prepare_run_dir(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<PathBuf> {
    let dir = cfg.run_dir(kind);
    for sub in ["data", "models", "reports", "plots"] {
        std::fs::create_dir_all(dir.join(sub))?;
    }
    cfg.snapshot(&dir.join("config.toml"))?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_for_every_kind() {
        for kind in [
            ExperimentKind::ForwardLogistic,
            ExperimentKind::ForwardBl,
            ExperimentKind::Inverse,
            ExperimentKind::Coverage,
        ] {
            ExperimentConfig::default_for(kind).validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_preserves_floats_exactly() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::ForwardLogistic);
        cfg.data.noise_sigma = 0.1 + 0.2;
        cfg.logistic.beta = 1.0 / 3.0;
        let text = toml::to_string_pretty(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.data.noise_sigma.to_bits(), cfg.data.noise_sigma.to_bits());
        assert_eq!(back.logistic.beta.to_bits(), cfg.logistic.beta.to_bits());
    }

    #[test]
    fn overrides_take_precedence() {
        let ov = Overrides {
            seed: Some(42),
            noise: Some(0.0),
            alphas: Some(vec![0.25]),
            trials: Some(77),
            no_plots: true,
            label: Some("custom".into()),
            out: None,
        };
        let cfg =
            ExperimentConfig::resolve(None, ExperimentKind::ForwardLogistic, &ov).unwrap();
        assert_eq!(cfg.experiment.seed, 42);
        assert_eq!(cfg.data.noise_sigma, 0.0);
        assert_eq!(cfg.conformal.alphas, vec![0.25]);
        assert_eq!(cfg.conformal.trials, 77);
        assert!(cfg.experiment.no_plots);
        assert_eq!(cfg.experiment.label, "custom");
    }

    #[test]
    fn inconsistent_sizes_are_rejected_before_compute() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::ForwardLogistic);
        cfg.data.n_train = 30;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));

        let mut cfg = ExperimentConfig::default_for(ExperimentKind::Inverse);
        cfg.inverse.n_calibration = 5000;
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }
}
