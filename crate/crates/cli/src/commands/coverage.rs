//! Re-run the repeated-split coverage analysis on any persisted
//! prediction/truth CSV, without retraining anything.

use super::{alpha_tag, write_coverage_artifacts, AlphaCoverage};
use crate::config::{prepare_run_dir, ExperimentConfig, ExperimentKind};
use crate::error::{CliError, Result};
use conformal_pinn::harness::{self, derive_seed};
use std::io::BufRead;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub struct CoverageOutcome {
    pub run_dir: PathBuf,
    pub n_pairs: usize,
    pub n_calibration: usize,
    pub n_validation: usize,
    pub coverage: Vec<AlphaCoverage>,
}

/// Parse a CSV with named `truth` and `prediction` columns (any other
/// columns, such as inputs, are carried past).
pub fn read_prediction_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = file.lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| CliError::Parse(format!("{}: empty file", path.display())))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| -> Result<usize> {
        columns.iter().position(|c| *c == name).ok_or_else(|| {
            CliError::Parse(format!(
                "{}: missing required column `{name}` (header: {header})",
                path.display()
            ))
        })
    };
    let truth_col = find("truth")?;
    let pred_col = find("prediction")?;

    let mut pairs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(CliError::Parse(format!(
                "{}:{}: expected {} fields, got {}",
                path.display(),
                lineno + 2,
                columns.len(),
                fields.len()
            )));
        }
        let parse = |idx: usize| -> Result<f64> {
            fields[idx].trim().parse().map_err(|e| {
                CliError::Parse(format!(
                    "{}:{}: bad float {:?}: {e}",
                    path.display(),
                    lineno + 2,
                    fields[idx]
                ))
            })
        };
        pairs.push((parse(pred_col)?, parse(truth_col)?));
    }
    if pairs.is_empty() {
        return Err(CliError::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(pairs)
}

pub fn run(cfg: &ExperimentConfig, predictions_file: &Path) -> Result<CoverageOutcome> {
    cfg.validate()?;
    let pairs = read_prediction_pairs(predictions_file)?;
    let n = pairs.len();

    // Explicit sizes when configured; an 80/20 split otherwise.
    let (n_cal, n_val) = match (cfg.coverage.n_calibration, cfg.coverage.n_validation) {
        (0, 0) => {
            let c = ((n as f64 * 0.8).round() as usize).clamp(1, n.saturating_sub(1));
            (c, n - c)
        }
        (c, 0) => (c, n.saturating_sub(c)),
        (c, v) => (c, v),
    };
    if n_cal + n_val != n || n_cal == 0 || n_val == 0 {
        return Err(CliError::Config(format!(
            "calibration/validation sizes {n_cal}/{n_val} do not fit {n} rows"
        )));
    }

    let run_dir = prepare_run_dir(cfg, ExperimentKind::Coverage)?;
    let mut coverage = Vec::new();
    for (i, &alpha) in cfg.conformal.alphas.iter().enumerate() {
        let report = harness::repeated_split_coverage(
            &pairs,
            n_cal,
            n_val,
            alpha,
            cfg.conformal.trials,
            derive_seed(cfg.experiment.seed, 20 + i as u64),
        )?;
        coverage.push(write_coverage_artifacts(
            cfg,
            &run_dir,
            &format!("coverage_{}", alpha_tag(alpha)),
            &report,
        )?);
    }

    Ok(CoverageOutcome {
        run_dir,
        n_pairs: n,
        n_calibration: n_cal,
        n_validation: n_val,
        coverage,
    })
}
