//! One module per experiment subcommand.

pub mod coverage;
pub mod forward_bl;
pub mod forward_logistic;
pub mod inverse;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::svg::{self, Plot};
use conformal_pinn::harness::CoverageReport;
use conformal_pinn::optim::AdamTrace;
use std::io::Write as _;
use std::path::Path;

/// Final running-mean coverage of one report, for run summaries.
#[derive(Debug, Clone, Copy)]
pub struct AlphaCoverage {
    pub alpha: f64,
    pub final_mean: f64,
    pub theoretical: f64,
}

pub(crate) fn write_coverage_artifacts(
    cfg: &ExperimentConfig,
    run_dir: &Path,
    name: &str,
    report: &CoverageReport,
) -> Result<AlphaCoverage> {
    report.write_csv(&run_dir.join("reports").join(format!("{name}.csv")))?;
    if !cfg.experiment.no_plots {
        let points: Vec<(f64, f64)> = report
            .running_mean
            .iter()
            .enumerate()
            .map(|(i, &m)| ((i + 1) as f64, m))
            .collect();
        let x_hi = points.len() as f64;
        Plot::new(
            &format!(
                "Running mean coverage, alpha = {} (target {:.5})",
                report.alpha, report.theoretical
            ),
            "trial",
            "mean coverage",
        )
        .hline(report.theoretical, 1.0, x_hi, svg::RED)
        .line(points, svg::BLUE)
        .save(&run_dir.join("plots").join(format!("{name}.svg")))?;
    }
    Ok(AlphaCoverage {
        alpha: report.alpha,
        final_mean: report.final_running_mean(),
        theoretical: report.theoretical,
    })
}

pub(crate) fn write_loss_trace(run_dir: &Path, trace: &AdamTrace) -> Result<()> {
    let path = run_dir.join("reports").join("adam_loss_trace.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,loss")?;
    for (epoch, loss) in trace.losses.iter().enumerate() {
        writeln!(out, "{epoch},{loss}")?;
    }
    Ok(())
}

/// `alpha` rendered for a file name (`0.1` -> `alpha_0.1`).
pub(crate) fn alpha_tag(alpha: f64) -> String {
    format!("alpha_{alpha}")
}

pub(crate) fn write_interval_csv(
    run_dir: &Path,
    name: &str,
    input_label: &str,
    rows: &[(f64, f64, f64, f64)],
) -> Result<()> {
    let path = run_dir.join("reports").join(format!("{name}.csv"));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{input_label},prediction,lower,upper")?;
    for (x, pred, lo, hi) in rows {
        writeln!(out, "{x},{pred},{lo},{hi}")?;
    }
    Ok(())
}

pub(crate) fn write_fit_curve_csv(
    run_dir: &Path,
    input_label: &str,
    rows: &[(f64, f64, f64)],
) -> Result<()> {
    let path = run_dir.join("reports").join("fit_curve.csv");
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{input_label},truth,prediction")?;
    for (x, truth, pred) in rows {
        writeln!(out, "{x},{truth},{pred}")?;
    }
    Ok(())
}
