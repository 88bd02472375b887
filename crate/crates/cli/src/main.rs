use clap::{Args, Parser, Subcommand};
use conformal_pinn_cli::commands;
use conformal_pinn_cli::config::{ExperimentConfig, ExperimentKind, Overrides};
use conformal_pinn_cli::error::Result;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "cpinn",
    about = "Train physics-informed neural networks, wrap their predictions in split \
             conformal intervals, and validate the exact finite-sample coverage",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Sectioned TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random choice in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output root directory (default: runs).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Gaussian noise standard deviation for the generated observations.
    #[arg(long)]
    noise: Option<f64>,
    /// Comma-separated miscoverage levels, e.g. 0.1,0.5.
    #[arg(long, value_delimiter = ',')]
    alpha: Option<Vec<f64>>,
    /// Number of random calibration/validation splits.
    #[arg(long)]
    trials: Option<usize>,
    /// Skip SVG plot emission.
    #[arg(long)]
    no_plots: bool,
    /// Name of the run directory under <out>/<experiment>/.
    #[arg(long)]
    label: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            noise: self.noise,
            alphas: self.alpha.clone(),
            trials: self.trials,
            no_plots: self.no_plots,
            label: self.label.clone(),
        }
    }

    fn resolve(&self, kind: ExperimentKind) -> Result<ExperimentConfig> {
        ExperimentConfig::resolve(self.config.as_deref(), kind, &self.overrides())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Logistic growth forward problem with conformalized solution intervals.
    ForwardLogistic(RunArgs),
    /// Buckley-Leverett forward problem: valid coverage despite a poor fit.
    ForwardBl(RunArgs),
    /// Inverse problem: conformal intervals over estimated growth rates.
    Inverse(RunArgs),
    /// Coverage analysis of an existing prediction/truth CSV.
    Coverage {
        /// CSV with `truth` and `prediction` columns.
        file: PathBuf,
        #[command(flatten)]
        args: RunArgs,
    },
}

fn print_coverage_lines(coverage: &[commands::AlphaCoverage], trials: usize) {
    for c in coverage {
        println!(
            "alpha {:<5} mean coverage {:.5}  (exact target {:.5}, {} trials)",
            c.alpha, c.final_mean, c.theoretical, trials
        );
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::ForwardLogistic(args) => {
            let cfg = args.resolve(ExperimentKind::ForwardLogistic)?;
            let out = commands::forward_logistic::run(&cfg)?;
            println!("run directory: {}", out.run_dir.display());
            println!("final training loss: {:.3e}", out.final_loss);
            for (alpha, q) in &out.half_widths {
                println!("alpha {alpha:<5} interval half-width {q:.6}");
            }
            print_coverage_lines(&out.coverage, cfg.conformal.trials);
        }
        Command::ForwardBl(args) => {
            let cfg = args.resolve(ExperimentKind::ForwardBl)?;
            let out = commands::forward_bl::run(&cfg)?;
            println!("run directory: {}", out.run_dir.display());
            println!("final training loss: {:.3e}", out.final_loss);
            println!(
                "surrogate error vs reference: max {:.4}, median {:.4} (ratio {:.1})",
                out.max_error,
                out.median_error,
                out.max_error / out.median_error
            );
            for (alpha, q) in &out.half_widths {
                println!("alpha {alpha:<5} interval half-width {q:.6}");
            }
            print_coverage_lines(&out.coverage, cfg.conformal.trials);
        }
        Command::Inverse(args) => {
            let cfg = args.resolve(ExperimentKind::Inverse)?;
            let out = commands::inverse::run(&cfg)?;
            println!("run directory: {}", out.run_dir.display());
            println!(
                "{} records, mean |beta - beta_hat| = {:.3e}",
                out.n_records, out.mean_abs_error
            );
            println!(
                "fresh-test coverage:     {:.5}  (exact target {:.5}, {} tests)",
                out.fresh_test.final_mean, out.fresh_test.theoretical, cfg.inverse.n_tests
            );
            println!(
                "repeated-split coverage: {:.5}  (exact target {:.5}, {} trials)",
                out.repeated_split.final_mean,
                out.repeated_split.theoretical,
                cfg.inverse.repeated_split_trials
            );
        }
        Command::Coverage { file, args } => {
            let cfg = args.resolve(ExperimentKind::Coverage)?;
            let out = commands::coverage::run(&cfg, &file)?;
            println!("run directory: {}", out.run_dir.display());
            println!(
                "{} pairs split {} calibration / {} validation",
                out.n_pairs, out.n_calibration, out.n_validation
            );
            print_coverage_lines(&out.coverage, cfg.conformal.trials);
        }
    }
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
