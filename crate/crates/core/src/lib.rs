//! Physics-informed neural networks wrapped in split conformal prediction
//! intervals, with Monte Carlo machinery to verify their exact finite-sample
//! coverage.
//!
//! The crate trains small tanh networks on two differential-equation
//! problems — the logistic growth ODE and the 1D Buckley-Leverett PDE — and
//! turns their point predictions (forward solutions, inverse parameter
//! estimates) into distribution-free prediction intervals via a held-out
//! calibration set. The `harness` module reproduces the coverage experiments:
//! repeated calibration/validation splitting and fresh-test-point validation
//! of inverse parameter intervals.

pub mod ad;
pub mod conformal;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod net;
pub mod optim;
pub mod physics;

pub use conformal::{PredictionInterval, ScoreSet};
pub use datagen::{Dataset, SplitSpec};
pub use error::{Error, Result};
pub use harness::{CoverageReport, InverseRecord};
pub use net::{Gradients, MlpModel};
pub use optim::{AdamConfig, LbfgsConfig, TerminationReason};
pub use physics::{BuckleyLeverettProblem, CollocationGrid, LogisticProblem, LossWeights};
