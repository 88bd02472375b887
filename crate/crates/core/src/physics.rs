//! PINN losses for the two problems: data misfit plus physics residual plus
//! initial-condition misfit, with the residuals built from exact input
//! derivatives of the network.

use crate::ad::{self, Dual, Scalar, Var};
use crate::datagen::{linspace, Dataset};
use crate::error::{Error, Result};
use crate::net::{self, Gradients, Mlp, MlpModel};
use crate::optim::{self, AdamConfig, AdamTrace, LbfgsConfig, LbfgsOutcome};

/// Logistic growth setup: `dN/dt = beta N (1 - N)`, `N(0) = n0`.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    pub beta: f64,
    pub n0: f64,
    pub t_domain: (f64, f64),
    /// When set, `beta` is estimated by the network rather than fixed.
    pub inverse_mode: bool,
}

impl Default for LogisticProblem {
    fn default() -> Self {
        LogisticProblem {
            beta: 0.05,
            n0: 0.1,
            t_domain: (0.0, 150.0),
            inverse_mode: false,
        }
    }
}

/// Buckley-Leverett setup: `u_t - f(u)_x = 0` on the stated space-time box,
/// with piecewise-constant initial data jumping at x = 0.
#[derive(Debug, Clone)]
pub struct BuckleyLeverettProblem {
    pub x_domain: (f64, f64),
    pub t_domain: (f64, f64),
    pub u_left: f64,
    pub u_right: f64,
}

impl Default for BuckleyLeverettProblem {
    fn default() -> Self {
        BuckleyLeverettProblem {
            x_domain: (-1.0, 1.0),
            t_domain: (0.0, 1.0),
            u_left: -3.0,
            u_right: 3.0,
        }
    }
}

impl BuckleyLeverettProblem {
    pub fn initial_condition(&self, x: f64) -> f64 {
        if x < 0.0 {
            self.u_left
        } else if x > 0.0 {
            self.u_right
        } else {
            0.5 * (self.u_left + self.u_right)
        }
    }

    pub fn flux_value(&self, u: f64) -> f64 {
        flux(u)
    }

    /// df/du, exact via a dual-number sweep through `flux`.
    pub fn flux_derivative(&self, u: f64) -> f64 {
        flux(Dual::<f64>::seeded(u)).du
    }
}

/// The non-convex fractional-flow function `f(u) = 4u^2 / (4u^2 + (1-u)^2)`.
/// The denominator is strictly positive for every real `u`.
pub fn flux<S: Scalar>(u: S) -> S {
    let four = S::constant(4.0);
    let one = S::constant(1.0);
    let num = four * u * u;
    let om = one - u;
    num / (num + om * om)
}

/// Points where the physics residual and initial conditions are enforced.
#[derive(Debug, Clone)]
pub struct CollocationGrid {
    /// Inputs where the residual is penalized.
    pub interior: Vec<Vec<f64>>,
    /// (input, target) pairs for initial/boundary conditions.
    pub initial: Vec<(Vec<f64>, f64)>,
}

impl CollocationGrid {
    pub fn is_empty(&self) -> bool {
        self.interior.is_empty() && self.initial.is_empty()
    }

    /// Logistic grid: `n` uniform times over the problem domain, plus the
    /// initial condition at the left endpoint.
    pub fn logistic(problem: &LogisticProblem, n: usize) -> Self {
        let (lo, hi) = problem.t_domain;
        CollocationGrid {
            interior: linspace(lo, hi, n).into_iter().map(|t| vec![t]).collect(),
            initial: vec![(vec![lo], problem.n0)],
        }
    }

    /// Buckley-Leverett grid: an `nt x nx` uniform cell-center lattice in the
    /// interior of the space-time box, plus `n_ic` initial-condition points
    /// on the t = 0 line. The IC jump point x = 0 is excluded because the
    /// initial value is undefined there.
    pub fn buckley_leverett(problem: &BuckleyLeverettProblem, nt: usize, nx: usize, n_ic: usize) -> Self {
        let (t_lo, t_hi) = problem.t_domain;
        let (x_lo, x_hi) = problem.x_domain;
        let mut interior = Vec::with_capacity(nt * nx);
        for k in 0..nt {
            let t = t_lo + (t_hi - t_lo) * (k as f64 + 0.5) / nt as f64;
            for i in 0..nx {
                let x = x_lo + (x_hi - x_lo) * (i as f64 + 0.5) / nx as f64;
                interior.push(vec![t, x]);
            }
        }
        let initial = linspace(x_lo, x_hi, n_ic)
            .into_iter()
            .filter(|&x| x.abs() > 1e-12)
            .map(|x| (vec![t_lo, x], problem.initial_condition(x)))
            .collect();
        CollocationGrid { interior, initial }
    }
}

/// Relative weights of the three loss components.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub data: f64,
    pub physics: f64,
    pub ic: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            data: 1.0,
            physics: 1.0,
            ic: 1.0,
        }
    }
}

/// The composite loss and its separately reported components (unweighted
/// mean squared errors; `total` applies the weights).
#[derive(Debug, Clone, Copy)]
pub struct LossBreakdown {
    pub total: f64,
    pub data_mse: f64,
    pub physics_mse: f64,
    pub ic_mse: f64,
}

/// Which differential equation supplies the residual.
#[derive(Debug, Clone)]
pub enum PinnProblem {
    Logistic(LogisticProblem),
    BuckleyLeverett(BuckleyLeverettProblem),
}

impl PinnProblem {
    pub fn input_dim(&self) -> usize {
        match self {
            PinnProblem::Logistic(_) => 1,
            PinnProblem::BuckleyLeverett(_) => 2,
        }
    }

    pub fn is_inverse(&self) -> bool {
        match self {
            PinnProblem::Logistic(p) => p.inverse_mode,
            PinnProblem::BuckleyLeverett(_) => false,
        }
    }
}

/// Logistic residual `r(t) = dN/dt - beta N (1 - N)` at one point, with
/// `beta` taken from the network in inverse mode and from the problem
/// otherwise.
fn logistic_residual_point<S: Scalar>(net: &Mlp<S>, problem: &LogisticProblem, t: S) -> S {
    let out = net.eval_with_input_derivative(&[t], 0);
    let beta = net.beta().unwrap_or_else(|| S::constant(problem.beta));
    out.du - beta * out.re * (S::constant(1.0) - out.re)
}

/// Buckley-Leverett residual `r = u_t - f'(u) u_x` at one (t, x) point, with
/// `f'` obtained by exact differentiation of [`flux`].
fn bl_residual_point<S: Scalar>(net: &Mlp<S>, tx: [S; 2]) -> S {
    let (u, u_t, u_x) = net.eval_with_two_input_derivatives(tx);
    let fprime = flux(Dual::seeded(u)).du;
    u_t - fprime * u_x
}

/// Residual of the problem's equation at every collocation point.
pub fn residuals<S: Scalar>(net: &Mlp<S>, problem: &PinnProblem, points: &[Vec<f64>]) -> Vec<S> {
    match problem {
        PinnProblem::Logistic(p) => points
            .iter()
            .map(|t| logistic_residual_point(net, p, S::constant(t[0])))
            .collect(),
        PinnProblem::BuckleyLeverett(_) => points
            .iter()
            .map(|tx| bl_residual_point(net, [S::constant(tx[0]), S::constant(tx[1])]))
            .collect(),
    }
}

/// Logistic residual evaluated with plain floats.
pub fn logistic_residual(
    model: &MlpModel,
    problem: &LogisticProblem,
    t_points: &[f64],
) -> Result<Vec<f64>> {
    if model.input_dim() != 1 {
        return Err(Error::shape("logistic residual input", 1, model.input_dim()));
    }
    let net = model.view();
    Ok(t_points
        .iter()
        .map(|&t| logistic_residual_point(&net, problem, t))
        .collect())
}

/// Buckley-Leverett residual evaluated with plain floats.
pub fn bl_residual(model: &MlpModel, tx_points: &[Vec<f64>]) -> Result<Vec<f64>> {
    if model.input_dim() != 2 {
        return Err(Error::shape("BL residual input", 2, model.input_dim()));
    }
    let net = model.view();
    Ok(tx_points
        .iter()
        .map(|tx| bl_residual_point(&net, [tx[0], tx[1]]))
        .collect())
}

fn mean_sq<S: Scalar>(values: impl Iterator<Item = S>, count: usize) -> S {
    if count == 0 {
        return S::constant(0.0);
    }
    let mut acc = S::constant(0.0);
    for v in values {
        acc = acc + v * v;
    }
    acc / S::constant(count as f64)
}

/// Generic composite loss: `w_data MSE(data) + w_phys MSE(residual)
/// + w_ic MSE(initial conditions)`. Returns (total, data, physics, ic).
pub fn pinn_loss_generic<S: Scalar>(
    net: &Mlp<S>,
    problem: &PinnProblem,
    data: &[(Vec<f64>, f64)],
    grid: &CollocationGrid,
    weights: &LossWeights,
) -> (S, S, S, S) {
    let data_mse = mean_sq(
        data.iter().map(|(x, y)| {
            let xs: Vec<S> = x.iter().map(|&v| S::constant(v)).collect();
            net.eval(&xs) - S::constant(*y)
        }),
        data.len(),
    );
    let physics_mse = mean_sq(
        residuals(net, problem, &grid.interior).into_iter(),
        grid.interior.len(),
    );
    let ic_mse = mean_sq(
        grid.initial.iter().map(|(x, target)| {
            let xs: Vec<S> = x.iter().map(|&v| S::constant(v)).collect();
            net.eval(&xs) - S::constant(*target)
        }),
        grid.initial.len(),
    );
    let total = S::constant(weights.data) * data_mse
        + S::constant(weights.physics) * physics_mse
        + S::constant(weights.ic) * ic_mse;
    (total, data_mse, physics_mse, ic_mse)
}

fn check_loss_inputs(
    model: &MlpModel,
    problem: &PinnProblem,
    data: &[(Vec<f64>, f64)],
    grid: &CollocationGrid,
) -> Result<()> {
    if data.is_empty() && grid.is_empty() {
        return Err(Error::invalid_config(
            "pinn loss needs a dataset or a collocation grid",
        ));
    }
    let dim = problem.input_dim();
    if model.input_dim() != dim {
        return Err(Error::shape("model input", dim, model.input_dim()));
    }
    for (x, _) in data.iter().chain(grid.initial.iter()) {
        if x.len() != dim {
            return Err(Error::shape("data point", dim, x.len()));
        }
    }
    for x in &grid.interior {
        if x.len() != dim {
            return Err(Error::shape("collocation point", dim, x.len()));
        }
    }
    Ok(())
}

/// Composite PINN loss with all components reported separately.
pub fn pinn_loss(
    model: &MlpModel,
    problem: &PinnProblem,
    dataset: &Dataset,
    grid: &CollocationGrid,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    check_loss_inputs(model, problem, &dataset.points, grid)?;
    let net = model.view();
    let (total, data_mse, physics_mse, ic_mse) =
        pinn_loss_generic(&net, problem, &dataset.points, grid, weights);
    Ok(LossBreakdown {
        total,
        data_mse,
        physics_mse,
        ic_mse,
    })
}

/// Composite loss value and its gradient with respect to every model
/// parameter (including `beta` in inverse mode).
pub fn pinn_loss_grad(
    model: &MlpModel,
    problem: &PinnProblem,
    dataset: &Dataset,
    grid: &CollocationGrid,
    weights: &LossWeights,
) -> Result<(f64, Gradients)> {
    check_loss_inputs(model, problem, &dataset.points, grid)?;
    net::grad_params(model, |net: &Mlp<Var>| {
        pinn_loss_generic(net, problem, &dataset.points, grid, weights).0
    })
}

/// Architecture and optimization schedule for one PINN fit.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Hidden layer widths; input/output sizes come from the problem.
    pub hidden: Vec<usize>,
    pub weights: LossWeights,
    pub adam: AdamConfig,
    pub lbfgs: LbfgsConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![10, 10],
            weights: LossWeights::default(),
            adam: AdamConfig::default(),
            lbfgs: LbfgsConfig::default(),
        }
    }
}

/// A completed fit: the trained model plus both optimizer reports.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: MlpModel,
    pub adam: AdamTrace,
    pub lbfgs: LbfgsOutcome,
    pub final_loss: f64,
}

/// Train a freshly initialized PINN on the composite loss: Adam first, then
/// L-BFGS until convergence.
pub fn fit_pinn(
    problem: &PinnProblem,
    train_data: &Dataset,
    grid: &CollocationGrid,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<FitOutcome> {
    let mut sizes = vec![problem.input_dim()];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(1);
    let mut model = net::init_model(&sizes, seed, problem.is_inverse())?;
    check_loss_inputs(&model, problem, &train_data.points, grid)?;

    let has_beta = problem.is_inverse();
    let mut objective = |theta: &[f64]| {
        ad::grad(theta, |vars| {
            let net = Mlp::from_flat(&sizes, vars, has_beta);
            pinn_loss_generic(&net, problem, &train_data.points, grid, &cfg.weights).0
        })
    };
    let adam = optim::run_adam(&mut model, &mut objective, &cfg.adam)?;
    let lbfgs = optim::run_lbfgs(&mut model, &mut objective, &cfg.lbfgs)?;
    let final_loss = lbfgs.final_loss;
    Ok(FitOutcome {
        model,
        adam,
        lbfgs,
        final_loss,
    })
}
