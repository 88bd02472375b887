//! Two-phase training schedule: Adam with a linearly annealed learning rate,
//! then L-BFGS with a strong Wolfe line search run until convergence.
//!
//! Both optimizers work on a flat parameter vector through an objective
//! closure returning `(loss, gradient)`; [`run_adam`] and [`run_lbfgs`] wrap
//! them for [`MlpModel`]. Both keep the best parameters seen anywhere during
//! the run (including line-search probes), so the reported final loss never
//! exceeds the initial loss.

use crate::error::{Error, Result};
use crate::net::MlpModel;
use std::collections::VecDeque;

/// Adam configuration. `lr_start`/`lr_end` are the endpoints of the linear
/// learning-rate annealing schedule; the moment constants are the usual
/// defaults.
#[derive(Debug, Clone)]
pub struct AdamConfig {
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            epochs: 100,
            lr_start: 1e-2,
            lr_end: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid_config("adam epochs must be >= 1"));
        }
        if !(self.lr_start > 0.0) || self.lr_end < 0.0 || self.lr_end > self.lr_start {
            return Err(Error::invalid_config(format!(
                "adam learning rates must satisfy 0 < lr_end <= lr_start, got {} / {}",
                self.lr_start, self.lr_end
            )));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0)
        {
            return Err(Error::invalid_config("invalid adam moment constants"));
        }
        Ok(())
    }

    /// Learning rate at epoch `e` (0-based): linear interpolation from
    /// `lr_start` to `lr_end` across the run.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            self.lr_start
        } else {
            self.lr_start
                + (self.lr_end - self.lr_start) * epoch as f64 / (self.epochs - 1) as f64
        }
    }
}

/// Per-epoch record of an Adam run: the loss at the start of each epoch and
/// the learning rate applied there.
#[derive(Debug, Clone)]
pub struct AdamTrace {
    pub losses: Vec<f64>,
    pub learning_rates: Vec<f64>,
    /// Loss at the returned (best-so-far) parameters.
    pub final_loss: f64,
}

/// Full-batch Adam on a flat parameter vector.
pub fn minimize_adam<F>(
    theta: &mut Vec<f64>,
    objective: &mut F,
    cfg: &AdamConfig,
) -> Result<AdamTrace>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    let n = theta.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut learning_rates = Vec::with_capacity(cfg.epochs);
    let mut best_loss = f64::INFINITY;
    let mut best_theta = theta.clone();

    for epoch in 0..cfg.epochs {
        let (loss, grad) = objective(theta);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, loss });
        }
        if loss < best_loss {
            best_loss = loss;
            best_theta.copy_from_slice(theta);
        }
        let lr = cfg.learning_rate(epoch);
        losses.push(loss);
        learning_rates.push(lr);

        let t = (epoch + 1) as f64;
        let bc1 = 1.0 - cfg.beta1.powf(t);
        let bc2 = 1.0 - cfg.beta2.powf(t);
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }

    let (final_loss, _) = objective(theta);
    if final_loss.is_finite() && final_loss < best_loss {
        best_loss = final_loss;
    } else {
        theta.copy_from_slice(&best_theta);
    }
    Ok(AdamTrace {
        losses,
        learning_rates,
        final_loss: best_loss,
    })
}

/// Why an L-BFGS run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    GradientTolerance,
    StepTolerance,
    MaxIterations,
    LineSearchFailure,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::GradientTolerance => "gradient-tolerance",
            TerminationReason::StepTolerance => "step-tolerance",
            TerminationReason::MaxIterations => "max-iterations",
            TerminationReason::LineSearchFailure => "line-search-failure",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TerminationReason {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient-tolerance" => Ok(TerminationReason::GradientTolerance),
            "step-tolerance" => Ok(TerminationReason::StepTolerance),
            "max-iterations" => Ok(TerminationReason::MaxIterations),
            "line-search-failure" => Ok(TerminationReason::LineSearchFailure),
            other => Err(Error::Parse(format!(
                "unknown termination reason {other:?}"
            ))),
        }
    }
}

/// L-BFGS configuration. The defaults emulate "run until convergence" on the
/// smooth, tiny losses in this crate.
#[derive(Debug, Clone)]
pub struct LbfgsConfig {
    pub history_size: usize,
    pub max_iterations: usize,
    /// Stop when the Euclidean gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the accepted step norm falls below this.
    pub step_tolerance: f64,
    /// Sufficient-decrease (Armijo) constant of the strong Wolfe conditions.
    pub c1: f64,
    /// Curvature constant of the strong Wolfe conditions.
    pub c2: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig {
            history_size: 50,
            max_iterations: 5000,
            gradient_tolerance: 1e-9,
            step_tolerance: 1e-12,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.history_size == 0 || self.max_iterations == 0 {
            return Err(Error::invalid_config(
                "lbfgs history_size and max_iterations must be >= 1",
            ));
        }
        if !(self.gradient_tolerance > 0.0) || !(self.step_tolerance > 0.0) {
            return Err(Error::invalid_config("lbfgs tolerances must be > 0"));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::invalid_config(
                "lbfgs line search requires 0 < c1 < c2 < 1",
            ));
        }
        Ok(())
    }
}

/// Result of an L-BFGS run.
#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub termination: TerminationReason,
    pub iterations: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Evaluations allowed within a single line search.
const MAX_LINE_SEARCH_EVALS: usize = 25;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Minimizer of the cubic through (x1, f1, g1) and (x2, f2, g2), clamped to
/// `bounds`; falls back to bisection when the cubic has no real minimum.
fn cubic_interpolate(
    x1: f64,
    f1: f64,
    g1: f64,
    x2: f64,
    f2: f64,
    g2: f64,
    bounds: (f64, f64),
) -> f64 {
    let (lo, hi) = bounds;
    let d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2);
    let d2_sq = d1 * d1 - g1 * g2;
    if d2_sq >= 0.0 {
        let d2 = d2_sq.sqrt();
        let min_pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + 2.0 * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + 2.0 * d2))
        };
        if min_pos.is_finite() {
            min_pos.clamp(lo, hi)
        } else {
            0.5 * (lo + hi)
        }
    } else {
        0.5 * (lo + hi)
    }
}

struct Probe {
    t: f64,
    f: f64,
    g: Vec<f64>,
    dphi: f64,
}

/// Strong Wolfe line search along direction `d` from `x0`.
///
/// Returns the accepted probe, or `None` when no acceptable step was found
/// within the evaluation budget. Non-finite probe values are treated as
/// overshoots and bracketed away. `best` tracks the lowest finite loss seen
/// anywhere, so a failed search still leaves usable parameters behind.
#[allow(clippy::too_many_arguments)]
fn strong_wolfe<F>(
    objective: &mut F,
    x0: &[f64],
    d: &[f64],
    f0: f64,
    dphi0: f64,
    t_init: f64,
    cfg: &LbfgsConfig,
    best: &mut (f64, Vec<f64>),
) -> Option<Probe>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let d_norm = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut evals = 0usize;
    let mut x = vec![0.0; x0.len()];
    let mut eval = |t: f64, x: &mut Vec<f64>, evals: &mut usize| -> Probe {
        for i in 0..x0.len() {
            x[i] = x0[i] + t * d[i];
        }
        let (f, g) = objective(x);
        *evals += 1;
        if f.is_finite() && f < best.0 {
            best.0 = f;
            best.1.copy_from_slice(x);
        }
        let dphi = dot(&g, d);
        Probe { t, f, g, dphi }
    };

    // Bracketing phase.
    let mut t = t_init;
    let mut prev = Probe {
        t: 0.0,
        f: f0,
        g: Vec::new(),
        dphi: dphi0,
    };
    let mut bracket: Option<(Probe, Probe)> = None;
    while evals < MAX_LINE_SEARCH_EVALS {
        let cur = eval(t, &mut x, &mut evals);
        let armijo_fail = !cur.f.is_finite()
            || cur.f > f0 + cfg.c1 * cur.t * dphi0
            || (evals > 1 && cur.f >= prev.f);
        if armijo_fail {
            bracket = Some((prev, cur));
            break;
        }
        if cur.dphi.abs() <= -cfg.c2 * dphi0 {
            return Some(cur);
        }
        if cur.dphi >= 0.0 {
            bracket = Some((cur, prev));
            break;
        }
        let next_t = (t * 2.0).min(1e10);
        prev = cur;
        t = next_t;
    }
    let (mut low, mut high) = bracket?;

    // Zoom phase: shrink the bracket until the strong Wolfe conditions hold.
    let mut insufficient = false;
    while evals < MAX_LINE_SEARCH_EVALS {
        if (high.t - low.t).abs() * d_norm < cfg.step_tolerance {
            break;
        }
        let (b_lo, b_hi) = if low.t < high.t {
            (low.t, high.t)
        } else {
            (high.t, low.t)
        };
        let mut t = if high.f.is_finite() {
            cubic_interpolate(
                low.t,
                low.f,
                low.dphi,
                high.t,
                high.f,
                high.dphi,
                (b_lo, b_hi),
            )
        } else {
            0.5 * (low.t + high.t)
        };
        // Keep interpolation away from the bracket boundary when progress
        // stalls, as in the classic lswolfe implementation.
        let eps = 0.1 * (b_hi - b_lo);
        if (b_hi - t).min(t - b_lo) < eps {
            if insufficient || t >= b_hi || t <= b_lo {
                t = if (t - b_hi).abs() < (t - b_lo).abs() {
                    b_hi - eps
                } else {
                    b_lo + eps
                };
                insufficient = false;
            } else {
                insufficient = true;
            }
        } else {
            insufficient = false;
        }

        let cur = eval(t, &mut x, &mut evals);
        if !cur.f.is_finite() || cur.f > f0 + cfg.c1 * cur.t * dphi0 || cur.f >= low.f {
            high = cur;
        } else {
            if cur.dphi.abs() <= -cfg.c2 * dphi0 {
                return Some(cur);
            }
            if cur.dphi * (high.t - low.t) >= 0.0 {
                high = low;
            }
            low = cur;
        }
    }
    // Budget exhausted: accept the low point if it at least decreased
    // sufficiently; otherwise report failure.
    if low.t > 0.0 && low.f.is_finite() && low.f <= f0 + cfg.c1 * low.t * dphi0 {
        return Some(low);
    }
    None
}

/// L-BFGS with two-loop recursion on a flat parameter vector.
pub fn minimize_lbfgs<F>(
    theta: &mut Vec<f64>,
    objective: &mut F,
    cfg: &LbfgsConfig,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    cfg.validate()?;
    let n = theta.len();
    let (f0, mut g) = objective(theta);
    if !f0.is_finite() {
        return Err(Error::NonFinite {
            context: "initial lbfgs loss".into(),
            value: f0,
        });
    }
    let mut f = f0;
    let mut best = (f0, theta.clone());
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut termination = TerminationReason::MaxIterations;
    let mut iterations = 0usize;

    for iter in 0..cfg.max_iterations {
        if norm(&g) < cfg.gradient_tolerance {
            termination = TerminationReason::GradientTolerance;
            break;
        }
        iterations = iter + 1;

        // Two-loop recursion for the search direction -H g.
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &d);
            for i in 0..n {
                d[i] -= alpha * y[i];
            }
            alphas.push(alpha);
        }
        if let Some((s, y, _)) = history.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in d.iter_mut() {
                *v *= gamma;
            }
        }
        for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
            let beta = rho * dot(y, &d);
            for i in 0..n {
                d[i] += (alpha - beta) * s[i];
            }
        }

        let mut dphi0 = dot(&g, &d);
        if dphi0 >= 0.0 {
            // Not a descent direction; restart from steepest descent.
            history.clear();
            d = g.iter().map(|v| -v).collect();
            dphi0 = dot(&g, &d);
            if dphi0 >= 0.0 {
                termination = TerminationReason::GradientTolerance;
                break;
            }
        }

        let t_init = if iter == 0 {
            (1.0f64).min(1.0 / g.iter().map(|v| v.abs()).sum::<f64>())
        } else {
            1.0
        };

        let Some(probe) = strong_wolfe(objective, theta, &d, f, dphi0, t_init, cfg, &mut best)
        else {
            termination = TerminationReason::LineSearchFailure;
            break;
        };

        let s: Vec<f64> = d.iter().map(|v| v * probe.t).collect();
        let step_norm = norm(&s);
        for i in 0..n {
            theta[i] += s[i];
        }
        let y: Vec<f64> = probe.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let ys = dot(&y, &s);
        if ys > 1e-10 * norm(&y) * step_norm {
            if history.len() == cfg.history_size {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / ys));
        }
        f = probe.f;
        g = probe.g;
        if f < best.0 {
            best.0 = f;
            best.1.copy_from_slice(theta);
        }
        if step_norm < cfg.step_tolerance {
            termination = TerminationReason::StepTolerance;
            break;
        }
    }

    theta.copy_from_slice(&best.1);
    Ok(LbfgsOutcome {
        termination,
        iterations,
        initial_loss: f0,
        final_loss: best.0,
    })
}

/// Adam pass over a model's parameters.
pub fn run_adam<F>(model: &mut MlpModel, mut objective: F, cfg: &AdamConfig) -> Result<AdamTrace>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut theta = model.flat_params();
    let trace = minimize_adam(&mut theta, &mut objective, cfg)?;
    model.set_flat_params(&theta)?;
    Ok(trace)
}

/// L-BFGS pass over a model's parameters.
pub fn run_lbfgs<F>(
    model: &mut MlpModel,
    mut objective: F,
    cfg: &LbfgsConfig,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut theta = model.flat_params();
    let outcome = minimize_lbfgs(&mut theta, &mut objective, cfg)?;
    model.set_flat_params(&theta)?;
    Ok(outcome)
}
