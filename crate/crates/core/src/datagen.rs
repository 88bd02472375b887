//! Ground-truth generation: analytic and numerical solutions of the two
//! differential equations, Gaussian noise injection, and the
//! exchangeability-preserving random splits that conformal prediction
//! requires. Everything is deterministic given its seed.

use crate::error::{Error, Result};
use crate::physics::BuckleyLeverettProblem;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Provenance carried alongside a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub problem: String,
    pub true_beta: Option<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

/// Ordered collection of (input, observation) pairs with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<(Vec<f64>, f64)>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(points: Vec<(Vec<f64>, f64)>, meta: DatasetMeta) -> Self {
        Dataset { points, meta }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn inputs(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|(x, _)| x.clone()).collect()
    }

    pub fn observations(&self) -> Vec<f64> {
        self.points.iter().map(|(_, y)| *y).collect()
    }

    /// Write `input..., observation` rows under a header. Floats use the
    /// shortest representation that parses back to the same bits, so the
    /// round-trip is exact at full double precision.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let dim = self.points.first().map_or(1, |(x, _)| x.len());
        let header: Vec<String> = (0..dim)
            .map(|k| format!("input_{k}"))
            .chain(["observation".to_string()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (x, y) in &self.points {
            let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            row.push(y.to_string());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv(path: &Path, meta: DatasetMeta) -> Result<Dataset> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let header = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Parse("empty dataset file".into()))?;
        let cols = header.split(',').count();
        if cols < 2 {
            return Err(Error::Parse(format!(
                "dataset header needs at least input and observation columns, got {header:?}"
            )));
        }
        let mut points = Vec::new();
        for line in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad float {tok:?}: {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != cols {
                return Err(Error::shape("dataset row", cols, vals.len()));
            }
            let (x, y) = vals.split_at(cols - 1);
            points.push((x.to_vec(), y[0]));
        }
        Ok(Dataset { points, meta })
    }

    /// Write the provenance sidecar next to a dataset CSV.
    pub fn write_meta(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.meta)
            .map_err(|e| Error::Parse(format!("meta serialization failed: {e}")))?;
        std::fs::write(path, json)?;
        Ok(())
    }
}

/// Closed-form solution of the logistic growth equation
/// `dN/dt = beta N (1 - N)` with `N(0) = n0`.
pub fn logistic_analytic(t: f64, beta: f64, n0: f64) -> f64 {
    n0 / (n0 + (1.0 - n0) * (-beta * t).exp())
}

/// Classical fourth-order Runge-Kutta trajectory of the logistic equation on
/// `t_grid`, with internal sub-steps capped at 0.1 time units.
pub fn solve_ode_rk4(beta: f64, n0: f64, t_grid: &[f64]) -> Result<Vec<f64>> {
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid_config("t_grid must be strictly increasing"));
    }
    let rhs = |n: f64| beta * n * (1.0 - n);
    let mut out = Vec::with_capacity(t_grid.len());
    let mut n = n0;
    let mut t = t_grid[0];
    if t != 0.0 {
        // The initial condition is stated at t = 0; integrate to the first
        // grid point before sampling.
        n = rk4_span(rhs, n0, 0.0, t);
    }
    out.push(n);
    for &t_next in &t_grid[1..] {
        n = rk4_span(rhs, n, t, t_next);
        out.push(n);
        t = t_next;
    }
    Ok(out)
}

const RK4_MAX_STEP: f64 = 0.1;

fn rk4_span<F: Fn(f64) -> f64>(rhs: F, mut n: f64, t0: f64, t1: f64) -> f64 {
    let span = t1 - t0;
    let steps = (span / RK4_MAX_STEP).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    for _ in 0..steps {
        let k1 = rhs(n);
        let k2 = rhs(n + 0.5 * h * k1);
        let k3 = rhs(n + 0.5 * h * k2);
        let k4 = rhs(n + h * k3);
        n += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    n
}

/// Space-time solution from the Buckley-Leverett reference solve.
#[derive(Debug, Clone)]
pub struct BlSolution {
    /// Cell centers.
    pub x: Vec<f64>,
    /// Output times (uniform from 0 to the domain end).
    pub t: Vec<f64>,
    /// `u[k][i]` = solution at time `t[k]`, cell `i`.
    pub u: Vec<Vec<f64>>,
}

impl BlSolution {
    /// Piecewise-constant (nearest-cell) sample of the solution.
    pub fn sample(&self, t: f64, x: f64) -> f64 {
        let k = nearest_index(&self.t, t);
        let i = nearest_index(&self.x, x);
        self.u[k][i]
    }
}

fn nearest_index(grid: &[f64], v: f64) -> usize {
    let mut best = 0;
    let mut dist = f64::INFINITY;
    for (i, g) in grid.iter().enumerate() {
        let d = (g - v).abs();
        if d < dist {
            dist = d;
            best = i;
        }
    }
    best
}

/// Standard Godunov numerical flux for a scalar conservation law written as
/// `u_t + flux(u)_x = 0`: the min of `flux` over `[u_l, u_r]` when
/// `u_l <= u_r`, the max over the interval otherwise. Exact for non-convex
/// fluxes because the extremum is taken over the whole interval between the
/// neighbor states; `critical` lists the interior stationary points of the
/// flux.
pub fn godunov_flux<F: Fn(f64) -> f64>(
    flux: F,
    u_left: f64,
    u_right: f64,
    critical: &[f64],
) -> f64 {
    let (lo, hi) = if u_left <= u_right {
        (u_left, u_right)
    } else {
        (u_right, u_left)
    };
    let minimize = u_left <= u_right;
    let mut m = flux(u_left);
    let mut extremum = |v: f64| {
        let fv = flux(v);
        if minimize {
            if fv < m {
                m = fv;
            }
        } else if fv > m {
            m = fv;
        }
    };
    extremum(u_right);
    for &c in critical {
        if c > lo && c < hi {
            extremum(c);
        }
    }
    m
}

/// Godunov finite-volume reference solution of the Buckley-Leverett problem.
///
/// The equation `u_t - f(u)_x = 0` is the conservation law
/// `u_t + g(u)_x = 0` with `g = -f`, so transport runs mirrored relative to
/// the classical convention. Interface values are the exact Godunov flux of
/// `g` (the min/max of `f` between the neighbor states enters with its sign
/// flipped; the interior critical points of `f` are u = 0 and u = 1).
/// CFL <= 0.9 is enforced by sub-stepping, and total mass is checked against
/// the boundary fluxes at every step.
pub fn solve_bl_reference(
    problem: &BuckleyLeverettProblem,
    nx: usize,
    nt: usize,
) -> Result<BlSolution> {
    if nx < 16 || nt < 16 {
        return Err(Error::invalid_config(
            "solve_bl_reference needs nx, nt >= 16",
        ));
    }
    let (x_lo, x_hi) = problem.x_domain;
    let (t_lo, t_hi) = problem.t_domain;
    if t_lo != 0.0 {
        return Err(Error::invalid_config("BL reference solve starts at t = 0"));
    }
    let dx = (x_hi - x_lo) / nx as f64;
    let x: Vec<f64> = (0..nx).map(|i| x_lo + (i as f64 + 0.5) * dx).collect();
    let t_out: Vec<f64> = (0..nt)
        .map(|k| t_lo + (t_hi - t_lo) * k as f64 / (nt - 1) as f64)
        .collect();

    let g = |u: f64| -problem.flux_value(u);
    let critical = [0.0, 1.0];

    let mut u: Vec<f64> = x.iter().map(|&xi| problem.initial_condition(xi)).collect();
    let mut solution = vec![u.clone()];
    let mut t = 0.0;

    for &t_target in &t_out[1..] {
        while t < t_target - 1e-14 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &v in &u {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let speed = max_abs_flux_derivative(problem, lo, hi);
            let mut dt = if speed > 0.0 {
                0.9 * dx / speed
            } else {
                t_target - t
            };
            dt = dt.min(t_target - t);

            // Interface fluxes with outflow (copy) boundary states.
            let mut fluxes = Vec::with_capacity(nx + 1);
            fluxes.push(g(u[0]));
            for i in 0..nx - 1 {
                fluxes.push(godunov_flux(g, u[i], u[i + 1], &critical));
            }
            fluxes.push(g(u[nx - 1]));

            let mass_before: f64 = u.iter().sum::<f64>() * dx;
            for i in 0..nx {
                u[i] -= dt / dx * (fluxes[i + 1] - fluxes[i]);
                if !u[i].is_finite() {
                    return Err(Error::NonFinite {
                        context: format!("BL state at cell {i}, t = {t}"),
                        value: u[i],
                    });
                }
            }
            let mass_after: f64 = u.iter().sum::<f64>() * dx;
            let boundary_net = dt * (fluxes[nx] - fluxes[0]);
            let drift = (mass_after - mass_before + boundary_net).abs();
            if drift > 1e-10 * mass_before.abs().max(1.0) {
                return Err(Error::NonFinite {
                    context: format!("mass conservation violated at t = {t}"),
                    value: drift,
                });
            }
            t += dt;
        }
        solution.push(u.clone());
        t = t_target;
    }
    Ok(BlSolution {
        x,
        t: t_out,
        u: solution,
    })
}

fn max_abs_flux_derivative(problem: &BuckleyLeverettProblem, lo: f64, hi: f64) -> f64 {
    // |f'| is continuous; a fine scan over the state range is an adequate
    // bound for CFL purposes.
    let n = 512;
    let mut m: f64 = 0.0;
    for i in 0..=n {
        let v = lo + (hi - lo) * i as f64 / n as f64;
        m = m.max(problem.flux_derivative(v).abs());
    }
    m
}

/// Add i.i.d. Gaussian noise with standard deviation `sigma` to the
/// observations. Inputs are untouched; the seed is recorded in the metadata.
pub fn add_noise(dataset: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if sigma < 0.0 {
        return Err(Error::invalid_config(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let mut out = dataset.clone();
    out.meta.noise_sigma = sigma;
    out.meta.seed = seed;
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated above");
    for (_, y) in out.points.iter_mut() {
        *y += normal.sample(&mut rng);
    }
    Ok(out)
}

/// Sizes of the train/holdout/test partition, and of the
/// calibration/validation split within the holdout.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SplitSpec {
    pub n_train: usize,
    pub n_holdout: usize,
    pub n_test: usize,
    pub n_calibration: usize,
    pub n_validation: usize,
    pub seed: u64,
}

/// A train/holdout/test partition of one dataset.
#[derive(Debug, Clone)]
pub struct SplitDatasets {
    pub train: Dataset,
    pub holdout: Dataset,
    pub test: Dataset,
}

/// Uniformly random partition without replacement. Every point lands in
/// exactly one part; the shuffle is deterministic given the seed.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<SplitDatasets> {
    let total = spec.n_train + spec.n_holdout + spec.n_test;
    if total != dataset.len() {
        return Err(Error::shape("split sizes", dataset.len(), total));
    }
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    indices.shuffle(&mut rng);
    let take = |range: std::ops::Range<usize>| -> Dataset {
        Dataset {
            points: indices[range]
                .iter()
                .map(|&i| dataset.points[i].clone())
                .collect(),
            meta: dataset.meta.clone(),
        }
    };
    Ok(SplitDatasets {
        train: take(0..spec.n_train),
        holdout: take(spec.n_train..spec.n_train + spec.n_holdout),
        test: take(spec.n_train + spec.n_holdout..total),
    })
}

/// Split a holdout set into calibration and validation parts.
pub fn split_holdout(
    holdout: &Dataset,
    n_calibration: usize,
    n_validation: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if n_calibration + n_validation != holdout.len() {
        return Err(Error::shape(
            "holdout split sizes",
            holdout.len(),
            n_calibration + n_validation,
        ));
    }
    if n_calibration == 0 {
        return Err(Error::invalid_config("calibration part must be nonempty"));
    }
    let mut indices: Vec<usize> = (0..holdout.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let pick = |idx: &[usize]| Dataset {
        points: idx.iter().map(|&i| holdout.points[i].clone()).collect(),
        meta: holdout.meta.clone(),
    };
    Ok((
        pick(&indices[..n_calibration]),
        pick(&indices[n_calibration..]),
    ))
}

/// `n` equispaced points covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Generate the logistic forward dataset: `n` equispaced times on
/// `[t_lo, t_hi]`, observations from the RK4 solve, then optional noise.
pub fn logistic_dataset(
    beta: f64,
    n0: f64,
    t_lo: f64,
    t_hi: f64,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let grid = linspace(t_lo, t_hi, n);
    let traj = solve_ode_rk4(beta, n0, &grid)?;
    let points = grid
        .iter()
        .zip(&traj)
        .map(|(&t, &v)| (vec![t], v))
        .collect();
    let clean = Dataset::new(
        points,
        DatasetMeta {
            problem: "logistic".into(),
            true_beta: Some(beta),
            noise_sigma: 0.0,
            seed,
        },
    );
    add_noise(&clean, sigma, seed)
}

/// Generate the Buckley-Leverett forward dataset: `n` points on the final
/// time line, equispaced in x, sampled from the Godunov reference solution.
pub fn bl_dataset(
    problem: &BuckleyLeverettProblem,
    reference: &BlSolution,
    n: usize,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let t_end = problem.t_domain.1;
    let xs = linspace(problem.x_domain.0, problem.x_domain.1, n);
    let points = xs
        .iter()
        .map(|&x| (vec![t_end, x], reference.sample(t_end, x)))
        .collect();
    let clean = Dataset::new(
        points,
        DatasetMeta {
            problem: "buckley-leverett".into(),
            true_beta: None,
            noise_sigma: 0.0,
            seed,
        },
    );
    add_noise(&clean, sigma, seed)
}

/// Sample a growth rate from the Uniform[lo, hi) prior.
pub fn sample_beta(lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(lo..hi)
}
