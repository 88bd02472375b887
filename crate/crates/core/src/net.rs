//! Minimal feed-forward network: tanh hidden layers, identity output,
//! reverse-mode parameter gradients and exact input derivatives.
//!
//! The same architecture serves both problems here: `[1, 10, 10, 1]` for the
//! logistic ODE and `[2, 10, 10, 1]` for the Buckley-Leverett PDE. In inverse
//! mode the model additionally carries a trainable physics parameter `beta`
//! appended to the end of the flat parameter vector.

use crate::ad::{self, Dual, Scalar, Var};
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};
use std::path::Path;

/// Generic network parameters, used to evaluate the same architecture with
/// `f64`, tape variables, or dual numbers.
pub struct Mlp<S> {
    sizes: Vec<usize>,
    /// Per layer, row-major `out x in`.
    weights: Vec<Vec<S>>,
    /// Per layer, length `out`.
    biases: Vec<Vec<S>>,
    beta: Option<S>,
}

impl<S: Scalar> Mlp<S> {
    /// Rebuild a network from the canonical flat parameter order:
    /// all weights (layer by layer, row-major), then all biases (layer by
    /// layer), then `beta` when present.
    pub fn from_flat(sizes: &[usize], flat: &[S], has_beta: bool) -> Self {
        debug_assert_eq!(flat.len(), param_count(sizes, has_beta));
        let mut pos = 0;
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let n = sizes[l] * sizes[l + 1];
            weights.push(flat[pos..pos + n].to_vec());
            pos += n;
        }
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for l in 0..sizes.len() - 1 {
            let n = sizes[l + 1];
            biases.push(flat[pos..pos + n].to_vec());
            pos += n;
        }
        let beta = has_beta.then(|| flat[pos]);
        Mlp {
            sizes: sizes.to_vec(),
            weights,
            biases,
            beta,
        }
    }

    pub fn beta(&self) -> Option<S> {
        self.beta
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    /// Forward pass to the scalar output. Hidden layers apply tanh, the
    /// output layer is affine.
    pub fn eval(&self, input: &[S]) -> S {
        debug_assert_eq!(input.len(), self.sizes[0]);
        debug_assert_eq!(*self.sizes.last().unwrap(), 1);
        let layers = self.sizes.len() - 1;
        let mut cur = input.to_vec();
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut z = self.biases[l][j];
                for i in 0..n_in {
                    z = z + self.weights[l][j * n_in + i] * cur[i];
                }
                next.push(if l + 1 < layers { z.tanh() } else { z });
            }
            cur = next;
        }
        cur[0]
    }

    /// Forward pass carrying the value plus exact derivatives with respect
    /// to both coordinates of a two-dimensional input, in one sweep.
    /// Returns `(value, d/d input[0], d/d input[1])`.
    pub fn eval_with_two_input_derivatives(&self, input: [S; 2]) -> (S, S, S) {
        debug_assert_eq!(self.sizes[0], 2);
        let layers = self.sizes.len() - 1;
        let zero = S::constant(0.0);
        let one = S::constant(1.0);
        let mut cur: Vec<(S, S, S)> = vec![(input[0], one, zero), (input[1], zero, one)];
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut re = self.biases[l][j];
                let mut d0 = zero;
                let mut d1 = zero;
                for (i, &(x, xd0, xd1)) in cur.iter().enumerate().take(n_in) {
                    let w = self.weights[l][j * n_in + i];
                    re = re + w * x;
                    d0 = d0 + w * xd0;
                    d1 = d1 + w * xd1;
                }
                if l + 1 < layers {
                    let t = re.tanh();
                    let slope = one - t * t;
                    next.push((t, slope * d0, slope * d1));
                } else {
                    next.push((re, d0, d1));
                }
            }
            cur = next;
        }
        cur[0]
    }

    /// Forward pass carrying the exact derivative of the output with respect
    /// to input coordinate `seed_dim`, alongside the value itself.
    pub fn eval_with_input_derivative(&self, input: &[S], seed_dim: usize) -> Dual<S> {
        debug_assert!(seed_dim < self.sizes[0]);
        let layers = self.sizes.len() - 1;
        let mut cur: Vec<Dual<S>> = input
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                if k == seed_dim {
                    Dual::seeded(v)
                } else {
                    Dual::lift(v)
                }
            })
            .collect();
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut re = self.biases[l][j];
                let mut du = S::constant(0.0);
                for i in 0..n_in {
                    let w = self.weights[l][j * n_in + i];
                    re = re + w * cur[i].re;
                    du = du + w * cur[i].du;
                }
                let z = Dual::new(re, du);
                next.push(if l + 1 < layers { z.tanh() } else { z });
            }
            cur = next;
        }
        cur[0]
    }
}

/// Total number of scalar parameters for an architecture.
pub fn param_count(sizes: &[usize], has_beta: bool) -> usize {
    let mut n = 0;
    for l in 0..sizes.len() - 1 {
        n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    }
    n + usize::from(has_beta)
}

/// A trained or trainable network with concrete `f64` parameters.
///
/// Invariants: weight and bias shapes chain consistently with `layer_sizes`;
/// `beta` is present iff the model was created in inverse mode.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    beta: Option<f64>,
}

/// Initial value for the trainable physics parameter in inverse mode.
/// Mid-range of the Uniform[0, 0.5) prior used by the inverse experiments;
/// documented here so runs are reproducible.
pub const BETA_INIT: f64 = 0.1;

/// Create a model with Glorot-uniform weights and zero biases.
///
/// Weights for a layer with `fan_in` inputs and `fan_out` outputs are drawn
/// from `U(-limit, limit)` with `limit = sqrt(6 / (fan_in + fan_out))`, the
/// standard scaling for tanh networks. Sampling order is fixed (layer by
/// layer, row-major), so a given seed always produces bit-identical
/// parameters.
pub fn init_model(layer_sizes: &[usize], seed: u64, inverse_mode: bool) -> Result<MlpModel> {
    if layer_sizes.is_empty() {
        return Err(Error::invalid_config("layer_sizes must be nonempty"));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::invalid_config(format!(
            "layer_sizes entries must be >= 1, got {layer_sizes:?}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..layer_sizes.len() - 1 {
        let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let w: Vec<f64> = (0..n_in * n_out)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        weights.push(w);
        biases.push(vec![0.0; n_out]);
    }
    Ok(MlpModel {
        layer_sizes: layer_sizes.to_vec(),
        weights,
        biases,
        beta: inverse_mode.then_some(BETA_INIT),
    })
}

impl MlpModel {
    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn is_inverse(&self) -> bool {
        self.beta.is_some()
    }

    pub fn param_count(&self) -> usize {
        param_count(&self.layer_sizes, self.beta.is_some())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Parameters in the canonical flat order (weights, biases, beta).
    pub fn flat_params(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.param_count());
        for w in &self.weights {
            flat.extend_from_slice(w);
        }
        for b in &self.biases {
            flat.extend_from_slice(b);
        }
        if let Some(beta) = self.beta {
            flat.push(beta);
        }
        flat
    }

    /// Overwrite all parameters from the canonical flat order.
    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::shape("flat parameter vector", expected, flat.len()));
        }
        let mut pos = 0;
        for w in &mut self.weights {
            let n = w.len();
            w.copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
        for b in &mut self.biases {
            let n = b.len();
            b.copy_from_slice(&flat[pos..pos + n]);
            pos += n;
        }
        if self.beta.is_some() {
            self.beta = Some(flat[pos]);
        }
        Ok(())
    }

    /// View the parameters as a generic `f64` network.
    pub fn view(&self) -> Mlp<f64> {
        Mlp {
            sizes: self.layer_sizes.clone(),
            weights: self.weights.clone(),
            biases: self.biases.clone(),
            beta: self.beta,
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.layer_sizes[0] {
            return Err(Error::shape(
                "network input",
                self.layer_sizes[0],
                input.len(),
            ));
        }
        Ok(())
    }

    /// Evaluate the scalar output at one point.
    pub fn forward_point(&self, input: &[f64]) -> Result<f64> {
        self.check_input(input)?;
        if *self.layer_sizes.last().unwrap() != 1 {
            return Err(Error::shape(
                "network output",
                1,
                *self.layer_sizes.last().unwrap(),
            ));
        }
        Ok(self.view().eval(input))
    }

    /// Evaluate the scalar output on a batch of points.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let view = self.view();
        if *self.layer_sizes.last().unwrap() != 1 {
            return Err(Error::shape(
                "network output",
                1,
                *self.layer_sizes.last().unwrap(),
            ));
        }
        inputs
            .iter()
            .map(|x| {
                self.check_input(x)?;
                Ok(view.eval(x))
            })
            .collect()
    }

    /// Exact first derivatives of the output with respect to every input
    /// coordinate, one vector per evaluation point. Computed by a
    /// forward-mode sweep, not finite differences. Only `order == 1` is
    /// supported.
    pub fn input_derivatives(&self, inputs: &[Vec<f64>], order: usize) -> Result<Vec<Vec<f64>>> {
        if order != 1 {
            return Err(Error::invalid_config(format!(
                "unsupported derivative order {order}; only 1 is implemented"
            )));
        }
        let view = self.view();
        inputs
            .iter()
            .map(|x| {
                self.check_input(x)?;
                Ok((0..x.len())
                    .map(|k| view.eval_with_input_derivative(x, k).du)
                    .collect())
            })
            .collect()
    }
}

/// Per-parameter partial derivatives, shape-congruent with the model they
/// were computed from.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub beta: Option<f64>,
}

impl Gradients {
    fn from_flat(sizes: &[usize], flat: &[f64], has_beta: bool) -> Self {
        let mlp = Mlp::from_flat(sizes, flat, has_beta);
        Gradients {
            weights: mlp.weights,
            biases: mlp.biases,
            beta: mlp.beta,
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut flat = Vec::new();
        for w in &self.weights {
            flat.extend_from_slice(w);
        }
        for b in &self.biases {
            flat.extend_from_slice(b);
        }
        if let Some(beta) = self.beta {
            flat.push(beta);
        }
        flat
    }
}

/// Reverse-mode gradient of a scalar loss with respect to every model
/// parameter (including `beta` in inverse mode).
///
/// The closure receives the model parameters as tape variables and must
/// return the scalar loss; any arithmetic it performs (including dual-number
/// input derivatives) is differentiated exactly.
pub fn grad_params<F>(model: &MlpModel, loss: F) -> Result<(f64, Gradients)>
where
    F: FnOnce(&Mlp<Var>) -> Var,
{
    let flat = model.flat_params();
    let has_beta = model.beta.is_some();
    let sizes = model.layer_sizes.clone();
    let (value, grad) = ad::grad(&flat, |leaves| {
        let net = Mlp::from_flat(&sizes, leaves, has_beta);
        loss(&net)
    });
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "loss".into(),
            value,
        });
    }
    Ok((value, Gradients::from_flat(&sizes, &grad, has_beta)))
}

/// Gradient of a scalar objective with respect to a flat parameter vector,
/// for optimizers that do not care about network structure.
pub fn grad_flat<F>(
    sizes: &[usize],
    has_beta: bool,
    theta: &[f64],
    loss: F,
) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&Mlp<Var>) -> Var,
{
    let (value, grad) = ad::grad(theta, |leaves| {
        let net = Mlp::from_flat(sizes, leaves, has_beta);
        loss(&net)
    });
    if !value.is_finite() {
        return Err(Error::NonFinite {
            context: "loss".into(),
            value,
        });
    }
    Ok((value, grad))
}

const MODEL_MAGIC: &str = "conformal-pinn mlp v1";

impl MlpModel {
    /// Write the parameters as a small versioned text file.
    ///
    /// Field order: layer sizes, all weights (layer by layer, row-major),
    /// all biases (layer by layer), then `beta` iff the model is in inverse
    /// mode. Floats use the shortest representation that round-trips
    /// exactly, so save/load is bit-exact.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "{MODEL_MAGIC}")?;
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(out, "layers {}", sizes.join(" "))?;
        let join = |vals: &[f64]| {
            vals.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let all_weights: Vec<f64> = self.weights.iter().flatten().copied().collect();
        let all_biases: Vec<f64> = self.biases.iter().flatten().copied().collect();
        writeln!(out, "weights {}", join(&all_weights))?;
        writeln!(out, "biases {}", join(&all_biases))?;
        if let Some(beta) = self.beta {
            writeln!(out, "beta {beta}")?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<MlpModel> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut lines = file.lines();
        let mut next_line = || -> Result<String> {
            lines
                .next()
                .transpose()?
                .ok_or_else(|| Error::Parse("unexpected end of model file".into()))
        };
        let magic = next_line()?;
        if magic.trim() != MODEL_MAGIC {
            return Err(Error::Parse(format!("unrecognized model header {magic:?}")));
        }
        let parse_floats = |line: &str, tag: &str| -> Result<Vec<f64>> {
            let rest = line
                .strip_prefix(tag)
                .ok_or_else(|| Error::Parse(format!("expected `{tag}` line, got {line:?}")))?;
            rest.split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad float {tok:?}: {e}")))
                })
                .collect()
        };
        let sizes_line = next_line()?;
        let sizes: Vec<usize> = sizes_line
            .strip_prefix("layers")
            .ok_or_else(|| Error::Parse(format!("expected `layers` line, got {sizes_line:?}")))?
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad layer size {tok:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if sizes.is_empty() || sizes.iter().any(|&s| s == 0) {
            return Err(Error::Parse(format!("invalid layer sizes {sizes:?}")));
        }
        let weights_flat = parse_floats(&next_line()?, "weights")?;
        let biases_flat = parse_floats(&next_line()?, "biases")?;
        let beta = match lines.next().transpose()? {
            Some(line) => Some(
                parse_floats(&line, "beta")?
                    .first()
                    .copied()
                    .ok_or_else(|| Error::Parse("empty beta line".into()))?,
            ),
            None => None,
        };

        let n_weights: usize = (0..sizes.len() - 1).map(|l| sizes[l] * sizes[l + 1]).sum();
        let n_biases: usize = sizes[1..].iter().sum();
        if weights_flat.len() != n_weights {
            return Err(Error::shape("model weights", n_weights, weights_flat.len()));
        }
        if biases_flat.len() != n_biases {
            return Err(Error::shape("model biases", n_biases, biases_flat.len()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        let (mut wp, mut bp) = (0, 0);
        for l in 0..sizes.len() - 1 {
            let nw = sizes[l] * sizes[l + 1];
            weights.push(weights_flat[wp..wp + nw].to_vec());
            wp += nw;
            biases.push(biases_flat[bp..bp + sizes[l + 1]].to_vec());
            bp += sizes[l + 1];
        }
        Ok(MlpModel {
            layer_sizes: sizes,
            weights,
            biases,
            beta,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent re-implementation of the forward pass (plain loops over
    /// explicitly indexed matrices) used as the oracle for `eval`.
    fn forward_oracle(model: &MlpModel, input: &[f64]) -> f64 {
        let sizes = model.layer_sizes();
        let mut cur = input.to_vec();
        for l in 0..sizes.len() - 1 {
            let mut next = vec![0.0; sizes[l + 1]];
            for (j, slot) in next.iter_mut().enumerate() {
                let mut z = model.biases[l][j];
                for (i, x) in cur.iter().enumerate() {
                    z += model.weights[l][j * sizes[l] + i] * x;
                }
                *slot = if l + 1 < sizes.len() - 1 { z.tanh() } else { z };
            }
            cur = next;
        }
        cur[0]
    }

    fn finite_diff_params<F: Fn(&[f64]) -> f64>(f: F, theta: &[f64]) -> Vec<f64> {
        let step = 1e-5;
        let mut g = vec![0.0; theta.len()];
        let mut t = theta.to_vec();
        for i in 0..theta.len() {
            t[i] = theta[i] + step;
            let fp = f(&t);
            t[i] = theta[i] - step;
            let fm = f(&t);
            t[i] = theta[i];
            g[i] = (fp - fm) / (2.0 * step);
        }
        g
    }

    #[test]
    fn parameter_counts_match_shape_arithmetic() {
        let m = init_model(&[1, 10, 10, 1], 0, false).unwrap();
        assert_eq!(m.param_count(), 141);
        let m = init_model(&[2, 10, 10, 1], 0, false).unwrap();
        assert_eq!(m.param_count(), 151);
        let m = init_model(&[1, 10, 10, 1], 0, true).unwrap();
        assert_eq!(m.param_count(), 142);
    }

    #[test]
    fn same_seed_gives_bit_identical_parameters() {
        let a = init_model(&[1, 10, 10, 1], 7, true).unwrap();
        let b = init_model(&[1, 10, 10, 1], 7, true).unwrap();
        let (fa, fb) = (a.flat_params(), b.flat_params());
        assert!(fa
            .iter()
            .zip(&fb)
            .all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = init_model(&[1, 10, 10, 1], 8, true).unwrap();
        assert_ne!(a.flat_params(), c.flat_params());
    }

    #[test]
    fn invalid_layer_sizes_are_rejected() {
        assert!(init_model(&[], 0, false).is_err());
        assert!(init_model(&[1, 0, 1], 0, false).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut m = init_model(&[1, 10, 10, 1], 0, false).unwrap();
        m.set_flat_params(&vec![0.0; 141]).unwrap();
        let out = m.forward(&[vec![0.3], vec![-2.0], vec![117.0]]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer_is_w_t_plus_b() {
        let mut m = init_model(&[1, 1], 0, false).unwrap();
        m.set_flat_params(&[2.5, -0.75]).unwrap();
        let t = 1.3;
        assert_relative_eq!(m.forward_point(&[t]).unwrap(), 2.5 * t - 0.75);
    }

    #[test]
    fn forward_matches_independent_oracle() {
        let m = init_model(&[2, 10, 10, 1], 42, false).unwrap();
        for input in [[0.3, -1.2], [0.0, 0.0], [2.0, 5.0]] {
            assert_relative_eq!(
                m.forward_point(&input).unwrap(),
                forward_oracle(&m, &input),
                epsilon = 1e-14
            );
        }
    }

    #[test]
    fn forward_rejects_dimension_mismatch() {
        let m = init_model(&[2, 4, 1], 0, false).unwrap();
        assert!(matches!(
            m.forward_point(&[1.0]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn forward_is_pure() {
        let m = init_model(&[1, 10, 10, 1], 3, false).unwrap();
        let a = m.forward_point(&[0.7]).unwrap();
        let b = m.forward_point(&[0.7]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn sum_of_outputs_gradient_on_zero_network() {
        // For the all-zero network the output equals its final bias, so the
        // gradient of sum(outputs) with respect to that bias is the batch
        // size and every other partial is zero.
        let mut m = init_model(&[1, 10, 10, 1], 0, false).unwrap();
        m.set_flat_params(&vec![0.0; 141]).unwrap();
        let batch: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let (_, g) = grad_params(&m, |net| {
            let mut s = Var::constant(0.0);
            for x in &batch {
                let xs: Vec<Var> = x.iter().map(|&v| Var::constant(v)).collect();
                s = s + net.eval(&xs);
            }
            s
        })
        .unwrap();
        assert_relative_eq!(g.biases[2][0], 5.0);
        assert!(g.weights[2].iter().all(|&w| w == 0.0));
        assert_eq!(g.beta, None);
    }

    #[test]
    fn grad_params_matches_finite_differences() {
        let m = init_model(&[1, 6, 1], 11, true).unwrap();
        let batch: Vec<f64> = vec![0.1, 0.5, -0.4];
        let targets: Vec<f64> = vec![0.2, -0.1, 0.05];
        let loss = |net: &Mlp<Var>| {
            let mut s = Var::constant(0.0);
            for (x, y) in batch.iter().zip(&targets) {
                let d = net.eval(&[Var::constant(*x)]) - Var::constant(*y);
                s = s + d * d;
            }
            // Pull beta into the loss so its partial is exercised too.
            let b = net.beta().unwrap();
            s + b * b
        };
        let (val, g) = grad_params(&m, loss).unwrap();

        let sizes = m.layer_sizes().to_vec();
        let f = |theta: &[f64]| {
            let net = Mlp::<f64>::from_flat(&sizes, theta, true);
            let mut s = 0.0;
            for (x, y) in batch.iter().zip(&targets) {
                let d = net.eval(&[*x]) - y;
                s += d * d;
            }
            s + net.beta().unwrap().powi(2)
        };
        let theta = m.flat_params();
        assert_relative_eq!(val, f(&theta), epsilon = 1e-12);
        let fd = finite_diff_params(f, &theta);
        for (a, b) in g.flat().iter().zip(&fd) {
            assert!((a - b).abs() <= 1e-4 * b.abs().max(a.abs()) + 1e-8);
        }
    }

    #[test]
    fn loss_independent_of_parameter_has_zero_partial() {
        let m = init_model(&[1, 4, 1], 5, true).unwrap();
        let (_, g) = grad_params(&m, |net| {
            let b = net.beta().unwrap();
            b * b
        })
        .unwrap();
        assert!(g.weights.iter().flatten().all(|&w| w == 0.0));
        assert!(g.biases.iter().flatten().all(|&b| b == 0.0));
        assert_relative_eq!(g.beta.unwrap(), 2.0 * BETA_INIT);
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let m = init_model(&[1, 4, 1], 5, false).unwrap();
        let err = grad_params(&m, |_net| Var::constant(f64::NAN)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
    }

    #[test]
    fn input_derivatives_zero_network() {
        let mut m = init_model(&[2, 10, 10, 1], 0, false).unwrap();
        m.set_flat_params(&vec![0.0; 151]).unwrap();
        let d = m.input_derivatives(&[vec![0.5, -0.5]], 1).unwrap();
        assert_eq!(d, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn input_derivatives_affine_layer() {
        let mut m = init_model(&[1, 1], 0, false).unwrap();
        m.set_flat_params(&[3.25, 0.5]).unwrap();
        let d = m.input_derivatives(&[vec![0.0], vec![9.0]], 1).unwrap();
        assert_relative_eq!(d[0][0], 3.25);
        assert_relative_eq!(d[1][0], 3.25);
    }

    #[test]
    fn input_derivatives_match_finite_differences() {
        let m = init_model(&[2, 8, 8, 1], 17, false).unwrap();
        let pts = vec![vec![0.3, 0.9], vec![-1.0, 0.2]];
        let d = m.input_derivatives(&pts, 1).unwrap();
        let step = 1e-5;
        for (p, dp) in pts.iter().zip(&d) {
            for k in 0..2 {
                let mut hi = p.clone();
                let mut lo = p.clone();
                hi[k] += step;
                lo[k] -= step;
                let fd = (m.forward_point(&hi).unwrap() - m.forward_point(&lo).unwrap())
                    / (2.0 * step);
                assert!((dp[k] - fd).abs() <= 1e-4 * fd.abs().max(dp[k].abs()) + 1e-8);
            }
        }
    }

    #[test]
    fn unsupported_derivative_order_is_rejected() {
        let m = init_model(&[1, 4, 1], 0, false).unwrap();
        assert!(matches!(
            m.input_derivatives(&[vec![0.0]], 2),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dir = std::env::temp_dir().join("conformal_pinn_net_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.txt");
        for inverse in [false, true] {
            let m = init_model(&[2, 10, 10, 1], 123, inverse).unwrap();
            m.save(&path).unwrap();
            let loaded = MlpModel::load(&path).unwrap();
            assert_eq!(m.layer_sizes(), loaded.layer_sizes());
            assert_eq!(m.beta().map(f64::to_bits), loaded.beta().map(f64::to_bits));
            let (a, b) = (m.flat_params(), loaded.flat_params());
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        std::fs::remove_dir_all(&dir).ok();
    }
}
