//! Scalar automatic differentiation: a reverse-mode tape for parameter
//! gradients and forward-mode dual numbers for input derivatives.
//!
//! Network evaluation is written once, generically over [`Scalar`], and
//! instantiated with:
//!
//! - `f64` for plain evaluation,
//! - [`Dual<f64>`] for exact derivatives with respect to network inputs,
//! - [`Var`] (a tape variable) for reverse-mode gradients of a scalar loss
//!   with respect to every parameter,
//! - [`Dual<Var>`] when the loss itself contains input derivatives (the
//!   physics residual terms), which yields forward-over-reverse second-order
//!   mixed derivatives exactly.
//!
//! The tape is thread-local: each gradient computation records and sweeps
//! its own thread's tape, so independent computations parallelize freely.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Sentinel parent index for constants; they receive no adjoint.
const CONST: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Node {
    parents: [u32; 2],
    weights: [f64; 2],
}

thread_local! {
    static TAPE: RefCell<Vec<Node>> = const { RefCell::new(Vec::new()) };
}

fn push_node(parents: [u32; 2], weights: [f64; 2]) -> u32 {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let idx = t.len() as u32;
        t.push(Node { parents, weights });
        idx
    })
}

/// A value recorded on the reverse-mode tape.
///
/// `Var`s are only meaningful inside the closure passed to [`grad`]; they
/// index into the thread-local tape that `grad` owns for the duration of
/// the call.
#[derive(Clone, Copy)]
pub struct Var {
    idx: u32,
    val: f64,
}

impl Var {
    /// A constant: participates in arithmetic, receives no adjoint.
    pub fn constant(val: f64) -> Self {
        Var { idx: CONST, val }
    }

    pub fn value(self) -> f64 {
        self.val
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        Var {
            idx: push_node([self.idx, rhs.idx], [1.0, 1.0]),
            val: self.val + rhs.val,
        }
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        Var {
            idx: push_node([self.idx, rhs.idx], [1.0, -1.0]),
            val: self.val - rhs.val,
        }
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        Var {
            idx: push_node([self.idx, rhs.idx], [rhs.val, self.val]),
            val: self.val * rhs.val,
        }
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, rhs: Var) -> Var {
        let val = self.val / rhs.val;
        Var {
            idx: push_node([self.idx, rhs.idx], [1.0 / rhs.val, -val / rhs.val]),
            val,
        }
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        Var {
            idx: push_node([self.idx, CONST], [-1.0, 0.0]),
            val: -self.val,
        }
    }
}

/// The scalar interface shared by `f64`, tape variables and dual numbers.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(v: f64) -> Self;
    /// Primal value, used for finiteness checks and diagnostics.
    fn value(self) -> f64;
    fn tanh(self) -> Self;
}

impl Scalar for f64 {
    fn constant(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
}

impl Scalar for Var {
    fn constant(v: f64) -> Self {
        Var::constant(v)
    }
    fn value(self) -> f64 {
        self.val
    }
    fn tanh(self) -> Self {
        let t = self.val.tanh();
        Var {
            idx: push_node([self.idx, CONST], [1.0 - t * t, 0.0]),
            val: t,
        }
    }
}

/// Forward-mode dual number carrying one directional derivative.
#[derive(Clone, Copy)]
pub struct Dual<S> {
    pub re: S,
    pub du: S,
}

impl<S: Scalar> Dual<S> {
    pub fn new(re: S, du: S) -> Self {
        Dual { re, du }
    }

    /// Lift a value with zero derivative.
    pub fn lift(re: S) -> Self {
        Dual {
            re,
            du: S::constant(0.0),
        }
    }

    /// Seed a value as the active differentiation variable.
    pub fn seeded(re: S) -> Self {
        Dual {
            re,
            du: S::constant(1.0),
        }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Dual {
            re: self.re + rhs.re,
            du: self.du + rhs.du,
        }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Dual {
            re: self.re - rhs.re,
            du: self.du - rhs.du,
        }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Dual {
            re: self.re * rhs.re,
            du: self.du * rhs.re + self.re * rhs.du,
        }
    }
}

impl<S: Scalar> Div for Dual<S> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let re = self.re / rhs.re;
        Dual {
            re,
            du: (self.du - re * rhs.du) / rhs.re,
        }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual {
            re: -self.re,
            du: -self.du,
        }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    fn constant(v: f64) -> Self {
        Dual::lift(S::constant(v))
    }
    fn value(self) -> f64 {
        self.re.value()
    }
    fn tanh(self) -> Self {
        let t = self.re.tanh();
        Dual {
            re: t,
            du: self.du * (S::constant(1.0) - t * t),
        }
    }
}

/// Record `f` on a fresh tape with `inputs` as leaves, then reverse-sweep.
///
/// Returns the scalar value of `f` and `d f / d inputs[i]` for every leaf.
/// The tape buffer is retained between calls on the same thread so the hot
/// training loop does not reallocate.
pub fn grad<F>(inputs: &[f64], f: F) -> (f64, Vec<f64>)
where
    F: FnOnce(&[Var]) -> Var,
{
    TAPE.with(|t| {
        let mut tape = t.borrow_mut();
        tape.clear();
        let leaves: Vec<Var> = inputs
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                tape.push(Node {
                    parents: [CONST, CONST],
                    weights: [0.0, 0.0],
                });
                Var {
                    idx: i as u32,
                    val: v,
                }
            })
            .collect();
        drop(tape);

        let out = f(&leaves);

        let tape = t.borrow();
        let mut grads = vec![0.0f64; inputs.len()];
        if out.idx == CONST {
            return (out.val, grads);
        }
        let n = (out.idx as usize + 1).max(inputs.len());
        let mut adjoint = vec![0.0f64; n];
        adjoint[out.idx as usize] = 1.0;
        for i in (0..n).rev() {
            let a = adjoint[i];
            if a == 0.0 {
                continue;
            }
            let node = tape[i];
            for k in 0..2 {
                if node.parents[k] != CONST {
                    adjoint[node.parents[k] as usize] += node.weights[k] * a;
                }
            }
        }
        grads.copy_from_slice(&adjoint[..inputs.len()]);
        (out.val, grads)
    })
}
