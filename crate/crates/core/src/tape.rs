//! A recording tape over jet coefficients for reverse-mode parameter
//! gradients of arbitrary scalar losses.
//!
//! Every node stores a [`Jet<f64>`], so losses may freely mix values with
//! first/second spatial and first temporal derivative channels (extracted
//! via [`Tape::d1`]/[`Tape::d2`]/[`Tape::dt`]); the backward sweep then
//! yields ∂loss/∂θ including the mixed second-order-in-x, first-order-in-θ
//! contributions. The structured batch path in [`crate::problem`] computes
//! the same gradients layer-by-layer for speed; the two routes are checked
//! against each other in the tests.

use crate::error::{Error, Result};
use crate::network::{NetworkParams, ParamGrads};
use crate::scalar::{Jet, Scalar};

/// Handle to a tape node.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    Scale(usize, f64),
    Tanh(usize),
    Sin(usize),
    Cos(usize),
    /// Reads one derivative channel into the value channel of a new node.
    Extract(usize, Channel),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Channel {
    D1,
    D2,
    Dt,
}

struct Node {
    op: Op,
    val: Jet<f64>,
}

/// The recording tape. Create variables, combine them, then call
/// [`Tape::backward`] (or use [`loss_gradient`]).
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, op: Op, val: Jet<f64>) -> Var {
        self.nodes.push(Node { op, val });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> Jet<f64> {
        self.nodes[v.0].val
    }

    /// A spatial input: value x, dx seeded.
    pub fn input_x(&mut self, x: f64) -> Var {
        self.push(Op::Leaf, Jet::spatial(x))
    }

    /// A temporal input: value t, dt seeded.
    pub fn input_t(&mut self, t: f64) -> Var {
        self.push(Op::Leaf, Jet::temporal(t))
    }

    pub fn constant(&mut self, c: f64) -> Var {
        self.push(Op::Leaf, Jet::from_f64(c))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let val = self.nodes[a.0].val + self.nodes[b.0].val;
        self.push(Op::Add(a.0, b.0), val)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let val = self.nodes[a.0].val - self.nodes[b.0].val;
        self.push(Op::Sub(a.0, b.0), val)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let val = self.nodes[a.0].val * self.nodes[b.0].val;
        self.push(Op::Mul(a.0, b.0), val)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        let val = -self.nodes[a.0].val;
        self.push(Op::Neg(a.0), val)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let val = self.nodes[a.0].val.scale(k);
        self.push(Op::Scale(a.0, k), val)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.tanh();
        self.push(Op::Tanh(a.0), val)
    }

    pub fn sin(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.sin();
        self.push(Op::Sin(a.0), val)
    }

    pub fn cos(&mut self, a: Var) -> Var {
        let val = self.nodes[a.0].val.cos();
        self.push(Op::Cos(a.0), val)
    }

    pub fn sq(&mut self, a: Var) -> Var {
        self.mul(a, a)
    }

    /// ∂/∂x of `a` as a fresh scalar node.
    pub fn d1(&mut self, a: Var) -> Var {
        let val = Jet::from_f64(self.nodes[a.0].val.dx);
        self.push(Op::Extract(a.0, Channel::D1), val)
    }

    /// ∂²/∂x² of `a` as a fresh scalar node.
    pub fn d2(&mut self, a: Var) -> Var {
        let val = Jet::from_f64(self.nodes[a.0].val.dxx);
        self.push(Op::Extract(a.0, Channel::D2), val)
    }

    /// ∂/∂t of `a` as a fresh scalar node.
    pub fn dt(&mut self, a: Var) -> Var {
        let val = Jet::from_f64(self.nodes[a.0].val.dt);
        self.push(Op::Extract(a.0, Channel::Dt), val)
    }

    /// Adjoints of every node with respect to the value channel of `loss`.
    pub fn backward(&self, loss: Var) -> Vec<Jet<f64>> {
        let mut adj = vec![Jet::<f64>::zero(); self.nodes.len()];
        adj[loss.0] = Jet { v: 1.0, dx: 0.0, dxx: 0.0, dt: 0.0 };
        for i in (0..self.nodes.len()).rev() {
            let a_bar = adj[i];
            if a_bar == Jet::zero() {
                continue;
            }
            match self.nodes[i].op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    adj[a] = adj[a] + a_bar;
                    adj[b] = adj[b] + a_bar;
                }
                Op::Sub(a, b) => {
                    adj[a] = adj[a] + a_bar;
                    adj[b] = adj[b] - a_bar;
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.nodes[a].val, self.nodes[b].val);
                    adj[a] = adj[a] + vb.tmul(a_bar);
                    adj[b] = adj[b] + va.tmul(a_bar);
                }
                Op::Neg(a) => adj[a] = adj[a] - a_bar,
                Op::Scale(a, k) => adj[a] = adj[a] + a_bar.scale(k),
                Op::Tanh(a) => {
                    let y = self.nodes[i].val;
                    let d = Jet::<f64>::one() - y * y;
                    adj[a] = adj[a] + d.tmul(a_bar);
                }
                Op::Sin(a) => {
                    let d = self.nodes[a].val.cos();
                    adj[a] = adj[a] + d.tmul(a_bar);
                }
                Op::Cos(a) => {
                    let d = -self.nodes[a].val.sin();
                    adj[a] = adj[a] + d.tmul(a_bar);
                }
                Op::Extract(a, ch) => {
                    // The extraction reads one coefficient; its transpose
                    // routes the value-channel adjoint back to that channel.
                    match ch {
                        Channel::D1 => adj[a].dx += a_bar.v,
                        Channel::D2 => adj[a].dxx += a_bar.v,
                        Channel::Dt => adj[a].dt += a_bar.v,
                    }
                }
            }
        }
        adj
    }
}

/// Network parameters registered as tape leaves, ready for evaluation inside
/// a taped loss.
pub struct TapeNetwork {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<Var>>,
    biases: Vec<Vec<Var>>,
}

impl TapeNetwork {
    pub fn register(tape: &mut Tape, params: &NetworkParams) -> Self {
        let weights = params
            .weights()
            .iter()
            .map(|w| w.iter().map(|&v| tape.constant(v)).collect())
            .collect();
        let biases = params
            .biases()
            .iter()
            .map(|b| b.iter().map(|&v| tape.constant(v)).collect())
            .collect();
        TapeNetwork { layer_sizes: params.layer_sizes().to_vec(), weights, biases }
    }

    /// Runs the tanh network on tape variables (hidden tanh, linear output).
    pub fn eval(&self, tape: &mut Tape, inputs: &[Var]) -> Var {
        assert_eq!(inputs.len(), self.layer_sizes[0], "network input width");
        let n_layers = self.layer_sizes.len() - 1;
        let mut act: Vec<Var> = inputs.to_vec();
        for l in 0..n_layers {
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                let mut acc = self.biases[l][j];
                for k in 0..n_in {
                    let prod = tape.mul(self.weights[l][j * n_in + k], act[k]);
                    acc = tape.add(acc, prod);
                }
                next.push(if l + 1 == n_layers { acc } else { tape.tanh(acc) });
            }
            act = next;
        }
        act[0]
    }
}

/// Gradient of an arbitrary taped loss with respect to every parameter.
///
/// The closure receives the tape and the registered network and returns the
/// loss node; derivative channels of intermediate values (including second
/// spatial derivatives) may enter the loss freely.
pub fn loss_gradient<F>(params: &NetworkParams, loss_evaluator: F) -> Result<ParamGrads>
where
    F: FnOnce(&mut Tape, &TapeNetwork) -> Var,
{
    let mut tape = Tape::new();
    let net = TapeNetwork::register(&mut tape, params);
    let loss = loss_evaluator(&mut tape, &net);
    let value = tape.value(loss).v;
    if !value.is_finite() {
        return Err(Error::Training {
            message: format!("non-finite loss {value}"),
            term: "loss_gradient",
            point_index: 0,
        });
    }
    let adj = tape.backward(loss);
    let mut grads = ParamGrads::zeros_like(params);
    for l in 0..net.weights.len() {
        for (g, var) in grads.weights[l].iter_mut().zip(&net.weights[l]) {
            *g = adj[var.0].v;
        }
        for (g, var) in grads.biases[l].iter_mut().zip(&net.biases[l]) {
            *g = adj[var.0].v;
        }
    }
    Ok(grads)
}
