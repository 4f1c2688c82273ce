//! Dense tanh network: parameters, evaluation generic over [`Scalar`],
//! hand-rolled reverse-mode through the layer structure, and Adam.
//!
//! The hidden layers apply `tanh`; the output layer is linear, since PDE
//! solutions are not confined to (-1, 1). Reverse mode stores per-layer
//! post-activations in a [`Workspace`] and walks them backwards, expressing
//! every local rule through ring products and transposed products of the
//! scalar type, so the exact same code serves plain values, boundary duals,
//! PDE jets, and their 8-lane wide variants.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{Read, Write};
use std::path::Path;

/// Weights and biases of a dense tanh network. Immutable once built; training
/// owns a single copy and replaces it step by step.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    layer_sizes: Vec<usize>,
    /// Row-major `(out × in)` weight matrix per layer.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl NetworkParams {
    /// Builds a zero-initialized network. `layer_sizes` runs input width,
    /// hidden widths..., output width (which must be 1 in this crate).
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let weights = layer_pairs(layer_sizes)
            .map(|(n_in, n_out)| vec![0.0; n_in * n_out])
            .collect();
        let biases = layer_pairs(layer_sizes)
            .map(|(_, n_out)| vec![0.0; n_out])
            .collect();
        Ok(NetworkParams { layer_sizes: layer_sizes.to_vec(), weights, biases })
    }

    /// Glorot-uniform initialization, biases zero, reproducible per seed.
    pub fn glorot(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut params = Self::zeros(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (l, (n_in, n_out)) in layer_pairs(layer_sizes).enumerate() {
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            for w in params.weights[l].iter_mut() {
                *w = limit * (2.0 * rng.gen::<f64>() - 1.0);
            }
        }
        Ok(params)
    }

    /// Builds from explicit per-layer matrices; shapes must chain.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let n_layers = layer_sizes.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(Error::config("layer count mismatch between sizes and matrices"));
        }
        for (l, (n_in, n_out)) in layer_pairs(&layer_sizes).enumerate() {
            if weights[l].len() != n_in * n_out {
                return Err(Error::config(format!(
                    "layer {l} weight shape: expected {n_out}x{n_in}, got {} entries",
                    weights[l].len()
                )));
            }
            if biases[l].len() != n_out {
                return Err(Error::config(format!("layer {l} bias length")));
            }
        }
        let all_finite = weights.iter().chain(biases.iter()).flatten().all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::config("non-finite parameter entry"));
        }
        Ok(NetworkParams { layer_sizes, weights, biases })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn n_parameters(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>()
            + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    /// Plain evaluation at an input vector.
    pub fn forward(&self, input: &[f64]) -> Result<f64> {
        if input.len() != self.input_width() {
            return Err(Error::config(format!(
                "input width {} does not match network input width {}",
                input.len(),
                self.input_width()
            )));
        }
        let mut ws = Workspace::new(self);
        Ok(self.eval(input, &mut ws))
    }

    /// Evaluates the network on ring scalars, recording activations in `ws`
    /// for a later [`NetworkParams::backward`] pass. Panics on width mismatch
    /// (callers validate shapes at configuration time).
    pub(crate) fn eval<S: Scalar>(&self, input: &[S], ws: &mut Workspace<S>) -> S {
        assert_eq!(input.len(), self.input_width(), "network input width");
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(input);
        let n_layers = self.n_layers();
        for l in 0..n_layers {
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let w = &self.weights[l];
            let b = &self.biases[l];
            let last = l + 1 == n_layers;
            let (prev, rest) = ws.acts.split_at_mut(l + 1);
            let prev = &prev[l];
            let out = &mut rest[0];
            out.clear();
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut acc = S::from_f64(b[j]);
                for (k, &wjk) in row.iter().enumerate() {
                    acc = prev[k].mul_add(wjk, acc);
                }
                out.push(if last { acc } else { acc.tanh() });
            }
        }
        ws.acts[n_layers][0]
    }

    /// Reverse pass over the activations stored by [`NetworkParams::eval`].
    /// `out_adj` is the adjoint of the scalar output (one coefficient per
    /// ring channel and lane); parameter gradients accumulate into `grads`.
    pub(crate) fn backward<S: Scalar>(
        &self,
        ws: &mut Workspace<S>,
        out_adj: S,
        grads: &mut ParamGrads,
    ) {
        let n_layers = self.n_layers();
        let Workspace { acts, adj, adj_next } = ws;
        adj.clear();
        adj.push(out_adj);
        for l in (0..n_layers).rev() {
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let w = &self.weights[l];
            let prev = &acts[l];
            // Adjoint of this layer's pre-activation: for hidden layers the
            // stored activation is y = tanh(z), so z̄ = (1 - y²)ᵀ · ȳ; the
            // output layer is linear and z̄ = ȳ.
            if l + 1 != n_layers {
                for j in 0..n_out {
                    let y = acts[l + 1][j];
                    let d = S::one() - y * y;
                    adj[j] = d.tmul(adj[j]);
                }
            }
            let gw = &mut grads.weights[l];
            let gb = &mut grads.biases[l];
            adj_next.clear();
            adj_next.resize(n_in, S::zero());
            for j in 0..n_out {
                let zbar = adj[j];
                gb[j] += zbar.adj_bias();
                let row = &mut gw[j * n_in..(j + 1) * n_in];
                for k in 0..n_in {
                    row[k] += zbar.dot(prev[k]);
                    adj_next[k] = zbar.mul_add(w[j * n_in + k], adj_next[k]);
                }
            }
            std::mem::swap(adj, adj_next);
        }
    }

    /// Writes a checkpoint: format header, layer sizes, then row-major
    /// weights and biases per layer as little-endian f64 (bit-exact).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + 8 * self.n_parameters());
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
        for &s in &self.layer_sizes {
            buf.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for l in 0..self.n_layers() {
            for &v in &self.weights[l] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            for &v in &self.biases[l] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&buf)?;
        Ok(())
    }

    /// Reads a checkpoint written by [`NetworkParams::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let mut cur = bytes.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(Error::parse("checkpoint truncated"));
            }
            let (head, tail) = cur.split_at(n);
            cur = tail;
            Ok(head)
        };
        if take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::parse("not a parameter checkpoint"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::parse(format!("unsupported checkpoint version {version}")));
        }
        let n_sizes = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let mut layer_sizes = Vec::with_capacity(n_sizes);
        for _ in 0..n_sizes {
            layer_sizes.push(u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize);
        }
        validate_sizes(&layer_sizes)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for (n_in, n_out) in layer_pairs(&layer_sizes) {
            let mut w = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_in * n_out {
                w.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
            }
            let mut b = Vec::with_capacity(n_out);
            for _ in 0..n_out {
                b.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
            }
            weights.push(w);
            biases.push(b);
        }
        if !cur.is_empty() {
            return Err(Error::parse("trailing bytes in checkpoint"));
        }
        NetworkParams::from_parts(layer_sizes, weights, biases)
    }
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"NPC1";
const CHECKPOINT_VERSION: u32 = 1;

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::config("network needs at least input and output layers"));
    }
    if layer_sizes.iter().any(|&s| s == 0) {
        return Err(Error::config("zero-width layer"));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::config("output width must be 1"));
    }
    Ok(())
}

fn layer_pairs(sizes: &[usize]) -> impl Iterator<Item = (usize, usize)> + '_ {
    sizes.windows(2).map(|w| (w[0], w[1]))
}

/// Per-evaluation activation storage, reused across points of a batch.
pub(crate) struct Workspace<S> {
    /// `acts[0]` is the input; `acts[l]` for l ≥ 1 the post-activation of
    /// layer l (linear output for the last layer).
    acts: Vec<Vec<S>>,
    adj: Vec<S>,
    adj_next: Vec<S>,
}

impl<S: Scalar> Workspace<S> {
    pub(crate) fn new(params: &NetworkParams) -> Self {
        let acts = params
            .layer_sizes
            .iter()
            .map(|&n| Vec::with_capacity(n))
            .collect();
        Workspace { acts, adj: Vec::new(), adj_next: Vec::new() }
    }
}

/// Gradient (or any co-tangent) with the same shape as [`NetworkParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        ParamGrads {
            weights: params.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn accumulate(&mut self, other: &ParamGrads) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= k;
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .flat_map(|v| v.iter().copied())
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Value and first/second spatial derivatives of a model output at a point.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct SpatialJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Adam optimizer state: first/second moment estimates shaped like the
/// parameters, plus the step counter driving bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    first_moment: ParamGrads,
    second_moment: ParamGrads,
    step_count: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Defaults β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(params: &NetworkParams, learning_rate: f64) -> Self {
        AdamState {
            first_moment: ParamGrads::zeros_like(params),
            second_moment: ParamGrads::zeros_like(params),
            step_count: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn second_moment(&self) -> &ParamGrads {
        &self.second_moment
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step(params: &mut NetworkParams, grads: &ParamGrads, state: &mut AdamState) {
    state.step_count += 1;
    let t = state.step_count as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    let lr = state.learning_rate;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);

    let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..theta.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            theta[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };

    for l in 0..params.weights.len() {
        update(
            &mut params.weights[l],
            &grads.weights[l],
            &mut state.first_moment.weights[l],
            &mut state.second_moment.weights[l],
        );
        update(
            &mut params.biases[l],
            &grads.biases[l],
            &mut state.first_moment.biases[l],
            &mut state.second_moment.biases[l],
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Jet;
    use approx::assert_relative_eq;

    #[test]
    fn zero_network_outputs_zero() {
        let net = NetworkParams::zeros(&[2, 8, 8, 1]).unwrap();
        assert_eq!(net.forward(&[0.3, -1.2]).unwrap(), 0.0);
    }

    #[test]
    fn single_linear_layer_is_affine() {
        // w = 2, b = 1, input 3 → 7 (output layer has no activation).
        let net = NetworkParams::from_parts(vec![1, 1], vec![vec![2.0]], vec![vec![1.0]]).unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), 7.0);
    }

    #[test]
    fn input_width_mismatch_is_config_error() {
        let net = NetworkParams::zeros(&[2, 4, 1]).unwrap();
        assert!(matches!(net.forward(&[1.0]), Err(crate::error::Error::Config(_))));
    }

    #[test]
    fn output_width_must_be_one() {
        assert!(NetworkParams::zeros(&[2, 4, 3]).is_err());
    }

    /// Straight-line re-evaluation with compensated (double-double style)
    /// accumulation as an independent reference for the forward pass.
    fn forward_reference(net: &NetworkParams, input: &[f64]) -> f64 {
        let mut act: Vec<f64> = input.to_vec();
        let n_layers = net.n_layers();
        for l in 0..n_layers {
            let n_in = net.layer_sizes()[l];
            let n_out = net.layer_sizes()[l + 1];
            let mut next = Vec::with_capacity(n_out);
            for j in 0..n_out {
                // Kahan-compensated dot product.
                let mut sum = net.biases()[l][j];
                let mut comp = 0.0;
                for k in 0..n_in {
                    let term = net.weights()[l][j * n_in + k] * act[k];
                    let y = term - comp;
                    let t = sum + y;
                    comp = (t - sum) - y;
                    sum = t;
                }
                next.push(if l + 1 == n_layers { sum } else { sum.tanh() });
            }
            act = next;
        }
        act[0]
    }

    #[test]
    fn forward_matches_independent_reference() {
        let net = NetworkParams::glorot(&[2, 100, 100, 100, 1], 42).unwrap();
        let input = [0.37, 0.81];
        let got = net.forward(&input).unwrap();
        let want = forward_reference(&net, &input);
        assert_relative_eq!(got, want, max_relative = 1e-13);
    }

    #[test]
    fn glorot_is_reproducible_and_permutation_equivariant() {
        let a = NetworkParams::glorot(&[2, 16, 1], 7).unwrap();
        let b = NetworkParams::glorot(&[2, 16, 1], 7).unwrap();
        assert_eq!(a, b);

        // Swapping two hidden neurons together with their weight rows/columns
        // leaves the output unchanged.
        let mut c = a.clone();
        let (n_in, _h) = (2, 16);
        let (i, j) = (3, 11);
        for k in 0..n_in {
            c.weights_mut()[0].swap(i * n_in + k, j * n_in + k);
        }
        c.biases_mut()[0].swap(i, j);
        c.weights_mut()[1].swap(i, j);
        // Permutation reorders the next layer's summation, so agreement is
        // up to roundoff, not bitwise.
        let x = [0.2, -0.4];
        assert_relative_eq!(
            a.forward(&x).unwrap(),
            c.forward(&x).unwrap(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn jet_derivatives_match_finite_differences() {
        let net = NetworkParams::glorot(&[2, 20, 20, 1], 3).unwrap();
        let (x, t) = (0.42, 0.3);
        let mut ws = Workspace::new(&net);
        let u = net.eval(&[Jet::spatial(x), Jet::constant(t)], &mut ws);
        let f = |x: f64| net.forward(&[x, t]).unwrap();
        let h = 1e-4;
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        assert_relative_eq!(u.dx, d1, max_relative = 1e-5);
        assert_relative_eq!(u.dxx, d2, max_relative = 1e-4);
    }

    #[test]
    fn backward_gradient_matches_finite_differences() {
        // L = u(x0)²; dL/dθ = 2 u ∂u/∂θ.
        let net = NetworkParams::glorot(&[2, 10, 10, 1], 11).unwrap();
        let input = [0.3_f64, 0.9];
        let mut ws = Workspace::new(&net);
        let u = net.eval(&[input[0], input[1]], &mut ws);
        let mut grads = ParamGrads::zeros_like(&net);
        net.backward(&mut ws, 2.0 * u, &mut grads);

        let h = 1e-6;
        let fd_check = |get: &dyn Fn(&mut NetworkParams) -> &mut f64, g: f64| {
            let mut plus = net.clone();
            *get(&mut plus) += h;
            let mut minus = net.clone();
            *get(&mut minus) -= h;
            let lp = plus.forward(&input).unwrap().powi(2);
            let lm = minus.forward(&input).unwrap().powi(2);
            let fd = (lp - lm) / (2.0 * h);
            if fd.abs() > 1e-8 {
                assert_relative_eq!(g, fd, max_relative = 1e-4);
            }
        };
        for l in 0..net.n_layers() {
            for idx in 0..net.weights()[l].len() {
                let g = grads.weights[l][idx];
                fd_check(&|p| &mut p.weights_mut()[l][idx], g);
            }
            for idx in 0..net.biases()[l].len() {
                let g = grads.biases[l][idx];
                fd_check(&|p| &mut p.biases_mut()[l][idx], g);
            }
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut net = NetworkParams::glorot(&[1, 4, 1], 5).unwrap();
        let before = net.clone();
        let grads = ParamGrads::zeros_like(&net);
        let mut state = AdamState::new(&net, 1e-4);
        adam_step(&mut net, &grads, &mut state);
        assert_eq!(net, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn adam_first_step_magnitude() {
        // Scalar parameter, g = 1: first step moves by lr / (1 + ε).
        let mut net = NetworkParams::from_parts(vec![1, 1], vec![vec![0.5]], vec![vec![0.0]]).unwrap();
        let mut grads = ParamGrads::zeros_like(&net);
        grads.weights[0][0] = 1.0;
        let mut state = AdamState::new(&net, 1e-4);
        adam_step(&mut net, &grads, &mut state);
        let expected = 0.5 - 1e-4 / (1.0 + 1e-8);
        assert_relative_eq!(net.weights()[0][0], expected, max_relative = 1e-15);
    }

    #[test]
    fn adam_identical_parameters_stay_identical() {
        let mut net = NetworkParams::from_parts(
            vec![1, 2, 1],
            vec![vec![0.3, 0.3], vec![0.7, 0.7]],
            vec![vec![0.1, 0.1], vec![0.0]],
        )
        .unwrap();
        let mut state = AdamState::new(&net, 1e-3);
        for step in 0..25 {
            let mut grads = ParamGrads::zeros_like(&net);
            let g = (step as f64 * 0.37).sin() + 0.2;
            grads.weights[0] = vec![g, g];
            grads.weights[1] = vec![-g, -g];
            grads.biases[0] = vec![0.5 * g, 0.5 * g];
            adam_step(&mut net, &grads, &mut state);
            assert_eq!(net.weights()[0][0], net.weights()[0][1]);
            assert_eq!(net.weights()[1][0], net.weights()[1][1]);
            assert_eq!(net.biases()[0][0], net.biases()[0][1]);
            assert!(state.second_moment().iter().all(|v| v >= 0.0));
        }
    }

    #[test]
    fn checkpoint_roundtrips_bit_exactly() {
        let net = NetworkParams::glorot(&[3, 17, 9, 1], 123).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.npc");
        net.save(&path).unwrap();
        let back = NetworkParams::load(&path).unwrap();
        assert_eq!(net, back);
    }

    #[test]
    fn checkpoint_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bogus.npc");
        std::fs::write(&path, b"XXXX\x01\x00\x00\x00").unwrap();
        assert!(NetworkParams::load(&path).is_err());
    }
}
