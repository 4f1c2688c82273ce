//! A trained model: network parameters, input embedding, and boundary
//! strategy, evaluated together in any scalar ring.
//!
//! Evaluation is generic over [`Scalar`], so the same code yields plain
//! values, boundary derivatives, PDE jets, and their 8-lane wide variants.
//! The derivative-subtraction strategy runs two inner evaluations of the raw
//! network at the boundary per point; these are lifted with a fresh
//! [`Dual`] direction over the outer ring, which also transports the mixed
//! x-boundary/t derivatives the PDE residual needs.

use crate::constraint::{flux_shift_1d, flux_shift_nd, ConstraintSpec, Geometry, Strategy};
use crate::embedding::EmbeddingSpec;
use crate::error::{Error, Result};
use crate::network::{NetworkParams, ParamGrads, SpatialJet, Workspace};
use crate::scalar::{Dual, Jet, Scalar};

/// Network + embedding + constraint, validated for mutual consistency.
#[derive(Clone, Debug)]
pub struct Model {
    params: NetworkParams,
    embedding: EmbeddingSpec,
    constraint: ConstraintSpec,
}

impl Model {
    pub fn new(
        params: NetworkParams,
        embedding: EmbeddingSpec,
        constraint: ConstraintSpec,
    ) -> Result<Self> {
        embedding.validate()?;
        constraint.validate(embedding.dim())?;
        let expected = embedding.output_len() + 1; // time is appended raw
        if params.input_width() != expected {
            return Err(Error::config(format!(
                "network input width {} does not match embedding output {} + time",
                params.input_width(),
                expected - 1
            )));
        }
        if constraint.strategy == Strategy::NewHc && !embedding.kind.is_derivative_vanishing() {
            return Err(Error::config(format!(
                "new_hc requires a derivative-vanishing embedding, got {}",
                embedding.kind.name()
            )));
        }
        match constraint.geometry {
            Geometry::UnitInterval => {
                if embedding.dim() != 1
                    || embedding.domain_lo[0] != 0.0
                    || embedding.domain_hi[0] != 1.0
                {
                    return Err(Error::config("unit_interval geometry needs domain [0,1]"));
                }
            }
            Geometry::OneSidedLo | Geometry::OneSidedHi => {
                let want_upper = constraint.geometry == Geometry::OneSidedHi;
                match embedding.kind {
                    crate::embedding::EmbeddingKind::HcCosineOneSided { at_upper }
                        if at_upper == want_upper => {}
                    _ => {
                        return Err(Error::config(
                            "one-sided geometry needs the matching one-sided embedding",
                        ))
                    }
                }
            }
            Geometry::Hyperrect => {
                if !matches!(
                    embedding.kind,
                    crate::embedding::EmbeddingKind::HcCosineHyperrect
                ) {
                    return Err(Error::config("hyperrect geometry needs the hyperrect embedding"));
                }
            }
            Geometry::GeneralInterval => {}
        }
        Ok(Model { params, embedding, constraint })
    }

    pub fn params(&self) -> &NetworkParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut NetworkParams {
        &mut self.params
    }

    pub fn set_params(&mut self, params: NetworkParams) {
        self.params = params;
    }

    pub fn embedding(&self) -> &EmbeddingSpec {
        &self.embedding
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.constraint
    }

    fn alpha(&self) -> f64 {
        self.embedding.domain_lo[0]
    }

    fn beta(&self) -> f64 {
        self.embedding.domain_hi[0]
    }

    /// Transformed model output in any ring. `bufs` carries the activation
    /// storage reused across points and consumed by [`Model::backward_1d`].
    pub(crate) fn eval_1d<S: Scalar>(&self, x: S, t: S, bufs: &mut EvalBufs<S>) -> S {
        let features = &mut bufs.features;
        features.clear();
        self.embedding.apply_1d(x, features);
        features.push(t);
        let u = self.params.eval(features, &mut bufs.ws);
        match self.constraint.strategy {
            Strategy::Soft => u,
            Strategy::NewHc => {
                u + flux_shift_1d(&self.constraint, self.alpha(), self.beta(), x)
            }
            Strategy::ExistingHc => {
                let (h0, h1) = self.boundary_slopes(t, bufs);
                let (phi1, phi2) = boundary_cubics(x);
                let a = S::from_f64(self.constraint.flux_lo[0]);
                let b = S::from_f64(self.constraint.flux_hi[0]);
                u - phi1 * (h0 - a) - phi2 * (h1 - b)
            }
        }
    }

    /// ∂ₓ of the raw (embedded) network at both unit-interval boundaries,
    /// lifted over the outer ring via a fresh dual direction. The dual
    /// channel transports ∂ₜ of those slopes as well, which the PDE
    /// residual of the transformed model requires.
    fn boundary_slopes<S: Scalar>(&self, t: S, bufs: &mut EvalBufs<S>) -> (S, S) {
        let inner = |x0: f64, feats: &mut Vec<Dual<S>>, ws: &mut Workspace<Dual<S>>| {
            feats.clear();
            self.embedding.apply_1d(Dual::var(S::from_f64(x0)), feats);
            feats.push(Dual::constant(t));
            self.params.eval(feats, ws).du
        };
        let h0 = inner(0.0, &mut bufs.inner_features, &mut bufs.inner_ws_lo);
        let h1 = inner(1.0, &mut bufs.inner_features, &mut bufs.inner_ws_hi);
        (h0, h1)
    }

    /// Reverse pass matching the last [`Model::eval_1d`] call on `bufs`.
    pub(crate) fn backward_1d<S: Scalar>(
        &self,
        x: S,
        out_adj: S,
        bufs: &mut EvalBufs<S>,
        grads: &mut ParamGrads,
    ) {
        self.params.backward(&mut bufs.ws, out_adj, grads);
        if self.constraint.strategy == Strategy::ExistingHc {
            let (phi1, phi2) = boundary_cubics(x);
            let h0_adj = (-phi1).tmul(out_adj);
            let h1_adj = (-phi2).tmul(out_adj);
            self.params.backward(
                &mut bufs.inner_ws_lo,
                Dual { re: S::zero(), du: h0_adj },
                grads,
            );
            self.params.backward(
                &mut bufs.inner_ws_hi,
                Dual { re: S::zero(), du: h1_adj },
                grads,
            );
        }
    }

    /// Transformed output on a d-dimensional spatial point (hyperrect or
    /// general embeddings applied per dimension).
    pub(crate) fn eval_nd<S: Scalar>(&self, x: &[S], t: S, bufs: &mut EvalBufs<S>) -> S {
        let features = &mut bufs.features;
        features.clear();
        self.embedding.apply_nd(x, features);
        features.push(t);
        let u = self.params.eval(features, &mut bufs.ws);
        match self.constraint.strategy {
            Strategy::Soft => u,
            Strategy::NewHc => {
                u + flux_shift_nd(
                    &self.constraint,
                    &self.embedding.domain_lo,
                    &self.embedding.domain_hi,
                    x,
                )
            }
            Strategy::ExistingHc => unreachable!("existing_hc is validated to 1D"),
        }
    }

    /// Plain transformed output at a point.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let mut bufs = EvalBufs::new(self);
        self.eval_1d(x, t, &mut bufs)
    }

    /// Plain transformed output at a d-dimensional point.
    pub fn value_nd(&self, x: &[f64], t: f64) -> Result<f64> {
        if x.len() != self.embedding.dim() {
            return Err(Error::config(format!(
                "point dimension {} does not match domain dimension {}",
                x.len(),
                self.embedding.dim()
            )));
        }
        let mut bufs = EvalBufs::new(self);
        Ok(self.eval_nd(x, t, &mut bufs))
    }

    /// Value and exact first/second spatial derivatives of the transformed
    /// output, via jet propagation through embedding, network, and transform.
    pub fn spatial_jet(&self, x: f64, t: f64) -> SpatialJet {
        let mut bufs = EvalBufs::new(self);
        let u = self.eval_1d(Jet::spatial(x), Jet::constant(t), &mut bufs);
        SpatialJet { value: u.v, d1: u.dx, d2: u.dxx }
    }

    /// Full PDE jet (value, ∂ₓ, ∂²ₓ, ∂ₜ) of the transformed output.
    pub fn point_jet(&self, x: f64, t: f64) -> Jet<f64> {
        let mut bufs = EvalBufs::new(self);
        let xj = Jet::spatial(x);
        let tj = Jet::temporal(t);
        self.eval_1d(xj, tj, &mut bufs)
    }

    /// ∂/∂x_dim of the transformed output at a d-dimensional point.
    pub fn normal_derivative(&self, x: &[f64], t: f64, dim: usize) -> Result<f64> {
        if dim >= x.len() || x.len() != self.embedding.dim() {
            return Err(Error::config("derivative dimension out of range"));
        }
        let mut bufs = EvalBufs::new(self);
        let seeded: Vec<Dual<f64>> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| if i == dim { Dual::var(v) } else { Dual::constant(v) })
            .collect();
        Ok(self.eval_nd(&seeded, Dual::constant(t), &mut bufs).du)
    }
}

/// Exact value/derivative data of a spatio-temporal field at a point; both
/// trained models and the analytic series implement it, so the composite
/// loss can be evaluated against either.
pub trait ResidualField {
    fn point_jet(&self, x: f64, t: f64) -> Jet<f64>;

    fn value(&self, x: f64, t: f64) -> f64 {
        self.point_jet(x, t).v
    }
}

impl ResidualField for Model {
    fn point_jet(&self, x: f64, t: f64) -> Jet<f64> {
        Model::point_jet(self, x, t)
    }
}

/// Raw-network jet with respect to the first input coordinate; `aux_inputs`
/// are appended untransformed. This bypasses embedding and transform — the
/// composed variants live on [`Model`].
pub fn forward_jet(params: &NetworkParams, x: f64, aux_inputs: &[f64]) -> Result<SpatialJet> {
    if 1 + aux_inputs.len() != params.input_width() {
        return Err(Error::config(format!(
            "1 + {} aux inputs does not match network input width {}",
            aux_inputs.len(),
            params.input_width()
        )));
    }
    let mut inputs: Vec<Jet<f64>> = Vec::with_capacity(params.input_width());
    inputs.push(Jet::spatial(x));
    inputs.extend(aux_inputs.iter().map(|&v| Jet::constant(v)));
    let mut ws = Workspace::new(params);
    let u = params.eval(&inputs, &mut ws);
    Ok(SpatialJet { value: u.v, d1: u.dx, d2: u.dxx })
}

/// Activation storage for one model evaluation; reused across the points of
/// a batch. The inner workspaces hold the boundary evaluations of the
/// derivative-subtraction strategy.
pub(crate) struct EvalBufs<S: Scalar> {
    features: Vec<S>,
    ws: Workspace<S>,
    inner_features: Vec<Dual<S>>,
    inner_ws_lo: Workspace<Dual<S>>,
    inner_ws_hi: Workspace<Dual<S>>,
}

impl<S: Scalar> EvalBufs<S> {
    pub(crate) fn new(model: &Model) -> Self {
        EvalBufs {
            features: Vec::with_capacity(model.embedding.output_len() + 1),
            ws: Workspace::new(&model.params),
            inner_features: Vec::new(),
            inner_ws_lo: Workspace::new(&model.params),
            inner_ws_hi: Workspace::new(&model.params),
        }
    }
}

/// The cubic factors of the unit-interval transforms: φ₁ = x(1−x)²,
/// φ₂ = x²(x−1). φ₁' is 1 at x=0 and 0 at x=1; φ₂' the reverse.
fn boundary_cubics<S: Scalar>(x: S) -> (S, S) {
    let one_minus = S::one() - x;
    let phi1 = x * one_minus * one_minus;
    let phi2 = x * x * (x - S::one());
    (phi1, phi2)
}
