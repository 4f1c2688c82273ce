//! Boundary-handling strategies: soft penalties, the derivative-subtraction
//! hard constraint, and the embedding-plus-polynomial-shift hard constraint,
//! on unit/general intervals, one-sided boundaries, and hyperrectangles.

use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// How Neumann data is imposed.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// No transform; boundary conditions enter the loss.
    Soft,
    /// Output transform subtracting boundary derivatives of the raw model.
    ExistingHc,
    /// Derivative-vanishing input embedding plus explicit polynomial shift.
    NewHc,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Soft => "soft",
            Strategy::ExistingHc => "existing_hc",
            Strategy::NewHc => "new_hc",
        }
    }

    pub fn is_hard(&self) -> bool {
        !matches!(self, Strategy::Soft)
    }
}

/// Domain geometry the constraint applies to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    UnitInterval,
    GeneralInterval,
    OneSidedLo,
    OneSidedHi,
    Hyperrect,
}

/// Boundary strategy, flux data, and geometry. Domain bounds live in the
/// paired [`crate::embedding::EmbeddingSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    pub strategy: Strategy,
    #[serde(default = "default_geometry")]
    pub geometry: Geometry,
    /// Prescribed flux at the lower boundary of each dimension (A, Aᵢ).
    #[serde(default = "default_flux")]
    pub flux_lo: Vec<f64>,
    /// Prescribed flux at the upper boundary of each dimension (B, Bᵢ).
    #[serde(default = "default_flux")]
    pub flux_hi: Vec<f64>,
    /// General intervals: divide each shift term by (β−α)² so the achieved
    /// boundary derivative equals the prescribed flux rather than
    /// flux·(β−α)². Off by default (the shift polynomial is then used
    /// exactly as published).
    #[serde(default)]
    pub normalized_shift: bool,
}

fn default_geometry() -> Geometry {
    Geometry::UnitInterval
}

fn default_flux() -> Vec<f64> {
    vec![0.0]
}

impl ConstraintSpec {
    pub fn soft() -> Self {
        ConstraintSpec {
            strategy: Strategy::Soft,
            geometry: Geometry::UnitInterval,
            flux_lo: vec![0.0],
            flux_hi: vec![0.0],
            normalized_shift: false,
        }
    }

    /// Derivative-subtraction hard constraint on the unit interval.
    pub fn existing_hc(flux_lo: f64, flux_hi: f64) -> Self {
        ConstraintSpec {
            strategy: Strategy::ExistingHc,
            geometry: Geometry::UnitInterval,
            flux_lo: vec![flux_lo],
            flux_hi: vec![flux_hi],
            normalized_shift: false,
        }
    }

    /// Embedding-based hard constraint on the unit interval.
    pub fn new_hc(flux_lo: f64, flux_hi: f64) -> Self {
        ConstraintSpec {
            strategy: Strategy::NewHc,
            geometry: Geometry::UnitInterval,
            flux_lo: vec![flux_lo],
            flux_hi: vec![flux_hi],
            normalized_shift: false,
        }
    }

    /// Embedding-based hard constraint on a general interval.
    pub fn new_hc_interval(flux_lo: f64, flux_hi: f64, normalized_shift: bool) -> Self {
        ConstraintSpec {
            strategy: Strategy::NewHc,
            geometry: Geometry::GeneralInterval,
            flux_lo: vec![flux_lo],
            flux_hi: vec![flux_hi],
            normalized_shift,
        }
    }

    /// One-sided hard constraint; `flux` applies at α (or β when `at_upper`).
    pub fn new_hc_one_sided(flux: f64, at_upper: bool) -> Self {
        ConstraintSpec {
            strategy: Strategy::NewHc,
            geometry: if at_upper { Geometry::OneSidedHi } else { Geometry::OneSidedLo },
            flux_lo: if at_upper { vec![] } else { vec![flux] },
            flux_hi: if at_upper { vec![flux] } else { vec![] },
            normalized_shift: false,
        }
    }

    /// Hyperrectangle hard constraint with per-dimension fluxes.
    pub fn new_hc_hyperrect(flux_lo: Vec<f64>, flux_hi: Vec<f64>) -> Self {
        ConstraintSpec {
            strategy: Strategy::NewHc,
            geometry: Geometry::Hyperrect,
            flux_lo,
            flux_hi,
            normalized_shift: false,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.geometry {
            Geometry::UnitInterval | Geometry::GeneralInterval => {
                if dim != 1 || self.flux_lo.len() != 1 || self.flux_hi.len() != 1 {
                    return Err(Error::config("interval geometry needs 1D bounds and one flux per side"));
                }
            }
            Geometry::OneSidedLo => {
                if dim != 1 || self.flux_lo.len() != 1 || !self.flux_hi.is_empty() {
                    return Err(Error::config("one_sided_lo carries exactly one flux value"));
                }
            }
            Geometry::OneSidedHi => {
                if dim != 1 || self.flux_hi.len() != 1 || !self.flux_lo.is_empty() {
                    return Err(Error::config("one_sided_hi carries exactly one flux value"));
                }
            }
            Geometry::Hyperrect => {
                if self.flux_lo.len() != dim || self.flux_hi.len() != dim {
                    return Err(Error::config(format!(
                        "hyperrect flux vectors must have length {dim}"
                    )));
                }
            }
        }
        if self.strategy != Strategy::NewHc
            && !matches!(self.geometry, Geometry::UnitInterval)
        {
            return Err(Error::config(format!(
                "strategy {} supports only the unit interval",
                self.strategy.name()
            )));
        }
        Ok(())
    }
}

/// The polynomial added to the network output so the prescribed fluxes are
/// met. Pure in the ring; no trainable parts, so nothing to backpropagate.
pub(crate) fn flux_shift_1d<S: Scalar>(spec: &ConstraintSpec, alpha: f64, beta: f64, x: S) -> S {
    match spec.geometry {
        Geometry::UnitInterval | Geometry::GeneralInterval => {
            let a = spec.flux_lo[0];
            let b = spec.flux_hi[0];
            if a == 0.0 && b == 0.0 {
                return S::zero();
            }
            let norm = if spec.normalized_shift {
                (beta - alpha) * (beta - alpha)
            } else {
                1.0
            };
            // (x−α)(β−x)²·A + (x−α)²(x−β)·B
            let xa = x - S::from_f64(alpha);
            let bx = S::from_f64(beta) - x;
            let xb = x - S::from_f64(beta);
            (xa * bx * bx).scale(a / norm) + (xa * xa * xb).scale(b / norm)
        }
        Geometry::OneSidedLo => {
            let a = spec.flux_lo[0];
            (x - S::from_f64(alpha)).scale(a)
        }
        Geometry::OneSidedHi => {
            let b = spec.flux_hi[0];
            (x - S::from_f64(beta)).scale(b)
        }
        Geometry::Hyperrect => unreachable!("hyperrect shift is d-dimensional"),
    }
}

/// The d-dimensional flux shift:
/// `Σᵢ Aᵢ(xᵢ−αᵢ)∏ⱼ≠ᵢ(βⱼ−xⱼ)² + Bᵢ(xᵢ−βᵢ)∏ⱼ≠ᵢ(xⱼ−αⱼ)²`.
/// For d = 1 the product over j ≠ i is empty and this sum cannot localize
/// the two flux terms to their boundaries, so the 1D case delegates to the
/// interval shift instead.
pub(crate) fn flux_shift_nd<S: Scalar>(
    spec: &ConstraintSpec,
    lo: &[f64],
    hi: &[f64],
    x: &[S],
) -> S {
    let d = x.len();
    if d == 1 {
        let mut interval = spec.clone();
        interval.geometry = Geometry::GeneralInterval;
        return flux_shift_1d(&interval, lo[0], hi[0], x[0]);
    }
    let mut sum = S::zero();
    for i in 0..d {
        let a = spec.flux_lo[i];
        if a != 0.0 {
            let mut term = (x[i] - S::from_f64(lo[i])).scale(a);
            for j in 0..d {
                if j != i {
                    let f = S::from_f64(hi[j]) - x[j];
                    term = term * f * f;
                }
            }
            sum = sum + term;
        }
        let b = spec.flux_hi[i];
        if b != 0.0 {
            let mut term = (x[i] - S::from_f64(hi[i])).scale(b);
            for j in 0..d {
                if j != i {
                    let f = x[j] - S::from_f64(lo[j]);
                    term = term * f * f;
                }
            }
            sum = sum + term;
        }
    }
    sum
}

fn expect_strategy(model: &Model, strategy: Strategy, geometry: &[Geometry]) -> Result<()> {
    let spec = model.constraint();
    if spec.strategy != strategy || !geometry.contains(&spec.geometry) {
        return Err(Error::config(format!(
            "transform expects strategy {} on {:?}, model has {} on {:?}",
            strategy.name(),
            geometry,
            spec.strategy.name(),
            spec.geometry
        )));
    }
    Ok(())
}

/// Derivative-subtraction transform on the unit interval:
/// `u(x,t) − x(1−x)²·(∂ₓu(0,t) − A) − x²(x−1)·(∂ₓu(1,t) − B)`.
/// The transformed output's boundary derivatives equal A and B for any
/// parameters.
pub fn existing_hc_transform(model: &Model, x: f64, t: f64) -> Result<f64> {
    expect_strategy(model, Strategy::ExistingHc, &[Geometry::UnitInterval])?;
    Ok(model.value(x, t))
}

/// Embedding-based transform on the unit interval:
/// `u(γ(x),t) + x(1−x)²·A + x²(x−1)·B`.
pub fn new_hc_transform(model: &Model, x: f64, t: f64) -> Result<f64> {
    expect_strategy(model, Strategy::NewHc, &[Geometry::UnitInterval])?;
    Ok(model.value(x, t))
}

/// Embedding-based transform on a general interval `[α, β]` with the
/// rescaled embedding and the shift `(x−α)(β−x)²A + (x−α)²(x−β)B`.
pub fn general_interval_transform(model: &Model, x: f64, t: f64) -> Result<f64> {
    expect_strategy(
        model,
        Strategy::NewHc,
        &[Geometry::GeneralInterval, Geometry::UnitInterval],
    )?;
    Ok(model.value(x, t))
}

/// One-sided transform `u(γ(x),t) + (x−α)·A` (mirrored for the upper side).
pub fn one_sided_transform(model: &Model, x: f64, t: f64) -> Result<f64> {
    expect_strategy(model, Strategy::NewHc, &[Geometry::OneSidedLo, Geometry::OneSidedHi])?;
    Ok(model.value(x, t))
}

/// Hyperrectangle transform with the component-wise embedding and the
/// d-dimensional flux shift.
pub fn hyperrect_transform(model: &Model, x: &[f64], t: f64) -> Result<f64> {
    expect_strategy(model, Strategy::NewHc, &[Geometry::Hyperrect])?;
    model.value_nd(x, t)
}
