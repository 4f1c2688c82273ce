//! Truncated-Taylor scalar types for exact derivative propagation.
//!
//! Every model evaluation in this crate is generic over [`Scalar`], a
//! commutative ring of truncated Taylor coefficients over `f64`. Lifting an
//! evaluation into the right ring yields exact spatial/temporal derivatives
//! (no finite differences), and the same ring structure drives reverse-mode
//! parameter gradients: for `c = a * b` the adjoint contribution to `a` is the
//! transposed multiplication [`Scalar::tmul`] by `b`, and for an analytic
//! `y = f(a)` it is `tmul` by the lifted `f'(a)`.
//!
//! Instantiations used across the crate:
//!
//! * `f64` — plain evaluation (initial-condition residuals, grid sweeps).
//! * [`Dual<S>`] — one extra first-order direction over any scalar; seeds the
//!   boundary-flux derivative and the inner boundary evaluations of the
//!   derivative-subtraction hard constraint.
//! * [`Jet<C>`] — value, d/dx, d²/dx², d/dt with respect to the spatial and
//!   temporal inputs; the workhorse for PDE residuals.
//! * [`Wide<L>`] — `L` independent lanes evaluated at once. `Jet<Wide<8>>`
//!   etc. give the batch kernels their SIMD-friendly layout while reusing the
//!   exact same generic code paths as the single-point types.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

/// A commutative coefficient ring over `f64` supporting forward propagation
/// of truncated Taylor data and the transposed products needed for
/// reverse-mode gradients.
pub trait Scalar:
    Copy
    + Clone
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn zero() -> Self;
    fn one() -> Self;
    /// Embeds a real constant (value channel only).
    fn from_f64(c: f64) -> Self;
    /// Componentwise scaling by a real constant.
    fn scale(self, k: f64) -> Self;
    /// `acc + k * self`, componentwise, using fused multiply-add per lane.
    fn mul_add(self, k: f64, acc: Self) -> Self;

    /// Componentwise division by a real constant (used where exact endpoint
    /// ratios matter: `(β−α)/(β−α)` is exactly 1 under IEEE division).
    fn div_scale(self, k: f64) -> Self;

    fn tanh(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    /// `sin(π·self)` with exact reduction: exactly ±0.0 at integers.
    fn sinpi(self) -> Self;
    /// `cos(π·self)` with exact reduction: exactly ±1 at integers, ±0.0 at
    /// half-integers.
    fn cospi(self) -> Self;

    /// Transposed multiplication: the adjoint contribution `Mᵀ_self · adj`,
    /// where `M_self` is "multiply by `self`" on the coefficient module.
    /// For `c = a * b`: `ā += b.tmul(c̄)` and `b̄ += a.tmul(c̄)`.
    fn tmul(self, adj: Self) -> Self;

    /// Full coefficient dot product (used for weight gradients, where the
    /// weight multiplies every coefficient of the activation).
    fn dot(self, other: Self) -> f64;

    /// Sum of the value-channel coefficients (bias gradients: a bias enters
    /// only the value channel of every lane).
    fn adj_bias(self) -> f64;
}

/// `sin(πx)` via reduction `x = n + f`, `|f| ≤ 1/2`: the remainder is exact,
/// so multiples of π come out as exact zeros and half-integers as exact ±1.
pub fn sinpi_f64(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    let n = x.round();
    let f = x - n;
    let sign = if (n.rem_euclid(2.0)) == 0.0 { 1.0 } else { -1.0 };
    if f == 0.0 {
        return sign * f; // keeps ±0.0
    }
    if f.abs() == 0.5 {
        return sign * f.signum();
    }
    sign * (std::f64::consts::PI * f).sin()
}

/// `cos(πx)` with the same exact reduction as [`sinpi_f64`].
pub fn cospi_f64(x: f64) -> f64 {
    if !x.is_finite() {
        return f64::NAN;
    }
    let n = x.round();
    let f = x - n;
    let sign = if (n.rem_euclid(2.0)) == 0.0 { 1.0 } else { -1.0 };
    if f.abs() == 0.5 {
        return 0.0;
    }
    sign * (std::f64::consts::PI * f).cos()
}

impl Scalar for f64 {
    #[inline(always)]
    fn zero() -> Self {
        0.0
    }
    #[inline(always)]
    fn one() -> Self {
        1.0
    }
    #[inline(always)]
    fn from_f64(c: f64) -> Self {
        c
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        self * k
    }
    #[inline(always)]
    fn mul_add(self, k: f64, acc: Self) -> Self {
        f64::mul_add(self, k, acc)
    }
    #[inline(always)]
    fn div_scale(self, k: f64) -> Self {
        self / k
    }
    #[inline(always)]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline(always)]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline(always)]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline(always)]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline(always)]
    fn sinpi(self) -> Self {
        sinpi_f64(self)
    }
    #[inline(always)]
    fn cospi(self) -> Self {
        cospi_f64(self)
    }
    #[inline(always)]
    fn tmul(self, adj: Self) -> Self {
        self * adj
    }
    #[inline(always)]
    fn dot(self, other: Self) -> f64 {
        self * other
    }
    #[inline(always)]
    fn adj_bias(self) -> f64 {
        self
    }
}

/// `L` independent evaluation lanes. Lanes never interact, so every ring
/// operation is elementwise; reductions (`dot`, `adj_bias`) use a fixed
/// halving tree so results are identical regardless of thread count.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Wide<const L: usize>(pub [f64; L]);

impl<const L: usize> Wide<L> {
    #[inline(always)]
    pub fn splat(v: f64) -> Self {
        Wide([v; L])
    }

    #[inline(always)]
    pub fn from_lanes(lanes: [f64; L]) -> Self {
        Wide(lanes)
    }

    #[inline(always)]
    pub fn lane(&self, i: usize) -> f64 {
        self.0[i]
    }

    #[inline(always)]
    pub fn set_lane(&mut self, i: usize, v: f64) {
        self.0[i] = v;
    }

    #[inline(always)]
    fn map(self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = [0.0; L];
        for i in 0..L {
            out[i] = f(self.0[i]);
        }
        Wide(out)
    }

    #[inline(always)]
    fn zip(self, other: Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = [0.0; L];
        for i in 0..L {
            out[i] = f(self.0[i], other.0[i]);
        }
        Wide(out)
    }
}

/// Fixed-order halving-tree sum: deterministic and SIMD-friendly.
#[inline(always)]
fn tree_sum<const L: usize>(mut v: [f64; L]) -> f64 {
    let mut n = L;
    while n > 1 {
        let half = n / 2;
        for i in 0..half {
            v[i] += v[i + half];
        }
        if n % 2 == 1 {
            v[half - 1] += v[n - 1];
        }
        n = half;
    }
    v[0]
}

impl<const L: usize> Add for Wide<L> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }
}

impl<const L: usize> Sub for Wide<L> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }
}

impl<const L: usize> Mul for Wide<L> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        self.zip(rhs, |a, b| a * b)
    }
}

impl<const L: usize> Neg for Wide<L> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        self.map(|a| -a)
    }
}

impl<const L: usize> Scalar for Wide<L> {
    #[inline(always)]
    fn zero() -> Self {
        Wide([0.0; L])
    }
    #[inline(always)]
    fn one() -> Self {
        Wide([1.0; L])
    }
    #[inline(always)]
    fn from_f64(c: f64) -> Self {
        Wide([c; L])
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        self.map(|a| a * k)
    }
    #[inline(always)]
    fn mul_add(self, k: f64, acc: Self) -> Self {
        let mut out = [0.0; L];
        for i in 0..L {
            out[i] = f64::mul_add(self.0[i], k, acc.0[i]);
        }
        Wide(out)
    }
    #[inline(always)]
    fn div_scale(self, k: f64) -> Self {
        self.map(|a| a / k)
    }
    #[inline(always)]
    fn tanh(self) -> Self {
        self.map(f64::tanh)
    }
    #[inline(always)]
    fn sin(self) -> Self {
        self.map(f64::sin)
    }
    #[inline(always)]
    fn cos(self) -> Self {
        self.map(f64::cos)
    }
    #[inline(always)]
    fn exp(self) -> Self {
        self.map(f64::exp)
    }
    #[inline(always)]
    fn sinpi(self) -> Self {
        self.map(sinpi_f64)
    }
    #[inline(always)]
    fn cospi(self) -> Self {
        self.map(cospi_f64)
    }
    #[inline(always)]
    fn tmul(self, adj: Self) -> Self {
        self * adj
    }
    #[inline(always)]
    fn dot(self, other: Self) -> f64 {
        let mut prod = [0.0; L];
        for i in 0..L {
            prod[i] = self.0[i] * other.0[i];
        }
        tree_sum(prod)
    }
    #[inline(always)]
    fn adj_bias(self) -> f64 {
        tree_sum(self.0)
    }
}

/// One extra first-order derivative direction over an inner scalar:
/// `re + du·ε` with `ε² = 0`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Dual<S> {
    pub re: S,
    pub du: S,
}

impl<S: Scalar> Dual<S> {
    /// Seeds the dual direction: derivative 1 with respect to this input.
    #[inline(always)]
    pub fn var(v: S) -> Self {
        Dual { re: v, du: S::one() }
    }

    /// A value that does not carry the dual direction.
    #[inline(always)]
    pub fn constant(v: S) -> Self {
        Dual { re: v, du: S::zero() }
    }
}

impl<S: Scalar> Add for Dual<S> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        Dual { re: self.re + rhs.re, du: self.du + rhs.du }
    }
}

impl<S: Scalar> Sub for Dual<S> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        Dual { re: self.re - rhs.re, du: self.du - rhs.du }
    }
}

impl<S: Scalar> Mul for Dual<S> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        Dual {
            re: self.re * rhs.re,
            du: self.re * rhs.du + self.du * rhs.re,
        }
    }
}

impl<S: Scalar> Neg for Dual<S> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        Dual { re: -self.re, du: -self.du }
    }
}

impl<S: Scalar> Scalar for Dual<S> {
    #[inline(always)]
    fn zero() -> Self {
        Dual { re: S::zero(), du: S::zero() }
    }
    #[inline(always)]
    fn one() -> Self {
        Dual { re: S::one(), du: S::zero() }
    }
    #[inline(always)]
    fn from_f64(c: f64) -> Self {
        Dual { re: S::from_f64(c), du: S::zero() }
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        Dual { re: self.re.scale(k), du: self.du.scale(k) }
    }
    #[inline(always)]
    fn mul_add(self, k: f64, acc: Self) -> Self {
        Dual {
            re: self.re.mul_add(k, acc.re),
            du: self.du.mul_add(k, acc.du),
        }
    }
    #[inline(always)]
    fn div_scale(self, k: f64) -> Self {
        Dual { re: self.re.div_scale(k), du: self.du.div_scale(k) }
    }
    #[inline(always)]
    fn tanh(self) -> Self {
        let y = self.re.tanh();
        let d = S::one() - y * y;
        Dual { re: y, du: self.du * d }
    }
    #[inline(always)]
    fn sin(self) -> Self {
        Dual { re: self.re.sin(), du: self.du * self.re.cos() }
    }
    #[inline(always)]
    fn cos(self) -> Self {
        Dual { re: self.re.cos(), du: -(self.du * self.re.sin()) }
    }
    #[inline(always)]
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual { re: e, du: self.du * e }
    }
    #[inline(always)]
    fn sinpi(self) -> Self {
        Dual {
            re: self.re.sinpi(),
            du: (self.du * self.re.cospi()).scale(std::f64::consts::PI),
        }
    }
    #[inline(always)]
    fn cospi(self) -> Self {
        Dual {
            re: self.re.cospi(),
            du: -(self.du * self.re.sinpi()).scale(std::f64::consts::PI),
        }
    }
    #[inline(always)]
    fn tmul(self, adj: Self) -> Self {
        // Block-transpose of multiplication by (re, du):
        //   [M_re   0  ]ᵀ   [M_reᵀ  M_duᵀ]
        //   [M_du  M_re]  = [ 0     M_reᵀ]
        Dual {
            re: self.re.tmul(adj.re) + self.du.tmul(adj.du),
            du: self.re.tmul(adj.du),
        }
    }
    #[inline(always)]
    fn dot(self, other: Self) -> f64 {
        self.re.dot(other.re) + self.du.dot(other.du)
    }
    #[inline(always)]
    fn adj_bias(self) -> f64 {
        self.re.adj_bias()
    }
}

/// Truncated jet carrying value, ∂/∂x, ∂²/∂x², and ∂/∂t.
///
/// This is the quotient ring R[εx, εt] / (εx³, εt², εx·εt): the mixed and
/// higher monomials are never read by the losses, and dropping them keeps the
/// retained coefficients exact because every divisor of a retained monomial
/// is itself retained. `dxx` stores the second derivative itself (not the
/// Taylor coefficient), hence the factor 2 in the product rule.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Jet<C> {
    pub v: C,
    pub dx: C,
    pub dxx: C,
    pub dt: C,
}

impl<C: Scalar> Jet<C> {
    /// Seeds the spatial coordinate: dx = 1.
    #[inline(always)]
    pub fn spatial(x: C) -> Self {
        Jet { v: x, dx: C::one(), dxx: C::zero(), dt: C::zero() }
    }

    /// Seeds the temporal coordinate: dt = 1.
    #[inline(always)]
    pub fn temporal(t: C) -> Self {
        Jet { v: t, dx: C::zero(), dxx: C::zero(), dt: C::one() }
    }

    #[inline(always)]
    pub fn constant(v: C) -> Self {
        Jet { v, dx: C::zero(), dxx: C::zero(), dt: C::zero() }
    }
}

impl<C: Scalar> Add for Jet<C> {
    type Output = Self;
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        Jet {
            v: self.v + rhs.v,
            dx: self.dx + rhs.dx,
            dxx: self.dxx + rhs.dxx,
            dt: self.dt + rhs.dt,
        }
    }
}

impl<C: Scalar> Sub for Jet<C> {
    type Output = Self;
    #[inline(always)]
    fn sub(self, rhs: Self) -> Self {
        Jet {
            v: self.v - rhs.v,
            dx: self.dx - rhs.dx,
            dxx: self.dxx - rhs.dxx,
            dt: self.dt - rhs.dt,
        }
    }
}

impl<C: Scalar> Mul for Jet<C> {
    type Output = Self;
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        Jet {
            v: self.v * rhs.v,
            dx: self.v * rhs.dx + self.dx * rhs.v,
            dxx: self.v * rhs.dxx + (self.dx * rhs.dx).scale(2.0) + self.dxx * rhs.v,
            dt: self.v * rhs.dt + self.dt * rhs.v,
        }
    }
}

impl<C: Scalar> Neg for Jet<C> {
    type Output = Self;
    #[inline(always)]
    fn neg(self) -> Self {
        Jet { v: -self.v, dx: -self.dx, dxx: -self.dxx, dt: -self.dt }
    }
}

impl<C: Scalar> Jet<C> {
    /// Composes with an analytic `f` given lifted `f(v)`, `f'(v)`, `f''(v)`.
    #[inline(always)]
    fn compose(self, f0: C, f1: C, f2: C) -> Self {
        Jet {
            v: f0,
            dx: f1 * self.dx,
            dxx: f1 * self.dxx + f2 * self.dx * self.dx,
            dt: f1 * self.dt,
        }
    }
}

impl<C: Scalar> Scalar for Jet<C> {
    #[inline(always)]
    fn zero() -> Self {
        Jet::constant(C::zero())
    }
    #[inline(always)]
    fn one() -> Self {
        Jet::constant(C::one())
    }
    #[inline(always)]
    fn from_f64(c: f64) -> Self {
        Jet::constant(C::from_f64(c))
    }
    #[inline(always)]
    fn scale(self, k: f64) -> Self {
        Jet {
            v: self.v.scale(k),
            dx: self.dx.scale(k),
            dxx: self.dxx.scale(k),
            dt: self.dt.scale(k),
        }
    }
    #[inline(always)]
    fn mul_add(self, k: f64, acc: Self) -> Self {
        Jet {
            v: self.v.mul_add(k, acc.v),
            dx: self.dx.mul_add(k, acc.dx),
            dxx: self.dxx.mul_add(k, acc.dxx),
            dt: self.dt.mul_add(k, acc.dt),
        }
    }
    #[inline(always)]
    fn div_scale(self, k: f64) -> Self {
        Jet {
            v: self.v.div_scale(k),
            dx: self.dx.div_scale(k),
            dxx: self.dxx.div_scale(k),
            dt: self.dt.div_scale(k),
        }
    }
    #[inline(always)]
    fn tanh(self) -> Self {
        let t = self.v.tanh();
        let s = C::one() - t * t;
        // tanh'' = -2 tanh · tanh'
        self.compose(t, s, (t * s).scale(-2.0))
    }
    #[inline(always)]
    fn sin(self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.compose(s, c, -s)
    }
    #[inline(always)]
    fn cos(self) -> Self {
        let s = self.v.sin();
        let c = self.v.cos();
        self.compose(c, -s, -c)
    }
    #[inline(always)]
    fn exp(self) -> Self {
        let e = self.v.exp();
        self.compose(e, e, e)
    }
    #[inline(always)]
    fn sinpi(self) -> Self {
        const PI: f64 = std::f64::consts::PI;
        let s = self.v.sinpi();
        let c = self.v.cospi();
        self.compose(s, c.scale(PI), s.scale(-PI * PI))
    }
    #[inline(always)]
    fn cospi(self) -> Self {
        const PI: f64 = std::f64::consts::PI;
        let s = self.v.sinpi();
        let c = self.v.cospi();
        self.compose(c, s.scale(-PI), c.scale(-PI * PI))
    }
    #[inline(always)]
    fn tmul(self, adj: Self) -> Self {
        // Transpose of multiplication by self = b:
        //   c.v   = a.v b.v
        //   c.dx  = a.v b.dx + a.dx b.v
        //   c.dxx = a.v b.dxx + 2 a.dx b.dx + a.dxx b.v
        //   c.dt  = a.v b.dt + a.dt b.v
        Jet {
            v: self.v.tmul(adj.v)
                + self.dx.tmul(adj.dx)
                + self.dxx.tmul(adj.dxx)
                + self.dt.tmul(adj.dt),
            dx: self.v.tmul(adj.dx) + self.dx.scale(2.0).tmul(adj.dxx),
            dxx: self.v.tmul(adj.dxx),
            dt: self.v.tmul(adj.dt),
        }
    }
    #[inline(always)]
    fn dot(self, other: Self) -> f64 {
        self.v.dot(other.v)
            + self.dx.dot(other.dx)
            + self.dxx.dot(other.dxx)
            + self.dt.dot(other.dt)
    }
    #[inline(always)]
    fn adj_bias(self) -> f64 {
        self.v.adj_bias()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn jet_x(x: f64) -> Jet<f64> {
        Jet::spatial(x)
    }

    // A nontrivial composite expression used for cross-route checks.
    fn expr<S: Scalar>(x: S, t: S) -> S {
        let a = (x * x).scale(1.3) + x.scale(0.7) - S::from_f64(0.2);
        let b = (a.sin() + t.scale(0.5)).tanh();
        b * b + (x * t).cos().scale(0.25) + b.exp().scale(0.01)
    }

    fn expr_f(x: f64, t: f64) -> f64 {
        expr(x, t)
    }

    #[test]
    fn jet_polynomial_derivatives() {
        // u = x^2: d1 = 2x, d2 = 2.
        let x = 0.37;
        let j = jet_x(x);
        let u = j * j;
        assert_eq!(u.v, x * x);
        assert_eq!(u.dx, 2.0 * x);
        assert_eq!(u.dxx, 2.0);
        assert_eq!(u.dt, 0.0);
    }

    #[test]
    fn jet_matches_finite_differences() {
        let x = 0.413;
        let t = 0.77;
        let h = 1e-4;
        let u = expr(jet_x(x), Jet::temporal(t));
        let d1_fd = (expr_f(x + h, t) - expr_f(x - h, t)) / (2.0 * h);
        let d2_fd = (expr_f(x + h, t) - 2.0 * expr_f(x, t) + expr_f(x - h, t)) / (h * h);
        let dt_fd = (expr_f(x, t + h) - expr_f(x, t - h)) / (2.0 * h);
        assert_relative_eq!(u.v, expr_f(x, t), max_relative = 1e-14);
        assert_relative_eq!(u.dx, d1_fd, max_relative = 1e-6);
        assert_relative_eq!(u.dxx, d2_fd, max_relative = 1e-5);
        assert_relative_eq!(u.dt, dt_fd, max_relative = 1e-6);
    }

    #[test]
    fn jet_second_derivative_matches_nested_duals() {
        // Independent route: d²/dx² via two nested first-order duals.
        let x = 0.234;
        let t = 0.6;
        let xx: Dual<Dual<f64>> = Dual {
            re: Dual::var(x),
            du: Dual::constant(1.0),
        };
        let tt = Dual::constant(Dual::constant(t));
        let nested = expr(xx, tt);
        let jet = expr(jet_x(x), Jet::temporal(t));
        assert_relative_eq!(nested.re.re, jet.v, max_relative = 1e-15);
        assert_relative_eq!(nested.re.du, jet.dx, max_relative = 1e-14);
        assert_relative_eq!(nested.du.du, jet.dxx, max_relative = 1e-13);
    }

    #[test]
    fn wide_lanes_match_scalar_bitwise() {
        let xs = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
        let t = 0.25;
        let wide = expr(
            Jet::spatial(Wide::from_lanes(xs)),
            Jet::temporal(Wide::splat(t)),
        );
        for (i, &x) in xs.iter().enumerate() {
            let scalar = expr(jet_x(x), Jet::temporal(t));
            assert_eq!(wide.v.lane(i), scalar.v);
            assert_eq!(wide.dx.lane(i), scalar.dx);
            assert_eq!(wide.dxx.lane(i), scalar.dxx);
            assert_eq!(wide.dt.lane(i), scalar.dt);
        }
    }

    /// Checks `tmul` against an explicit Jacobian of `mul` by perturbation of
    /// each coefficient: ⟨c̄, (a+δ)·b − a·b⟩ must equal ⟨b.tmul(c̄), δ⟩.
    #[test]
    fn tmul_is_transpose_of_mul() {
        let a = Jet { v: 0.3, dx: -1.2, dxx: 0.8, dt: 0.45 };
        let b = Jet { v: -0.9, dx: 0.33, dxx: -0.21, dt: 1.7 };
        let cbar = Jet { v: 0.11, dx: -0.5, dxx: 0.77, dt: -0.13 };
        let t = b.tmul(cbar);

        let basis = [
            Jet { v: 1.0, dx: 0.0, dxx: 0.0, dt: 0.0 },
            Jet { v: 0.0, dx: 1.0, dxx: 0.0, dt: 0.0 },
            Jet { v: 0.0, dx: 0.0, dxx: 1.0, dt: 0.0 },
            Jet { v: 0.0, dx: 0.0, dxx: 0.0, dt: 1.0 },
        ];
        let contract = |p: Jet<f64>, q: Jet<f64>| p.v * q.v + p.dx * q.dx + p.dxx * q.dxx + p.dt * q.dt;
        for (i, e) in basis.iter().enumerate() {
            let dc = (a + *e) * b - a * b;
            let lhs = contract(cbar, dc);
            let rhs = [t.v, t.dx, t.dxx, t.dt][i];
            assert_relative_eq!(lhs, rhs, max_relative = 1e-12);
        }
    }

    #[test]
    fn dual_tmul_is_transpose_of_mul() {
        let b = Dual { re: 0.4, du: -1.1 };
        let cbar = Dual { re: 0.9, du: 0.27 };
        let t = b.tmul(cbar);
        // c = a*b with a = (a0, a1): c0 = a0 b0, c1 = a0 b1 + a1 b0.
        // ∂⟨c̄,c⟩/∂a0 = c̄0 b0 + c̄1 b1; ∂/∂a1 = c̄1 b0.
        assert_relative_eq!(t.re, cbar.re * b.re + cbar.du * b.du, max_relative = 1e-15);
        assert_relative_eq!(t.du, cbar.du * b.re, max_relative = 1e-15);
    }

    /// The vjp of an analytic function is tmul by the lifted derivative:
    /// verified against finite differences of the jet coefficients.
    #[test]
    fn analytic_vjp_matches_finite_differences() {
        let a = Jet { v: 0.31, dx: -0.8, dxx: 1.4, dt: 0.2 };
        let cbar = Jet { v: 0.67, dx: -0.4, dxx: 0.25, dt: 0.9 };
        let y = a.tanh();
        let fprime = Jet::<f64>::one() - y * y;
        let adj = fprime.tmul(cbar);

        let contract = |p: Jet<f64>, q: Jet<f64>| p.v * q.v + p.dx * q.dx + p.dxx * q.dxx + p.dt * q.dt;
        let h = 1e-6;
        let coords: [fn(&mut Jet<f64>) -> &mut f64; 4] = [
            |j| &mut j.v,
            |j| &mut j.dx,
            |j| &mut j.dxx,
            |j| &mut j.dt,
        ];
        for (i, get) in coords.iter().enumerate() {
            let mut ap = a;
            *get(&mut ap) += h;
            let mut am = a;
            *get(&mut am) -= h;
            let fd = contract(cbar, (ap.tanh() - am.tanh()).scale(1.0 / (2.0 * h)));
            let an = [adj.v, adj.dx, adj.dxx, adj.dt][i];
            assert_relative_eq!(fd, an, max_relative = 1e-7);
        }
    }

    #[test]
    fn wide_dot_and_bias_are_deterministic_sums() {
        let a = Wide::from_lanes([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        let b = Wide::from_lanes([0.5; 8]);
        assert_eq!(a.dot(b), 18.0);
        assert_eq!(a.adj_bias(), 36.0);
    }

    #[test]
    fn trig_composition_in_jets() {
        // γ(x) = cos(πx): γ'(0) = 0, γ''(0) = -π².
        let j = jet_x(0.0).scale(std::f64::consts::PI).cos();
        assert_eq!(j.v, 1.0);
        assert_eq!(j.dx, 0.0);
        assert_relative_eq!(j.dxx, -std::f64::consts::PI.powi(2), max_relative = 1e-15);
    }
}
