//! Exact reference solutions of the diffusion problem via the cosine
//! Fourier series, used for error measurement and for validating the loss
//! machinery.
//!
//! The solution of ∂ₜu = D ∂²ₓu on [0,1]² with vanishing Neumann data and
//! u(x,0) = g(x) is `a₀/2 + Σⱼ aⱼ·exp(−Dπ²j²t)·cos(πjx)` with
//! `aⱼ = 2∫₀¹ g(x)cos(πjx)dx`. Single-frequency initial data keeps exactly
//! one nonzero coefficient; polynomials get a truncated series whose
//! coefficients are computed by adaptive composite quadrature.

use crate::error::{Error, Result};
use crate::model::ResidualField;
use crate::problem::DiffusionProblem;
use crate::scalar::{cospi_f64, sinpi_f64, Jet};
use std::f64::consts::PI;

/// Composite Simpson quadrature with panel doubling until the change is
/// below `tol` (absolute). Kahan compensation keeps the panel sums from
/// drowning the tolerance in roundoff.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    const MAX_PANELS: usize = 1 << 21;
    let mut n = 64;
    let mut prev = simpson(f, a, b, n);
    loop {
        n *= 2;
        let cur = simpson(f, a, b, n);
        if (cur - prev).abs() <= tol {
            return Ok(cur);
        }
        if n >= MAX_PANELS {
            return Err(Error::numeric(format!(
                "quadrature did not converge to {tol:e} within {MAX_PANELS} panels"
            )));
        }
        prev = cur;
    }
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    let mut comp = 0.0;
    let mut add = |v: f64| {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    };
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        add(w * f(a + i as f64 * h));
    }
    sum * h / 3.0
}

/// Cosine Fourier coefficients `aⱼ = 2∫₀¹ g(x)cos(πjx)dx` for j = 0..=n,
/// each to absolute tolerance 1e-12.
pub fn fourier_coefficients(g: &dyn Fn(f64) -> f64, n: usize) -> Result<Vec<f64>> {
    let mut coeffs = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let f = move |x: f64| g(x) * cospi_f64(j as f64 * x);
        let integral = integrate(&f, 0.0, 1.0, 1e-12)
            .map_err(|e| Error::numeric(format!("coefficient {j}: {e}")))?;
        coeffs.push(2.0 * integral);
    }
    Ok(coeffs)
}

/// Truncated cosine series solution of the diffusion problem.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeriesSolution {
    /// a₀..a_N.
    coefficients: Vec<f64>,
    diffusivity: f64,
}

impl FourierSeriesSolution {
    pub fn new(coefficients: Vec<f64>, diffusivity: f64) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::config("series needs at least a₀ and a₁ (N ≥ 1)"));
        }
        if !coefficients.iter().all(|c| c.is_finite()) {
            return Err(Error::config("non-finite series coefficient"));
        }
        if !(diffusivity > 0.0) {
            return Err(Error::config("diffusivity must be positive"));
        }
        Ok(FourierSeriesSolution { coefficients, diffusivity })
    }

    /// Builds the series for an initial condition by quadrature.
    pub fn from_initial_condition(
        g: &dyn Fn(f64) -> f64,
        diffusivity: f64,
        n_terms: usize,
    ) -> Result<Self> {
        Self::new(fourier_coefficients(g, n_terms)?, diffusivity)
    }

    /// Builds the series for a benchmark problem. Single-frequency initial
    /// data uses the exact one-nonzero-coefficient form; polynomial and
    /// custom data go through quadrature.
    pub fn for_problem(problem: &DiffusionProblem, n_terms: usize) -> Result<Self> {
        let modes = match problem.initial_condition.cosine_modes() {
            Some(modes) => modes,
            None => {
                let g = problem.initial_condition.clone();
                return Self::from_initial_condition(
                    &move |x| g.eval(x),
                    problem.diffusivity,
                    n_terms,
                );
            }
        };
        let max_mode = modes.iter().map(|&(m, _)| m).max().unwrap_or(0);
        if max_mode > n_terms {
            return Err(Error::config(format!(
                "series truncation {n_terms} cannot represent mode {max_mode}"
            )));
        }
        let mut coefficients = vec![0.0; n_terms + 1];
        for (mode, amplitude) in modes {
            coefficients[mode] = amplitude;
        }
        Self::new(coefficients, problem.diffusivity)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn diffusivity(&self) -> f64 {
        self.diffusivity
    }

    pub fn truncation(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// u(x,t) of the truncated series.
    pub fn value(&self, x: f64, t: f64) -> f64 {
        let mut sum = 0.5 * self.coefficients[0];
        for (j, &a) in self.coefficients.iter().enumerate().skip(1) {
            if a == 0.0 {
                continue;
            }
            let j = j as f64;
            sum += a * (-self.diffusivity * PI * PI * j * j * t).exp() * cospi_f64(j * x);
        }
        sum
    }

    /// Term-wise ∂ₓ; exactly zero at x ∈ {0, 1} (every term carries
    /// sin(πj·x), which the exact reduction sends to ±0 at integers).
    pub fn du_dx(&self, x: f64, t: f64) -> f64 {
        let mut sum = 0.0;
        for (j, &a) in self.coefficients.iter().enumerate().skip(1) {
            if a == 0.0 {
                continue;
            }
            let j = j as f64;
            sum -= a * (-self.diffusivity * PI * PI * j * j * t).exp() * PI * j * sinpi_f64(j * x);
        }
        sum
    }

    /// Term-wise ∂²ₓ.
    pub fn d2u_dx2(&self, x: f64, t: f64) -> f64 {
        let mut sum = 0.0;
        for (j, &a) in self.coefficients.iter().enumerate().skip(1) {
            if a == 0.0 {
                continue;
            }
            let j = j as f64;
            let k2 = PI * PI * j * j;
            sum -= a * (-self.diffusivity * k2 * t).exp() * k2 * cospi_f64(j * x);
        }
        sum
    }

    /// Term-wise ∂ₜ.
    pub fn du_dt(&self, x: f64, t: f64) -> f64 {
        let mut sum = 0.0;
        for (j, &a) in self.coefficients.iter().enumerate().skip(1) {
            if a == 0.0 {
                continue;
            }
            let j = j as f64;
            let k2 = PI * PI * j * j;
            sum -= a * self.diffusivity * k2 * (-self.diffusivity * k2 * t).exp() * cospi_f64(j * x);
        }
        sum
    }

    /// Writes the solution on a uniform grid as `x,t,u` CSV rows.
    pub fn to_csv(&self, nx: usize, nt: usize) -> String {
        let mut out = String::from("x,t,u\n");
        for it in 0..nt {
            let t = it as f64 / (nt - 1) as f64;
            for ix in 0..nx {
                let x = ix as f64 / (nx - 1) as f64;
                out.push_str(&format!("{x},{t},{}\n", self.value(x, t)));
            }
        }
        out
    }
}

impl ResidualField for FourierSeriesSolution {
    fn point_jet(&self, x: f64, t: f64) -> Jet<f64> {
        Jet {
            v: self.value(x, t),
            dx: self.du_dx(x, t),
            dxx: self.d2u_dx2(x, t),
            dt: self.du_dt(x, t),
        }
    }
}

/// Truncated series value; the form reported by the paper's appendix.
pub fn series_eval(sol: &FourierSeriesSolution, x: f64, t: f64) -> f64 {
    sol.value(x, t)
}

/// Relative L2 distance `‖model − sol‖₂ / ‖sol‖₂` over a uniform
/// `grid_nx × grid_nt` tensor grid on [0,1]² including the boundaries.
pub fn relative_l2_error(
    model: &dyn Fn(f64, f64) -> f64,
    sol: &FourierSeriesSolution,
    grid_nx: usize,
    grid_nt: usize,
) -> Result<f64> {
    if grid_nx < 2 || grid_nt < 2 {
        return Err(Error::config("evaluation grid needs at least 2 points per axis"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for it in 0..grid_nt {
        let t = it as f64 / (grid_nt - 1) as f64;
        for ix in 0..grid_nx {
            let x = ix as f64 / (grid_nx - 1) as f64;
            let exact = sol.value(x, t);
            let diff = model(x, t) - exact;
            num += diff * diff;
            den += exact * exact;
        }
    }
    if den == 0.0 {
        return Err(Error::numeric("zero reference norm on evaluation grid"));
    }
    Ok((num / den).sqrt())
}

/// Max |∂ₜu − D∂²ₓu| of the truncated series at the given points; term-wise
/// differentiation makes every term satisfy the PDE, so this measures only
/// accumulated roundoff.
pub fn residual_self_check(sol: &FourierSeriesSolution, sample_points: &[(f64, f64)]) -> f64 {
    sample_points
        .iter()
        .map(|&(x, t)| (sol.du_dt(x, t) - sol.diffusivity * sol.d2u_dx2(x, t)).abs())
        .fold(0.0, f64::max)
}
