//! The diffusion benchmark: problem instances, collocation sampling, and the
//! composite loss (values and fused value+gradient over full batches).
//!
//! Batch evaluation packs 8 collocation points into the lanes of the wide
//! scalar types, so the generic model code runs vectorized; chunks of points
//! go through [`crate::exec`] and merge in fixed order for determinism.


use crate::error::{Error, Result};
use crate::exec;
use crate::expr::Expr;
use crate::model::{EvalBufs, Model, ResidualField};
use crate::network::ParamGrads;
use crate::scalar::{cospi_f64, Dual, Jet, Scalar, Wide};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LANES: usize = 8;
type W = Wide<LANES>;

/// Initial condition g(x) on [0,1].
#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    /// `amplitude · cos(π·mode·x)`.
    CosMode { mode: usize, amplitude: f64 },
    /// Superposition of two cosine modes.
    CosTwoModes { modes: [(usize, f64); 2] },
    /// Coefficients by ascending power of x.
    Polynomial(Vec<f64>),
    /// Parsed expression over x.
    Custom(Expr),
}

impl InitialCondition {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InitialCondition::CosMode { mode, amplitude } => {
                amplitude * cospi_f64(*mode as f64 * x)
            }
            InitialCondition::CosTwoModes { modes } => modes
                .iter()
                .map(|&(m, a)| a * cospi_f64(m as f64 * x))
                .sum(),
            InitialCondition::Polynomial(coeffs) => {
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
            }
            InitialCondition::Custom(expr) => expr.eval(x),
        }
    }

    /// The exact cosine modes when the condition is a finite cosine sum.
    pub(crate) fn cosine_modes(&self) -> Option<Vec<(usize, f64)>> {
        match self {
            InitialCondition::CosMode { mode, amplitude } => Some(vec![(*mode, *amplitude)]),
            InitialCondition::CosTwoModes { modes } => Some(modes.to_vec()),
            _ => None,
        }
    }
}

/// One diffusion benchmark instance: initial condition, diffusivity, and
/// boundary flux data (zero for all built-in cases).
#[derive(Clone, Debug)]
pub struct DiffusionProblem {
    pub name: String,
    pub initial_condition: InitialCondition,
    pub diffusivity: f64,
    pub flux_lo: f64,
    pub flux_hi: f64,
}

impl DiffusionProblem {
    pub fn custom(name: &str, g: Expr, diffusivity: f64) -> Result<Self> {
        if !(diffusivity > 0.0) {
            return Err(Error::config("diffusivity must be positive"));
        }
        Ok(DiffusionProblem {
            name: name.to_string(),
            initial_condition: InitialCondition::Custom(g),
            diffusivity,
            flux_lo: 0.0,
            flux_hi: 0.0,
        })
    }
}

/// The five benchmark instances.
pub fn builtin_problem(name: &str) -> Result<DiffusionProblem> {
    let pi = std::f64::consts::PI;
    let (ic, diffusivity) = match name {
        "low_frequency" => (
            InitialCondition::CosMode { mode: 2, amplitude: 1.0 },
            (2.0 * pi).powi(-2),
        ),
        "high_frequency" => (
            InitialCondition::CosMode { mode: 50, amplitude: 1.0 },
            (50.0 * pi).powi(-2),
        ),
        "multiscale" => (
            InitialCondition::CosTwoModes { modes: [(2, 1.0), (50, 0.1)] },
            (50.0 * pi).powi(-2),
        ),
        "polynom3" => (
            InitialCondition::Polynomial(vec![0.0, 0.0, 3.0, -2.0]),
            pi.powi(-2),
        ),
        "polynom4" => (
            InitialCondition::Polynomial(vec![0.0, 0.0, 16.0, -32.0, 16.0]),
            pi.powi(-2),
        ),
        other => return Err(Error::config(format!("unknown problem '{other}'"))),
    };
    Ok(DiffusionProblem {
        name: name.to_string(),
        initial_condition: ic,
        diffusivity,
        flux_lo: 0.0,
        flux_hi: 0.0,
    })
}

/// How many collocation points each loss term gets.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CollocationCounts {
    pub n_pde: usize,
    pub n_ic: usize,
    pub n_bc: usize,
}

impl CollocationCounts {
    /// The counts used by the published experiments.
    pub fn paper_scale() -> Self {
        CollocationCounts { n_pde: 20_000, n_ic: 500, n_bc: 1_000 }
    }
}

/// Fixed sampled collocation points; immutable once sampled.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationSet {
    /// Interior points (x, t) ∈ [0,1]².
    pub pde_points: Vec<(f64, f64)>,
    /// Initial-condition points x at t = 0.
    pub ic_points: Vec<f64>,
    /// Boundary points (side ∈ {0,1} as bool upper, t).
    pub bc_points: Vec<(bool, f64)>,
    pub seed: u64,
}

/// Uniform i.i.d. collocation points, deterministic per seed.
pub fn sample_collocation(counts: CollocationCounts, seed: u64) -> Result<CollocationSet> {
    if counts.n_pde == 0 || counts.n_ic == 0 || counts.n_bc == 0 {
        return Err(Error::config("collocation counts must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pde_points = (0..counts.n_pde)
        .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
        .collect();
    let ic_points = (0..counts.n_ic).map(|_| rng.gen::<f64>()).collect();
    let bc_points = (0..counts.n_bc)
        .map(|_| (rng.gen::<bool>(), rng.gen::<f64>()))
        .collect();
    Ok(CollocationSet { pde_points, ic_points, bc_points, seed })
}

/// λ weights of the composite loss; all positive, default (1, 1, 1).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LossWeights {
    pub lambda_pde: f64,
    pub lambda_ic: f64,
    pub lambda_bc: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { lambda_pde: 1.0, lambda_ic: 1.0, lambda_bc: 1.0 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_pde > 0.0 && self.lambda_ic > 0.0 && self.lambda_bc > 0.0 {
            Ok(())
        } else {
            Err(Error::config("loss weights must be positive"))
        }
    }
}

/// Mean-squared residuals of the three loss terms plus the weighted total.
/// For hard-constrained strategies `bc_mse` is a structural diagnostic and
/// is excluded from `total`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub pde_mse: f64,
    pub ic_mse: f64,
    pub bc_mse: f64,
}

fn finite_or_err(v: f64, term: &'static str, point_index: usize) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Training {
            message: format!("non-finite residual {v}"),
            term,
            point_index,
        })
    }
}

/// Composite loss of any field (trained model or analytic series) on a
/// collocation set. `bc_excluded_from_total` reflects whether the strategy
/// hard-constrains the boundary (the BC term is then logged but unweighted).
pub fn composite_loss<F: ResidualField + Sync>(
    field: &F,
    problem: &DiffusionProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
    bc_excluded_from_total: bool,
) -> Result<LossParts> {
    weights.validate()?;
    let d = problem.diffusivity;

    let pde_sums = exec::map_chunks(&colloc.pde_points, exec::CHUNK, |ci, chunk| {
        let mut sum = 0.0;
        for (i, &(x, t)) in chunk.iter().enumerate() {
            let jet = field.point_jet(x, t);
            let r = jet.dt - d * jet.dxx;
            if !r.is_finite() {
                return Err((ci * exec::CHUNK + i, r));
            }
            sum += r * r;
        }
        Ok(sum)
    });
    let mut pde_sum = 0.0;
    for s in pde_sums {
        pde_sum += s.map_err(|(i, r)| Error::Training {
            message: format!("non-finite PDE residual {r}"),
            term: "pde",
            point_index: i,
        })?;
    }

    let ic_sums = exec::map_chunks(&colloc.ic_points, exec::CHUNK, |_, chunk| {
        let mut sum = 0.0;
        for &x in chunk {
            let e = field.value(x, 0.0) - problem.initial_condition.eval(x);
            sum += e * e;
        }
        sum
    });
    let ic_sum: f64 = ic_sums.into_iter().sum();

    let bc_sums = exec::map_chunks(&colloc.bc_points, exec::CHUNK, |_, chunk| {
        let mut sum = 0.0;
        for &(upper, t) in chunk {
            let x = if upper { 1.0 } else { 0.0 };
            let flux = if upper { problem.flux_hi } else { problem.flux_lo };
            let e = field.point_jet(x, t).dx - flux;
            sum += e * e;
        }
        sum
    });
    let bc_sum: f64 = bc_sums.into_iter().sum();

    let pde_mse = finite_or_err(pde_sum / colloc.pde_points.len() as f64, "pde", 0)?;
    let ic_mse = finite_or_err(ic_sum / colloc.ic_points.len() as f64, "ic", 0)?;
    let bc_mse = finite_or_err(bc_sum / colloc.bc_points.len() as f64, "bc", 0)?;
    let bc_weight = if bc_excluded_from_total { 0.0 } else { weights.lambda_bc };
    Ok(LossParts {
        total: weights.lambda_pde * pde_mse + weights.lambda_ic * ic_mse + bc_weight * bc_mse,
        pde_mse,
        ic_mse,
        bc_mse,
    })
}

/// Composite loss of a model under its own strategy (hard constraints drop
/// the BC term from the total automatically).
pub fn model_loss(
    model: &Model,
    problem: &DiffusionProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
) -> Result<LossParts> {
    composite_loss(model, problem, colloc, weights, model.constraint().strategy.is_hard())
}

/// Fused full-batch loss and parameter gradient of the weighted total.
///
/// Points run through the model 8 at a time in wide lanes; per-chunk
/// gradients merge in chunk order, so the result does not depend on the
/// number of worker threads.
pub fn loss_and_grad(
    model: &Model,
    problem: &DiffusionProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
) -> Result<(LossParts, ParamGrads)> {
    loss_and_grad_mode(model, problem, colloc, weights, true)
}

/// [`loss_and_grad`] on the sequential chunk path; bit-identical results
/// (same chunking and merge order), used for benchmarking the parallel
/// speedup and for determinism checks.
pub fn loss_and_grad_sequential(
    model: &Model,
    problem: &DiffusionProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
) -> Result<(LossParts, ParamGrads)> {
    loss_and_grad_mode(model, problem, colloc, weights, false)
}

fn loss_and_grad_mode(
    model: &Model,
    problem: &DiffusionProblem,
    colloc: &CollocationSet,
    weights: &LossWeights,
    parallel: bool,
) -> Result<(LossParts, ParamGrads)> {
    weights.validate()?;
    let d = problem.diffusivity;
    let hard = model.constraint().strategy.is_hard();
    let n_pde = colloc.pde_points.len() as f64;
    let n_ic = colloc.ic_points.len() as f64;
    let n_bc = colloc.bc_points.len() as f64;

    let mut grads = ParamGrads::zeros_like(model.params());

    // PDE term: jets carrying (v, ∂x, ∂²x, ∂t).
    let pde_scale = 2.0 * weights.lambda_pde / n_pde;
    let pde_parts = exec::map_chunks_mode(parallel, &colloc.pde_points, exec::CHUNK, |ci, chunk| {
        let mut bufs: EvalBufs<Jet<W>> = EvalBufs::new(model);
        let mut partial = ParamGrads::zeros_like(model.params());
        let mut sum = 0.0;
        for (bi, block) in chunk.chunks(LANES).enumerate() {
            let mut xs = [0.0; LANES];
            let mut ts = [0.0; LANES];
            for (l, &(x, t)) in block.iter().enumerate() {
                xs[l] = x;
                ts[l] = t;
            }
            // Tail lanes repeat the last point; their adjoints stay zero.
            for l in block.len()..LANES {
                xs[l] = xs[block.len() - 1];
                ts[l] = ts[block.len() - 1];
            }
            let x = Jet::spatial(Wide::from_lanes(xs));
            let t = Jet::temporal(Wide::from_lanes(ts));
            let u = model.eval_1d(x, t, &mut bufs);
            let mut dt_adj = [0.0; LANES];
            let mut dxx_adj = [0.0; LANES];
            for l in 0..block.len() {
                let r = u.dt.lane(l) - d * u.dxx.lane(l);
                if !r.is_finite() {
                    return Err((ci * exec::CHUNK + bi * LANES + l, r));
                }
                sum += r * r;
                dt_adj[l] = pde_scale * r;
                dxx_adj[l] = -pde_scale * r * d;
            }
            let out_adj = Jet {
                v: W::zero(),
                dx: W::zero(),
                dxx: Wide::from_lanes(dxx_adj),
                dt: Wide::from_lanes(dt_adj),
            };
            model.backward_1d(x, out_adj, &mut bufs, &mut partial);
        }
        Ok((sum, partial))
    });
    let mut pde_sum = 0.0;
    for part in pde_parts {
        let (s, g) = part.map_err(|(i, r)| Error::Training {
            message: format!("non-finite PDE residual {r}"),
            term: "pde",
            point_index: i,
        })?;
        pde_sum += s;
        grads.accumulate(&g);
    }

    // IC term: plain wide values at t = 0.
    let ic_scale = 2.0 * weights.lambda_ic / n_ic;
    let ic_parts = exec::map_chunks_mode(parallel, &colloc.ic_points, exec::CHUNK, |ci, chunk| {
        let mut bufs: EvalBufs<W> = EvalBufs::new(model);
        let mut partial = ParamGrads::zeros_like(model.params());
        let mut sum = 0.0;
        for (bi, block) in chunk.chunks(LANES).enumerate() {
            let mut xs = [0.0; LANES];
            for (l, &x) in block.iter().enumerate() {
                xs[l] = x;
            }
            for l in block.len()..LANES {
                xs[l] = xs[block.len() - 1];
            }
            let x = Wide::from_lanes(xs);
            let u = model.eval_1d(x, W::zero(), &mut bufs);
            let mut adj = [0.0; LANES];
            for l in 0..block.len() {
                let e = u.lane(l) - problem.initial_condition.eval(xs[l]);
                if !e.is_finite() {
                    return Err((ci * exec::CHUNK + bi * LANES + l, e));
                }
                sum += e * e;
                adj[l] = ic_scale * e;
            }
            model.backward_1d(x, Wide::from_lanes(adj), &mut bufs, &mut partial);
        }
        Ok((sum, partial))
    });
    let mut ic_sum = 0.0;
    for part in ic_parts {
        let (s, g) = part.map_err(|(i, r)| Error::Training {
            message: format!("non-finite IC residual {r}"),
            term: "ic",
            point_index: i,
        })?;
        ic_sum += s;
        grads.accumulate(&g);
    }

    // BC term: dual direction on x. For hard strategies this is a structural
    // diagnostic: computed, logged, excluded from the total and its gradient.
    let bc_scale = 2.0 * weights.lambda_bc / n_bc;
    let bc_parts = exec::map_chunks_mode(parallel, &colloc.bc_points, exec::CHUNK, |_, chunk| {
        let mut bufs: EvalBufs<Dual<W>> = EvalBufs::new(model);
        let mut partial = ParamGrads::zeros_like(model.params());
        let mut sum = 0.0;
        for block in chunk.chunks(LANES) {
            let mut xs = [0.0; LANES];
            let mut ts = [0.0; LANES];
            let mut fluxes = [0.0; LANES];
            for (l, &(upper, t)) in block.iter().enumerate() {
                xs[l] = if upper { 1.0 } else { 0.0 };
                ts[l] = t;
                fluxes[l] = if upper { problem.flux_hi } else { problem.flux_lo };
            }
            for l in block.len()..LANES {
                xs[l] = xs[block.len() - 1];
                ts[l] = ts[block.len() - 1];
            }
            let x = Dual::var(Wide::from_lanes(xs));
            let t = Dual::constant(Wide::from_lanes(ts));
            let u = model.eval_1d(x, t, &mut bufs);
            let mut adj = [0.0; LANES];
            for l in 0..block.len() {
                let e = u.du.lane(l) - fluxes[l];
                sum += e * e;
                adj[l] = bc_scale * e;
            }
            if !hard {
                let out_adj = Dual { re: W::zero(), du: Wide::from_lanes(adj) };
                model.backward_1d(x, out_adj, &mut bufs, &mut partial);
            }
        }
        (sum, partial)
    });
    let mut bc_sum = 0.0;
    for (s, g) in bc_parts {
        bc_sum += s;
        if !hard {
            grads.accumulate(&g);
        }
    }

    let pde_mse = finite_or_err(pde_sum / n_pde, "pde", 0)?;
    let ic_mse = finite_or_err(ic_sum / n_ic, "ic", 0)?;
    let bc_mse = finite_or_err(bc_sum / n_bc, "bc", 0)?;
    let bc_weight = if hard { 0.0 } else { weights.lambda_bc };
    let total = weights.lambda_pde * pde_mse + weights.lambda_ic * ic_mse + bc_weight * bc_mse;
    if !grads.is_finite() {
        return Err(Error::Training {
            message: "non-finite gradient".to_string(),
            term: "gradient",
            point_index: 0,
        });
    }
    Ok((LossParts { total, pde_mse, ic_mse, bc_mse }, grads))
}
