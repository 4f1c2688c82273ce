//! Experiment harness: run configs, the training loop with best-loss
//! checkpointing, metrics/CSV output, suite comparison, and timing probes.
//!
//! Every randomness source is seeded explicitly (weights, collocation,
//! frequencies), so a config file replays to the identical parameter
//! trajectory. Accuracy is always reported at the checkpoint with the lowest
//! training loss, not the final iterate.

use crate::constraint::ConstraintSpec;
use crate::embedding::EmbeddingSpec;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::Model;
use crate::network::{adam_step, AdamState, NetworkParams};
use crate::oracle::FourierSeriesSolution;
use crate::problem::{
    builtin_problem, loss_and_grad, sample_collocation, CollocationCounts, DiffusionProblem,
    LossWeights,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

/// Seeds for the three randomness sources; all mandatory, no entropy
/// defaults, so every published number is replayable.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub weights: u64,
    pub collocation: u64,
    pub frequencies: u64,
}

/// Problem section: a built-in name, or a custom g(x) with a diffusivity.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Custom initial condition as an expression over x.
    #[serde(default)]
    pub g: Option<String>,
    #[serde(default)]
    pub diffusivity: Option<f64>,
}

/// Embedding section: kind plus either an explicit frequency list or an
/// (n, sigma) pair sampled with the frequencies seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: String,
    #[serde(default)]
    pub frequencies: Option<Vec<f64>>,
    #[serde(default)]
    pub n_frequencies: Option<usize>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub domain_lo: Option<Vec<f64>>,
    #[serde(default)]
    pub domain_hi: Option<Vec<f64>>,
    #[serde(default)]
    pub at_upper: Option<bool>,
    #[serde(default)]
    pub constrained: Option<Vec<bool>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden_layers: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// Iteration budget; exactly one of this and `wall_clock_secs`.
    #[serde(default)]
    pub iterations: Option<u64>,
    #[serde(default)]
    pub wall_clock_secs: Option<f64>,
    pub n_pde: usize,
    pub n_ic: usize,
    pub n_bc: usize,
    /// Draw a fresh collocation set each iteration (seeded); off by default.
    #[serde(default)]
    pub resample_each_iteration: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub grid_nx: usize,
    pub grid_nt: usize,
    pub series_terms: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { grid_nx: 256, grid_nt: 101, series_terms: 200 }
    }
}

/// A full run configuration; maps one-to-one onto the TOML config file with
/// one section per module.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub constraint: ConstraintSpec,
    pub embedding: EmbeddingConfig,
    pub network: NetworkConfig,
    pub training: TrainingConfig,
    pub seeds: Seeds,
    #[serde(default)]
    pub eval: EvalConfig,
}

/// Iteration or wall-clock budget (exactly one).
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Budget {
    Iterations(u64),
    WallClockSecs(f64),
}

impl RunConfig {
    /// Desk-scale defaults: 3×50 network, 4000/200/200 collocation points,
    /// 2·10⁴ iterations, learning rate 1e-4, soft strategy, no embedding.
    pub fn desk_default(problem: &str, seeds: Seeds) -> Self {
        RunConfig {
            problem: ProblemConfig {
                name: Some(problem.to_string()),
                g: None,
                diffusivity: None,
            },
            constraint: ConstraintSpec::soft(),
            embedding: EmbeddingConfig {
                kind: "identity".to_string(),
                frequencies: None,
                n_frequencies: None,
                sigma: None,
                domain_lo: None,
                domain_hi: None,
                at_upper: None,
                constrained: None,
            },
            network: NetworkConfig { hidden_layers: vec![50, 50, 50] },
            training: TrainingConfig {
                learning_rate: 1e-4,
                iterations: Some(20_000),
                wall_clock_secs: None,
                n_pde: 4000,
                n_ic: 200,
                n_bc: 200,
                resample_each_iteration: false,
            },
            seeds,
            eval: EvalConfig::default(),
        }
    }

    /// Switches to the published scale: 3×100 network, 2·10⁴/500/10³ points,
    /// 10⁶ iterations (when iteration-budgeted).
    pub fn apply_paper_scale(&mut self) {
        self.network.hidden_layers = vec![100, 100, 100];
        let paper = CollocationCounts::paper_scale();
        self.training.n_pde = paper.n_pde;
        self.training.n_ic = paper.n_ic;
        self.training.n_bc = paper.n_bc;
        if self.training.iterations.is_some() {
            self.training.iterations = Some(1_000_000);
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::parse(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn budget(&self) -> Result<Budget> {
        match (self.training.iterations, self.training.wall_clock_secs) {
            (Some(n), None) => Ok(Budget::Iterations(n)),
            (None, Some(s)) if s > 0.0 => Ok(Budget::WallClockSecs(s)),
            _ => Err(Error::config(
                "exactly one of training.iterations and training.wall_clock_secs must be set",
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.budget()?;
        if self.training.learning_rate <= 0.0 {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.network.hidden_layers.is_empty() {
            return Err(Error::config("need at least one hidden layer"));
        }
        self.build_problem()?;
        let emb = self.build_embedding()?;
        let constraint = &self.constraint;
        constraint.validate(emb.dim())?;
        Ok(())
    }

    pub fn build_problem(&self) -> Result<DiffusionProblem> {
        match (&self.problem.name, &self.problem.g) {
            (Some(name), None) => builtin_problem(name),
            (name, Some(src)) => {
                let d = self.problem.diffusivity.ok_or_else(|| {
                    Error::config("custom problems need an explicit diffusivity")
                })?;
                let expr = Expr::parse(src)?;
                DiffusionProblem::custom(name.as_deref().unwrap_or("custom"), expr, d)
            }
            (None, None) => Err(Error::config("problem needs either a name or a custom g")),
        }
    }

    pub fn build_embedding(&self) -> Result<EmbeddingSpec> {
        let lo = self.embedding.domain_lo.clone().unwrap_or_else(|| vec![0.0]);
        let hi = self.embedding.domain_hi.clone().unwrap_or_else(|| vec![1.0]);
        let sampled = |what: &str| -> Result<(usize, f64)> {
            match (self.embedding.n_frequencies, self.embedding.sigma) {
                (Some(n), Some(sigma)) => Ok((n, sigma)),
                _ => Err(Error::config(format!(
                    "{what} needs either explicit frequencies or n_frequencies + sigma"
                ))),
            }
        };
        match self.embedding.kind.as_str() {
            "identity" => EmbeddingSpec::identity(lo, hi),
            "random_cos_sin" => match &self.embedding.frequencies {
                Some(freqs) => {
                    let mut spec =
                        EmbeddingSpec::random_cos_sin(freqs.len(), 1.0, self.seeds.frequencies)?;
                    spec.frequencies = freqs.clone();
                    spec.sigma = self.embedding.sigma.unwrap_or(0.0);
                    spec.rng_seed = None;
                    spec.validate()?;
                    Ok(spec)
                }
                None => {
                    let (n, sigma) = sampled("random_cos_sin")?;
                    EmbeddingSpec::random_cos_sin(n, sigma, self.seeds.frequencies)
                }
            },
            "hc_cosine" => match &self.embedding.frequencies {
                Some(freqs) => EmbeddingSpec::hc_cosine(freqs.clone(), lo[0], hi[0]),
                None => {
                    let (n, sigma) = sampled("hc_cosine")?;
                    EmbeddingSpec::hc_cosine_sampled(
                        n,
                        sigma,
                        self.seeds.frequencies,
                        lo[0],
                        hi[0],
                    )
                }
            },
            "hc_cosine_one_sided" => {
                let freqs = self.embedding.frequencies.clone().ok_or_else(|| {
                    Error::config("hc_cosine_one_sided needs explicit frequencies")
                })?;
                EmbeddingSpec::hc_cosine_one_sided(
                    freqs,
                    lo[0],
                    hi[0],
                    self.embedding.at_upper.unwrap_or(false),
                )
            }
            "hc_cosine_hyperrect" => {
                let freqs = self.embedding.frequencies.clone().ok_or_else(|| {
                    Error::config("hc_cosine_hyperrect needs explicit frequencies")
                })?;
                let constrained = self
                    .embedding
                    .constrained
                    .clone()
                    .unwrap_or_else(|| vec![true; lo.len()]);
                EmbeddingSpec::hc_cosine_hyperrect(freqs, lo, hi, constrained)
            }
            other => Err(Error::config(format!("unknown embedding kind '{other}'"))),
        }
    }

    pub fn counts(&self) -> CollocationCounts {
        CollocationCounts {
            n_pde: self.training.n_pde,
            n_ic: self.training.n_ic,
            n_bc: self.training.n_bc,
        }
    }

    /// Applies a `key=value` seed override (keys: weights, collocation,
    /// frequencies).
    pub fn override_seed(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::parse(format!("seed override '{spec}' is not key=value")))?;
        let value: u64 = value
            .trim()
            .parse()
            .map_err(|_| Error::parse(format!("seed override value '{value}' is not a u64")))?;
        match key.trim() {
            "weights" => self.seeds.weights = value,
            "collocation" => self.seeds.collocation = value,
            "frequencies" => self.seeds.frequencies = value,
            other => return Err(Error::parse(format!("unknown seed '{other}'"))),
        }
        Ok(())
    }
}

/// One iteration of loss history.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub iteration: u64,
    pub total: f64,
    pub pde: f64,
    pub ic: f64,
    pub bc: f64,
}

/// The fixed metrics CSV row (one per run).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub problem: String,
    pub strategy: String,
    pub embedding_kind: String,
    pub n_freq: usize,
    pub sigma: f64,
    pub seed_w: u64,
    pub seed_c: u64,
    pub seed_f: u64,
    pub iters: u64,
    pub ms_per_iter: f64,
    pub best_loss: f64,
    pub rel_l2: f64,
    pub improvement_pct: Option<f64>,
}

pub const METRICS_HEADER: &str = "problem,strategy,embedding_kind,n_freq,sigma,seed_w,seed_c,seed_f,iters,ms_per_iter,best_loss,rel_l2,improvement_pct";

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        let improvement = match self.improvement_pct {
            Some(v) => format!("{v}"),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.problem,
            self.strategy,
            self.embedding_kind,
            self.n_freq,
            self.sigma,
            self.seed_w,
            self.seed_c,
            self.seed_f,
            self.iters,
            self.ms_per_iter,
            self.best_loss,
            self.rel_l2,
            improvement
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 13 {
            return Err(Error::parse(format!(
                "metrics row has {} fields, expected 13",
                fields.len()
            )));
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(format!("bad {what} '{s}'")))
        };
        let int = |s: &str, what: &str| -> Result<u64> {
            s.parse()
                .map_err(|_| Error::parse(format!("bad {what} '{s}'")))
        };
        Ok(MetricsRow {
            problem: fields[0].to_string(),
            strategy: fields[1].to_string(),
            embedding_kind: fields[2].to_string(),
            n_freq: int(fields[3], "n_freq")? as usize,
            sigma: num(fields[4], "sigma")?,
            seed_w: int(fields[5], "seed_w")?,
            seed_c: int(fields[6], "seed_c")?,
            seed_f: int(fields[7], "seed_f")?,
            iters: int(fields[8], "iters")?,
            ms_per_iter: num(fields[9], "ms_per_iter")?,
            best_loss: num(fields[10], "best_loss")?,
            rel_l2: num(fields[11], "rel_l2")?,
            improvement_pct: if fields[12].is_empty() {
                None
            } else {
                Some(num(fields[12], "improvement_pct")?)
            },
        })
    }
}

pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn metrics_from_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(header) if header == METRICS_HEADER => {}
        other => return Err(Error::parse(format!("bad metrics header {other:?}"))),
    }
    lines.map(MetricsRow::parse_csv_line).collect()
}

pub fn history_to_csv(history: &[HistoryRow]) -> String {
    let mut out = String::from("iteration,total,pde,ic,bc\n");
    for row in history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.iteration, row.total, row.pde, row.ic, row.bc
        ));
    }
    out
}

/// Everything a run produces: the metrics row, the loss history, the
/// best-loss checkpoint, and the realized configuration.
#[derive(Clone, Debug)]
pub struct RunMetrics {
    pub row: MetricsRow,
    pub history: Vec<HistoryRow>,
    pub best_loss_iteration: u64,
    pub total_wallclock_s: f64,
    pub diverged: bool,
    /// Parameters at the best-loss checkpoint.
    pub best_params: NetworkParams,
    /// The frequency list actually used (after any sampling).
    pub frequencies_used: Vec<f64>,
    /// The configuration, echoed back as TOML.
    pub config_echo: String,
}

fn build_model(config: &RunConfig) -> Result<(DiffusionProblem, Model)> {
    let problem = config.build_problem()?;
    if problem.flux_lo != 0.0 || problem.flux_hi != 0.0 {
        return Err(Error::config(
            "the series oracle requires vanishing Neumann data; nonzero fluxes are for structural tests",
        ));
    }
    let embedding = config.build_embedding()?;
    let mut layer_sizes = Vec::with_capacity(config.network.hidden_layers.len() + 2);
    layer_sizes.push(embedding.output_len() + 1);
    layer_sizes.extend_from_slice(&config.network.hidden_layers);
    layer_sizes.push(1);
    let params = NetworkParams::glorot(&layer_sizes, config.seeds.weights)?;
    let model = Model::new(params, embedding, config.constraint.clone())?;
    Ok((problem, model))
}

/// Trains one configuration: full-batch Adam, checkpoint on every loss
/// improvement, stop at the budget, report relative L2 at the checkpoint.
pub fn run(config: &RunConfig) -> Result<RunMetrics> {
    config.validate()?;
    let budget = config.budget()?;
    let (problem, mut model) = build_model(config)?;
    let weights = LossWeights::default();
    let mut colloc = sample_collocation(config.counts(), config.seeds.collocation)?;
    let oracle = FourierSeriesSolution::for_problem(&problem, config.eval.series_terms)?;

    let mut adam = AdamState::new(model.params(), config.training.learning_rate);
    let mut best_loss = f64::INFINITY;
    let mut best_params = model.params().clone();
    let mut best_loss_iteration = 0;
    let mut history = Vec::new();
    let mut diverged = false;

    let start = Instant::now();
    let mut iters_run: u64 = 0;
    loop {
        match budget {
            Budget::Iterations(n) => {
                if iters_run >= n {
                    break;
                }
            }
            Budget::WallClockSecs(s) => {
                if start.elapsed().as_secs_f64() >= s {
                    break;
                }
            }
        }
        if config.training.resample_each_iteration && iters_run > 0 {
            let seed = config.seeds.collocation.wrapping_add(iters_run);
            colloc = sample_collocation(config.counts(), seed)?;
        }
        match loss_and_grad(&model, &problem, &colloc, &weights) {
            Ok((parts, grads)) => {
                history.push(HistoryRow {
                    iteration: iters_run,
                    total: parts.total,
                    pde: parts.pde_mse,
                    ic: parts.ic_mse,
                    bc: parts.bc_mse,
                });
                if parts.total < best_loss {
                    best_loss = parts.total;
                    best_params = model.params().clone();
                    best_loss_iteration = iters_run;
                }
                adam_step(model.params_mut(), &grads, &mut adam);
            }
            Err(Error::Training { .. }) => {
                // Divergence: keep the last good checkpoint, flag the run.
                diverged = true;
                break;
            }
            Err(other) => return Err(other),
        }
        iters_run += 1;
    }
    let loop_elapsed = start.elapsed().as_secs_f64();

    if history.is_empty() && !diverged {
        // Zero-iteration budget: report the untrained network.
        if let Ok((parts, _)) = loss_and_grad(&model, &problem, &colloc, &weights) {
            best_loss = parts.total;
        }
    }

    let eval_model = {
        let mut m = model.clone();
        m.set_params(best_params.clone());
        m
    };
    let rel_l2 = grid_relative_l2(&eval_model, &oracle, config.eval.grid_nx, config.eval.grid_nt)?;

    let embedding = eval_model.embedding();
    let row = MetricsRow {
        problem: problem.name.clone(),
        strategy: config.constraint.strategy.name().to_string(),
        embedding_kind: embedding.kind.name().to_string(),
        n_freq: embedding.n_frequencies(),
        sigma: embedding.sigma,
        seed_w: config.seeds.weights,
        seed_c: config.seeds.collocation,
        seed_f: config.seeds.frequencies,
        iters: iters_run,
        ms_per_iter: if iters_run > 0 {
            loop_elapsed * 1000.0 / iters_run as f64
        } else {
            0.0
        },
        best_loss,
        rel_l2,
        improvement_pct: None,
    };
    Ok(RunMetrics {
        row,
        history,
        best_loss_iteration,
        total_wallclock_s: loop_elapsed,
        diverged,
        best_params,
        frequencies_used: embedding.frequencies.clone(),
        config_echo: config.to_toml(),
    })
}

/// Relative L2 error of a model over the evaluation grid, with reused
/// evaluation buffers.
pub fn grid_relative_l2(
    model: &Model,
    oracle: &FourierSeriesSolution,
    grid_nx: usize,
    grid_nt: usize,
) -> Result<f64> {
    let mut bufs = crate::model::EvalBufs::new(model);
    if grid_nx < 2 || grid_nt < 2 {
        return Err(Error::config("evaluation grid needs at least 2 points per axis"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for it in 0..grid_nt {
        let t = it as f64 / (grid_nt - 1) as f64;
        for ix in 0..grid_nx {
            let x = ix as f64 / (grid_nx - 1) as f64;
            let exact = oracle.value(x, t);
            let diff = model.eval_1d(x, t, &mut bufs) - exact;
            num += diff * diff;
            den += exact * exact;
        }
    }
    if den == 0.0 {
        return Err(Error::numeric("zero reference norm on evaluation grid"));
    }
    Ok((num / den).sqrt())
}

/// Percent improvement of `err` over `err_ref`: 100·(1 − err/err_ref).
/// Halving the error gives +50%, doubling gives −100%.
pub fn relative_improvement(err: f64, err_ref: f64) -> Result<f64> {
    if !(err > 0.0) || !(err_ref > 0.0) {
        return Err(Error::config("relative improvement needs positive errors"));
    }
    Ok(100.0 * (1.0 - err / err_ref))
}

/// How the reference run of a comparison is chosen.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReferenceRule {
    /// Per problem, the soft-strategy run with the lowest relative L2
    /// error (the published protocol).
    BestSoft,
    /// Per problem, the run with the given strategy and embedding kind.
    Named { strategy: String, embedding_kind: String },
}

/// Per-problem relative improvements against the reference rule. Rows keep
/// their input order; the reference row gets improvement 0%.
pub fn compare_suite(runs: &[RunMetrics], rule: &ReferenceRule) -> Result<Vec<MetricsRow>> {
    let mut problems: Vec<String> = Vec::new();
    for run in runs {
        if !problems.contains(&run.row.problem) {
            problems.push(run.row.problem.clone());
        }
    }
    let mut rows: Vec<MetricsRow> = runs.iter().map(|r| r.row.clone()).collect();
    for problem in &problems {
        let reference = rows
            .iter()
            .filter(|r| &r.problem == problem)
            .filter(|r| match rule {
                ReferenceRule::BestSoft => r.strategy == "soft",
                ReferenceRule::Named { strategy, embedding_kind } => {
                    &r.strategy == strategy && &r.embedding_kind == embedding_kind
                }
            })
            .min_by(|a, b| a.rel_l2.total_cmp(&b.rel_l2))
            .ok_or_else(|| {
                Error::config(format!("no reference run for problem '{problem}'"))
            })?;
        let ref_err = reference.rel_l2;
        for row in rows.iter_mut().filter(|r| &r.problem == problem) {
            row.improvement_pct = Some(relative_improvement(row.rel_l2, ref_err)?);
        }
    }
    Ok(rows)
}

/// Mean wall-clock per training iteration after warmup. Meaningful only
/// when nothing else runs concurrently.
pub fn timing_probe(config: &RunConfig, warmup: u64, measured_iters: u64) -> Result<f64> {
    if measured_iters < 10 {
        return Err(Error::config("timing probe needs at least 10 measured iterations"));
    }
    config.validate()?;
    let (problem, mut model) = build_model(config)?;
    let weights = LossWeights::default();
    let colloc = sample_collocation(config.counts(), config.seeds.collocation)?;
    let mut adam = AdamState::new(model.params(), config.training.learning_rate);
    for _ in 0..warmup {
        let (_, grads) = loss_and_grad(&model, &problem, &colloc, &weights)?;
        adam_step(model.params_mut(), &grads, &mut adam);
    }
    let start = Instant::now();
    for _ in 0..measured_iters {
        let (_, grads) = loss_and_grad(&model, &problem, &colloc, &weights)?;
        adam_step(model.params_mut(), &grads, &mut adam);
    }
    Ok(start.elapsed().as_secs_f64() * 1000.0 / measured_iters as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn seeds() -> Seeds {
        Seeds { weights: 1, collocation: 2, frequencies: 3 }
    }

    fn tiny_config(problem: &str) -> RunConfig {
        let mut config = RunConfig::desk_default(problem, seeds());
        config.network.hidden_layers = vec![8, 8];
        config.training.iterations = Some(40);
        config.training.n_pde = 64;
        config.training.n_ic = 16;
        config.training.n_bc = 16;
        config.eval = EvalConfig { grid_nx: 32, grid_nt: 9, series_terms: 60 };
        config
    }

    #[test]
    fn config_toml_roundtrip() {
        let config = tiny_config("low_frequency");
        let text = config.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back.to_toml(), text);
    }

    #[test]
    fn config_requires_exactly_one_budget() {
        let mut config = tiny_config("low_frequency");
        config.training.wall_clock_secs = Some(1.0);
        assert!(config.validate().is_err());
        config.training.iterations = None;
        assert!(config.validate().is_ok());
        config.training.wall_clock_secs = None;
        assert!(config.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys_and_missing_seeds() {
        let text = tiny_config("low_frequency").to_toml();
        let with_unknown = text.replace("[network]", "[network]\nwat = 3");
        assert!(RunConfig::from_toml(&with_unknown).is_err());

        let without_seed = text.replace("collocation = 2", "");
        assert!(RunConfig::from_toml(&without_seed).is_err());
    }

    #[test]
    fn seed_override_parses() {
        let mut config = tiny_config("low_frequency");
        config.override_seed("weights=42").unwrap();
        assert_eq!(config.seeds.weights, 42);
        assert!(config.override_seed("nope=1").is_err());
        assert!(config.override_seed("weights").is_err());
    }

    #[test]
    fn zero_iteration_budget_reports_untrained_error() {
        let mut config = tiny_config("low_frequency");
        config.training.iterations = Some(0);
        let metrics = run(&config).unwrap();
        assert_eq!(metrics.row.iters, 0);
        // Untrained network ≈ 0 on an O(1) solution: relative error near 1.
        assert!((metrics.row.rel_l2 - 1.0).abs() < 0.5, "rel_l2 {}", metrics.row.rel_l2);
        assert!(metrics.row.best_loss.is_finite());
    }

    #[test]
    fn identical_seeds_reproduce_identical_metrics() {
        let config = tiny_config("polynom3");
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.row.best_loss.to_bits(), b.row.best_loss.to_bits());
        assert_eq!(a.row.rel_l2.to_bits(), b.row.rel_l2.to_bits());
        assert_eq!(a.best_params, b.best_params);
        assert_eq!(a.history.len(), b.history.len());
        for (x, y) in a.history.iter().zip(&b.history) {
            assert_eq!(x.total.to_bits(), y.total.to_bits());
        }
    }

    #[test]
    fn training_reduces_loss() {
        let config = tiny_config("low_frequency");
        let metrics = run(&config).unwrap();
        assert!(!metrics.diverged);
        let first = metrics.history.first().unwrap().total;
        let best = metrics.row.best_loss;
        assert!(best < first, "best {best} vs initial {first}");
        assert!(metrics.best_loss_iteration > 0);
    }

    #[test]
    fn divergent_run_is_flagged_with_nonzero_exit_semantics() {
        let mut config = tiny_config("low_frequency");
        config.training.learning_rate = 1e200;
        config.training.iterations = Some(50);
        let metrics = run(&config).unwrap();
        assert!(metrics.diverged);
        assert!(metrics.row.iters < 50);
    }

    #[test]
    fn resampling_changes_collocation_but_stays_deterministic() {
        let mut config = tiny_config("polynom4");
        config.training.resample_each_iteration = true;
        config.training.iterations = Some(10);
        let a = run(&config).unwrap();
        let b = run(&config).unwrap();
        assert_eq!(a.row.best_loss.to_bits(), b.row.best_loss.to_bits());
    }

    #[test]
    fn relative_improvement_calibration() {
        assert_eq!(relative_improvement(2.0, 4.0).unwrap(), 50.0);
        assert_eq!(relative_improvement(8.0, 4.0).unwrap(), -100.0);
        assert_eq!(relative_improvement(4.0, 4.0).unwrap(), 0.0);
        assert!(relative_improvement(0.0, 1.0).is_err());
        assert!(relative_improvement(1.0, -2.0).is_err());
    }

    fn synthetic_run(problem: &str, strategy: &str, embedding: &str, rel_l2: f64) -> RunMetrics {
        RunMetrics {
            row: MetricsRow {
                problem: problem.to_string(),
                strategy: strategy.to_string(),
                embedding_kind: embedding.to_string(),
                n_freq: 0,
                sigma: 0.0,
                seed_w: 0,
                seed_c: 0,
                seed_f: 0,
                iters: 1,
                ms_per_iter: 1.0,
                best_loss: 0.0,
                rel_l2,
                improvement_pct: None,
            },
            history: Vec::new(),
            best_loss_iteration: 0,
            total_wallclock_s: 0.0,
            diverged: false,
            best_params: NetworkParams::zeros(&[1, 1]).unwrap(),
            frequencies_used: Vec::new(),
            config_echo: String::new(),
        }
    }

    #[test]
    fn compare_suite_improvements() {
        let runs = vec![
            synthetic_run("p", "soft", "identity", 4.0),
            synthetic_run("p", "new_hc", "hc_cosine", 2.0),
            synthetic_run("p", "existing_hc", "identity", 8.0),
        ];
        let rows = compare_suite(&runs, &ReferenceRule::BestSoft).unwrap();
        assert_eq!(rows[0].improvement_pct, Some(0.0));
        assert_eq!(rows[1].improvement_pct, Some(50.0));
        assert_eq!(rows[2].improvement_pct, Some(-100.0));
    }

    #[test]
    fn compare_suite_full_table_shape() {
        // 9 methods × 5 problems, like the published comparison.
        let methods: Vec<(&str, &str, usize)> = vec![
            ("soft", "identity", 0),
            ("soft", "random_cos_sin", 20),
            ("soft", "random_cos_sin", 50),
            ("existing_hc", "identity", 0),
            ("existing_hc", "random_cos_sin", 20),
            ("existing_hc", "random_cos_sin", 50),
            ("new_hc", "hc_cosine", 1),
            ("new_hc", "hc_cosine", 20),
            ("new_hc", "hc_cosine", 50),
        ];
        let problems = ["low_frequency", "high_frequency", "multiscale", "polynom3", "polynom4"];
        let mut runs = Vec::new();
        for p in &problems {
            for (i, (s, e, n)) in methods.iter().enumerate() {
                let mut r = synthetic_run(p, s, e, 0.1 * (i + 1) as f64);
                r.row.n_freq = *n;
                runs.push(r);
            }
        }
        let rows = compare_suite(&runs, &ReferenceRule::BestSoft).unwrap();
        assert_eq!(rows.len(), 45);
        assert!(rows.iter().all(|r| r.improvement_pct.is_some()));

        // Missing reference: drop the soft rows of one problem.
        let partial: Vec<RunMetrics> = runs
            .into_iter()
            .filter(|r| !(r.row.problem == "multiscale" && r.row.strategy == "soft"))
            .collect();
        assert!(compare_suite(&partial, &ReferenceRule::BestSoft).is_err());
    }

    #[test]
    fn timing_probe_requires_enough_iterations() {
        let config = tiny_config("low_frequency");
        assert!(timing_probe(&config, 0, 5).is_err());
    }

    #[test]
    fn timing_probe_is_positive_and_finite() {
        let mut config = tiny_config("low_frequency");
        config.training.n_pde = 32;
        let ms = timing_probe(&config, 2, 10).unwrap();
        assert!(ms.is_finite() && ms > 0.0);
    }

    #[test]
    fn existing_hc_costs_more_per_iteration_than_soft() {
        let mut soft = tiny_config("low_frequency");
        soft.training.n_pde = 256;
        let mut existing = soft.clone();
        existing.constraint = ConstraintSpec::existing_hc(0.0, 0.0);
        let soft_ms = timing_probe(&soft, 3, 12).unwrap();
        let existing_ms = timing_probe(&existing, 3, 12).unwrap();
        assert!(
            existing_ms > soft_ms,
            "existing {existing_ms} ms should exceed soft {soft_ms} ms"
        );
    }

    proptest! {
        #[test]
        fn metrics_csv_roundtrips(
            n_freq in 0usize..100,
            sigma in 0.0..50.0f64,
            seed_w in any::<u64>(),
            iters in any::<u64>(),
            ms in 0.0..1e6f64,
            best in proptest::num::f64::POSITIVE | proptest::num::f64::ZERO,
            rel in proptest::num::f64::POSITIVE,
            improvement in proptest::option::of(-1e6..100.0f64),
        ) {
            let row = MetricsRow {
                problem: "multiscale".into(),
                strategy: "new_hc".into(),
                embedding_kind: "hc_cosine".into(),
                n_freq,
                sigma,
                seed_w,
                seed_c: seed_w.wrapping_add(1),
                seed_f: seed_w.wrapping_add(2),
                iters,
                ms_per_iter: ms,
                best_loss: best,
                rel_l2: rel,
                improvement_pct: improvement,
            };
            let text = metrics_to_csv(std::slice::from_ref(&row));
            let back = metrics_from_csv(&text).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(&back[0], &row);
        }
    }
}
