//! Physics-informed solver for the 1D diffusion equation with Neumann
//! boundary conditions, comparing soft constraints, the derivative-based
//! hard constraint, and the cosine-Fourier-embedding hard constraint against
//! an exact spectral-series reference.
//!
//! Batch evaluation over collocation points is data-parallel; the `parallel`
//! feature (on by default) fans work out with rayon. Reductions use fixed
//! chunking with an in-order merge, so results are bit-identical with and
//! without threads.

pub mod constraint;
pub mod embedding;
pub mod error;
pub mod exec;
pub mod expr;
pub mod harness;
pub mod model;
pub mod network;
pub mod oracle;
pub mod problem;
pub mod scalar;
pub mod tape;

pub use constraint::{ConstraintSpec, Geometry, Strategy};
pub use embedding::{EmbeddingKind, EmbeddingSpec};
pub use error::{Error, Result};
pub use harness::{
    compare_suite, relative_improvement, run, timing_probe, Budget, ReferenceRule, RunConfig,
    RunMetrics, Seeds,
};
pub use model::{forward_jet, Model, ResidualField};
pub use network::{adam_step, AdamState, NetworkParams, ParamGrads, SpatialJet};
pub use oracle::{relative_l2_error, series_eval, FourierSeriesSolution};
pub use problem::{
    builtin_problem, composite_loss, loss_and_grad, loss_and_grad_sequential, model_loss,
    sample_collocation,
    CollocationCounts, CollocationSet, DiffusionProblem, InitialCondition, LossParts, LossWeights,
};
