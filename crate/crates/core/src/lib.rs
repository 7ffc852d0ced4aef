//! Memorization-guided graph unlearning for 2-layer GCN node classifiers.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`graph`] — immutable node-classification graphs, loaders, a stochastic
//!   block model generator, deletion-request surgery, BFS distances and light
//!   centrality metrics.
//! * [`gnn`] — a deterministic trainable 2-layer GCN with analytic gradients
//!   and JSON model serialization.
//! * [`mem`] — per-node memorization estimation (exact leave-one-out and
//!   subsample ensembles), edge/feature unlearning difficulty, and the
//!   training-free margin proxy.
//! * [`unlearn`] — the adaptive unlearning strategy: prototype margins,
//!   margin-based forgetting loss, adaptive-temperature distillation, the
//!   retraining gold standard, and the two ablation variants.
//! * [`eval`] — the trade-off-of-unlearning (ToU) metric family, the edge
//!   membership-inference attack, difficulty-aware sampling sets, and the
//!   trend experiments.
//!
//! Everything is `f64`, summed in fixed index order, and seeded through a
//! documented splitmix64 stream, so results are bitwise reproducible at any
//! parallelism level.

pub mod error;
pub mod eval;
pub mod gnn;
pub mod graph;
pub mod linalg;
pub mod mem;
pub mod par;
pub mod rng;
pub mod unlearn;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
