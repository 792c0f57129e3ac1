//! fglab: a deterministic clustered federated learning laboratory.
//!
//! The crate simulates federated training at desk scale. It ships the
//! FedGroup / FedGrouProx frameworks (decomposed-similarity client
//! clustering, group and client cold start, intra/inter-group
//! aggregation), the FedAvg / FedProx baselines, the FeSEM and IFCA
//! assignment rules, and a numerical harness that checks the
//! convergence bounds of the grouped trainer on convex tasks.
//!
//! Everything is a pure function of the experiment configuration and a
//! 64-bit seed: two runs with the same seed produce byte-identical
//! metrics files regardless of worker count.
//!
//! Module map:
//!
//! * [`numkit`] — dense vector/matrix primitives, cosine kernel,
//!   truncated SVD, seeded RNG streams.
//! * [`models`] — multinomial logistic regression and a one-hidden-layer
//!   perceptron with analytic (proximal) gradients.
//! * [`datagen`] — synthetic federated data, label-limited non-IID
//!   partitioning, an 8x8 digits surrogate, IDX ingestion.
//! * [`flcore`] — the vanilla FL engine: local solvers, client
//!   sampling, FedAvg rounds, discrepancy metrics.
//! * [`clustering`] — pairwise cosine similarity, MADC, EDC,
//!   K-Means++ and complete-linkage hierarchical clustering.
//! * [`fedgroup`] — grouped training: cold start, intra/inter-group
//!   aggregation, ablations, baseline assignment rules.
//! * [`bounds`] — divergence measurement and convergence-bound
//!   verification for the grouped trainer.
//! * [`experiment`] — config parsing, experiment driver, artifact and
//!   plot-data emission.
//!
//! See the `examples/` directory for one runnable program per major
//! capability, and the `fglab` binary for the `run` / `plot` CLI.

pub mod bounds;
pub mod clustering;
pub mod datagen;
mod error;
pub mod experiment;
pub mod fedgroup;
pub mod flcore;
pub mod models;
pub mod numkit;

pub use error::{Error, Result};
