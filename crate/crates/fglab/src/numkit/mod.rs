//! Dense numeric primitives shared by every other module.
//!
//! All arithmetic is in `f64`. Operations are pure functions over
//! immutable inputs; RNG streams are single-owner and split by label
//! rather than shared.

mod matrix;
mod rng;
mod stats;
mod svd;
mod vector;

pub use matrix::{jacobi_eigh, pairwise_euclidean, DenseMatrix};
pub use rng::RngStream;
pub use stats::{mean, pearson, variance};
pub use svd::{truncated_svd, TruncatedSvd};
pub use vector::{cosine_similarity, ParamVector, UpdateMatrix};
