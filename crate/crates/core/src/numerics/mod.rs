//! Dense linear algebra, seeded randomness, and the clustering and spectral
//! primitives the attacks are built on.

mod cluster;
mod matrix;
mod power;
mod rng;
mod vector;

use thiserror::Error;

pub use cluster::{
    calinski_harabasz, kmeans, kmeans_with_iterations, wcss, KMeansResult, DEFAULT_LLOYD_ITERATIONS,
    DEFAULT_RESTARTS,
};
pub use matrix::Matrix;
pub use power::{top_singular_vector, SingularPair, DEFAULT_MAX_ITER, DEFAULT_TOL};
pub use rng::RngStream;
pub use vector::{argmax, cosine_similarity, dot, l2_norm, softmax, softmax_in_place};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("zero-norm vector has no direction")]
    ZeroNorm,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("power iteration did not converge within {iterations} iterations")]
    NoConvergence { iterations: usize, last: Vec<f64> },
}
