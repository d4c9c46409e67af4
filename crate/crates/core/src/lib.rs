//! Discrete exterior-calculus operators on point clouds.
//!
//! Gradient, divergence, curl, Hodge Laplacian and Laplace–Beltrami are
//! assembled as sparse matrices from regularized moving least-squares fits
//! in per-point tangent frames, and combined into the two-stream DeltaConv
//! block. The [`oracle`] module holds analytic test surfaces, convergence
//! reports and a Perona–Malik diffusion built from the same operators.

pub mod block;
pub mod cli;
pub mod error;
pub mod field;
pub mod geometry;
pub mod io;
pub mod mls;
pub mod mlp;
pub mod operators;
pub mod oracle;
pub mod sparse;

pub use block::{
    deltaconv_forward, input_vector_features, scalar_max_aggregate, vector_mlp,
    vector_norm_nonlinearity, DeltaConvParams,
};
pub use error::{Error, Result};
pub use field::{Features, Field, ScalarField, VectorField};
pub use geometry::{
    build_knn_graph, build_tangent_frames, estimate_normals, KnnGraph, PointCloud, TangentFrames,
    Vec3,
};
pub use mlp::{Activation, BatchNorm, Layer, MlpParams};
pub use operators::{
    apply, build_divergence, build_gradient, build_operator_set, build_rotation, OperatorMeta,
    OperatorSet,
};
pub use sparse::{normalize_linf, SparseOperator};

/// Default neighbor count.
pub const DEFAULT_K: usize = 20;
/// Default Tikhonov weight.
pub const DEFAULT_LAMBDA: f64 = 0.01;
