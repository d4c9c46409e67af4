//! Point clouds, neighbor graphs, normals and tangent frames.

mod cloud;
mod frames;
mod knn;
mod normals;

pub use cloud::{PointCloud, Vec3};
pub use frames::{build_tangent_frames, TangentFrames};
pub use knn::{build_knn_graph, KnnGraph};
pub use normals::estimate_normals;
