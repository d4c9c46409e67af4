use nalgebra::{Matrix3, SymmetricEigen};
use rayon::prelude::*;

use super::{KnnGraph, PointCloud, Vec3};
use crate::error::{Error, Result};

/// Ratio below which a covariance eigenvalue counts as zero.
const DEGENERATE_RATIO: f64 = 1e-12;
/// Relative size of `n · (p - centroid)` treated as an orientation tie.
const ORIENTATION_TIE: f64 = 1e-12;

/// Estimate unit normals by PCA over each stencil `{i} ∪ N(i)`.
///
/// The normal is the eigenvector of the smallest covariance eigenvalue,
/// oriented away from the global centroid. Points whose offset from the
/// centroid is tangent to the surface fall back to +z, then +y, then +x.
pub fn estimate_normals(cloud: &PointCloud, graph: &KnnGraph) -> Result<PointCloud> {
    if graph.n_points() != cloud.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("graph over {} points", cloud.len()),
            actual: format!("graph over {} points", graph.n_points()),
        });
    }
    let points = cloud.positions();
    let centroid = cloud.centroid();
    let normals = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let n = stencil_normal(points, i, graph.neighbors(i))?;
            Ok(orient(n, points[i] - centroid))
        })
        .collect::<Result<Vec<_>>>()?;
    cloud.clone().set_normals(normals)
}

fn stencil_normal(points: &[Vec3], i: usize, neighbors: &[usize]) -> Result<Vec3> {
    let stencil = || std::iter::once(i).chain(neighbors.iter().copied());
    let count = (neighbors.len() + 1) as f64;
    let mean = stencil().map(|j| points[j]).sum::<Vec3>() / count;
    let mut cov = Matrix3::zeros();
    for j in stencil() {
        let d = points[j] - mean;
        cov += d * d.transpose();
    }
    cov /= count;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let largest = eig.eigenvalues[order[2]];
    let middle = eig.eigenvalues[order[1]];
    if largest <= 0.0 || middle < DEGENERATE_RATIO * largest {
        return Err(Error::DegenerateNeighborhood {
            index: i,
            reason: "stencil is collinear or coincident".into(),
        });
    }
    Ok(eig.eigenvectors.column(order[0]).normalize())
}

fn orient(n: Vec3, offset: Vec3) -> Vec3 {
    let dot = n.dot(&offset);
    if dot.abs() > ORIENTATION_TIE * offset.norm() {
        return if dot > 0.0 { n } else { -n };
    }
    for axis in [2, 1, 0] {
        if n[axis].abs() > ORIENTATION_TIE {
            return if n[axis] > 0.0 { n } else { -n };
        }
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_knn_graph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn planar_cloud_normals_point_up() {
        let pts: Vec<Vec3> = (0..64)
            .map(|i| Vec3::new((i % 8) as f64, (i / 8) as f64 * 0.7, 0.0))
            .collect();
        let cloud = PointCloud::new(pts).unwrap();
        let graph = build_knn_graph(&cloud, 6).unwrap();
        let out = estimate_normals(&cloud, &graph).unwrap();
        for n in out.normals().unwrap() {
            assert!((n - Vec3::z()).norm() < 1e-9, "{n}");
        }
    }

    fn sphere_normal_errors(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| {
                let v: [f64; 3] = [0; 3].map(|_| StandardNormal.sample(&mut rng));
                Vec3::from(v).normalize()
            })
            .collect();
        let cloud = PointCloud::new(pts.clone()).unwrap();
        let graph = build_knn_graph(&cloud, 10).unwrap();
        let out = estimate_normals(&cloud, &graph).unwrap();
        let mut angles: Vec<f64> = out
            .normals()
            .unwrap()
            .iter()
            .zip(&pts)
            .map(|(n, p)| n.dot(p).clamp(-1.0, 1.0).acos().to_degrees())
            .collect();
        angles.sort_by(f64::total_cmp);
        angles
    }

    #[test]
    fn sphere_normals_within_five_degrees() {
        // at 2048 samples a handful of lopsided stencils sit just above 5°
        for seed in 0..3 {
            let a = sphere_normal_errors(2048, seed);
            assert!(a[a.len() * 99 / 100] < 5.0, "99th percentile {}", a[a.len() * 99 / 100]);
        }
        let a = sphere_normal_errors(8192, 3);
        assert!(*a.last().unwrap() < 5.0, "max angle {}", a.last().unwrap());
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let pts: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        let cloud = PointCloud::new(pts).unwrap();
        let graph = build_knn_graph(&cloud, 3).unwrap();
        match estimate_normals(&cloud, &graph) {
            Err(Error::DegenerateNeighborhood { index, .. }) => assert_eq!(index, 0),
            other => panic!("expected degenerate neighborhood, got {other:?}"),
        }
    }

    #[test]
    fn orientation_tie_breaks() {
        assert_eq!(orient(-Vec3::z(), Vec3::x()), Vec3::z());
        assert_eq!(orient(-Vec3::y(), Vec3::x()), Vec3::y());
        assert_eq!(orient(-Vec3::x(), Vec3::y()), Vec3::x());
        assert_eq!(orient(-Vec3::x(), Vec3::x()), -Vec3::x() * -1.0);
        assert_eq!(orient(Vec3::z(), -Vec3::z()), -Vec3::z());
    }
}
