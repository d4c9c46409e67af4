//! Global gradient, rotation and divergence operators and their
//! compositions (curl, Hodge Laplacian, Laplace–Beltrami).
//!
//! Vector rows and columns are interleaved per point: index `2i` is the
//! `e_u` coefficient of point `i`, `2i + 1` the `e_v` coefficient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Field, ScalarField, VectorField};
use crate::geometry::{KnnGraph, PointCloud, TangentFrames, Vec3};
use crate::mls::{build_local_chart, fit_surface_patch, patch_metric_at, ridge_jet_operator};
use crate::sparse::{normalize_linf, SparseOperator};

/// Metric determinant below which a patch is rejected.
pub const MIN_METRIC_DET: f64 = 1e-12;

type Triplets = Vec<(usize, usize, f64)>;

fn check_inputs(cloud: &PointCloud, frames: &TangentFrames, graph: &KnnGraph) -> Result<()> {
    if frames.len() != cloud.len() || graph.n_points() != cloud.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("frames and graph over {} points", cloud.len()),
            actual: format!("{} frames, graph over {} points", frames.len(), graph.n_points()),
        });
    }
    Ok(())
}

fn assemble<F>(rows: usize, cols: usize, n_points: usize, per_point: F) -> Result<SparseOperator>
where
    F: Fn(usize) -> Result<Triplets> + Sync + Send,
{
    // collect() keeps point order, so the triplet list is schedule-independent
    let parts = (0..n_points)
        .into_par_iter()
        .map(per_point)
        .collect::<Result<Vec<_>>>()?;
    SparseOperator::from_triplets(rows, cols, parts.concat())
}

/// MLS gradient `G` (2N × N): rows `2i`, `2i+1` extract `∂_u`, `∂_v` of the
/// ridge jet fitted over `{i} ∪ N(i)`.
pub fn build_gradient(
    cloud: &PointCloud,
    frames: &TangentFrames,
    graph: &KnnGraph,
    lambda: f64,
) -> Result<SparseOperator> {
    check_inputs(cloud, frames, graph)?;
    let n = cloud.len();
    assemble(2 * n, n, n, |i| {
        let chart = build_local_chart(cloud, frames, graph, i);
        let jet = ridge_jet_operator(&chart, lambda).map_err(|e| e.at(i))?;
        let mut t = Vec::with_capacity(2 * chart.len());
        for (s, &j) in chart.stencil.iter().enumerate() {
            t.push((2 * i, j, jet.du()[s]));
            t.push((2 * i + 1, j, jet.dv()[s]));
        }
        Ok(t)
    })
}

/// Block-diagonal 90° rotation `J` with blocks `[[0, -1], [1, 0]]`.
pub fn build_rotation(n_points: usize) -> Result<SparseOperator> {
    if n_points == 0 {
        return Err(Error::InvalidArgument("rotation needs at least one point".into()));
    }
    let t = (0..n_points)
        .flat_map(|i| [(2 * i, 2 * i + 1, -1.0), (2 * i + 1, 2 * i, 1.0)])
        .collect();
    SparseOperator::from_triplets(2 * n_points, 2 * n_points, t)
}

/// MLS divergence `D` (N × 2N).
///
/// Neighbor coefficients are carried into the chart of point `i` through the
/// fitted height patch, `g⁻¹ [∂_u g · e_j, ∂_v g · e_j]` evaluated at the
/// neighbor's `(u_j, v_j)`, and the row combines the jet `∂_u` weights on the
/// transported `u` components with the `∂_v` weights on the `v` components.
pub fn build_divergence(
    cloud: &PointCloud,
    frames: &TangentFrames,
    graph: &KnnGraph,
    lambda: f64,
) -> Result<SparseOperator> {
    check_inputs(cloud, frames, graph)?;
    let n = cloud.len();
    assemble(n, 2 * n, n, |i| {
        let chart = build_local_chart(cloud, frames, graph, i);
        let jet = ridge_jet_operator(&chart, lambda).map_err(|e| e.at(i))?;
        let patch = fit_surface_patch(&chart, lambda).map_err(|e| e.at(i))?;
        let to_chart = |v: &Vec3| {
            Vec3::new(
                v.dot(&frames.e_u()[i]),
                v.dot(&frames.e_v()[i]),
                v.dot(&frames.normals()[i]),
            )
        };
        let mut t = Vec::with_capacity(2 * chart.len());
        for (s, (&j, p)) in chart.stencil.iter().zip(&chart.uvw).enumerate() {
            let pm = patch_metric_at(&patch, p.x, p.y);
            let det = pm.determinant();
            if !(det >= MIN_METRIC_DET) {
                return Err(Error::DegeneratePatch { index: i, det });
            }
            let (eu, ev) = (to_chart(&frames.e_u()[j]), to_chart(&frames.e_v()[j]));
            let col_u = pm.components(&eu).ok_or(Error::DegeneratePatch { index: i, det })?;
            let col_v = pm.components(&ev).ok_or(Error::DegeneratePatch { index: i, det })?;
            let (wu, wv) = (jet.du()[s], jet.dv()[s]);
            t.push((i, 2 * j, wu * col_u[0] + wv * col_u[1]));
            t.push((i, 2 * j + 1, wu * col_v[0] + wv * col_v[1]));
        }
        Ok(t)
    })
}

/// Curl `−D J`.
pub fn curl(d: &SparseOperator, j: &SparseOperator) -> Result<SparseOperator> {
    Ok(d.matmul(j)?.scaled(-1.0))
}

/// Hodge Laplacian `−(G D − J G D J)`.
pub fn hodge_laplacian(
    g: &SparseOperator,
    d: &SparseOperator,
    j: &SparseOperator,
) -> Result<SparseOperator> {
    let gd = g.matmul(d)?;
    let jgdj = j.matmul(&gd)?.matmul(j)?;
    Ok(gd.add_scaled(&jgdj, -1.0)?.scaled(-1.0))
}

/// Laplace–Beltrami `−D G` (positive semi-definite sign convention).
pub fn laplace_beltrami(g: &SparseOperator, d: &SparseOperator) -> Result<SparseOperator> {
    Ok(d.matmul(g)?.scaled(-1.0))
}

/// Apply an operator to a field. The output kind follows the operator's row
/// count: `N` rows give a scalar field, `2N` rows a vector field.
pub fn apply(op: &SparseOperator, field: &Field) -> Result<Field> {
    let n = field.n_points();
    let out = op.apply(field.features())?;
    if op.rows() == n {
        Ok(Field::Scalar(ScalarField(out)))
    } else if op.rows() == 2 * n {
        Ok(Field::Vector(VectorField(out)))
    } else {
        Err(Error::ShapeMismatch {
            expected: format!("{n} or {} output rows", 2 * n),
            actual: format!("{}", op.rows()),
        })
    }
}

/// Parameters and norms recorded alongside an [`OperatorSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorMeta {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub grad_norm: f64,
    pub div_norm: f64,
    /// Whether curl, L and lb were composed from the normalized operators.
    pub normalized_compositions: bool,
}

/// Every operator used by a DeltaConv block. `curl`, `hodge` and
/// `laplace_beltrami` are composed from `g_hat` and `d_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub g: SparseOperator,
    pub g_hat: SparseOperator,
    pub j: SparseOperator,
    pub d: SparseOperator,
    pub d_hat: SparseOperator,
    pub curl: SparseOperator,
    pub hodge: SparseOperator,
    pub laplace_beltrami: SparseOperator,
    pub meta: OperatorMeta,
}

impl OperatorSet {
    /// File stems / lookup names, in export order.
    pub const NAMES: [&'static str; 8] = ["G", "G_hat", "J", "D", "D_hat", "curl", "L", "lb"];

    pub fn get(&self, name: &str) -> Option<&SparseOperator> {
        Some(match name {
            "G" => &self.g,
            "G_hat" => &self.g_hat,
            "J" => &self.j,
            "D" => &self.d,
            "D_hat" => &self.d_hat,
            "curl" => &self.curl,
            "L" => &self.hodge,
            "lb" => &self.laplace_beltrami,
            _ => return None,
        })
    }

    pub fn lookup(&self, name: &str) -> Result<&SparseOperator> {
        self.get(name).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "unknown operator {name:?}; expected one of {}",
                Self::NAMES.join(", ")
            ))
        })
    }

    pub fn n_points(&self) -> usize {
        self.meta.n
    }

    /// Reassemble a set from its eight operators, recomputing nothing but
    /// checking shapes.
    pub fn from_parts(ops: [SparseOperator; 8], meta: OperatorMeta) -> Result<Self> {
        let n = meta.n;
        let shapes = [
            (2 * n, n),
            (2 * n, n),
            (2 * n, 2 * n),
            (n, 2 * n),
            (n, 2 * n),
            (n, 2 * n),
            (2 * n, 2 * n),
            (n, n),
        ];
        for ((op, shape), name) in ops.iter().zip(shapes).zip(Self::NAMES) {
            if (op.rows(), op.cols()) != shape {
                return Err(Error::ShapeMismatch {
                    expected: format!("{name} of shape {}x{}", shape.0, shape.1),
                    actual: format!("{}x{}", op.rows(), op.cols()),
                });
            }
        }
        let [g, g_hat, j, d, d_hat, curl, hodge, laplace_beltrami] = ops;
        Ok(Self {
            g,
            g_hat,
            j,
            d,
            d_hat,
            curl,
            hodge,
            laplace_beltrami,
            meta,
        })
    }
}

/// Build `G`, `J`, `D`, normalize `G` and `D` by their ℓ∞ norms and compose
/// curl, Hodge Laplacian and Laplace–Beltrami from the normalized pair.
pub fn build_operator_set(
    cloud: &PointCloud,
    graph: &KnnGraph,
    frames: &TangentFrames,
    lambda: f64,
) -> Result<OperatorSet> {
    let g = build_gradient(cloud, frames, graph, lambda)?;
    let d = build_divergence(cloud, frames, graph, lambda)?;
    let j = build_rotation(cloud.len())?;
    let (g_hat, grad_norm) = normalize_linf(&g)?;
    let (d_hat, div_norm) = normalize_linf(&d)?;
    let curl = curl(&d_hat, &j)?;
    let hodge = hodge_laplacian(&g_hat, &d_hat, &j)?;
    let laplace_beltrami = laplace_beltrami(&g_hat, &d_hat)?;
    Ok(OperatorSet {
        g,
        g_hat,
        j,
        d,
        d_hat,
        curl,
        hodge,
        laplace_beltrami,
        meta: OperatorMeta {
            n: cloud.len(),
            k: graph.k(),
            lambda,
            grad_norm,
            div_norm,
            normalized_compositions: true,
        },
    })
}
