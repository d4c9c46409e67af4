//! Local least-squares fits in tangent-plane coordinates.
//!
//! Two fits share one ridge solver: the quadratic scalar jet over the
//! monomials `[1, u, v, u², uv, v²]`, whose `u` and `v` coefficients give
//! gradient rows, and the height patch `h(u, v) = a20 u² + a11 uv + a02 v²`
//! that supplies the metric used for vector transport.
//!
//! Both fits run in coordinates scaled by the stencil radius so that the
//! Tikhonov weight is dimensionless, and the quadratic penalty weights the
//! mixed term by one half so that the penalty equals the Frobenius norm of
//! the Hessian. That makes every fit equivariant under in-plane rotations of
//! the chart. The constant coefficient is never penalized.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::{KnnGraph, PointCloud, TangentFrames, Vec3};

/// Pivot ratio (after diagonal equilibration) below which an unregularized
/// system counts as singular.
pub const SINGULAR_PIVOT_RATIO: f64 = 1e-14;

const JET_PENALTY: [f64; 6] = [0.0, 0.0, 0.0, 1.0, 0.5, 1.0];
const JET_DEGREE: [i32; 6] = [0, 1, 1, 2, 2, 2];
const PATCH_PENALTY: [f64; 3] = [1.0, 0.5, 1.0];

/// Neighborhood of one point expressed in that point's tangent frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalChart {
    pub center: usize,
    /// Center first, then its neighbors in graph order.
    pub stencil: Vec<usize>,
    /// `(u, v, w)` of each stencil point; the center is exactly the origin.
    pub uvw: Vec<Vec3>,
}

impl LocalChart {
    /// Chart from explicit local coordinates. The first entry must be the
    /// origin.
    pub fn from_coordinates(center: usize, stencil: Vec<usize>, uvw: Vec<Vec3>) -> Result<Self> {
        if stencil.len() != uvw.len() || uvw.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} coordinates", stencil.len()),
                actual: format!("{}", uvw.len()),
            });
        }
        if uvw[0] != Vec3::zeros() || stencil[0] != center {
            return Err(Error::InvalidInput("chart must start at its center".into()));
        }
        Ok(Self { center, stencil, uvw })
    }

    pub fn len(&self) -> usize {
        self.stencil.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stencil.is_empty()
    }

    /// Largest in-plane distance from the center.
    pub fn radius(&self) -> f64 {
        self.uvw
            .iter()
            .map(|p| p.x.hypot(p.y))
            .fold(0.0, f64::max)
    }
}

/// Project `{i} ∪ N(i)` into the tangent frame of point `i`.
pub fn build_local_chart(
    cloud: &PointCloud,
    frames: &TangentFrames,
    graph: &KnnGraph,
    i: usize,
) -> LocalChart {
    let p = cloud.positions();
    let (e_u, e_v, n) = (frames.e_u()[i], frames.e_v()[i], frames.normals()[i]);
    let stencil: Vec<usize> = std::iter::once(i)
        .chain(graph.neighbors(i).iter().copied())
        .collect();
    let uvw = stencil
        .iter()
        .map(|&j| {
            if j == i {
                return Vec3::zeros();
            }
            let d = p[j] - p[i];
            Vec3::new(d.dot(&e_u), d.dot(&e_v), d.dot(&n))
        })
        .collect();
    LocalChart {
        center: i,
        stencil,
        uvw,
    }
}

/// Coefficients of `c0 + c1 u + c2 v + c3 u² + c4 uv + c5 v²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarJet {
    pub c: [f64; 6],
}

impl ScalarJet {
    pub fn du(&self) -> f64 {
        self.c[1]
    }

    pub fn dv(&self) -> f64 {
        self.c[2]
    }

    pub fn eval(&self, u: f64, v: f64) -> f64 {
        let c = &self.c;
        c[0] + c[1] * u + c[2] * v + c[3] * u * u + c[4] * u * v + c[5] * v * v
    }
}

/// Linear map from stencil values to jet coefficients: row `k` holds the
/// weights producing `c[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JetOperator {
    rows: [Vec<f64>; 6],
}

impl JetOperator {
    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }

    /// Weights of `∂_u` at the center.
    pub fn du(&self) -> &[f64] {
        &self.rows[1]
    }

    /// Weights of `∂_v` at the center.
    pub fn dv(&self) -> &[f64] {
        &self.rows[2]
    }

    pub fn apply(&self, values: &[f64]) -> Result<ScalarJet> {
        if values.len() != self.rows[0].len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} stencil values", self.rows[0].len()),
                actual: format!("{}", values.len()),
            });
        }
        let mut c = [0.0; 6];
        for (ck, row) in c.iter_mut().zip(&self.rows) {
            *ck = row.iter().zip(values).map(|(w, f)| w * f).sum();
        }
        Ok(ScalarJet { c })
    }
}

/// Ridge solution operator of the quadratic jet over `chart`.
pub fn ridge_jet_operator(chart: &LocalChart, lambda: f64) -> Result<JetOperator> {
    check_lambda(lambda)?;
    let h = chart_scale(chart)?;
    let design: Vec<[f64; 6]> = chart
        .uvw
        .iter()
        .map(|p| {
            let (u, v) = (p.x / h, p.y / h);
            [1.0, u, v, u * u, u * v, v * v]
        })
        .collect();
    let solution = ridge_solve(&design, &JET_PENALTY, lambda)?;
    let rows = std::array::from_fn(|k| {
        let scale = h.powi(-JET_DEGREE[k]);
        solution[k].iter().map(|w| w * scale).collect()
    });
    Ok(JetOperator { rows })
}

/// Fit the quadratic jet to per-stencil `values` with Tikhonov weight `lambda`.
pub fn solve_ridge_jet(chart: &LocalChart, values: &[f64], lambda: f64) -> Result<ScalarJet> {
    ridge_jet_operator(chart, lambda)?.apply(values)
}

/// Height function `h(u, v) = a20 u² + a11 uv + a02 v²` over a tangent plane.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfacePatch {
    pub a20: f64,
    pub a11: f64,
    pub a02: f64,
}

/// Metric and coordinate tangents of a patch at one parameter location,
/// expressed in the chart's `(e_u, e_v, n)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMetric {
    pub metric: Matrix2<f64>,
    pub d_u: Vec3,
    pub d_v: Vec3,
}

impl SurfacePatch {
    pub fn height(&self, u: f64, v: f64) -> f64 {
        self.a20 * u * u + self.a11 * u * v + self.a02 * v * v
    }

    /// `(∂_u h, ∂_v h)` at `(u, v)`.
    pub fn slope(&self, u: f64, v: f64) -> (f64, f64) {
        (
            2.0 * self.a20 * u + self.a11 * v,
            self.a11 * u + 2.0 * self.a02 * v,
        )
    }
}

/// Least-squares height patch through the chart center, tangent to its plane.
pub fn fit_surface_patch(chart: &LocalChart, lambda: f64) -> Result<SurfacePatch> {
    check_lambda(lambda)?;
    let h = chart_scale(chart)?;
    let design: Vec<[f64; 3]> = chart
        .uvw
        .iter()
        .map(|p| {
            let (u, v) = (p.x / h, p.y / h);
            [u * u, u * v, v * v]
        })
        .collect();
    let solution = ridge_solve(&design, &PATCH_PENALTY, lambda)?;
    // w / h = Σ ã (u / h)², so a = ã / h
    let fit = |k: usize| -> f64 {
        solution[k]
            .iter()
            .zip(&chart.uvw)
            .map(|(s, p)| s * p.z)
            .sum::<f64>()
            / (h * h)
    };
    Ok(SurfacePatch {
        a20: fit(0),
        a11: fit(1),
        a02: fit(2),
    })
}

/// Tangents `∂_u g = (1, 0, h_u)`, `∂_v g = (0, 1, h_v)` and the induced metric.
pub fn patch_metric_at(patch: &SurfacePatch, u: f64, v: f64) -> PatchMetric {
    let (hu, hv) = patch.slope(u, v);
    PatchMetric {
        metric: Matrix2::new(1.0 + hu * hu, hu * hv, hu * hv, 1.0 + hv * hv),
        d_u: Vec3::new(1.0, 0.0, hu),
        d_v: Vec3::new(0.0, 1.0, hv),
    }
}

impl PatchMetric {
    pub fn determinant(&self) -> f64 {
        self.metric.determinant()
    }

    /// Contravariant components of a chart-space vector `x`:
    /// `g⁻¹ [∂_u g · x, ∂_v g · x]`.
    pub fn components(&self, x: &Vec3) -> Option<Vector2<f64>> {
        let inv = self.metric.try_inverse()?;
        Some(inv * Vector2::new(self.d_u.dot(x), self.d_v.dot(x)))
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )))
    }
}

fn chart_scale(chart: &LocalChart) -> Result<f64> {
    let h = chart.radius();
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::IllConditionedFit {
            index: Some(chart.center),
            ratio: 0.0,
        })
    }
}

/// Solve `(AᵀA + λ diag(penalty)) x = Aᵀ b` for every right-hand side at
/// once, returning the `P × m` solution operator `(AᵀA + λP)⁻¹ Aᵀ`.
///
/// The normal matrix is equilibrated to unit diagonal before a Cholesky
/// factorization; the pivot ratio of the equilibrated factor decides
/// singularity, which only is an error when `lambda == 0` or a pivot is
/// non-positive.
fn ridge_solve<const P: usize>(
    design: &[[f64; P]],
    penalty: &[f64; P],
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    let mut normal = [[0.0; P]; P];
    for row in design {
        for a in 0..P {
            for b in 0..P {
                normal[a][b] += row[a] * row[b];
            }
        }
    }
    for k in 0..P {
        normal[k][k] += lambda * penalty[k];
    }
    let singular = |ratio: f64| Error::IllConditionedFit { index: None, ratio };

    let mut scale = [0.0; P];
    for k in 0..P {
        if normal[k][k] <= 0.0 {
            return Err(singular(0.0));
        }
        scale[k] = normal[k][k].sqrt().recip();
    }
    let mut chol = [[0.0; P]; P];
    for a in 0..P {
        for b in 0..P {
            chol[a][b] = normal[a][b] * scale[a] * scale[b];
        }
    }
    // in-place lower Cholesky; pivots[k] is the squared diagonal
    let mut pivots = [0.0; P];
    for k in 0..P {
        let mut d = chol[k][k];
        for j in 0..k {
            d -= chol[k][j] * chol[k][j];
        }
        if d <= 0.0 || !d.is_finite() {
            return Err(singular(0.0));
        }
        pivots[k] = d;
        let l = d.sqrt();
        chol[k][k] = l;
        for r in k + 1..P {
            let mut s = chol[r][k];
            for j in 0..k {
                s -= chol[r][j] * chol[k][j];
            }
            chol[r][k] = s / l;
        }
    }
    let largest = pivots.iter().copied().fold(0.0, f64::max);
    let smallest = pivots.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = smallest / largest;
    if lambda == 0.0 && ratio < SINGULAR_PIVOT_RATIO {
        return Err(singular(ratio));
    }

    let m = design.len();
    let mut out = vec![vec![0.0; m]; P];
    for (j, row) in design.iter().enumerate() {
        // x = S L⁻ᵀ L⁻¹ S aⱼ
        let mut y = [0.0; P];
        for k in 0..P {
            let mut s = row[k] * scale[k];
            for t in 0..k {
                s -= chol[k][t] * y[t];
            }
            y[k] = s / chol[k][k];
        }
        for k in (0..P).rev() {
            let mut s = y[k];
            for t in k + 1..P {
                s -= chol[t][k] * y[t];
            }
            y[k] = s / chol[k][k];
        }
        for k in 0..P {
            out[k][j] = y[k] * scale[k];
        }
    }
    Ok(out)
}
