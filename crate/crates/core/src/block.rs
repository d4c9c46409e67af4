//! Forward pass of the two-stream DeltaConv block.
//!
//! ```text
//! x'_i = Θ0(x_i, (D̂V)_i, (−D̂ĴV)_i, ‖v_i‖) + max_{j ∈ N(i)} Θ1(x_j)
//! v'_i = Θ2^J(v_i, (Ĝx')_i, (LV)_i)
//! ```
//!
//! `Θ2^J` concatenates the 90°-rotated copy of its input channels before the
//! vector MLP.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Features, ScalarField, VectorField};
use crate::geometry::KnnGraph;
use crate::mlp::{MlpParams, Stream};
use crate::operators::OperatorSet;
use crate::sparse::SparseOperator;

/// Parameters of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaConvParams {
    pub theta0: MlpParams,
    pub theta1: MlpParams,
    pub theta2: MlpParams,
    /// Feed `x_j − x_i` to Θ1; set when the scalar input is raw positions.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub centralize: bool,
}

impl DeltaConvParams {
    pub fn from_json(text: &str) -> Result<Self> {
        let params: Self = serde_json::from_str(text)?;
        params.theta0.validate(Stream::Scalar)?;
        params.theta1.validate(Stream::Scalar)?;
        params.theta2.validate(Stream::Vector)?;
        Ok(params)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }

    /// Scalar output channels.
    pub fn c_out(&self) -> usize {
        self.theta0.out_width()
    }

    /// Vector output channels.
    pub fn vector_out(&self) -> usize {
        self.theta2.out_width()
    }

    /// Check widths against `c_x` scalar and `c_v` vector input channels.
    pub fn check_widths(&self, c_x: usize, c_v: usize) -> Result<()> {
        self.theta0.validate(Stream::Scalar)?;
        self.theta1.validate(Stream::Scalar)?;
        self.theta2.validate(Stream::Vector)?;
        let c_out = self.c_out();
        let expect = [
            ("theta0 input", self.theta0.in_width(), c_x + 3 * c_v),
            ("theta1 input", self.theta1.in_width(), c_x),
            ("theta1 output", self.theta1.out_width(), c_out),
            ("theta2 input", self.theta2.in_width(), 2 * (2 * c_v + c_out)),
        ];
        for (what, got, want) in expect {
            if got != want {
                return Err(Error::ShapeMismatch {
                    expected: format!("{what} width {want}"),
                    actual: format!("{got}"),
                });
            }
        }
        Ok(())
    }
}

fn check_graph(graph: &KnnGraph, n: usize) -> Result<()> {
    if graph.n_points() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("graph over {n} points"),
            actual: format!("graph over {} points", graph.n_points()),
        });
    }
    Ok(())
}

fn check_width(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::ShapeMismatch {
            expected: format!("{what} width {want}"),
            actual: format!("{got}"),
        });
    }
    Ok(())
}

/// Channel-wise maximum of Θ1 over each neighborhood.
fn neighbor_max(x: &Features, graph: &KnnGraph, theta1: &MlpParams, centralize: bool) -> Vec<Vec<f64>> {
    let n = x.rows();
    if centralize {
        (0..n)
            .into_par_iter()
            .map(|i| {
                let xi = x.row(i);
                let mut best: Option<Vec<f64>> = None;
                for &j in graph.neighbors(i) {
                    let rel: Vec<f64> = x.row(j).iter().zip(xi).map(|(a, b)| a - b).collect();
                    let h = theta1.forward_scalar(&rel);
                    best = Some(match best {
                        None => h,
                        Some(b) => b.iter().zip(&h).map(|(a, c)| a.max(*c)).collect(),
                    });
                }
                best.expect("k >= 1")
            })
            .collect()
    } else {
        let h: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| theta1.forward_scalar(x.row(j)))
            .collect();
        (0..n)
            .map(|i| {
                let mut nbrs = graph.neighbors(i).iter();
                let first = h[*nbrs.next().expect("k >= 1")].clone();
                nbrs.fold(first, |acc, &j| acc.iter().zip(&h[j]).map(|(a, b)| a.max(*b)).collect())
            })
            .collect()
    }
}

/// `x'_i = Θ0(x_i) + max_{j ∈ N(i)} Θ1(x_j)`.
pub fn scalar_max_aggregate(
    x: &ScalarField,
    graph: &KnnGraph,
    theta0: &MlpParams,
    theta1: &MlpParams,
    centralize: bool,
) -> Result<ScalarField> {
    theta0.validate(Stream::Scalar)?;
    theta1.validate(Stream::Scalar)?;
    check_graph(graph, x.n_points())?;
    check_width("theta0 input", theta0.in_width(), x.channels())?;
    check_width("theta1 input", theta1.in_width(), x.channels())?;
    check_width("theta1 output", theta1.out_width(), theta0.out_width())?;
    let agg = neighbor_max(&x.0, graph, theta1, centralize);
    let rows: Vec<Vec<f64>> = (0..x.n_points())
        .into_par_iter()
        .map(|i| {
            let mut out = theta0.forward_scalar(x.0.row(i));
            out.iter_mut().zip(&agg[i]).for_each(|(o, a)| *o += a);
            out
        })
        .collect();
    Ok(ScalarField(Features::from_row_major(x.n_points(), theta0.out_width(), rows.concat())?))
}

/// Rescale each vector by `relu(‖v‖ + bias_c) / (‖v‖ + ε)`.
pub fn vector_norm_nonlinearity(v: &VectorField, bias: &[f64]) -> Result<VectorField> {
    check_width("bias", bias.len(), v.channels())?;
    let mut out = v.clone();
    for i in 0..v.n_points() {
        for (c, b) in bias.iter().enumerate() {
            let (au, av) = v.coeffs(i, c);
            let m = au.hypot(av);
            let s = (m + b).max(0.0) / (m + crate::mlp::NORM_EPS);
            out.set_coeffs(i, c, (au * s, av * s));
        }
    }
    Ok(out)
}

/// Apply Θ2 to `[v ‖ J v]` per point.
pub fn vector_mlp(v_cat: &VectorField, j: &SparseOperator, theta2: &MlpParams) -> Result<VectorField> {
    theta2.validate(Stream::Vector)?;
    check_width("theta2 input", theta2.in_width(), 2 * v_cat.channels())?;
    let rotated = j.apply(&v_cat.0)?;
    let input = Features::hcat(&[&v_cat.0, &rotated])?;
    let n = v_cat.n_points();
    let width = input.channels();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pairs: Vec<(f64, f64)> = (0..width)
                .map(|c| (input.get(2 * i, c), input.get(2 * i + 1, c)))
                .collect();
            let out = theta2.forward_vector(&pairs);
            let (u, v): (Vec<f64>, Vec<f64>) = out.into_iter().unzip();
            [u, v].concat()
        })
        .collect();
    let c_out = theta2.out_width();
    Ok(VectorField(Features::from_row_major(2 * n, c_out, rows.concat())?))
}

/// Initial vector features `Ĝ x0`.
pub fn input_vector_features(x0: &ScalarField, ops: &OperatorSet) -> Result<VectorField> {
    Ok(VectorField(ops.g_hat.apply(&x0.0)?))
}

/// One DeltaConv block. The scalar output is computed first; its gradient
/// feeds the vector stream.
pub fn deltaconv_forward(
    x: &ScalarField,
    v: &VectorField,
    ops: &OperatorSet,
    graph: &KnnGraph,
    params: &DeltaConvParams,
) -> Result<(ScalarField, VectorField)> {
    let n = x.n_points();
    if v.n_points() != n || ops.n_points() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("{n} points in scalars, vectors and operators"),
            actual: format!("{} vector points, {} operator points", v.n_points(), ops.n_points()),
        });
    }
    check_graph(graph, n)?;
    params.check_widths(x.channels(), v.channels())?;

    let div = ops.d_hat.apply(&v.0)?;
    let curl = ops.curl.apply(&v.0)?;
    let norms = v.norms();
    let self_input = Features::hcat(&[&x.0, &div, &curl, &norms.0])?;
    let agg = neighbor_max(&x.0, graph, &params.theta1, params.centralize);
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut out = params.theta0.forward_scalar(self_input.row(i));
            out.iter_mut().zip(&agg[i]).for_each(|(o, a)| *o += a);
            out
        })
        .collect();
    let x_next = ScalarField(Features::from_row_major(n, params.c_out(), rows.concat())?);

    let grad = ops.g_hat.apply(&x_next.0)?;
    let lap = ops.hodge.apply(&v.0)?;
    let v_cat = VectorField(Features::hcat(&[&v.0, &grad, &lap])?);
    let v_next = vector_mlp(&v_cat, &ops.j, &params.theta2)?;
    Ok((x_next, v_next))
}
