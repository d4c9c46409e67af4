//! Multi-channel scalar and tangent-vector fields.

use crate::error::{Error, Result};

/// Dense row-major `rows × channels` matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    rows: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Features {
    pub fn zeros(rows: usize, channels: usize) -> Self {
        Self {
            rows,
            channels,
            data: vec![0.0; rows * channels],
        }
    }

    pub fn from_row_major(rows: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows}x{channels} = {} values", rows * channels),
                actual: format!("{} values", data.len()),
            });
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value at row {}, channel {}",
                k / channels.max(1),
                k % channels.max(1)
            )));
        }
        Ok(Self {
            rows,
            channels,
            data,
        })
    }

    pub fn from_fn(rows: usize, channels: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * channels);
        for r in 0..rows {
            for c in 0..channels {
                data.push(f(r, c));
            }
        }
        Self {
            rows,
            channels,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.channels..(r + 1) * self.channels]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.channels..(r + 1) * self.channels]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.channels + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        self.data[r * self.channels + c] = value;
    }

    /// Concatenate along channels.
    pub fn hcat(parts: &[&Features]) -> Result<Features> {
        let rows = parts.first().map_or(0, |p| p.rows);
        if let Some(p) = parts.iter().find(|p| p.rows != rows) {
            return Err(Error::ShapeMismatch {
                expected: format!("{rows} rows"),
                actual: format!("{} rows", p.rows),
            });
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(rows * channels);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row(r));
            }
        }
        Ok(Features {
            rows,
            channels,
            data,
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `N × C` scalar channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(pub Features);

/// `2N × C` tangent-vector coefficients, rows interleaved `[α₁ᵘ, α₁ᵛ, α₂ᵘ, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(pub Features);

impl ScalarField {
    pub fn new(features: Features) -> Self {
        Self(features)
    }

    pub fn zeros(n_points: usize, channels: usize) -> Self {
        Self(Features::zeros(n_points, channels))
    }

    pub fn n_points(&self) -> usize {
        self.0.rows
    }

    pub fn channels(&self) -> usize {
        self.0.channels
    }

    pub fn features(&self) -> &Features {
        &self.0
    }
}

impl VectorField {
    pub fn new(features: Features) -> Result<Self> {
        if !features.rows.is_multiple_of(2) {
            return Err(Error::ShapeMismatch {
                expected: "an even number of coefficient rows".into(),
                actual: format!("{} rows", features.rows),
            });
        }
        Ok(Self(features))
    }

    pub fn zeros(n_points: usize, channels: usize) -> Self {
        Self(Features::zeros(2 * n_points, channels))
    }

    pub fn n_points(&self) -> usize {
        self.0.rows / 2
    }

    pub fn channels(&self) -> usize {
        self.0.channels
    }

    pub fn features(&self) -> &Features {
        &self.0
    }

    /// `(α_u, α_v)` of channel `c` at point `i`.
    pub fn coeffs(&self, i: usize, c: usize) -> (f64, f64) {
        (self.0.get(2 * i, c), self.0.get(2 * i + 1, c))
    }

    pub fn set_coeffs(&mut self, i: usize, c: usize, (u, v): (f64, f64)) {
        self.0.set(2 * i, c, u);
        self.0.set(2 * i + 1, c, v);
    }

    /// Per-point, per-channel Euclidean norm of the coefficients.
    pub fn norms(&self) -> ScalarField {
        let n = self.n_points();
        ScalarField(Features::from_fn(n, self.channels(), |i, c| {
            let (u, v) = self.coeffs(i, c);
            u.hypot(v)
        }))
    }
}

/// A field of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Field {
    pub fn n_points(&self) -> usize {
        match self {
            Field::Scalar(s) => s.n_points(),
            Field::Vector(v) => v.n_points(),
        }
    }

    pub fn features(&self) -> &Features {
        match self {
            Field::Scalar(s) => &s.0,
            Field::Vector(v) => &v.0,
        }
    }
}
