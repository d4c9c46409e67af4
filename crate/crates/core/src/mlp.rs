//! Per-point MLPs for the scalar and vector streams.
//!
//! Parameters are inference-only: batch norm uses the stored running
//! statistics. Vector layers mix channels with one weight per channel pair,
//! shared by the `u` and `v` coefficients, and batch norm / non-linearity act
//! on each channel's norm so that a rotation of the tangent basis commutes
//! with the layer.

use std::fmt;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const BATCH_NORM_EPS: f64 = 1e-5;
/// Guards the rescaling `φ(m + b) / (m + ε)` of vector non-linearities.
pub const NORM_EPS: f64 = 1e-12;
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    /// Scalar leaky ReLU with the given negative slope.
    LeakyRelu(f64),
    /// ReLU on vector norms, rescaling the vector.
    NormRelu,
    None,
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::LeakyRelu(s) => write!(f, "leaky_relu_{s}"),
            Activation::NormRelu => f.write_str("norm_relu"),
            Activation::None => f.write_str("none"),
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Activation::None),
            "norm_relu" => Ok(Activation::NormRelu),
            "leaky_relu" => Ok(Activation::LeakyRelu(DEFAULT_LEAKY_SLOPE)),
            _ => s
                .strip_prefix("leaky_relu_")
                .and_then(|slope| slope.parse::<f64>().ok())
                .filter(|slope| slope.is_finite())
                .map(Activation::LeakyRelu)
                .ok_or_else(|| Error::InvalidInput(format!("unknown activation {s:?}"))),
        }
    }
}

impl Serialize for Activation {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Activation {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl BatchNorm {
    fn normalize(&self, c: usize, x: f64) -> f64 {
        (x - self.mean[c]) / (self.var[c] + BATCH_NORM_EPS).sqrt() * self.scale[c] + self.shift[c]
    }
}

/// Fully connected layer, optional batch norm, activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// Row-major `out × in` weights.
    pub w: Vec<Vec<f64>>,
    /// Scalar layers: additive bias. Vector layers: bias added to the norm
    /// before the non-linearity.
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bn: Option<BatchNorm>,
    pub act: Activation,
}

impl Layer {
    pub fn in_width(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }

    pub fn out_width(&self) -> usize {
        self.w.len()
    }

    /// Plain linear layer, no normalization or activation.
    pub fn linear(w: Vec<Vec<f64>>) -> Self {
        let out = w.len();
        Self {
            w,
            b: vec![0.0; out],
            bn: None,
            act: Activation::None,
        }
    }

    fn validate(&self, stream: Stream) -> Result<()> {
        let (out, inw) = (self.out_width(), self.in_width());
        if out == 0 || inw == 0 || self.w.iter().any(|r| r.len() != inw) {
            return Err(Error::InvalidInput("layer weights must be a non-empty rectangular matrix".into()));
        }
        if self.b.len() != out {
            return Err(Error::InvalidInput(format!("bias has {} entries, expected {out}", self.b.len())));
        }
        if let Some(bn) = &self.bn {
            if [&bn.scale, &bn.shift, &bn.mean, &bn.var].iter().any(|v| v.len() != out) {
                return Err(Error::InvalidInput(format!("batch norm vectors must have {out} entries")));
            }
            if bn.var.iter().any(|&v| !(v > 0.0)) {
                return Err(Error::InvalidInput("batch norm running variance must be > 0".into()));
            }
        }
        let finite = self.w.iter().flatten().chain(&self.b).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("non-finite layer parameter".into()));
        }
        match (stream, self.act) {
            (Stream::Scalar, Activation::NormRelu) => Err(Error::InvalidInput(
                "norm_relu is a vector activation".into(),
            )),
            (Stream::Vector, Activation::LeakyRelu(_)) => Err(Error::InvalidInput(
                "vector layers take norm_relu or none".into(),
            )),
            _ => Ok(()),
        }
    }

    fn scalar(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (c, row) in self.w.iter().enumerate() {
            let mut z = self.b[c];
            for (w, xi) in row.iter().zip(x) {
                z += w * xi;
            }
            if let Some(bn) = &self.bn {
                z = bn.normalize(c, z);
            }
            if let Activation::LeakyRelu(slope) = self.act {
                if z < 0.0 {
                    z *= slope;
                }
            }
            out.push(z);
        }
    }

    fn vector(&self, x: &[(f64, f64)], out: &mut Vec<(f64, f64)>) {
        out.clear();
        let passthrough =
            self.bn.is_none() && self.act == Activation::None && self.b.iter().all(|&b| b == 0.0);
        for (c, row) in self.w.iter().enumerate() {
            let (mut zu, mut zv) = (0.0, 0.0);
            for (w, &(u, v)) in row.iter().zip(x) {
                zu += w * u;
                zv += w * v;
            }
            if !passthrough {
                let m = zu.hypot(zv);
                let mut t = m;
                if let Some(bn) = &self.bn {
                    t = bn.normalize(c, t);
                }
                t += self.b[c];
                if self.act == Activation::NormRelu {
                    t = t.max(0.0);
                }
                let s = t / (m + NORM_EPS);
                zu *= s;
                zv *= s;
            }
            out.push((zu, zv));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Scalar,
    Vector,
}

/// A stack of layers, serialized as a JSON list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn in_width(&self) -> usize {
        self.layers.first().map_or(0, Layer::in_width)
    }

    pub fn out_width(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_width)
    }

    pub fn validate(&self, stream: Stream) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidInput("an MLP needs at least one layer".into()));
        }
        for layer in &self.layers {
            layer.validate(stream)?;
        }
        for pair in self.layers.windows(2) {
            if pair[0].out_width() != pair[1].in_width() {
                return Err(Error::InvalidInput(format!(
                    "layer widths do not chain: {} -> {}",
                    pair[0].out_width(),
                    pair[1].in_width()
                )));
            }
        }
        Ok(())
    }

    /// Evaluate on one scalar feature row.
    pub fn forward_scalar(&self, x: &[f64]) -> Vec<f64> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.scalar(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Evaluate on one point's vector channels.
    pub fn forward_vector(&self, x: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.vector(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }
}
