use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

const UNIT_TOLERANCE: f64 = 1e-6;

/// Point positions with optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vec3>,
    normals: Option<Vec<Vec3>>,
}

impl PointCloud {
    pub fn new(positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a point cloud needs at least 2 points, got {}",
                positions.len()
            )));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate at point {i}"
            )));
        }
        Ok(Self {
            positions,
            normals: None,
        })
    }

    pub fn with_normals(positions: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        Self::new(positions)?.set_normals(normals)
    }

    /// Replace the normals. Each must be finite and of unit length.
    pub fn set_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} normals", self.positions.len()),
                actual: format!("{} normals", normals.len()),
            });
        }
        for (i, n) in normals.iter().enumerate() {
            let len = n.norm();
            if !len.is_finite() || (len - 1.0).abs() > UNIT_TOLERANCE {
                return Err(Error::InvalidInput(format!(
                    "normal at point {i} has length {len}, expected 1"
                )));
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn centroid(&self) -> Vec3 {
        self.positions.iter().sum::<Vec3>() / self.positions.len() as f64
    }
}
