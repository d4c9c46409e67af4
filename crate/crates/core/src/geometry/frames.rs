use super::{PointCloud, Vec3};
use crate::error::{Error, Result};

const ORTHO_TOLERANCE: f64 = 1e-6;

/// Per-point right-handed orthonormal frames `(e_u, e_v, n)`.
///
/// Vector features are stored as coefficients `(α_u, α_v)` in these frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrames {
    e_u: Vec<Vec3>,
    e_v: Vec<Vec3>,
    normal: Vec<Vec3>,
}

impl TangentFrames {
    /// Assemble frames from explicit axes, checking orthonormality and handedness.
    pub fn from_axes(e_u: Vec<Vec3>, e_v: Vec<Vec3>, normal: Vec<Vec3>) -> Result<Self> {
        if e_u.len() != normal.len() || e_v.len() != normal.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} frames", normal.len()),
                actual: format!("{} / {}", e_u.len(), e_v.len()),
            });
        }
        let frames = Self { e_u, e_v, normal };
        if let Some(i) = (0..frames.len()).find(|&i| !frames.frame_is_valid(i)) {
            return Err(Error::InvalidInput(format!(
                "frame {i} is not a right-handed orthonormal basis"
            )));
        }
        Ok(frames)
    }

    pub fn len(&self) -> usize {
        self.normal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normal.is_empty()
    }

    pub fn e_u(&self) -> &[Vec3] {
        &self.e_u
    }

    pub fn e_v(&self) -> &[Vec3] {
        &self.e_v
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normal
    }

    /// Express an ambient vector in the tangent coefficients of frame `i`.
    pub fn coefficients(&self, i: usize, v: &Vec3) -> (f64, f64) {
        (v.dot(&self.e_u[i]), v.dot(&self.e_v[i]))
    }

    /// Ambient vector for tangent coefficients at point `i`.
    pub fn ambient(&self, i: usize, alpha_u: f64, alpha_v: f64) -> Vec3 {
        self.e_u[i] * alpha_u + self.e_v[i] * alpha_v
    }

    /// Rotate every frame in its tangent plane by `angles[i]` (counter-clockwise
    /// about the normal). Coefficients of a fixed vector transform by the
    /// transpose of the same rotation.
    pub fn rotated(&self, angles: &[f64]) -> Result<Self> {
        if angles.len() != self.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} angles", self.len()),
                actual: format!("{}", angles.len()),
            });
        }
        let (e_u, e_v) = angles
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let (s, c) = t.sin_cos();
                (
                    self.e_u[i] * c + self.e_v[i] * s,
                    self.e_v[i] * c - self.e_u[i] * s,
                )
            })
            .unzip();
        Ok(Self {
            e_u,
            e_v,
            normal: self.normal.clone(),
        })
    }

    fn frame_is_valid(&self, i: usize) -> bool {
        let (u, v, n) = (&self.e_u[i], &self.e_v[i], &self.normal[i]);
        [u.norm() - 1.0, v.norm() - 1.0, n.norm() - 1.0, u.dot(v), u.dot(n), v.dot(n)]
            .iter()
            .all(|x| x.abs() <= ORTHO_TOLERANCE)
            && u.cross(v).dot(n) > 0.0
    }
}

/// Deterministic frames from the cloud's normals.
///
/// `e_u = normalize(a × n)` with `a = +z`, or `a = +y` when `|n·z| > 0.9`;
/// `e_v = n × e_u`. A normal of `+z` therefore gets `e_u = +x`, `e_v = +y`.
pub fn build_tangent_frames(cloud: &PointCloud) -> Result<TangentFrames> {
    let normals = cloud
        .normals()
        .ok_or_else(|| Error::Precondition("tangent frames need normals".into()))?;
    let (e_u, e_v) = normals
        .iter()
        .map(|n| {
            let a = if n.z.abs() > 0.9 { Vec3::y() } else { Vec3::z() };
            let e_u = a.cross(n).normalize();
            let e_v = n.cross(&e_u);
            (e_u, e_v)
        })
        .unzip();
    Ok(TangentFrames {
        e_u,
        e_v,
        normal: normals.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn with_normals(normals: Vec<Vec3>) -> PointCloud {
        let pts = (0..normals.len()).map(|i| Vec3::x() * i as f64).collect();
        PointCloud::with_normals(pts, normals).unwrap()
    }

    #[test]
    fn axis_aligned_normal() {
        let f = build_tangent_frames(&with_normals(vec![Vec3::z(); 3])).unwrap();
        for i in 0..3 {
            assert_eq!(f.e_u()[i], Vec3::x());
            assert_eq!(f.e_v()[i], Vec3::y());
            assert_eq!(f.e_u()[i].cross(&f.e_v()[i]), Vec3::z());
        }
    }

    #[test]
    fn random_normals_give_valid_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normals: Vec<Vec3> = (0..1000)
            .map(|_| Vec3::from([0; 3].map(|_| StandardNormal.sample(&mut rng))).normalize())
            .collect();
        let cloud = with_normals(normals);
        let f = build_tangent_frames(&cloud).unwrap();
        for i in 0..f.len() {
            assert!(f.frame_is_valid(i), "frame {i}");
            let (u, v, n) = (f.e_u()[i], f.e_v()[i], f.normals()[i]);
            assert!(u.dot(&v).abs() <= 1e-6 && u.dot(&n).abs() <= 1e-6);
            assert!(nalgebra::Matrix3::from_columns(&[u, v, n]).determinant() > 0.0);
        }
        assert_eq!(build_tangent_frames(&cloud).unwrap(), f);
    }

    #[test]
    fn missing_normals_is_precondition_error() {
        let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::x()]).unwrap();
        assert!(matches!(build_tangent_frames(&cloud), Err(Error::Precondition(_))));
    }

    #[test]
    fn rotation_keeps_frames_valid_and_maps_coefficients() {
        let f = build_tangent_frames(&with_normals(vec![Vec3::z(), Vec3::x()])).unwrap();
        let r = f.rotated(&[0.3, -1.2]).unwrap();
        for i in 0..2 {
            assert!(r.frame_is_valid(i));
            let v = f.ambient(i, 0.7, -0.4);
            let (a, b) = r.coefficients(i, &v);
            assert!((r.ambient(i, a, b) - v).norm() < 1e-14);
        }
        assert!(TangentFrames::from_axes(r.e_u.clone(), r.e_v.clone(), r.normal.clone()).is_ok());
        assert!(TangentFrames::from_axes(r.e_v.clone(), r.e_u.clone(), r.normal.clone()).is_err());
    }
}
