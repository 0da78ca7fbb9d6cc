//! Pinhole camera intrinsics and projection.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Pinhole intrinsics. Focal lengths and principal point in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Self { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::InvalidValue(format!(
                "focal lengths must be positive and finite, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidValue(
                "principal point must be finite".into(),
            ));
        }
        Ok(())
    }

    /// The 3x3 camera matrix K.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, 0.0, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// Back-projects pixel `(u, v)` at metric depth `d` into the camera frame:
    /// `p = d * K^-1 * (u, v, 1)^T`.
    #[inline]
    pub fn deproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        Vector3::new(
            depth * (u - self.cx) / self.fx,
            depth * (v - self.cy) / self.fy,
            depth,
        )
    }

    /// Projects a camera-frame point to pixel coordinates. `None` for points
    /// at or behind the image plane.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_intrinsics_principal_ray() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let p = k.deproject(0.0, 0.0, 2.0);
        assert_eq!(p, Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn optical_axis_maps_to_principal_point() {
        let k = CameraIntrinsics::new(431.7, 512.3, 321.4, 243.9).unwrap();
        let p = k.deproject(k.cx, k.cy, 1.37);
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12);
        assert_eq!(p.z, 1.37);
    }

    #[test]
    fn deproject_project_round_trip() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let p = k.deproject(420.0, 240.0, 1.0);
        assert!((p - Vector3::new(0.2, 0.0, 1.0)).norm() < 1e-12);
        let (u, v) = k.project(&p).unwrap();
        assert!((u - 420.0).abs() < 1e-9 && (v - 240.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_degenerate_focal_length() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, -2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn matrix_is_invertible() {
        let k = CameraIntrinsics::new(500.0, 510.0, 320.0, 240.0).unwrap();
        let m = k.matrix();
        assert!(m.try_inverse().is_some());
    }
}
