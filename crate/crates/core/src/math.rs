//! Small numeric helpers: symmetric 3x3 eigen-decomposition and rotations.

use nalgebra::{Matrix3, Vector3};

/// Variance values below this floor collapse to zero so that analytically
/// constant fields report exactly zero deviation instead of accumulated
/// floating-point noise on the order of 1e-16.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Eigenvector of the smallest eigenvalue of a symmetric 3x3 matrix given as
/// `[xx, xy, xz, yy, yz, zz]`. Returns a unit vector.
///
/// Analytic path (trigonometric eigenvalues + cross-product eigenvector) with
/// a nalgebra fallback when the cross products degenerate.
pub fn smallest_eigenvector_sym3(m: [f64; 6]) -> Vector3<f64> {
    let [xx, xy, xz, yy, yz, zz] = m;

    // Shift by the mean eigenvalue for conditioning.
    let q = (xx + yy + zz) / 3.0;
    let a = xx - q;
    let b = yy - q;
    let c = zz - q;
    let p2 = a * a + b * b + c * c + 2.0 * (xy * xy + xz * xz + yz * yz);
    if p2 <= VARIANCE_FLOOR * VARIANCE_FLOOR {
        // Isotropic matrix: any direction works; pick +z for determinism.
        return Vector3::new(0.0, 0.0, 1.0);
    }
    let p = (p2 / 6.0).sqrt();
    let det = (a * (b * c - yz * yz) - xy * (xy * c - yz * xz) + xz * (xy * yz - b * xz))
        / (p * p * p);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    // Smallest eigenvalue of the shifted matrix.
    let eig_small = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();

    // Rows of (M - lambda I); eigenvector is orthogonal to all of them.
    let r0 = Vector3::new(xx - eig_small, xy, xz);
    let r1 = Vector3::new(xy, yy - eig_small, yz);
    let r2 = Vector3::new(xz, yz, zz - eig_small);
    let c01 = r0.cross(&r1);
    let c02 = r0.cross(&r2);
    let c12 = r1.cross(&r2);
    let best = [c01, c02, c12]
        .into_iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .unwrap();
    let n = best.norm();
    if n > 1e-12 {
        return best / n;
    }

    // Degenerate cross products (repeated eigenvalue); let nalgebra decide.
    let full = Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz);
    let eig = full.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let v = eig.eigenvectors.column(idx).into_owned();
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vector3::new(0.0, 0.0, 1.0)
    }
}

/// Rotation taking unit vector `from` onto unit vector `to` by the minimal
/// angle. Antiparallel inputs rotate 180 degrees about a stable axis
/// orthogonal to `from`.
pub fn minimal_rotation(from: &Vector3<f64>, to: &Vector3<f64>) -> Matrix3<f64> {
    let c = from.dot(to);
    let axis = from.cross(to);
    let s = axis.norm();
    if s < 1e-12 {
        if c > 0.0 {
            return Matrix3::identity();
        }
        // Pick any axis orthogonal to `from`.
        let ortho = if from.x.abs() < 0.9 {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let axis = from.cross(&ortho).normalize();
        return rotation_about_axis(&axis, std::f64::consts::PI);
    }
    let axis = axis / s;
    rotation_about_axis(&axis, s.atan2(c))
}

/// Rodrigues rotation about a unit axis.
pub fn rotation_about_axis(axis: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (sin, cos) = angle.sin_cos();
    let k = Matrix3::new(
        0.0, -axis.z, axis.y, //
        axis.z, 0.0, -axis.x, //
        -axis.y, axis.x, 0.0,
    );
    Matrix3::identity() + k * sin + k * k * (1.0 - cos)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn random_unit(state: &mut u64) -> Vector3<f64> {
        let mut next = || {
            *state ^= *state << 13;
            *state ^= *state >> 7;
            *state ^= *state << 17;
            (*state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        loop {
            let v = Vector3::new(next(), next(), next());
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                return v / n;
            }
        }
    }

    #[test]
    fn smallest_eigenvector_matches_nalgebra() {
        let mut state = 7u64;
        for _ in 0..500 {
            // Build a random symmetric PSD matrix from outer products.
            let a = random_unit(&mut state) * 2.0;
            let b = random_unit(&mut state);
            let c = random_unit(&mut state) * 0.3;
            let m = a * a.transpose() + b * b.transpose() + c * c.transpose();
            let v = smallest_eigenvector_sym3([
                m[(0, 0)],
                m[(0, 1)],
                m[(0, 2)],
                m[(1, 1)],
                m[(1, 2)],
                m[(2, 2)],
            ]);
            let eig = m.symmetric_eigen();
            let (idx, _) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .min_by(|x, y| x.1.total_cmp(y.1))
                .unwrap();
            let reference = eig.eigenvectors.column(idx).into_owned();
            // Same line, possibly opposite sign.
            let dot = v.dot(&reference).abs();
            assert!(dot > 1.0 - 1e-6, "eigenvector mismatch, |dot|={dot}");
        }
    }

    #[test]
    fn plane_covariance_gives_plane_normal() {
        // Points on the plane z = 0 scattered in x/y: covariance of
        // (x, y, 0) has its smallest eigenvalue along z.
        let v = smallest_eigenvector_sym3([2.0, 0.3, 0.0, 1.0, 0.0, 0.0]);
        assert!(v.z.abs() > 1.0 - 1e-9);
    }

    #[test]
    fn minimal_rotation_maps_from_to_to() {
        let mut state = 99u64;
        for _ in 0..200 {
            let from = random_unit(&mut state);
            let to = random_unit(&mut state);
            let r = minimal_rotation(&from, &to);
            assert!((r * from - to).norm() < 1e-9);
            let rt_r: Matrix3<f64> = r.transpose() * r;
            assert!((rt_r - Matrix3::identity()).norm() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn minimal_rotation_handles_antiparallel() {
        let from = Vector3::new(0.0, 0.0, -1.0);
        let to = Vector3::new(0.0, 0.0, 1.0);
        let r = minimal_rotation(&from, &to);
        assert!((r * from - to).norm() < 1e-9);
        assert!((r.determinant() - 1.0).abs() < 1e-9);
    }
}
