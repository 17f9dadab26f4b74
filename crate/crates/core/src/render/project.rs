//! Projection of 3D Gaussians to screen-space splats (first-order EWA).

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};

use super::Gaussian;
use crate::camera::{Camera, BEHIND_EPS};
use crate::error::{Error, Result};

/// A Gaussian projected onto the image plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Splat {
    /// Screen-space center in pixels.
    pub mean: Vector2<f64>,
    /// Screen-space covariance in pixels², without any dilation.
    pub cov: Matrix2<f64>,
    /// Camera-frame `z` of the Gaussian mean.
    pub depth: f64,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Normalized quaternion `(w, x, y, z)` and its norm.
#[inline]
pub(crate) fn normalize_quat(q: &[f64; 4]) -> ([f64; 4], f64) {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    ([q[0] / n, q[1] / n, q[2] / n, q[3] / n], n)
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
#[inline]
pub(crate) fn quat_to_rot(q: &[f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = *q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Intermediate quantities of the projection, kept for the backward pass.
pub(crate) struct Projected {
    pub rot: Matrix3<f64>,
    pub quat_unit: [f64; 4],
    pub quat_norm: f64,
    pub scale: Vector3<f64>,
    pub cov3d: Matrix3<f64>,
    pub t_cam: Vector3<f64>,
    pub jac: Matrix2x3<f64>,
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
}

pub(crate) fn project_full(g: &Gaussian, cam: &Camera, near: f64) -> Option<Projected> {
    let t_cam = cam.to_camera(&g.mean);
    let tz = t_cam.z;
    if tz <= near.max(BEHIND_EPS) {
        return None;
    }
    let (quat_unit, quat_norm) = normalize_quat(&g.rotation);
    if !(quat_norm > 0.0) {
        return None;
    }
    let rot = quat_to_rot(&quat_unit);
    let scale = g.log_scale.map(f64::exp);
    let m = rot * Matrix3::from_diagonal(&scale);
    let cov3d = m * m.transpose();
    let jac = Matrix2x3::new(
        cam.fx / tz,
        0.0,
        -cam.fx * t_cam.x / (tz * tz),
        0.0,
        cam.fy / tz,
        -cam.fy * t_cam.y / (tz * tz),
    );
    let tm = jac * cam.rotation;
    let cov2d = tm * cov3d * tm.transpose();
    let mean2d = Vector2::new(cam.fx * t_cam.x / tz + cam.cx, cam.fy * t_cam.y / tz + cam.cy);
    Some(Projected { rot, quat_unit, quat_norm, scale, cov3d, t_cam, jac, mean2d, cov2d })
}

/// Projects a Gaussian with the perspective Jacobian at its mean:
/// `cov2d = J W cov3d Wᵀ Jᵀ`, where `W` is the camera rotation.
pub fn project_gaussian(g: &Gaussian, cam: &Camera) -> Result<Splat> {
    let z = cam.to_camera(&g.mean).z;
    let p = project_full(g, cam, BEHIND_EPS).ok_or(Error::BehindCamera { z })?;
    Ok(Splat { mean: p.mean2d, cov: p.cov2d, depth: p.t_cam.z })
}
