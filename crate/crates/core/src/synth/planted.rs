use nalgebra::{Rotation3, UnitQuaternion, Vector3};

use crate::camera::Camera;
use crate::render::Gaussian;

/// Flat, nearly opaque Gaussians tiling the plane at camera-frame depth
/// `depth`, one every `spacing` pixels and reaching `margin` pixels past
/// each image edge. Each is as wide as the grid step and 1% of that thick.
pub fn plane_cloud(cam: &Camera, depth: f64, spacing: f64, margin: f64, color: [f64; 3]) -> Vec<Gaussian> {
    let to_world = cam.rotation.transpose();
    let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(to_world));
    let sigma = spacing * depth / cam.fx;
    let log_scale = Vector3::new(sigma.ln(), sigma.ln(), (0.01 * sigma).ln());
    let steps = |len: usize| ((len as f64 - 1.0 + 2.0 * margin) / spacing).ceil() as usize + 1;
    let (nx, ny) = (steps(cam.width), steps(cam.height));
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x = -margin + i as f64 * spacing;
            let y = -margin + j as f64 * spacing;
            let p_cam = cam.ray_camera(x, y) * depth;
            out.push(Gaussian {
                mean: to_world * (p_cam - cam.translation),
                rotation: [q.w, q.i, q.j, q.k],
                log_scale,
                opacity_logit: 3.0,
                color,
            });
        }
    }
    out
}
