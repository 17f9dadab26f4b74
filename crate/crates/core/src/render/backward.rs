use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector3};
use rayon::prelude::*;

use super::forward::RenderOutput;
use super::project::project_full;
use super::{GaussianCloud, PARAMS_PER_GAUSSIAN};
use crate::camera::Camera;
use crate::error::{check_len, Error, Result};
use crate::raster::is_hole;

/// Screen-space gradient slots per splat.
const MEAN_X: usize = 0;
const MEAN_Y: usize = 1;
const CONIC_A: usize = 2;
const CONIC_B: usize = 3;
const CONIC_C: usize = 4;
const OPACITY: usize = 5;
const COLOR: usize = 6;
const DEPTH: usize = 9;
const SLOTS: usize = 10;

const MAX_CHUNKS: usize = 16;

/// Accumulates `dL/dparams` into the cloud's gradient mirror given
/// `dL/dcolor` (three interleaved channels per pixel) and optionally
/// `dL/ddepth`. Depth gradients on hole cells are ignored.
///
/// Fails with [`Error::StaleForward`] if the cloud or camera changed since
/// `out` was rendered.
pub fn render_backward(
    out: &RenderOutput,
    grad_color: &[f64],
    grad_depth: Option<&[f64]>,
    cloud: &mut GaussianCloud,
    cam: &Camera,
) -> Result<()> {
    let cache = &out.cache;
    if cache.generation != cloud.generation() || cache.cloud_len != cloud.len() || &cache.camera != cam {
        return Err(Error::StaleForward);
    }
    let (w, h) = cam.dims();
    check_len(3 * w * h, grad_color.len())?;
    if let Some(gd) = grad_depth {
        check_len(w * h, gd.len())?;
    }
    let bg = cache.options.background;
    let splats = &cache.splats;
    let depth_cells = out.depth.cells();

    // Rows are split into a fixed number of chunks regardless of thread
    // count; chunk buffers are summed in chunk order.
    let chunks = MAX_CHUNKS.min(h.max(1));
    let rows_per = h.div_ceil(chunks);
    let partial: Vec<Vec<[f64; SLOTS]>> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut acc = vec![[0.0; SLOTS]; splats.len()];
            for y in k * rows_per..((k + 1) * rows_per).min(h) {
                let py = y as f64;
                for x in 0..w {
                    let p = y * w + x;
                    let gc = [grad_color[3 * p], grad_color[3 * p + 1], grad_color[3 * p + 2]];
                    let gd = match grad_depth {
                        Some(g) if !is_hole(depth_cells[p]) => g[p],
                        _ => 0.0,
                    };
                    if gc == [0.0; 3] && gd == 0.0 {
                        continue;
                    }
                    let px = x as f64;
                    let mut behind = gc[0] * bg[0] + gc[1] * bg[1] + gc[2] * bg[2];
                    for c in cache.contributions[cache.offsets[p]..cache.offsets[p + 1]].iter().rev() {
                        let s = &splats[c.splat as usize];
                        let a = &mut acc[c.splat as usize];
                        let alpha = s.opacity * c.falloff;
                        let weight = alpha * c.transmittance;
                        let v = gc[0] * s.color[0] + gc[1] * s.color[1] + gc[2] * s.color[2] + gd * s.depth;
                        for ch in 0..3 {
                            a[COLOR + ch] += gc[ch] * weight;
                        }
                        a[DEPTH] += gd * weight;
                        let d_alpha = c.transmittance * (v - behind);
                        behind = alpha * v + (1.0 - alpha) * behind;

                        a[OPACITY] += d_alpha * c.falloff;
                        let dq = -0.5 * c.falloff * d_alpha * s.opacity;
                        let dx = px - s.mean.x;
                        let dy = py - s.mean.y;
                        let [ca, cb, cc] = s.conic;
                        a[CONIC_A] += dq * dx * dx;
                        a[CONIC_B] += dq * 2.0 * dx * dy;
                        a[CONIC_C] += dq * dy * dy;
                        a[MEAN_X] -= dq * (2.0 * ca * dx + 2.0 * cb * dy);
                        a[MEAN_Y] -= dq * (2.0 * cb * dx + 2.0 * cc * dy);
                    }
                }
            }
            acc
        })
        .collect();
    let mut screen = vec![[0.0; SLOTS]; splats.len()];
    for chunk in &partial {
        for (dst, src) in screen.iter_mut().zip(chunk) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    let gaussians = cloud.gaussians();
    let near = cache.options.near;
    let param_grads: Vec<(usize, [f64; PARAMS_PER_GAUSSIAN])> = splats
        .par_iter()
        .zip(&screen)
        .filter(|(_, g)| g.iter().any(|v| *v != 0.0))
        .map(|(s, g)| {
            let i = s.gaussian as usize;
            (i, chain_rule(&gaussians[i], cam, near, s.conic, s.opacity, g))
        })
        .collect();
    let grads = cloud.grads_mut();
    for (i, g) in param_grads {
        for (d, v) in grads[i].iter_mut().zip(g) {
            *d += v;
        }
    }
    Ok(())
}

/// Screen-space splat gradients to primitive parameters.
fn chain_rule(
    g: &super::Gaussian,
    cam: &Camera,
    near: f64,
    conic: [f64; 3],
    opacity: f64,
    ds: &[f64; SLOTS],
) -> [f64; PARAMS_PER_GAUSSIAN] {
    let p = project_full(g, cam, near).expect("splat was visible in the forward pass");
    let mut out = [0.0; PARAMS_PER_GAUSSIAN];

    // conic -> dilated screen covariance -> screen covariance
    let q = Matrix2::new(conic[0], conic[1], conic[1], conic[2]);
    let gq = Matrix2::new(ds[CONIC_A], 0.5 * ds[CONIC_B], 0.5 * ds[CONIC_B], ds[CONIC_C]);
    let d_cov2d = -(q * gq * q);

    // cov2d = T cov3d Tᵀ with T = J W
    let tm = p.jac * cam.rotation;
    let d_cov3d = tm.transpose() * d_cov2d * tm;
    let d_tm = 2.0 * d_cov2d * tm * p.cov3d;
    let d_jac: Matrix2x3<f64> = d_tm * cam.rotation.transpose();

    let (fx, fy) = (cam.fx, cam.fy);
    let (tx, ty, tz) = (p.t_cam.x, p.t_cam.y, p.t_cam.z);
    let tz2 = tz * tz;
    let tz3 = tz2 * tz;
    let mut dt = Vector3::zeros();
    dt.x += d_jac[(0, 2)] * (-fx / tz2);
    dt.y += d_jac[(1, 2)] * (-fy / tz2);
    dt.z += d_jac[(0, 0)] * (-fx / tz2)
        + d_jac[(0, 2)] * (2.0 * fx * tx / tz3)
        + d_jac[(1, 1)] * (-fy / tz2)
        + d_jac[(1, 2)] * (2.0 * fy * ty / tz3);
    dt.x += ds[MEAN_X] * fx / tz;
    dt.y += ds[MEAN_Y] * fy / tz;
    dt.z -= ds[MEAN_X] * fx * tx / tz2 + ds[MEAN_Y] * fy * ty / tz2;
    dt.z += ds[DEPTH];
    let d_mean = cam.rotation.transpose() * dt;
    out[0] = d_mean.x;
    out[1] = d_mean.y;
    out[2] = d_mean.z;

    // cov3d = M Mᵀ with M = R S
    let m = p.rot * Matrix3::from_diagonal(&p.scale);
    let d_m = 2.0 * d_cov3d * m;
    let d_rot = d_m * Matrix3::from_diagonal(&p.scale);
    for k in 0..3 {
        let ds_k: f64 = (0..3).map(|i| d_m[(i, k)] * p.rot[(i, k)]).sum();
        out[7 + k] = ds_k * p.scale[k];
    }

    let dq_unit = quat_grad(&p.quat_unit, &d_rot);
    let qu = p.quat_unit;
    let dot: f64 = (0..4).map(|i| qu[i] * dq_unit[i]).sum();
    for i in 0..4 {
        out[3 + i] = (dq_unit[i] - qu[i] * dot) / p.quat_norm;
    }

    out[10] = ds[OPACITY] * opacity * (1.0 - opacity);
    out[11..14].copy_from_slice(&ds[COLOR..COLOR + 3]);
    out
}

/// `dL/dq` for `R(q)` at a unit quaternion `(w, x, y, z)`.
fn quat_grad(q: &[f64; 4], d_rot: &Matrix3<f64>) -> [f64; 4] {
    let [w, x, y, z] = *q;
    let dw = Matrix3::new(0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0);
    let dx = Matrix3::new(0.0, 2.0 * y, 2.0 * z, 2.0 * y, -4.0 * x, -2.0 * w, 2.0 * z, 2.0 * w, -4.0 * x);
    let dy = Matrix3::new(-4.0 * y, 2.0 * x, 2.0 * w, 2.0 * x, 0.0, 2.0 * z, -2.0 * w, 2.0 * z, -4.0 * y);
    let dz = Matrix3::new(-4.0 * z, -2.0 * w, 2.0 * x, 2.0 * w, -4.0 * z, 2.0 * y, 2.0 * x, 2.0 * y, 0.0);
    [
        d_rot.component_mul(&dw).sum(),
        d_rot.component_mul(&dx).sum(),
        d_rot.component_mul(&dy).sum(),
        d_rot.component_mul(&dz).sum(),
    ]
}
