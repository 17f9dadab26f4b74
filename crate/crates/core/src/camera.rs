//! Pinhole cameras, projection, back-projection and depth re-projection
//! between views.
//!
//! Conventions: the camera frame has `x` right, `y` down and `z` forward.
//! A pose is world-to-camera, `p_cam = R p_world + t`. Pixel `(i, j)` has its
//! center at continuous coordinate `(i, j)`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{is_hole, DepthMap};

/// Points with camera-frame `z` at or below this are behind the camera.
pub const BEHIND_EPS: f64 = 1e-6;

const ORTHO_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// World-to-camera rotation.
    pub rotation: Matrix3<f64>,
    /// World-to-camera translation.
    pub translation: Vector3<f64>,
    pub width: usize,
    pub height: usize,
}

/// A projected point: continuous pixel coordinates plus camera-frame depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub pixel: Vector2<f64>,
    pub depth: f64,
}

/// Rounds a continuous coordinate to the nearest integer, ties toward +inf.
#[inline]
pub fn round_coord(v: f64) -> f64 {
    (v + 0.5).floor()
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::invalid(format!("focal lengths must be positive, got ({fx}, {fy})")));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("camera image size must be at least 1x1"));
        }
        let gram = rotation.transpose() * rotation;
        if (gram - Matrix3::identity()).abs().max() > ORTHO_TOL || (rotation.determinant() - 1.0).abs() > ORTHO_TOL {
            return Err(Error::invalid("rotation must be orthonormal with det +1"));
        }
        if !translation.iter().all(|v| v.is_finite()) || !cx.is_finite() || !cy.is_finite() {
            return Err(Error::invalid("camera parameters must be finite"));
        }
        Ok(Self { fx, fy, cx, cy, rotation, translation, width, height })
    }

    /// Camera at `eye` looking at `target`. `up` is a world direction that
    /// ends up pointing toward the top of the image.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward =
            (target - eye).try_normalize(1e-12).ok_or_else(|| Error::invalid("look_at target coincides with eye"))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::invalid("look_at up vector is parallel to view direction"))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self::new(fx, fy, cx, cy, rotation, translation, width, height)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Transforms a world point into the camera frame.
    #[inline]
    pub fn to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        x >= 0.0 && y >= 0.0 && x <= (self.width - 1) as f64 && y <= (self.height - 1) as f64
    }

    /// Camera-frame ray direction through a continuous pixel, scaled so
    /// its `z` component is exactly 1.
    #[inline]
    pub fn ray_camera(&self, x: f64, y: f64) -> Vector3<f64> {
        Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0)
    }
}

/// Shifts the camera by `baseline` along its own `x` axis: the returned
/// camera has translation `t + (baseline, 0, 0)` and shares intrinsics and
/// rotation with `cam`.
pub fn offset_camera(cam: &Camera, baseline: f64) -> Camera {
    let mut out = cam.clone();
    out.translation.x += baseline;
    out
}

/// Back-projects an integer pixel at the given camera-frame depth into
/// world coordinates.
pub fn backproject(pixel: [usize; 2], depth: f64, cam: &Camera) -> Result<Vector3<f64>> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::NonPositiveDepth(depth));
    }
    let [x, y] = pixel;
    if x >= cam.width || y >= cam.height {
        return Err(Error::invalid(format!("pixel ({x}, {y}) outside {}x{} image", cam.width, cam.height)));
    }
    let p_cam = cam.ray_camera(x as f64, y as f64) * depth;
    Ok(cam.rotation.transpose() * (p_cam - cam.translation))
}

/// Projects a world point; fails when it is at or behind the camera plane.
pub fn project(point: &Vector3<f64>, cam: &Camera) -> Result<Projection> {
    let p = cam.to_camera(point);
    if p.z <= BEHIND_EPS {
        return Err(Error::BehindCamera { z: p.z });
    }
    Ok(Projection { pixel: Vector2::new(cam.fx * p.x / p.z + cam.cx, cam.fy * p.y / p.z + cam.cy), depth: p.z })
}

/// Rigid transform taking source-camera coordinates to destination-camera
/// coordinates. When both cameras share a rotation bit-for-bit the transform
/// is a pure translation, which keeps identical cameras exactly identity.
fn relative_transform(src: &Camera, dst: &Camera) -> (Option<Matrix3<f64>>, Vector3<f64>) {
    if src.rotation == dst.rotation {
        (None, dst.translation - src.translation)
    } else {
        let r = dst.rotation * src.rotation.transpose();
        let t = dst.translation - r * src.translation;
        (Some(r), t)
    }
}

/// Warps a depth map rendered from `cam_src` into the view of `cam_dst`.
///
/// Each non-hole source pixel is back-projected, projected into the
/// destination and splatted at the rounded pixel. Destination cells with no
/// incoming point are holes; collisions keep the smallest depth.
pub fn reproject_depth(depth_src: &DepthMap, cam_src: &Camera, cam_dst: &Camera) -> Result<DepthMap> {
    crate::error::check_dims(cam_src.dims(), depth_src.dims())?;
    let (rot, trans) = relative_transform(cam_src, cam_dst);
    let (w_dst, h_dst) = cam_dst.dims();
    let w_src = depth_src.width();

    let hits: Vec<Vec<(usize, f64)>> = depth_src
        .cells()
        .par_chunks(w_src)
        .enumerate()
        .map(|(y, row)| {
            let mut out = Vec::new();
            for (x, &d) in row.iter().enumerate() {
                if is_hole(d) {
                    continue;
                }
                let p_src = cam_src.ray_camera(x as f64, y as f64) * d;
                let p = match rot {
                    Some(r) => r * p_src + trans,
                    None => p_src + trans,
                };
                if p.z <= BEHIND_EPS {
                    continue;
                }
                let u = round_coord(cam_dst.fx * p.x / p.z + cam_dst.cx);
                let v = round_coord(cam_dst.fy * p.y / p.z + cam_dst.cy);
                if u < 0.0 || v < 0.0 || u >= w_dst as f64 || v >= h_dst as f64 {
                    continue;
                }
                out.push((v as usize * w_dst + u as usize, p.z));
            }
            out
        })
        .collect();

    let mut cells = vec![f64::INFINITY; w_dst * h_dst];
    for (idx, z) in hits.into_iter().flatten() {
        if z < cells[idx] {
            cells[idx] = z;
        }
    }
    for c in &mut cells {
        if c.is_infinite() {
            *c = crate::raster::HOLE;
        }
    }
    DepthMap::new(w_dst, h_dst, cells)
}

/// Writes cameras in the text block format: `fx fy cx cy w h` followed by
/// the three rows of `[R|t]`, blocks separated by a blank line.
pub fn format_cameras(cams: &[Camera]) -> String {
    let mut s = String::new();
    for (i, c) in cams.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        writeln!(s, "{:?} {:?} {:?} {:?} {} {}", c.fx, c.fy, c.cx, c.cy, c.width, c.height).unwrap();
        for r in 0..3 {
            writeln!(
                s,
                "{:?} {:?} {:?} {:?}",
                c.rotation[(r, 0)],
                c.rotation[(r, 1)],
                c.rotation[(r, 2)],
                c.translation[r]
            )
            .unwrap();
        }
    }
    s
}

pub fn parse_cameras(text: &str) -> Result<Vec<Camera>> {
    let mut cams = Vec::new();
    let mut block: Vec<&str> = Vec::new();
    let lines = text.lines().map(str::trim).chain(std::iter::once(""));
    for line in lines {
        if line.is_empty() {
            if !block.is_empty() {
                cams.push(parse_camera_block(&block, cams.len())?);
                block.clear();
            }
        } else {
            block.push(line);
        }
    }
    Ok(cams)
}

fn parse_camera_block(lines: &[&str], index: usize) -> Result<Camera> {
    let bad = |msg: &str| Error::format(format!("camera block {index}: {msg}"));
    if lines.len() != 4 {
        return Err(bad(&format!("expected 4 lines, found {}", lines.len())));
    }
    let nums = |line: &str, n: usize| -> Result<Vec<f64>> {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(&e.to_string()))?;
        if v.len() != n {
            return Err(bad(&format!("expected {n} numbers, found {}", v.len())));
        }
        Ok(v)
    };
    let head: Vec<&str> = lines[0].split_whitespace().collect();
    if head.len() != 6 {
        return Err(bad("intrinsics line needs fx fy cx cy w h"));
    }
    let k = nums(&head[..4].join(" "), 4)?;
    let w: usize = head[4].parse().map_err(|_| bad("width is not an integer"))?;
    let h: usize = head[5].parse().map_err(|_| bad("height is not an integer"))?;
    let mut rotation = Matrix3::zeros();
    let mut translation = Vector3::zeros();
    for r in 0..3 {
        let row = nums(lines[r + 1], 4)?;
        for c in 0..3 {
            rotation[(r, c)] = row[c];
        }
        translation[r] = row[3];
    }
    Camera::new(k[0], k[1], k[2], k[3], rotation, translation, w, h).map_err(|e| bad(&e.to_string()))
}

pub fn read_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    parse_cameras(&fs::read_to_string(path)?)
}

pub fn write_cameras(cams: &[Camera], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_cameras(cams))?;
    Ok(())
}
