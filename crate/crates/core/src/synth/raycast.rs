use nalgebra::Vector3;
use rayon::prelude::*;

use super::{Primitive, SceneSpec};
use crate::camera::{Camera, BEHIND_EPS};
use crate::raster::{DepthMap, RgbImage, HOLE};

/// Nearest ray hit: ray parameter, primitive index and hit point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub primitive: usize,
    pub point: Vector3<f64>,
}

fn intersect(prim: &Primitive, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    match prim {
        Primitive::Plane { center, u, v, half_extents, .. } => {
            let n = u.cross(v);
            let denom = d.dot(&n);
            if denom.abs() < 1e-12 {
                return None;
            }
            let t = (center - o).dot(&n) / denom;
            if t <= BEHIND_EPS {
                return None;
            }
            let rel = o + d * t - center;
            (rel.dot(u).abs() <= half_extents[0] && rel.dot(v).abs() <= half_extents[1]).then_some(t)
        }
        Primitive::Sphere { center, radius, .. } => {
            let oc = o - center;
            let a = d.dot(d);
            let b = oc.dot(d);
            let c = oc.dot(&oc) - radius * radius;
            let disc = b * b - a * c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            [(-b - sq) / a, (-b + sq) / a].into_iter().find(|&t| t > BEHIND_EPS)
        }
    }
}

/// Nearest intersection of the ray `o + t d` with any primitive.
pub fn nearest_hit(spec: &SceneSpec, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<(f64, usize)> = None;
    for (i, p) in spec.primitives.iter().enumerate() {
        if let Some(t) = intersect(p, o, d) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
    }
    best.map(|(t, primitive)| Hit { t, primitive, point: o + d * t })
}

/// Exact color and z-depth of the scene for every pixel center. Misses get
/// the background color and a depth hole.
pub fn raycast_ground_truth(spec: &SceneSpec, cam: &Camera) -> (RgbImage, DepthMap) {
    let (w, h) = cam.dims();
    let origin = cam.center();
    let rt = cam.rotation.transpose();
    let rows: Vec<Vec<([f64; 3], f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    // camera-frame z of the direction is 1, so t is z-depth
                    let d = rt * cam.ray_camera(x as f64, y as f64);
                    match nearest_hit(spec, &origin, &d) {
                        Some(hit) => (spec.primitives[hit.primitive].albedo_at(&hit.point), hit.t),
                        None => (spec.background, HOLE),
                    }
                })
                .collect()
        })
        .collect();
    let (colors, depths): (Vec<_>, Vec<_>) = rows.into_iter().flatten().unzip();
    (
        RgbImage::new(w, h, colors).expect("raycast dims"),
        DepthMap::new(w, h, depths).expect("raycast depths are positive"),
    )
}
