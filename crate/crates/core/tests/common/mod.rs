//! Scenes with analytic answers shared by the integration tests.

#![allow(dead_code)]

use monosplat::camera::{offset_camera, Camera};
use monosplat::raster::BinMask;
use monosplat::render::{Gaussian, GaussianCloud};
use monosplat::synth::plane_cloud;
use nalgebra::{Matrix3, Vector3};

pub const PLANE_Z: f64 = 3.0;

pub struct PlaneScene {
    pub cam: Camera,
    pub cloud: GaussianCloud,
    /// Center and radius of the planted floater, if any.
    pub floater: Option<(Vector3<f64>, f64)>,
}

pub fn camera() -> Camera {
    Camera::new(60.0, 60.0, 31.5, 23.5, Matrix3::identity(), Vector3::zeros(), 64, 48).unwrap()
}

/// A tiled plane at depth 3 facing the camera.
pub fn plane_scene() -> PlaneScene {
    let cam = camera();
    let cloud = GaussianCloud::new(plane_cloud(&cam, PLANE_Z, 1.0, 8.0, [0.6, 0.5, 0.4]));
    PlaneScene { cam, cloud, floater: None }
}

/// The plane plus one isotropic Gaussian 30% nearer than the surface.
pub fn floater_scene(sigma: f64, opacity_logit: f64) -> PlaneScene {
    let cam = camera();
    let center = cam.ray_camera(24.0, 20.0) * (0.7 * PLANE_Z);
    let mut g = plane_cloud(&cam, PLANE_Z, 1.0, 8.0, [0.6, 0.5, 0.4]);
    g.push(Gaussian::isotropic(center, sigma, opacity_logit, [1.0, 0.1, 0.1]));
    PlaneScene { cam, cloud: GaussianCloud::new(g), floater: Some((center, sigma)) }
}

/// Fraction of the plane scene flagged at the default settings.
pub fn plane_mask_fraction() -> f64 {
    let s = plane_scene();
    monosplat::dim::dim_pipeline(&s.cloud, &s.cam, &monosplat::dim::DimConfig::default()).unwrap().fraction()
}

fn segment_distance(o: &Vector3<f64>, p: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let d = p - o;
    let t = ((c - o).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (o + d * t - c).norm()
}

/// Mask statistics against ray-cast ground truth.
#[derive(Debug)]
pub struct MaskScore {
    /// Pixels whose ray passes within one sigma of the floater center.
    pub footprint: usize,
    pub recall: f64,
    /// Plane pixels the right eye also sees, away from the floater's
    /// influence and from the image-border band.
    pub consistent: usize,
    pub false_positive_rate: f64,
}

pub fn score_mask(scene: &PlaneScene, mask: &BinMask, baseline: f64) -> MaskScore {
    let cam = &scene.cam;
    let right = offset_camera(cam, baseline);
    let (o_left, o_right) = (cam.center(), right.center());
    let (mut hit, mut foot, mut fp, mut consistent) = (0, 0, 0, 0);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let p = cam.ray_camera(x as f64, y as f64) * PLANE_Z;
            let masked = mask.get(x, y) as usize;
            let mut clear = true;
            if let Some((c, s)) = scene.floater {
                if segment_distance(&o_left, &p, &c) <= s {
                    foot += 1;
                    hit += masked;
                    continue;
                }
                clear = segment_distance(&o_left, &p, &c) > 3.0 * s && segment_distance(&o_right, &p, &c) > 3.0 * s;
            }
            let q = right.to_camera(&p);
            let (u, v) = (right.fx * q.x / q.z + right.cx, right.fy * q.y / q.z + right.cy);
            let inside = u >= 1.0 && v >= 1.0 && u <= cam.width as f64 - 2.0 && v <= cam.height as f64 - 2.0;
            if clear && inside {
                consistent += 1;
                fp += masked;
            }
        }
    }
    MaskScore {
        footprint: foot,
        recall: if foot > 0 { hit as f64 / foot as f64 } else { f64::NAN },
        consistent,
        false_positive_rate: fp as f64 / consistent as f64,
    }
}
