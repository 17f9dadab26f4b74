//! Plants one floater in front of a tiled plane, builds the inconsistency
//! mask and scores it against a ray-cast footprint of the floater.
//!
//! Run with `cargo run --release --example dim_floater [sigma] [logit]`.

use monosplat::camera::{offset_camera, Camera};
use monosplat::dim::{dim_pipeline_with, DimConfig};
use monosplat::render::{Gaussian, GaussianCloud, RenderOptions};
use monosplat::synth::plane_cloud;
use nalgebra::{Matrix3, Vector3};

/// Distance from `c` to the segment from `o` to `p`.
fn segment_distance(o: &Vector3<f64>, p: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    let d = p - o;
    let t = ((c - o).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
    (o + d * t - c).norm()
}

fn main() -> monosplat::Result<()> {
    let cam = Camera::new(60.0, 60.0, 31.5, 23.5, Matrix3::identity(), Vector3::zeros(), 64, 48)?;
    let plane_z = 3.0;
    // optional arguments: floater sigma and opacity logit
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|v| v.parse().ok()).collect();
    let sigma = args.first().copied().unwrap_or(0.05);
    let logit = args.get(1).copied().unwrap_or(0.0);
    let center = cam.ray_camera(24.0, 20.0) * (0.7 * plane_z);

    let mut gaussians = plane_cloud(&cam, plane_z, 1.0, 8.0, [0.6, 0.5, 0.4]);
    gaussians.push(Gaussian::isotropic(center, sigma, logit, [1.0, 0.1, 0.1]));
    let cloud = GaussianCloud::new(gaussians);

    let cfg = DimConfig::default();
    let r = dim_pipeline_with(&cloud, &cam, &cfg, &RenderOptions::default(), None)?;
    let right = offset_camera(&cam, r.baseline);
    let (o_left, o_right) = (cam.center(), right.center());

    let (mut hit, mut foot, mut fp, mut consistent) = (0, 0, 0, 0);
    for y in 0..cam.height {
        for x in 0..cam.width {
            let p = cam.ray_camera(x as f64, y as f64) * plane_z;
            let masked = r.mask.get(x, y);
            if segment_distance(&o_left, &p, &center) <= sigma {
                foot += 1;
                hit += masked as usize;
                continue;
            }
            let q = right.to_camera(&p);
            let (u, v) = (right.fx * q.x / q.z + right.cx, right.fy * q.y / q.z + right.cy);
            let inside = u >= 1.0 && v >= 1.0 && u <= cam.width as f64 - 2.0 && v <= cam.height as f64 - 2.0;
            if inside
                && segment_distance(&o_left, &p, &center) > 3.0 * sigma
                && segment_distance(&o_right, &p, &center) > 3.0 * sigma
            {
                consistent += 1;
                fp += masked as usize;
            }
        }
    }
    println!("baseline={:.4} threshold={:.4} masked_fraction={:.4}", r.baseline, r.threshold, r.mask.fraction());
    println!("footprint={foot} recall={:.4}", hit as f64 / foot as f64);
    println!("consistent={consistent} false_positive_rate={:.4}", fp as f64 / consistent as f64);
    Ok(())
}
