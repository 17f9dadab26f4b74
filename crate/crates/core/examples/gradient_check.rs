//! Checks the renderer's analytic parameter gradients against a five-point
//! finite difference for one random cloud.
//!
//! `cargo run --release --example gradient_check [seed]`

use monosplat::camera::Camera;
use monosplat::render::{render_backward, render_with, Gaussian, GaussianCloud, RenderOptions, PARAMS_PER_GAUSSIAN};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NAMES: [&str; PARAMS_PER_GAUSSIAN] =
    ["mx", "my", "mz", "qw", "qx", "qy", "qz", "sx", "sy", "sz", "opacity", "r", "g", "b"];

fn main() -> monosplat::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cam =
        Camera::look_at(Vector3::new(0.2, -0.1, -3.0), Vector3::zeros(), Vector3::y(), 30.0, 32.0, 7.5, 6.0, 16, 13)?;
    let mut cloud = GaussianCloud::new(
        (0..3)
            .map(|_| Gaussian {
                mean: Vector3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.3..0.3), rng.gen_range(-0.4..0.4)),
                rotation: [1.0, rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)],
                log_scale: Vector3::new(-1.6, -2.0, -1.8),
                opacity_logit: rng.gen_range(-1.0..1.0),
                color: [rng.gen(), rng.gen(), rng.gen()],
            })
            .collect(),
    );
    let opts = RenderOptions { hole_alpha: 0.0, ..RenderOptions::exact() };
    let n = cam.width * cam.height;
    let gc: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let gd: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let objective = |c: &GaussianCloud| {
        let out = render_with(c, &cam, &opts);
        let color: f64 = out.color.pixels().iter().flatten().zip(&gc).map(|(a, b)| a * b).sum();
        color + out.depth.cells().iter().zip(&gd).map(|(d, g)| d * g).sum::<f64>()
    };
    let out = render_with(&cloud, &cam, &opts);
    render_backward(&out, &gc, Some(&gd), &mut cloud, &cam)?;
    let h = 1e-4;
    let mut worst = 0.0f64;
    for i in 0..cloud.len() {
        let base = cloud.gaussians()[i].to_params();
        let at = |k: usize, d: f64| {
            let mut p = base;
            p[k] += d;
            let mut c = cloud.clone();
            c.gaussians_mut()[i] = Gaussian::from_params(&p);
            objective(&c)
        };
        for (k, name) in NAMES.iter().enumerate() {
            let numeric = (8.0 * (at(k, h) - at(k, -h)) - (at(k, 2.0 * h) - at(k, -2.0 * h))) / (12.0 * h);
            let analytic = cloud.grads()[i][k];
            let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(err);
            println!("gaussian {i} {name:>7}: analytic {analytic:+.6e} numeric {numeric:+.6e} rel {err:.1e}");
        }
    }
    println!("worst relative error {worst:.2e}");
    Ok(())
}
