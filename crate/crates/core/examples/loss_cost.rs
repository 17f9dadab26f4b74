//! Times the relative depth terms on 256x256 maps.
//!
//! `cargo run --release --example loss_cost`

use std::hint::black_box;
use std::time::Instant;

use monosplat::losses::{cosine_grad_loss, gal, ncc_patch_loss, LossValue};
use monosplat::raster::DepthMap;

fn time(name: &str, f: impl Fn() -> monosplat::Result<LossValue>) -> monosplat::Result<()> {
    black_box(f()?);
    let t = Instant::now();
    for _ in 0..100 {
        black_box(f()?);
    }
    println!("{name:>8}: {:.3} ms per evaluation", t.elapsed().as_secs_f64() * 10.0);
    Ok(())
}

fn main() -> monosplat::Result<()> {
    let n = 256;
    let r = DepthMap::from_fn(n, n, |x, y| Some(2.0 + (0.03 * x as f64).sin() + (0.02 * y as f64).cos()))?;
    let p = DepthMap::from_fn(n, n, |x, y| Some(2.5 + 0.8 * (0.03 * x as f64 + 0.1).sin() + (0.021 * y as f64).cos()))?;
    time("gal", || gal(&r, &p))?;
    time("cosine", || cosine_grad_loss(&r, &p))?;
    for w in [9, 63, 127] {
        time(&format!("ncc{w}"), || ncc_patch_loss(&r, &p, w))?;
    }
    Ok(())
}
