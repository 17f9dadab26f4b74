//! Generates the desk scene and writes the bundle a training run reads.
//! With `severe` the monocular priors are distorted, otherwise they equal
//! the exact depth.
//!
//! `cargo run --release --example synth_scene [out_dir] [severe]`

use monosplat::metrics::{abs_rel, delta1};
use monosplat::synth::{write_bundle, PriorCorruption, SceneBundle, SceneSpec};

fn main() -> monosplat::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "desk_scene".into());
    let mut spec = SceneSpec::desk();
    if args.next().as_deref() == Some("severe") {
        spec.prior = PriorCorruption::severe(7);
    }
    let b = SceneBundle::generate(&spec)?;
    write_bundle(&b, &out)?;
    println!("wrote {} views to {out} (train {:?}, test {:?})", b.len(), b.train, b.test);
    println!("sfm points {}, initial gaussians {}", b.sfm_points.len(), b.init_cloud.len());
    for (i, (prior, gt)) in b.priors.iter().zip(&b.depths).enumerate().take(4) {
        println!(
            "view {i}: median depth {:.3}, raw prior delta1 {:.3} abs_rel {:.3}",
            gt.median().unwrap(),
            delta1(prior, gt)?,
            abs_rel(prior, gt)?
        );
    }
    Ok(())
}
