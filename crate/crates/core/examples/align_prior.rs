//! Fits the per-view scale and shift that map a monocular prior onto the
//! sparse SfM depths, and shows how much the fit recovers.
//!
//! `cargo run --release --example align_prior [sfm_points]`

use monosplat::metrics::{abs_rel, delta1};
use monosplat::synth::{PriorCorruption, SceneBundle, SceneSpec};
use monosplat::train::TrainData;

fn main() -> monosplat::Result<()> {
    let mut spec = SceneSpec::desk();
    spec.sfm_point_count = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(256);
    // with exact priors the fit is off only where a point's pixel sees a
    // different surface than the point itself
    for (name, prior) in [("no", spec.prior), ("severe", PriorCorruption::severe(7))] {
        spec.prior = prior;
        let b = SceneBundle::generate(&spec)?;
        let (data, records) = TrainData::from_bundle(&b)?;
        println!("{name} corruption, {} sfm points", spec.sfm_point_count);
        for (r, aligned) in records.iter().zip(&data.priors) {
            match aligned {
                Some(p) => println!(
                    "  {r}  delta1 {:.3}  abs_rel {:.3}",
                    delta1(p, &data.gt_depths[r.view])?,
                    abs_rel(p, &data.gt_depths[r.view])?
                ),
                None => println!("  {r}  (prior dropped)"),
            }
        }
    }
    Ok(())
}
