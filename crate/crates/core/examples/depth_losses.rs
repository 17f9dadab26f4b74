//! Evaluates every depth supervision term on an aligned prior against the
//! exact depth, then on the same prior after a global offset and a
//! per-pixel affine stretch, to show what each term is blind to.
//!
//! `cargo run --release --example depth_losses`

use monosplat::losses::{cosine_grad_loss, gal, l1_depth, masked_l1_depth, ncc_patch_loss};
use monosplat::raster::{BinMask, DepthMap};
use monosplat::synth::{SceneBundle, SceneSpec};
use monosplat::train::TrainData;

fn report(name: &str, rendered: &DepthMap, prior: &DepthMap, mask: &BinMask) -> monosplat::Result<()> {
    println!(
        "{name:>14}  l1 {:.4}  masked_l1 {:.4}  gal {:.4}  ncc9 {:.4}  cosine {:.4}",
        l1_depth(rendered, prior)?.value,
        masked_l1_depth(rendered, prior, mask)?.value,
        gal(rendered, prior)?.value,
        ncc_patch_loss(rendered, prior, 9)?.value,
        cosine_grad_loss(rendered, prior)?.value,
    );
    Ok(())
}

fn main() -> monosplat::Result<()> {
    let b = SceneBundle::generate(&SceneSpec::desk())?;
    let (data, _) = TrainData::from_bundle(&b)?;
    let v = data.train[0];
    let gt = &data.gt_depths[v];
    let prior = data.priors[v].as_ref().expect("first training view aligns");
    // flag the left half only
    let mask = BinMask::from_fn(gt.width(), gt.height(), |x, _| x < gt.width() / 2)?;
    report("identity", gt, gt, &mask)?;
    report("aligned prior", gt, prior, &mask)?;
    report("offset +0.3", &gt.map_valid(|d| d + 0.3), gt, &mask)?;
    report("scaled x2 +1", &gt.map_valid(|d| 2.0 * d + 1.0), gt, &mask)?;
    Ok(())
}
