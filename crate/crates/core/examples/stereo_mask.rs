//! Renders a training view of the initial cloud and of a briefly trained
//! one, builds each virtual-stereo inconsistency mask and writes the depth, the warped right depth and the
//! mask as images.
//!
//! `cargo run --release --example stereo_mask [view] [out_dir]`

use std::path::PathBuf;

use monosplat::dim::{dim_pipeline_with, DimConfig};
use monosplat::raster::{write_image, DepthMap, ImageFormat, RgbImage};
use monosplat::synth::{SceneBundle, SceneSpec};
use monosplat::train::{train, TrainConfig, TrainData};

fn grey(d: &DepthMap, lo: f64, hi: f64) -> RgbImage {
    let px = d
        .cells()
        .iter()
        .map(|&v| if v.is_nan() { [1.0, 0.0, 1.0] } else { [((hi - v) / (hi - lo)).clamp(0.0, 1.0); 3] })
        .collect();
    RgbImage::new(d.width(), d.height(), px).unwrap()
}

fn main() -> monosplat::Result<()> {
    let mut args = std::env::args().skip(1);
    let view: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "stereo_mask".into()));
    std::fs::create_dir_all(&out)?;

    let spec = SceneSpec::desk();
    let b = SceneBundle::generate(&spec)?;
    let cam = &b.cameras[view];
    let opts = monosplat::render::RenderOptions { background: spec.background, ..Default::default() };
    let (data, _) = TrainData::from_bundle(&b)?;
    let (trained, _) = train(&data, b.init_cloud.clone(), &TrainConfig::with_iterations(500))?;
    for (tag, cloud) in [("init", &b.init_cloud), ("trained", &trained)] {
        let r = dim_pipeline_with(cloud, cam, &DimConfig::default(), &opts, None)?;
        let m = r.left.median().unwrap();
        let (lo, hi) = (0.5 * m, 1.5 * m);
        write_image(&grey(&r.left, lo, hi), out.join(format!("{tag}_left.ppm")), ImageFormat::Ppm)?;
        write_image(&grey(&r.reprojected, lo, hi), out.join(format!("{tag}_right_warped.ppm")), ImageFormat::Ppm)?;
        write_image(&r.mask.to_image(), out.join(format!("{tag}_mask.ppm")), ImageFormat::Ppm)?;
        println!(
            "{tag}: baseline {:.4} threshold {:.4} masked {:.1}%",
            r.baseline,
            r.threshold,
            100.0 * r.mask.fraction()
        );
    }
    println!("images in {}", out.display());
    Ok(())
}
