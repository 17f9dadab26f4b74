//! Varies the number of SfM points available for prior alignment and
//! reports held-out PSNR for dense and for masked supervision.
//!
//! `cargo run --release --example point_sweep [iterations]`

use monosplat::synth::{PriorCorruption, SceneBundle, SceneSpec};
use monosplat::train::{evaluate, train, DepthMode, TrainConfig, TrainData};

fn main() -> monosplat::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1500);
    for points in [4, 16, 64, 256] {
        let mut spec = SceneSpec::desk();
        spec.prior = PriorCorruption::severe(7);
        spec.sfm_point_count = points;
        let b = SceneBundle::generate(&spec)?;
        let (data, records) = TrainData::from_bundle(&b)?;
        let aligned = data.priors.iter().filter(|p| p.is_some()).count();
        let mut row = format!("points {points:>3}  aligned views {aligned:>2}/{}", records.len());
        for mode in [DepthMode::Sid, DepthMode::Full] {
            let mut cfg = TrainConfig::with_iterations(iterations);
            cfg.depth_mode = mode;
            cfg.alpha = 0.1;
            cfg.beta = 0.05;
            let (cloud, _) = train(&data, b.init_cloud.clone(), &cfg)?;
            row.push_str(&format!("  {mode} psnr {:.3}", evaluate(&cloud, &data, &data.test)?.mean.psnr));
        }
        println!("{row}");
    }
    Ok(())
}
