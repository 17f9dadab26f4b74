//! Trains the desk scene under a severely corrupted prior with no depth
//! term, with naive dense supervision and with masked supervision plus
//! gradient alignment, and compares held-out metrics.
//!
//! `cargo run --release --example train_modes [iterations]`

use std::time::Instant;

use monosplat::synth::{PriorCorruption, SceneBundle, SceneSpec};
use monosplat::train::{evaluate, train, DepthMode, TrainConfig, TrainData};

fn main() -> monosplat::Result<()> {
    let iterations = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(3000);
    let mut spec = SceneSpec::desk();
    spec.prior = PriorCorruption::severe(7);
    let b = SceneBundle::generate(&spec)?;
    let (data, _) = TrainData::from_bundle(&b)?;
    let init = evaluate(&b.init_cloud, &data, &data.test)?.mean;
    println!("{:>10}  {init}", "init");
    for mode in [DepthMode::None, DepthMode::Sid, DepthMode::Full] {
        let mut cfg = TrainConfig::with_iterations(iterations);
        cfg.depth_mode = mode;
        cfg.alpha = 0.1;
        cfg.beta = 0.05;
        let t = Instant::now();
        let (cloud, log) = train(&data, b.init_cloud.clone(), &cfg)?;
        let masked = log.records.iter().filter_map(|r| r.masked_fraction).collect::<Vec<_>>();
        let mean_mask = if masked.is_empty() { 0.0 } else { masked.iter().sum::<f64>() / masked.len() as f64 };
        println!(
            "{mode:>10}  {}  ({:.1}s, mean masked {:.1}%)",
            evaluate(&cloud, &data, &data.test)?.mean,
            t.elapsed().as_secs_f64(),
            100.0 * mean_mask
        );
    }
    Ok(())
}
