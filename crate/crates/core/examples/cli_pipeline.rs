//! Drives the command-line tool end to end in a scratch directory:
//! synthesize, align, train, evaluate, render and build a mask.
//!
//! `cargo run --release --example cli_pipeline [work_dir]`

use std::fs;
use std::path::PathBuf;

fn step(args: &[&str]) {
    println!("$ monosplat {}", args.join(" "));
    let code = monosplat::cli::run(std::iter::once("monosplat").chain(args.iter().copied()));
    assert_eq!(code, 0, "command failed");
}

fn main() -> std::io::Result<()> {
    let work = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "cli_pipeline".into()));
    fs::create_dir_all(&work)?;
    let p = |name: &str| work.join(name).to_string_lossy().into_owned();
    fs::write(
        work.join("run.txt"),
        "scene=scene\niterations=600\ndepth_mode=full\nalpha=0.1\nbeta=0.05\neval_every=200\n",
    )?;

    step(&["--force", "synth", "--out", &p("scene")]);
    step(&["--force", "align", "--scene", &p("scene"), "--out", &p("aligned")]);
    step(&["--force", "train", "--config", &p("run.txt"), "--out", &p("run")]);
    step(&["eval", "--checkpoint", &p("run/checkpoint.gcl"), "--scene", &p("scene"), "--views", "all"]);
    step(&[
        "--force",
        "render",
        "--checkpoint",
        &p("run/checkpoint.gcl"),
        "--cameras",
        &p("scene/cameras.txt"),
        "--out",
        &p("render"),
    ]);
    step(&[
        "--force",
        "mask",
        "--checkpoint",
        &p("run/checkpoint.gcl"),
        "--cameras",
        &p("scene/cameras.txt"),
        "--camera",
        "1",
        "--out",
        &p("mask"),
    ]);
    step(&["lossprobe", "gal", &p("render/view_001_depth.dmap"), &p("aligned/view_001_aligned.dmap")]);
    Ok(())
}
