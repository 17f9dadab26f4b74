//! The `monosplat` command line.
//!
//! Every subcommand that writes files takes `--out`, refuses a non-empty
//! output directory unless `--force` is given, and writes `manifest.txt`
//! first. Failures print one `error kind=... message=...` line to stderr.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::camera::{read_cameras, Camera};
use crate::dim::{dim_pipeline_with, DimConfig, Magnitude};
use crate::error::Error;
use crate::losses::{
    cosine_grad_loss, gal, gal_masked, l1_depth, masked_l1_depth, masked_l1_depth_over_mask, ncc_patch_loss,
};
use crate::raster::{read_depth, read_mask, write_depth, write_image, write_mask, ImageFormat};
use crate::render::{read_cloud, render_with, write_cloud, GaussianCloud, RenderOptions};
use crate::synth::{read_bundle, write_bundle, SceneBundle, SceneSpec};
use crate::train::{config_pairs, evaluate, TrainConfig, TrainData, Trainer};

const EXIT_FAILURE: i32 = 1;
const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "monosplat", version, about = "Gaussian splatting with selective monocular depth supervision")]
struct Cli {
    /// Seed for every random draw of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,
    /// Scene spec for `synth`, run config for `train`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic scene bundle.
    Synth,
    /// Align a bundle's monocular priors to its SfM points.
    Align {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Build the depth-inconsistency mask of one view.
    Mask {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        #[arg(long)]
        camera: usize,
        #[arg(long, default_value = "rel:0.05")]
        baseline: Magnitude,
        #[arg(long, default_value = "rel:0.02")]
        threshold: Magnitude,
    },
    /// Train a cloud from a bundle.
    Train,
    /// Score a checkpoint on a bundle's views.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        /// `test`, `train`, `all` or a comma-separated list of view ids.
        #[arg(long, default_value = "test")]
        views: String,
    },
    /// Render a checkpoint from every camera in a file.
    Render {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cameras: PathBuf,
        /// Background color as `r,g,b`.
        #[arg(long, default_value = "0,0,0")]
        background: String,
    },
    /// Evaluate one depth loss on two depth files.
    Lossprobe {
        loss: LossName,
        rendered: PathBuf,
        prior: PathBuf,
        /// Mask file for the masked losses.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Patch side for `ncc`.
        #[arg(long, default_value_t = 9)]
        window: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum LossName {
    L1,
    MaskedL1,
    MaskedL1OverMask,
    Gal,
    GalMasked,
    Ncc,
    Cosine,
}

/// A failure reported as one machine-readable line.
#[derive(Debug)]
pub struct CliError {
    pub kind: String,
    pub message: String,
}

impl CliError {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        Self { kind: kind.into(), message: message.into() }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::new(e.kind(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        write!(f, "error kind={} message={msg}", self.kind)
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

/// Provenance record written at the top of every output directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the effective configuration text.
    pub config_sha256: String,
    /// Input files with their SHA-256 digests.
    pub inputs: Vec<(PathBuf, String)>,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: &str, inputs: &[PathBuf], seed: u64) -> std::io::Result<Self> {
        let mut digests = Vec::new();
        for p in inputs {
            digests.push((p.clone(), sha256_hex(&fs::read(p)?)));
        }
        Ok(Self {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: sha256_hex(config.as_bytes()),
            inputs: digests,
            seed,
            started_unix: unix_now(),
            finished_unix: None,
        })
    }

    /// `key=value` lines, one `input` line per file.
    pub fn format(&self) -> String {
        let mut s = format!(
            "tool=monosplat\nversion={}\ncommand={}\nconfig_sha256={}\nseed={}\nstarted_unix={}\n",
            self.tool_version, self.command, self.config_sha256, self.seed, self.started_unix
        );
        for (p, d) in &self.inputs {
            s.push_str(&format!("input sha256={d} path={}\n", p.display()));
        }
        if let Some(t) = self.finished_unix {
            s.push_str(&format!("finished_unix={t}\n"));
        }
        s
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Regular files directly under `dir`, sorted by name.
fn dir_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let entry = entry?;
        if entry.file_type()?.is_file() {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// An output directory that holds a manifest.
struct Output {
    root: PathBuf,
    manifest: RunManifest,
}

impl Output {
    fn create(root: &Path, force: bool, manifest: RunManifest) -> CliResult<Self> {
        if root.exists() && fs::read_dir(root)?.next().is_some() && !force {
            return Err(CliError::new(
                "exists",
                format!("output directory {} is not empty; pass --force to overwrite", root.display()),
            ));
        }
        fs::create_dir_all(root)?;
        fs::write(root.join("manifest.txt"), manifest.format())?;
        Ok(Self { root: root.to_path_buf(), manifest })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn finish(mut self) -> CliResult {
        self.manifest.finished_unix = Some(unix_now());
        fs::write(self.path("manifest.txt"), self.manifest.format())?;
        Ok(())
    }
}

/// Parses `args` (program name first) and runs the subcommand, printing to
/// the process streams. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with(args, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Like [`run`] with explicit output streams.
pub fn run_with<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", CliError::usage(first));
            return EXIT_USAGE;
        }
    };
    match dispatch(&cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            if e.kind == "usage" {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

fn dispatch(cli: &Cli, stdout: &mut (dyn Write + Send)) -> CliResult {
    let Some(n) = cli.threads else { return execute(cli, stdout) };
    if n == 0 {
        return Err(CliError::usage("--threads must be at least 1"));
    }
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| CliError::new("threads", e.to_string()))?;
    pool.install(|| execute(cli, stdout))
}

fn execute(cli: &Cli, stdout: &mut (dyn Write + Send)) -> CliResult {
    match &cli.command {
        Command::Synth => cmd_synth(cli, stdout),
        Command::Align { scene } => cmd_align(cli, scene, stdout),
        Command::Mask { checkpoint, cameras, camera, baseline, threshold } => {
            let dim = DimConfig { baseline: *baseline, threshold: *threshold, stride: 1 };
            cmd_mask(cli, checkpoint, cameras, *camera, &dim, stdout)
        }
        Command::Train => cmd_train(cli, stdout),
        Command::Eval { checkpoint, scene, views } => cmd_eval(cli, checkpoint, scene, views, stdout),
        Command::Render { checkpoint, cameras, background } => cmd_render(cli, checkpoint, cameras, background, stdout),
        Command::Lossprobe { loss, rendered, prior, mask, window } => {
            cmd_lossprobe(*loss, rendered, prior, mask.as_deref(), *window, stdout)
        }
    }
}

fn require_out(cli: &Cli) -> CliResult<&Path> {
    cli.out.as_deref().ok_or_else(|| CliError::usage("--out is required"))
}

fn require_config(cli: &Cli) -> CliResult<&Path> {
    cli.config.as_deref().ok_or_else(|| CliError::usage("--config is required"))
}

fn cmd_synth(cli: &Cli, stdout: &mut (dyn Write + Send)) -> CliResult {
    let out = require_out(cli)?;
    let mut inputs = Vec::new();
    let mut spec = match &cli.config {
        Some(p) => {
            inputs.push(p.clone());
            SceneSpec::read(p)?
        }
        None => SceneSpec::desk(),
    };
    if let Some(s) = cli.seed {
        spec.seed = s;
        spec.ring.seed = s ^ 0x52494e47;
        spec.prior.seed = s ^ 0x5052494f;
    }
    spec.validate()?;
    let text = spec.format();
    let output = Output::create(out, cli.force, RunManifest::new("synth", &text, &inputs, spec.seed)?)?;
    let bundle = SceneBundle::generate(&spec)?;
    write_bundle(&bundle, out)?;
    writeln!(
        stdout,
        "synth views={} train={} test={} sfm_points={} init_gaussians={}",
        bundle.len(),
        bundle.train.len(),
        bundle.test.len(),
        bundle.sfm_points.len(),
        bundle.init_cloud.len()
    )?;
    output.finish()
}

fn cmd_align(cli: &Cli, scene: &Path, stdout: &mut (dyn Write + Send)) -> CliResult {
    let out = require_out(cli)?;
    let bundle = read_bundle(scene)?;
    let output =
        Output::create(out, cli.force, RunManifest::new("align", "", &dir_files(scene)?, cli.seed.unwrap_or(0))?)?;
    let (data, records) = TrainData::from_bundle(&bundle)?;
    let mut text = String::new();
    for (r, prior) in records.iter().zip(&data.priors) {
        text.push_str(&format!("{r}\n"));
        if let Some(p) = prior {
            write_depth(p, output.path(&format!("view_{:03}_aligned.dmap", r.view)))?;
        }
    }
    fs::write(output.path("alignment.txt"), &text)?;
    stdout.write_all(text.as_bytes())?;
    output.finish()
}

fn camera_at(cameras: &[Camera], id: usize) -> CliResult<&Camera> {
    cameras
        .get(id)
        .ok_or_else(|| CliError::new("invalid_input", format!("camera {id} out of range ({} cameras)", cameras.len())))
}

fn cmd_mask(
    cli: &Cli,
    checkpoint: &Path,
    cameras: &Path,
    id: usize,
    dim: &DimConfig,
    stdout: &mut (dyn Write + Send),
) -> CliResult {
    let out = require_out(cli)?;
    let cloud = read_cloud(checkpoint)?;
    let cams = read_cameras(cameras)?;
    let cam = camera_at(&cams, id)?;
    dim.validate()?;
    let config = format!("camera={id}\nbaseline={}\nthreshold={}\n", dim.baseline, dim.threshold);
    let inputs = [checkpoint.to_path_buf(), cameras.to_path_buf()];
    let output = Output::create(out, cli.force, RunManifest::new("mask", &config, &inputs, cli.seed.unwrap_or(0))?)?;
    let r = dim_pipeline_with(&cloud, cam, dim, &RenderOptions::default(), None)?;
    write_mask(&r.mask, output.path("mask.msk"))?;
    write_image(&r.mask.to_image(), output.path("mask.ppm"), ImageFormat::Ppm)?;
    let line = format!(
        "mask camera={id} baseline={} threshold={} masked_fraction={}\n",
        r.baseline,
        r.threshold,
        r.mask.fraction()
    );
    fs::write(output.path("mask.txt"), &line)?;
    stdout.write_all(line.as_bytes())?;
    output.finish()
}

/// Splits a run config into the bundle directory, resolved against
/// `base`, and the trainer settings.
pub fn parse_run_config(text: &str, base: &Path) -> crate::Result<(PathBuf, TrainConfig)> {
    let mut scene = None;
    let mut rest = Vec::new();
    for (k, v) in config_pairs(text)? {
        if k == "scene" {
            scene = Some(base.join(v));
        } else {
            rest.push((k, v));
        }
    }
    let scene = scene.ok_or_else(|| Error::Config("missing key `scene`".into()))?;
    Ok((scene, TrainConfig::from_pairs(rest)?))
}

fn write_renders(cloud: &GaussianCloud, data: &TrainData, views: &[usize], dir: &Path, tag: &str) -> CliResult {
    fs::create_dir_all(dir)?;
    for &v in views {
        let img = render_with(cloud, &data.cameras[v], &data.render).color.clamped();
        write_image(&img, dir.join(format!("{tag}_view_{v:03}.ppm")), ImageFormat::Ppm)?;
    }
    Ok(())
}

fn cmd_train(cli: &Cli, stdout: &mut (dyn Write + Send)) -> CliResult {
    let out = require_out(cli)?;
    let config_path = require_config(cli)?;
    let text = fs::read_to_string(config_path)?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    let (scene, mut cfg) = parse_run_config(&text, base)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let bundle = read_bundle(&scene)?;
    let resolved = format!("scene={}\n{}", scene.display(), cfg.format());
    let mut inputs = vec![config_path.to_path_buf()];
    inputs.extend(dir_files(&scene)?);
    let output = Output::create(out, cli.force, RunManifest::new("train", &resolved, &inputs, cfg.seed)?)?;
    fs::write(output.path("config.txt"), &resolved)?;

    let (data, records) = TrainData::from_bundle(&bundle)?;
    fs::write(output.path("alignment.txt"), records.iter().map(|r| format!("{r}\n")).collect::<String>())?;
    let renders = output.path("renders");
    let mut trainer = Trainer::new(&data, bundle.init_cloud.clone(), cfg.clone())?;
    while trainer.iteration() < cfg.iterations {
        if let Err(e) = trainer.step() {
            write_cloud(trainer.cloud(), output.path("diverged.gcl"))?;
            fs::write(output.path("log.txt"), trainer.log().to_text())?;
            return Err(e.into());
        }
        let it = trainer.iteration();
        if cfg.eval_every > 0 && it % cfg.eval_every == 0 {
            write_renders(trainer.cloud(), &data, &data.test, &renders, &format!("iter_{it:06}"))?;
        }
    }
    let (cloud, log) = trainer.run()?;
    write_cloud(&cloud, output.path("checkpoint.gcl"))?;
    fs::write(output.path("log.txt"), log.to_text())?;
    write_renders(&cloud, &data, &data.test, &renders, "final")?;
    match log.checkpoints.last() {
        Some((it, report)) => writeln!(stdout, "train iter={it} {report}")?,
        None => writeln!(stdout, "train iter={}", cfg.iterations)?,
    }
    output.finish()
}

/// Bundle contents needed to score renders; no priors.
fn eval_data(b: &SceneBundle) -> TrainData {
    TrainData {
        cameras: b.cameras.clone(),
        images: b.images.clone(),
        priors: vec![None; b.len()],
        gt_depths: b.depths.clone(),
        train: b.train.clone(),
        test: b.test.clone(),
        extent: b.spec.extent(),
        render: RenderOptions { background: b.spec.background, ..RenderOptions::default() },
    }
}

fn select_views(spec: &str, b: &SceneBundle) -> CliResult<Vec<usize>> {
    Ok(match spec {
        "test" => b.test.clone(),
        "train" => b.train.clone(),
        "all" => (0..b.len()).collect(),
        list => list
            .split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::usage(format!("bad view id `{t}`"))))
            .collect::<CliResult<_>>()?,
    })
}

fn cmd_eval(cli: &Cli, checkpoint: &Path, scene: &Path, views: &str, stdout: &mut (dyn Write + Send)) -> CliResult {
    let cloud = read_cloud(checkpoint)?;
    let bundle = read_bundle(scene)?;
    let ids = select_views(views, &bundle)?;
    let output = match &cli.out {
        Some(out) => {
            let mut inputs = vec![checkpoint.to_path_buf()];
            inputs.extend(dir_files(scene)?);
            let m = RunManifest::new("eval", &format!("views={views}\n"), &inputs, cli.seed.unwrap_or(0))?;
            Some(Output::create(out, cli.force, m)?)
        }
        None => None,
    };
    let ev = evaluate(&cloud, &eval_data(&bundle), &ids)?;
    let mut text: String = ev.per_view.iter().map(|(v, r)| format!("view={v} {r}\n")).collect();
    text.push_str(&format!("aggregate views={} {}\n", ids.len(), ev.mean));
    stdout.write_all(text.as_bytes())?;
    if let Some(o) = output {
        fs::write(o.path("eval.txt"), &text)?;
        o.finish()?;
    }
    Ok(())
}

fn parse_rgb(s: &str) -> CliResult<[f64; 3]> {
    let parts = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| CliError::usage(format!("bad color `{s}`")))?;
    <[f64; 3]>::try_from(parts).map_err(|_| CliError::usage(format!("color needs three components, got `{s}`")))
}

fn cmd_render(
    cli: &Cli,
    checkpoint: &Path,
    cameras: &Path,
    background: &str,
    stdout: &mut (dyn Write + Send),
) -> CliResult {
    let out = require_out(cli)?;
    let opts = RenderOptions { background: parse_rgb(background)?, ..RenderOptions::default() };
    let cloud = read_cloud(checkpoint)?;
    let cams = read_cameras(cameras)?;
    let inputs = [checkpoint.to_path_buf(), cameras.to_path_buf()];
    let config = format!("background={background}\n");
    let output = Output::create(out, cli.force, RunManifest::new("render", &config, &inputs, cli.seed.unwrap_or(0))?)?;
    for (i, cam) in cams.iter().enumerate() {
        let r = render_with(&cloud, cam, &opts);
        write_image(&r.color, output.path(&format!("view_{i:03}.imgf")), ImageFormat::Raw)?;
        write_image(&r.color.clamped(), output.path(&format!("view_{i:03}.ppm")), ImageFormat::Ppm)?;
        write_depth(&r.depth, output.path(&format!("view_{i:03}_depth.dmap")))?;
    }
    writeln!(stdout, "render views={}", cams.len())?;
    output.finish()
}

/// `v` with twelve significant digits in fixed notation.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return format!("{:.12}", 0.0);
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let decimals = (11 - v.abs().log10().floor() as i32).max(0) as usize;
    format!("{v:.decimals$}")
}

fn cmd_lossprobe(
    loss: LossName,
    rendered: &Path,
    prior: &Path,
    mask: Option<&Path>,
    window: usize,
    stdout: &mut (dyn Write + Send),
) -> CliResult {
    let a = read_depth(rendered)?;
    let b = read_depth(prior)?;
    let need_mask = || -> CliResult<_> {
        let p = mask.ok_or_else(|| CliError::usage("this loss needs --mask"))?;
        Ok(read_mask(p)?)
    };
    let value = match loss {
        LossName::L1 => l1_depth(&a, &b)?,
        LossName::MaskedL1 => masked_l1_depth(&a, &b, &need_mask()?)?,
        LossName::MaskedL1OverMask => masked_l1_depth_over_mask(&a, &b, &need_mask()?)?,
        LossName::Gal => gal(&a, &b)?,
        LossName::GalMasked => gal_masked(&a, &b, &need_mask()?)?,
        LossName::Ncc => ncc_patch_loss(&a, &b, window)?,
        LossName::Cosine => cosine_grad_loss(&a, &b)?,
    }
    .value;
    writeln!(stdout, "{}", format_sig12(value))?;
    Ok(())
}
