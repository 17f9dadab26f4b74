//! Optimization loop: color loss on every step, a selectable depth term
//! after warmup, Adam updates and held-out evaluation.

mod adam;
mod config;

pub use config::{config_pairs, DepthMode, LearningRates, MaskMean, TrainConfig};

use std::fmt;

use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use adam::Adam;

use crate::align::{apply_alignment, solve_scale_shift, sparse_depth_from_points, AlignmentSolution};
use crate::camera::Camera;
use crate::dim::dim_pipeline_with;
use crate::error::{Error, Result};
use crate::losses::{
    color_loss, cosine_grad_loss, gal, gal_masked, l1_depth, masked_l1_depth, masked_l1_depth_over_mask,
    ncc_patch_loss, LossValue,
};
use crate::metrics::{abs_rel, avg_e, delta1, psnr, ssim, EvalReport};
use crate::raster::{BinMask, DepthMap, RgbImage};
use crate::render::{render_backward, render_with, GaussianCloud, RenderOptions};
use crate::synth::SceneBundle;

/// Outcome of aligning one view's prior.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorAlignment {
    pub view: usize,
    pub solution: Option<AlignmentSolution>,
    /// Why the view has no prior, if it has none.
    pub skipped: Option<String>,
}

impl fmt::Display for PriorAlignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "align view={}", self.view)?;
        if let Some(s) = &self.solution {
            write!(f, " scale={} shift={} residual_rms={} n_used={}", s.scale, s.shift, s.residual_rms, s.n_used)?;
        }
        if let Some(why) = &self.skipped {
            write!(f, " skipped={why}")?;
        }
        Ok(())
    }
}

/// Aligns each monocular map to the SfM points it sees. With `tracks`, a
/// view only uses the points listed for it; without, every point that
/// projects into it. Views with too few hits, degenerate depth variance or
/// a non-positive scale get no prior.
pub fn align_all_priors(
    cameras: &[Camera],
    monos: &[DepthMap],
    points: &[Vector3<f64>],
    tracks: Option<&[Vec<usize>]>,
) -> Result<(Vec<Option<DepthMap>>, Vec<PriorAlignment>)> {
    if cameras.len() != monos.len() {
        return Err(Error::invalid(format!("{} cameras but {} priors", cameras.len(), monos.len())));
    }
    if let Some(t) = tracks {
        if t.len() != cameras.len() {
            return Err(Error::invalid(format!("{} cameras but {} tracks", cameras.len(), t.len())));
        }
        if let Some(&i) = t.iter().flatten().find(|&&i| i >= points.len()) {
            return Err(Error::invalid(format!("track references point {i} of {}", points.len())));
        }
    }
    let mut priors = Vec::with_capacity(monos.len());
    let mut records = Vec::with_capacity(monos.len());
    for (view, (cam, mono)) in cameras.iter().zip(monos).enumerate() {
        let sparse = match tracks {
            Some(t) => sparse_depth_from_points(&t[view].iter().map(|&i| points[i]).collect::<Vec<_>>(), cam),
            None => sparse_depth_from_points(points, cam),
        };
        let (prior, solution, skipped) = match solve_scale_shift(&sparse, mono) {
            Ok(sol) if sol.negative_scale() => (None, Some(sol), Some("non_positive_scale".to_string())),
            Ok(sol) => (Some(apply_alignment(mono, &sol)), Some(sol), None),
            Err(e) => (None, None, Some(e.kind().to_string())),
        };
        priors.push(prior);
        records.push(PriorAlignment { view, solution, skipped });
    }
    Ok((priors, records))
}

/// Inputs of a training run.
#[derive(Clone, Debug)]
pub struct TrainData {
    pub cameras: Vec<Camera>,
    pub images: Vec<RgbImage>,
    /// Aligned priors; `None` turns depth supervision off for that view.
    pub priors: Vec<Option<DepthMap>>,
    /// Reference depths used only for evaluation.
    pub gt_depths: Vec<DepthMap>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Scene size used to scale the mean learning rate.
    pub extent: f64,
    pub render: RenderOptions,
}

impl TrainData {
    /// Aligns the bundle priors with its SfM points.
    pub fn from_bundle(b: &SceneBundle) -> Result<(Self, Vec<PriorAlignment>)> {
        let (priors, records) = align_all_priors(&b.cameras, &b.priors, &b.sfm_points, Some(&b.tracks))?;
        let data = TrainData {
            cameras: b.cameras.clone(),
            images: b.images.clone(),
            priors,
            gt_depths: b.depths.clone(),
            train: b.train.clone(),
            test: b.test.clone(),
            extent: b.spec.extent(),
            render: RenderOptions { background: b.spec.background, ..RenderOptions::default() },
        };
        Ok((data, records))
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.cameras.len();
        if self.images.len() != n || self.priors.len() != n || self.gt_depths.len() != n {
            return Err(Error::invalid("cameras, images, priors and depths must have one entry per view"));
        }
        if self.train.is_empty() {
            return Err(Error::invalid("at least one training view is required"));
        }
        if let Some(&v) = self.train.iter().chain(&self.test).find(|&&v| v >= n) {
            return Err(Error::invalid(format!("view {v} out of range")));
        }
        for (i, cam) in self.cameras.iter().enumerate() {
            crate::error::check_dims(cam.dims(), self.images[i].dims())?;
            crate::error::check_dims(cam.dims(), self.gt_depths[i].dims())?;
            if let Some(p) = &self.priors[i] {
                crate::error::check_dims(cam.dims(), p.dims())?;
            }
        }
        Ok(())
    }
}

/// One logged step. `l_abs` and `l_rel` are unweighted term values.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iteration: usize,
    pub view: usize,
    pub l_color: f64,
    pub l_abs: f64,
    pub l_rel: f64,
    /// Fraction of flagged cells, when a mask was used.
    pub masked_fraction: Option<f64>,
}

impl fmt::Display for IterRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iter={} view={} l_color={} l_abs={} l_rel={}",
            self.iteration, self.view, self.l_color, self.l_abs, self.l_rel
        )?;
        match self.masked_fraction {
            Some(m) => write!(f, " masked={m}"),
            None => write!(f, " masked=na"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<IterRecord>,
    /// Mean held-out report at each evaluation point.
    pub checkpoints: Vec<(usize, EvalReport)>,
    pub notes: Vec<String>,
}

impl TrainLog {
    /// Line-oriented text: `note`, per-iteration and `eval` records.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for n in &self.notes {
            s.push_str(&format!("note {n}\n"));
        }
        let mut evals = self.checkpoints.iter().peekable();
        for r in &self.records {
            s.push_str(&format!("{r}\n"));
            while let Some((it, rep)) = evals.next_if(|(it, _)| *it <= r.iteration) {
                s.push_str(&format!("eval iter={it} {rep}\n"));
            }
        }
        for (it, rep) in evals {
            s.push_str(&format!("eval iter={it} {rep}\n"));
        }
        s
    }
}

/// The depth term of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthTerm {
    pub l_abs: f64,
    pub l_rel: f64,
    /// Weighted sum and its gradient with respect to the rendered depth.
    pub loss: LossValue,
}

fn empty_support_as_zero(r: Result<LossValue>, len: usize) -> Result<LossValue> {
    match r {
        Err(Error::NoOverlap | Error::NoValidPatch) => Ok(LossValue::zero(len)),
        other => other,
    }
}

/// Depth loss of `mode` on one view. `mask` is required by the masked
/// modes and ignored otherwise.
pub fn depth_term(
    mode: DepthMode,
    cfg: &TrainConfig,
    rendered: &DepthMap,
    prior: &DepthMap,
    mask: Option<&BinMask>,
) -> Result<Option<DepthTerm>> {
    let n = rendered.len();
    let need_mask = || mask.ok_or_else(|| Error::invalid(format!("depth mode {mode} needs a mask")));
    let abs_masked = |m: &BinMask| match cfg.mask_mean {
        MaskMean::Image => masked_l1_depth(rendered, prior, m),
        MaskMean::Mask => masked_l1_depth_over_mask(rendered, prior, m),
    };
    let rel = |m: &BinMask| -> Result<LossValue> {
        empty_support_as_zero(
            match mode {
                DepthMode::Ncc => ncc_patch_loss(rendered, prior, cfg.ncc_window),
                DepthMode::Cosine => cosine_grad_loss(rendered, prior),
                _ if cfg.gal_masked => gal_masked(rendered, prior, m),
                _ => gal(rendered, prior),
            },
            n,
        )
    };
    let (abs, relv) = match mode {
        DepthMode::None => return Ok(None),
        DepthMode::Sid => (empty_support_as_zero(l1_depth(rendered, prior), n)?, None),
        DepthMode::SidMasked => (abs_masked(need_mask()?)?, None),
        DepthMode::GalOnly => (LossValue::zero(n), Some(empty_support_as_zero(gal(rendered, prior), n)?)),
        DepthMode::Full | DepthMode::Ncc | DepthMode::Cosine => {
            let m = need_mask()?;
            (abs_masked(m)?, Some(rel(m)?))
        }
    };
    let mut loss = LossValue::zero(n);
    if mode != DepthMode::GalOnly {
        loss.add_scaled(cfg.alpha, &abs);
    }
    if let Some(r) = &relv {
        loss.add_scaled(cfg.beta, r);
    }
    Ok(Some(DepthTerm { l_abs: abs.value, l_rel: relv.map_or(0.0, |r| r.value), loss }))
}

/// Renders `view`, accumulates the loss gradient into `cloud` (after
/// zeroing it) and returns the record. `mask_override` replaces the
/// computed inconsistency mask.
pub fn compute_gradients(
    cloud: &mut GaussianCloud,
    data: &TrainData,
    cfg: &TrainConfig,
    view: usize,
    iteration: usize,
    mask_override: Option<&BinMask>,
) -> Result<IterRecord> {
    let cam = &data.cameras[view];
    let out = render_with(cloud, cam, &data.render);
    let color = color_loss(&out.color, &data.images[view], cfg.lambda)?;

    let mut record =
        IterRecord { iteration, view, l_color: color.value, l_abs: 0.0, l_rel: 0.0, masked_fraction: None };
    let mut depth_grad = None;
    let prior = data.priors[view].as_ref();
    if let (true, Some(prior)) = (iteration > cfg.warmup_iterations, prior) {
        let computed;
        let mask = match (cfg.depth_mode.uses_mask(), mask_override) {
            (false, _) => None,
            (true, Some(m)) => Some(m),
            (true, None) => {
                computed = dim_pipeline_with(cloud, cam, &cfg.dim, &data.render, Some(&out.depth))?.mask;
                Some(&computed)
            }
        };
        record.masked_fraction = mask.map(BinMask::fraction);
        if let Some(term) = depth_term(cfg.depth_mode, cfg, &out.depth, prior, mask)? {
            record.l_abs = term.l_abs;
            record.l_rel = term.l_rel;
            if term.loss.grad.iter().any(|&g| g != 0.0) {
                depth_grad = Some(term.loss.grad);
            }
        }
    }
    let total = record.l_color + cfg.alpha * record.l_abs + cfg.beta * record.l_rel;
    if !total.is_finite() {
        return Err(Error::Diverged { iteration, what: "loss".into() });
    }
    cloud.zero_grad();
    render_backward(&out, &color.grad, depth_grad.as_deref(), cloud, cam)?;
    if cloud.grads().iter().flatten().any(|g| !g.is_finite()) {
        return Err(Error::Diverged { iteration, what: "gradient".into() });
    }
    Ok(record)
}

/// Stateful training loop; [`train`] runs it to completion.
pub struct Trainer<'a> {
    data: &'a TrainData,
    cfg: TrainConfig,
    cloud: GaussianCloud,
    adam: Adam,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    iteration: usize,
    log: TrainLog,
    masks: Vec<Option<(usize, BinMask)>>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: &'a TrainData, cloud: GaussianCloud, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        data.validate()?;
        let mut log = TrainLog::default();
        if cfg.dim.stride > 1 && cfg.depth_mode.uses_mask() {
            log.notes.push(format!("mask_stride={}", cfg.dim.stride));
        }
        for (v, p) in data.priors.iter().enumerate() {
            if p.is_none() && data.train.contains(&v) && cfg.depth_mode != DepthMode::None {
                log.notes.push(format!("no_prior view={v}"));
            }
        }
        Ok(Self {
            adam: Adam::new(cloud.len(), &cfg.lr, data.extent),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            order: Vec::new(),
            cursor: 0,
            iteration: 0,
            masks: vec![None; data.cameras.len()],
            data,
            cfg,
            cloud,
            log,
        })
    }

    pub fn cloud(&self) -> &GaussianCloud {
        &self.cloud
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    /// Iterations completed so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    fn next_view(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.order = self.data.train.clone();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    /// Mask for `view`, reused for up to `stride` iterations.
    fn mask_for(&mut self, view: usize, it: usize) -> Result<Option<BinMask>> {
        let active = it > self.cfg.warmup_iterations && self.data.priors[view].is_some();
        if !(self.cfg.depth_mode.uses_mask() && active && self.cfg.dim.stride > 1) {
            return Ok(None);
        }
        if let Some((at, m)) = &self.masks[view] {
            if it - at < self.cfg.dim.stride {
                return Ok(Some(m.clone()));
            }
        }
        let m = crate::dim::dim_pipeline_with(
            &self.cloud,
            &self.data.cameras[view],
            &self.cfg.dim,
            &self.data.render,
            None,
        )?
        .mask;
        self.masks[view] = Some((it, m.clone()));
        Ok(Some(m))
    }

    /// One iteration. On error the cloud is left as it was before the step.
    pub fn step(&mut self) -> Result<&IterRecord> {
        let it = self.iteration + 1;
        let view = self.next_view();
        let cached = self.mask_for(view, it)?;
        let record = compute_gradients(&mut self.cloud, self.data, &self.cfg, view, it, cached.as_ref())?;
        let before = self.cloud.clone();
        self.adam.step(&mut self.cloud);
        if self.cloud.gaussians().iter().any(|g| g.to_params().iter().any(|v| !v.is_finite())) {
            self.cloud = before;
            return Err(Error::Diverged { iteration: it, what: "parameters".into() });
        }
        self.iteration = it;
        self.log.records.push(record);
        if self.cfg.eval_every > 0 && it.is_multiple_of(self.cfg.eval_every) {
            self.checkpoint()?;
        }
        Ok(self.log.records.last().unwrap())
    }

    fn checkpoint(&mut self) -> Result<()> {
        if self.data.test.is_empty() {
            return Ok(());
        }
        let ev = evaluate(&self.cloud, self.data, &self.data.test)?;
        self.log.checkpoints.push((self.iteration, ev.mean));
        Ok(())
    }

    /// Runs the remaining iterations, then evaluates once more unless the
    /// last iteration already did.
    pub fn run(mut self) -> Result<(GaussianCloud, TrainLog)> {
        while self.iteration < self.cfg.iterations {
            self.step()?;
        }
        if self.log.checkpoints.last().is_none_or(|(it, _)| *it != self.iteration) {
            self.checkpoint()?;
        }
        Ok((self.cloud, self.log))
    }
}

pub fn train(data: &TrainData, cloud: GaussianCloud, cfg: &TrainConfig) -> Result<(GaussianCloud, TrainLog)> {
    Trainer::new(data, cloud, cfg.clone())?.run()
}

/// Held-out metrics per view and their mean.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub per_view: Vec<(usize, EvalReport)>,
    pub mean: EvalReport,
}

/// Renders each listed view and scores it against the reference image and
/// depth. Renders are clamped to `[0, 1]`; depth metrics are NaN when the
/// render has no depth overlap with the reference.
pub fn evaluate(cloud: &GaussianCloud, data: &TrainData, views: &[usize]) -> Result<Evaluation> {
    if views.is_empty() {
        return Err(Error::invalid("evaluation needs at least one view"));
    }
    let mut per_view = Vec::with_capacity(views.len());
    for &v in views {
        let cam = data.cameras.get(v).ok_or_else(|| Error::invalid(format!("view {v} out of range")))?;
        let out = render_with(cloud, cam, &data.render);
        let img = out.color.clamped();
        let p = psnr(&img, &data.images[v])?;
        let s = ssim(&img, &data.images[v])?;
        let or_nan = |r: Result<f64>| match r {
            Err(Error::NoOverlap) => Ok(f64::NAN),
            other => other,
        };
        per_view.push((
            v,
            EvalReport {
                psnr: p,
                ssim: s,
                abs_rel: or_nan(abs_rel(&out.depth, &data.gt_depths[v]))?,
                delta1: or_nan(delta1(&out.depth, &data.gt_depths[v]))?,
                avg_e: Some(avg_e(p, s, None)?),
            },
        ));
    }
    let reports: Vec<EvalReport> = per_view.iter().map(|(_, r)| r.clone()).collect();
    let mean = EvalReport::mean(&reports).expect("non-empty");
    Ok(Evaluation { per_view, mean })
}
