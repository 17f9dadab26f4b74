use std::fmt;
use std::str::FromStr;

use crate::dim::DimConfig;
use crate::error::{Error, Result};

/// Which depth term joins the color loss once warmup is over.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DepthMode {
    /// Color only.
    None,
    /// `α` L1 to the aligned prior on every cell.
    Sid,
    /// `α` L1 on the inconsistency mask only.
    SidMasked,
    /// Masked L1 plus `β` gradient alignment.
    Full,
    /// `β` gradient alignment alone.
    GalOnly,
    /// Masked L1 plus `β` patch correlation in place of gradient alignment.
    Ncc,
    /// Masked L1 plus `β` gradient cosine in place of gradient alignment.
    Cosine,
}

impl DepthMode {
    pub const ALL: [DepthMode; 7] = [
        DepthMode::None,
        DepthMode::Sid,
        DepthMode::SidMasked,
        DepthMode::Full,
        DepthMode::GalOnly,
        DepthMode::Ncc,
        DepthMode::Cosine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DepthMode::None => "none",
            DepthMode::Sid => "sid",
            DepthMode::SidMasked => "sid_masked",
            DepthMode::Full => "full",
            DepthMode::GalOnly => "gal_only",
            DepthMode::Ncc => "ncc",
            DepthMode::Cosine => "cosine",
        }
    }

    /// Whether the mode needs the inconsistency mask.
    pub fn uses_mask(self) -> bool {
        matches!(self, DepthMode::SidMasked | DepthMode::Full | DepthMode::Ncc | DepthMode::Cosine)
    }
}

impl fmt::Display for DepthMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for DepthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DepthMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown depth mode `{s}`")))
    }
}

/// Divisor of the masked absolute depth term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MaskMean {
    /// Every cell valid in both maps; unmasked cells contribute zero error.
    Image,
    /// Only the masked valid cells.
    Mask,
}

impl fmt::Display for MaskMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskMean::Image => "image",
            MaskMean::Mask => "mask",
        })
    }
}

impl FromStr for MaskMean {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "image" => Ok(MaskMean::Image),
            "mask" => Ok(MaskMean::Mask),
            _ => Err(Error::Config(format!("unknown mask mean `{s}`"))),
        }
    }
}

/// Per-group Adam step sizes. `means` is multiplied by the scene extent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearningRates {
    pub means: f64,
    pub rotations: f64,
    pub scales: f64,
    pub opacities: f64,
    pub colors: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { means: 1.6e-4, rotations: 1e-3, scales: 5e-3, opacities: 5e-2, colors: 2.5e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub iterations: usize,
    /// Depth terms are active for iterations strictly after this one.
    pub warmup_iterations: usize,
    pub lr: LearningRates,
    /// SSIM weight in the color loss.
    pub lambda: f64,
    /// Weight of the absolute depth term.
    pub alpha: f64,
    /// Weight of the relative depth term.
    pub beta: f64,
    pub dim: DimConfig,
    pub depth_mode: DepthMode,
    pub mask_mean: MaskMean,
    /// Restrict gradient alignment to the mask as well.
    pub gal_masked: bool,
    pub ncc_window: usize,
    /// Held-out evaluation period in iterations; 0 evaluates only at the end.
    pub eval_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::with_iterations(3000)
    }
}

impl TrainConfig {
    /// Defaults with warmup at a tenth of the run.
    pub fn with_iterations(iterations: usize) -> Self {
        Self {
            iterations,
            warmup_iterations: iterations / 10,
            lr: LearningRates::default(),
            lambda: 0.2,
            alpha: 1.0,
            beta: 0.5,
            dim: DimConfig::default(),
            depth_mode: DepthMode::None,
            mask_mean: MaskMean::Image,
            gal_masked: false,
            ncc_window: 9,
            eval_every: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations > 0 && self.warmup_iterations >= self.iterations {
            return Err(Error::Config(format!(
                "warmup ({}) must be below iterations ({})",
                self.warmup_iterations, self.iterations
            )));
        }
        let lr = &self.lr;
        for (name, v) in [
            ("lr_means", lr.means),
            ("lr_rotations", lr.rotations),
            ("lr_scales", lr.scales),
            ("lr_opacities", lr.opacities),
            ("lr_colors", lr.colors),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.ncc_window < 3 || self.ncc_window.is_multiple_of(2) {
            return Err(Error::Config(format!("ncc_window must be odd and at least 3, got {}", self.ncc_window)));
        }
        self.dim.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies one `key=value` setting; `Ok(false)` when the key is not a
    /// trainer key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool> {
        fn p<T: FromStr>(key: &str, value: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            value.parse().map_err(|e| Error::Config(format!("{key}: {e}")))
        }
        match key {
            "iterations" => self.iterations = p(key, value)?,
            "warmup" => self.warmup_iterations = p(key, value)?,
            "lr_means" => self.lr.means = p(key, value)?,
            "lr_rotations" => self.lr.rotations = p(key, value)?,
            "lr_scales" => self.lr.scales = p(key, value)?,
            "lr_opacities" => self.lr.opacities = p(key, value)?,
            "lr_colors" => self.lr.colors = p(key, value)?,
            "lambda" => self.lambda = p(key, value)?,
            "alpha" => self.alpha = p(key, value)?,
            "beta" => self.beta = p(key, value)?,
            "depth_mode" => self.depth_mode = p(key, value)?,
            "mask_mean" => self.mask_mean = p(key, value)?,
            "gal_masked" => self.gal_masked = p(key, value)?,
            "ncc_window" => self.ncc_window = p(key, value)?,
            "eval_every" => self.eval_every = p(key, value)?,
            "seed" => self.seed = p(key, value)?,
            "dim_baseline" => self.dim.baseline = p(key, value)?,
            "dim_threshold" => self.dim.threshold = p(key, value)?,
            "dim_stride" => self.dim.stride = p(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are skipped; unknown keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        Self::from_pairs(config_pairs(text)?)
    }

    /// Applies settings over the defaults and validates. Without a `warmup`
    /// key the warmup is a tenth of `iterations`.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut warmup_set = false;
        for (key, value) in pairs {
            if !cfg.set(&key, &value)? {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
            warmup_set |= key == "warmup";
        }
        if !warmup_set {
            cfg.warmup_iterations = cfg.iterations / 10;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every setting as `key=value` lines, readable by [`TrainConfig::parse`].
    pub fn format(&self) -> String {
        let lr = &self.lr;
        format!(
            "iterations={}\nwarmup={}\nlr_means={}\nlr_rotations={}\nlr_scales={}\nlr_opacities={}\n\
             lr_colors={}\nlambda={}\nalpha={}\nbeta={}\ndepth_mode={}\nmask_mean={}\ngal_masked={}\nncc_window={}\n\
             eval_every={}\nseed={}\ndim_baseline={}\ndim_threshold={}\ndim_stride={}\n",
            self.iterations,
            self.warmup_iterations,
            lr.means,
            lr.rotations,
            lr.scales,
            lr.opacities,
            lr.colors,
            self.lambda,
            self.alpha,
            self.beta,
            self.depth_mode,
            self.mask_mean,
            self.gal_masked,
            self.ncc_window,
            self.eval_every,
            self.seed,
            self.dim.baseline,
            self.dim.threshold,
            self.dim.stride,
        )
    }
}

/// Splits `key=value` lines, dropping blanks and `#` comments.
pub fn config_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}
