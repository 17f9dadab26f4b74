//! Image and depth evaluation metrics.

use std::fmt;

use crate::error::{check_dims, Error, Result};
use crate::raster::{DepthMap, RgbImage};

pub use crate::losses::ssim;

/// Ratio threshold of the `δ1` accuracy test.
pub const DELTA1_THRESHOLD: f64 = 1.25;

/// Peak signal-to-noise ratio in dB on the `[0, 1]` range;
/// `f64::INFINITY` for identical images.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let mut se = 0.0;
    for (p, q) in a.pixels().iter().zip(b.pixels()) {
        for c in 0..3 {
            let d = p[c] - q[c];
            se += d * d;
        }
    }
    let mse = se / (3 * a.pixels().len()) as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn overlap(pred: &DepthMap, gt: &DepthMap) -> Result<Vec<(f64, f64)>> {
    check_dims(gt.dims(), pred.dims())?;
    let pairs: Vec<(f64, f64)> = pred
        .cells()
        .iter()
        .zip(gt.cells())
        .filter(|(p, g)| !p.is_nan() && !g.is_nan())
        .map(|(&p, &g)| (p, g))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(pairs)
}

/// Mean of `|pred - gt| / gt` over cells valid in both maps.
pub fn abs_rel(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    let pairs = overlap(pred, gt)?;
    Ok(pairs.iter().map(|(p, g)| (p - g).abs() / g).sum::<f64>() / pairs.len() as f64)
}

/// Fraction of overlapping cells with `max(pred/gt, gt/pred) < 1.25`.
pub fn delta1(pred: &DepthMap, gt: &DepthMap) -> Result<f64> {
    let pairs = overlap(pred, gt)?;
    let hits = pairs.iter().filter(|(p, g)| (p / g).max(g / p) < DELTA1_THRESHOLD).count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Geometric-mean error combinator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AvgE {
    pub value: f64,
    /// Set when no perceptual score was supplied and only the PSNR and SSIM
    /// factors entered the mean.
    pub partial: bool,
}

/// Geometric mean of `10^(-psnr/10)`, `sqrt(1 - ssim)` and, when given,
/// `lpips`.
pub fn avg_e(psnr: f64, ssim: f64, lpips: Option<f64>) -> Result<AvgE> {
    if !(ssim <= 1.0) {
        return Err(Error::invalid(format!("ssim must be at most 1, got {ssim}")));
    }
    let a = 10f64.powf(-psnr / 10.0);
    let b = (1.0 - ssim).sqrt();
    Ok(match lpips {
        Some(l) => {
            if !(l >= 0.0) {
                return Err(Error::invalid(format!("lpips must be non-negative, got {l}")));
            }
            AvgE { value: (a * b * l).cbrt(), partial: false }
        }
        None => AvgE { value: (a * b).sqrt(), partial: true },
    })
}

/// Metrics for one view or averaged over a split.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub psnr: f64,
    pub ssim: f64,
    pub abs_rel: f64,
    pub delta1: f64,
    pub avg_e: Option<AvgE>,
}

impl EvalReport {
    pub fn evaluate(
        rendered: &RgbImage,
        target: &RgbImage,
        depth: &DepthMap,
        gt_depth: &DepthMap,
        lpips: Option<f64>,
    ) -> Result<Self> {
        let psnr = psnr(rendered, target)?;
        let ssim = ssim(rendered, target)?;
        Ok(Self {
            psnr,
            ssim,
            abs_rel: abs_rel(depth, gt_depth)?,
            delta1: delta1(depth, gt_depth)?,
            avg_e: Some(avg_e(psnr, ssim, lpips)?),
        })
    }

    /// Arithmetic mean of each metric; PSNR values that are infinite are
    /// averaged as such.
    pub fn mean(reports: &[EvalReport]) -> Option<EvalReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let avg = |f: fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let avg_e = reports
            .iter()
            .map(|r| r.avg_e)
            .collect::<Option<Vec<_>>>()
            .map(|v| AvgE { value: v.iter().map(|a| a.value).sum::<f64>() / n, partial: v.iter().any(|a| a.partial) });
        Some(EvalReport {
            psnr: avg(|r| r.psnr),
            ssim: avg(|r| r.ssim),
            abs_rel: avg(|r| r.abs_rel),
            delta1: avg(|r| r.delta1),
            avg_e,
        })
    }
}

impl fmt::Display for EvalReport {
    /// `key=value` pairs on one line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "psnr={:.4} ssim={:.6} abs_rel={:.6} delta1={:.6}", self.psnr, self.ssim, self.abs_rel, self.delta1)?;
        if let Some(a) = self.avg_e {
            let key = if a.partial { "avg_e_partial" } else { "avg_e" };
            write!(f, " {key}={:.6}", a.value)?;
        }
        Ok(())
    }
}
