//! Training losses with analytic gradients with respect to the rendered
//! operand.
//!
//! Depth losses take the rendered map first and the aligned prior second;
//! cells that are holes in either map never enter a value or a gradient.

mod color;
mod depth;

pub use color::{color_loss, ssim, SSIM_C1, SSIM_C2, SSIM_SIGMA, SSIM_WINDOW};
pub use depth::{
    cosine_grad_loss, gal, gal_masked, l1_depth, masked_l1_depth, masked_l1_depth_over_mask, ncc_patch_loss,
    COSINE_EPS, NCC_MIN_VARIANCE,
};

use crate::error::Result;
use crate::raster::{BinMask, DepthMap};

/// A scalar loss and its gradient. For images the gradient is three
/// interleaved channels per pixel; for depth maps one value per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossValue {
    pub fn zero(len: usize) -> Self {
        Self { value: 0.0, grad: vec![0.0; len] }
    }

    /// `self += k * other`, value and gradient.
    pub fn add_scaled(&mut self, k: f64, other: &LossValue) {
        self.value += k * other.value;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += k * o;
        }
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.value *= k;
        for g in &mut self.grad {
            *g *= k;
        }
        self
    }
}

/// `alpha * masked_l1_depth + beta * gal`.
pub fn combined_regularizer(
    rendered: &DepthMap,
    prior: &DepthMap,
    mask: &BinMask,
    alpha: f64,
    beta: f64,
) -> Result<LossValue> {
    let abs = masked_l1_depth(rendered, prior, mask)?;
    let rel = gal(rendered, prior)?;
    Ok(combine(abs, rel, alpha, beta))
}

/// As [`combined_regularizer`] with the gradient-alignment term also
/// restricted to the mask.
pub fn combined_regularizer_masked_gal(
    rendered: &DepthMap,
    prior: &DepthMap,
    mask: &BinMask,
    alpha: f64,
    beta: f64,
) -> Result<LossValue> {
    let abs = masked_l1_depth(rendered, prior, mask)?;
    let rel = gal_masked(rendered, prior, mask)?;
    Ok(combine(abs, rel, alpha, beta))
}

fn combine(abs: LossValue, rel: LossValue, alpha: f64, beta: f64) -> LossValue {
    let mut out = LossValue::zero(abs.grad.len());
    out.add_scaled(alpha, &abs);
    out.add_scaled(beta, &rel);
    out
}
