//! Differentiable Gaussian splat renderer.
//!
//! Splats are sorted by camera-frame depth and composited front to back.
//! For a pixel the weight of the `i`-th splat is `w_i = a_i T_i` with
//! `a_i = o_i G_i(u)` and `T_{i+1} = T_i (1 - a_i)`; color is
//! `sum w_i c_i + T_final * background` and depth is `sum w_i d_i`, where
//! `d_i` is the camera-frame `z` of the splat center. Depth is not
//! renormalized by accumulated alpha; pixels whose alpha stays below
//! [`RenderOptions::hole_alpha`] are holes.

mod backward;
mod cloud;
mod forward;
mod project;

pub use backward::render_backward;
pub use cloud::{decode_cloud, encode_cloud, read_cloud, write_cloud, Gaussian, GaussianCloud, PARAMS_PER_GAUSSIAN};
pub use forward::{render, render_depth, render_stereo_depth, render_with, RenderOutput};
pub use project::{project_gaussian, Splat};

pub(crate) use project::sigmoid;

/// Rasterizer settings. The defaults are the usual rasterizer economies;
/// [`RenderOptions::exact`] turns them off for oracle comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderOptions {
    pub background: [f64; 3],
    /// Added to both diagonal entries of every screen-space covariance (px²).
    pub dilation: f64,
    /// Per-splat evaluation cutoff in standard deviations; `None` evaluates
    /// every splat at every pixel.
    pub footprint_sigma: Option<f64>,
    /// Compositing stops once transmittance falls below this (0 disables).
    pub min_transmittance: f64,
    /// Pixels with accumulated alpha below this get a depth hole.
    pub hole_alpha: f64,
    /// Splats with camera-frame `z` at or below this are culled.
    pub near: f64,
    /// Side of the square screen tiles used for splat binning.
    pub tile_size: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            dilation: 0.3,
            footprint_sigma: Some(3.0),
            min_transmittance: 1e-4,
            hole_alpha: 0.5,
            near: 0.01,
            tile_size: 16,
        }
    }
}

impl RenderOptions {
    /// No footprint cutoff and no early termination.
    pub fn exact() -> Self {
        Self { footprint_sigma: None, min_transmittance: 0.0, ..Self::default() }
    }
}
