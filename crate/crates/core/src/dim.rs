//! Depth-inconsistency mask from a virtual stereo pair.
//!
//! The training camera is the left eye; a right eye shares its intrinsics
//! and rotation with translation `t + (b, 0, 0)`. The right depth render is
//! warped back into the left view and compared cell by cell. A cell is
//! flagged (`true`) when the warped depth differs by at least `ε`, when no
//! right pixel lands on it, or when the left render itself is a hole.

use crate::camera::{offset_camera, reproject_depth, Camera};
use crate::error::{check_dims, Error, Result};
use crate::raster::{BinMask, DepthMap};
use crate::render::{render_depth, GaussianCloud, RenderOptions};

/// A length given either in scene units or as a fraction of the median
/// non-hole depth of the left render.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Magnitude {
    Absolute(f64),
    Relative(f64),
}

impl Magnitude {
    pub fn resolve(self, median_depth: f64) -> f64 {
        match self {
            Magnitude::Absolute(v) => v,
            Magnitude::Relative(f) => f * median_depth,
        }
    }

    fn value(self) -> f64 {
        match self {
            Magnitude::Absolute(v) | Magnitude::Relative(v) => v,
        }
    }
}

impl std::str::FromStr for Magnitude {
    type Err = Error;

    /// `rel:F` for a median fraction, `abs:V` or a bare number for scene
    /// units.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (ctor, num): (fn(f64) -> Magnitude, &str) = match s.split_once(':') {
            Some(("rel", v)) => (Magnitude::Relative, v),
            Some(("abs", v)) => (Magnitude::Absolute, v),
            Some((k, _)) => return Err(Error::invalid(format!("unknown magnitude kind `{k}`"))),
            None => (Magnitude::Absolute, s),
        };
        num.trim().parse::<f64>().map(ctor).map_err(|e| Error::invalid(format!("magnitude `{s}`: {e}")))
    }
}

impl std::fmt::Display for Magnitude {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Magnitude::Absolute(v) => write!(f, "abs:{v}"),
            Magnitude::Relative(v) => write!(f, "rel:{v}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimConfig {
    /// Signed offset of the right eye along the camera `x` axis.
    pub baseline: Magnitude,
    pub threshold: Magnitude,
    /// Training iterations between mask refreshes.
    pub stride: usize,
}

impl Default for DimConfig {
    fn default() -> Self {
        Self { baseline: Magnitude::Relative(0.05), threshold: Magnitude::Relative(0.02), stride: 1 }
    }
}

impl DimConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.baseline.value().is_finite() {
            return Err(Error::invalid("baseline must be finite"));
        }
        let eps = self.threshold.value();
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid(format!("threshold must be positive, got {eps}")));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride must be at least 1"));
        }
        Ok(())
    }
}

/// Thresholds a left depth map against the right view warped into it.
pub fn compute_dim(d_left: &DepthMap, d_reproj: &DepthMap, eps: f64) -> Result<BinMask> {
    check_dims(d_left.dims(), d_reproj.dims())?;
    let (w, h) = d_left.dims();
    let cells = d_left.cells().iter().zip(d_reproj.cells()).map(|(&l, &r)| !((r - l).abs() < eps)).collect();
    BinMask::new(w, h, cells)
}

/// Mask plus the baseline and threshold it was built with.
#[derive(Clone, Debug)]
pub struct DimResult {
    pub mask: BinMask,
    pub baseline: f64,
    pub threshold: f64,
    pub left: DepthMap,
    pub reprojected: DepthMap,
}

/// Renders the stereo pair with default render options and builds the mask.
pub fn dim_pipeline(cloud: &GaussianCloud, cam: &Camera, cfg: &DimConfig) -> Result<BinMask> {
    Ok(dim_pipeline_with(cloud, cam, cfg, &RenderOptions::default(), None)?.mask)
}

/// Like [`dim_pipeline`], reusing `left` as the left depth render when the
/// caller already has one.
pub fn dim_pipeline_with(
    cloud: &GaussianCloud,
    cam: &Camera,
    cfg: &DimConfig,
    opts: &RenderOptions,
    left: Option<&DepthMap>,
) -> Result<DimResult> {
    cfg.validate()?;
    let left = match left {
        Some(d) => {
            check_dims(cam.dims(), d.dims())?;
            d.clone()
        }
        None => render_depth(cloud, cam, opts).0,
    };
    let (w, h) = cam.dims();
    let Some(median) = left.median() else {
        return Ok(DimResult {
            mask: BinMask::filled(w, h, true)?,
            baseline: 0.0,
            threshold: 0.0,
            reprojected: DepthMap::holes(w, h)?,
            left,
        });
    };
    let baseline = cfg.baseline.resolve(median);
    let threshold = cfg.threshold.resolve(median);
    let right_cam = offset_camera(cam, baseline);
    let right = if baseline == 0.0 { left.clone() } else { render_depth(cloud, &right_cam, opts).0 };
    let reprojected = reproject_depth(&right, &right_cam, cam)?;
    let mask = compute_dim(&left, &reprojected, threshold)?;
    Ok(DimResult { mask, baseline, threshold, left, reprojected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::Gaussian;
    use nalgebra::{Matrix3, Vector3};

    fn dm(w: usize, h: usize, v: &[f64]) -> DepthMap {
        DepthMap::new(w, h, v.to_vec()).unwrap()
    }

    #[test]
    fn magnitude_syntax() {
        for m in [Magnitude::Relative(0.05), Magnitude::Absolute(-0.25)] {
            assert_eq!(m.to_string().parse::<Magnitude>().unwrap(), m);
        }
        assert_eq!("0.1".parse::<Magnitude>().unwrap(), Magnitude::Absolute(0.1));
        assert!("pct:3".parse::<Magnitude>().is_err());
        assert!("rel:x".parse::<Magnitude>().is_err());
    }

    #[test]
    fn threshold_arithmetic() {
        let m = compute_dim(&dm(2, 1, &[2.0, 2.0]), &dm(2, 1, &[2.0, 2.3]), 0.2).unwrap();
        assert_eq!(m.cells(), &[false, true]);
    }

    #[test]
    fn identical_maps_are_consistent() {
        let d = dm(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(compute_dim(&d, &d, 1e-9).unwrap().count_ones(), 0);
    }

    #[test]
    fn holes_are_flagged() {
        let d = dm(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let holes = DepthMap::holes(2, 2).unwrap();
        assert_eq!(compute_dim(&d, &holes, 0.1).unwrap().count_ones(), 4);
        assert_eq!(compute_dim(&holes, &d, 0.1).unwrap().count_ones(), 4);
    }

    #[test]
    fn exact_threshold_is_inconsistent() {
        let m = compute_dim(&dm(1, 1, &[2.0]), &dm(1, 1, &[2.5]), 0.5).unwrap();
        assert!(m.get(0, 0));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            compute_dim(&dm(2, 1, &[1.0, 1.0]), &dm(1, 2, &[1.0, 1.0]), 0.1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn invalid_config() {
        let mut cfg = DimConfig { threshold: Magnitude::Absolute(0.0), ..DimConfig::default() };
        assert!(cfg.validate().is_err());
        cfg.threshold = Magnitude::Relative(0.01);
        cfg.stride = 0;
        assert!(cfg.validate().is_err());
        cfg.stride = 1;
        cfg.baseline = Magnitude::Relative(-0.1);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn empty_left_is_all_inconsistent() {
        let cam = Camera::new(20.0, 20.0, 4.0, 4.0, Matrix3::identity(), Vector3::zeros(), 9, 9).unwrap();
        let cloud = GaussianCloud::new(vec![Gaussian::isotropic(Vector3::new(0.0, 0.0, -3.0), 0.1, 3.0, [1.0; 3])]);
        let m = dim_pipeline(&cloud, &cam, &DimConfig::default()).unwrap();
        assert_eq!(m.count_ones(), 81);
    }

    #[test]
    fn zero_baseline_flags_left_holes_only() {
        let cam = Camera::new(40.0, 40.0, 10.0, 8.0, Matrix3::identity(), Vector3::zeros(), 21, 17).unwrap();
        let cloud = GaussianCloud::new(vec![
            Gaussian::isotropic(Vector3::new(0.0, 0.0, 3.0), 0.3, 3.0, [1.0; 3]),
            Gaussian::isotropic(Vector3::new(0.1, 0.05, 2.0), 0.05, 1.0, [1.0; 3]),
        ]);
        let cfg = DimConfig { baseline: Magnitude::Absolute(0.0), ..DimConfig::default() };
        let r = dim_pipeline_with(&cloud, &cam, &cfg, &RenderOptions::default(), None).unwrap();
        for y in 0..17 {
            for x in 0..21 {
                assert_eq!(r.mask.get(x, y), r.left.is_hole(x, y));
            }
        }
        assert!(r.mask.count_ones() > 0 && r.mask.count_ones() < 21 * 17);
    }
}
