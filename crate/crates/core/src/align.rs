//! Scale and shift alignment of monocular depth against sparse SfM depths.
//!
//! The fit is the unweighted least-squares problem
//! `min_{s,t} sum_u (sparse(u) - (s * mono(u) + t))^2`, solved in closed form
//! through the covariance of the sampled pairs.

use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::camera::{project, round_coord, Camera};
use crate::error::{Error, Result};
use crate::raster::DepthMap;

const MIN_VARIANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Observation {
    pub x: usize,
    pub y: usize,
    pub depth: f64,
}

/// Sparse per-pixel depth observations, at most one per pixel, stored in
/// row-major pixel order.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseDepth {
    width: usize,
    height: usize,
    observations: Vec<Observation>,
}

impl SparseDepth {
    pub fn new(width: usize, height: usize, mut observations: Vec<Observation>) -> Result<Self> {
        for o in &observations {
            if o.x >= width || o.y >= height {
                return Err(Error::invalid(format!("observation ({}, {}) outside {width}x{height}", o.x, o.y)));
            }
            if !(o.depth > 0.0 && o.depth.is_finite()) {
                return Err(Error::NonPositiveDepth(o.depth));
            }
        }
        observations.sort_by_key(|o| (o.y, o.x));
        if observations.windows(2).any(|w| (w[0].x, w[0].y) == (w[1].x, w[1].y)) {
            return Err(Error::invalid("sparse depth has repeated pixels"));
        }
        Ok(Self { width, height, observations })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentSolution {
    pub scale: f64,
    pub shift: f64,
    pub residual_rms: f64,
    pub n_used: usize,
}

impl AlignmentSolution {
    /// A flipped or collapsed prior is unusable for supervision.
    pub fn negative_scale(&self) -> bool {
        self.scale <= 0.0
    }
}

/// Projects points into `cam`, keeping in-bounds hits in front of the camera.
/// When several points land on one pixel the nearest wins.
pub fn sparse_depth_from_points(points: &[Vector3<f64>], cam: &Camera) -> SparseDepth {
    let mut best: Vec<Option<f64>> = vec![None; cam.width * cam.height];
    for p in points {
        let Ok(proj) = project(p, cam) else { continue };
        let u = round_coord(proj.pixel.x);
        let v = round_coord(proj.pixel.y);
        if u < 0.0 || v < 0.0 || u >= cam.width as f64 || v >= cam.height as f64 {
            continue;
        }
        let idx = v as usize * cam.width + u as usize;
        if best[idx].is_none_or(|d| proj.depth < d) {
            best[idx] = Some(proj.depth);
        }
    }
    let observations = best
        .iter()
        .enumerate()
        .filter_map(|(i, d)| d.map(|depth| Observation { x: i % cam.width, y: i / cam.width, depth }))
        .collect();
    SparseDepth { width: cam.width, height: cam.height, observations }
}

/// Closed-form least-squares scale and shift mapping `mono` onto `sparse`.
///
/// Observations that fall on mono holes are skipped. Pairs are accumulated
/// in row-major pixel order so the result does not depend on how the
/// observations were supplied.
pub fn solve_scale_shift(sparse: &SparseDepth, mono: &DepthMap) -> Result<AlignmentSolution> {
    crate::error::check_dims((sparse.width, sparse.height), mono.dims())?;
    let pairs: Vec<(f64, f64)> =
        sparse.observations.iter().filter_map(|o| mono.get(o.x, o.y).map(|m| (m, o.depth))).collect();
    let n = pairs.len();
    if n < 2 {
        return Err(Error::TooFewPoints { found: n });
    }
    let nf = n as f64;
    let mean_m = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_d = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut var, mut cov) = (0.0, 0.0);
    for &(m, d) in &pairs {
        let dm = m - mean_m;
        var += dm * dm;
        cov += dm * (d - mean_d);
    }
    if var / nf <= MIN_VARIANCE {
        return Err(Error::DegenerateVariance { variance: var / nf });
    }
    let scale = cov / var;
    let shift = mean_d - scale * mean_m;
    let sse: f64 = pairs
        .iter()
        .map(|&(m, d)| {
            let r = d - (scale * m + shift);
            r * r
        })
        .sum();
    Ok(AlignmentSolution { scale, shift, residual_rms: (sse / nf).sqrt(), n_used: n })
}

/// Per-cell affine map `s * mono + t`. Holes stay holes and cells pushed to
/// zero or below become holes.
pub fn apply_alignment(mono: &DepthMap, sol: &AlignmentSolution) -> DepthMap {
    mono.map_valid(|v| sol.scale * v + sol.shift)
}

/// Parses a point cloud: one `x y z` triple per line, `#` comments and blank
/// lines ignored.
pub fn parse_points(text: &str) -> Result<Vec<Vector3<f64>>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(format!("points line {}: {e}", lineno + 1)))?;
        if vals.len() != 3 {
            return Err(Error::format(format!("points line {}: expected 3 values, found {}", lineno + 1, vals.len())));
        }
        out.push(Vector3::new(vals[0], vals[1], vals[2]));
    }
    Ok(out)
}

pub fn format_points(points: &[Vector3<f64>]) -> String {
    points.iter().map(|p| format!("{:?} {:?} {:?}\n", p.x, p.y, p.z)).collect()
}

pub fn read_points(path: impl AsRef<Path>) -> Result<Vec<Vector3<f64>>> {
    parse_points(&fs::read_to_string(path)?)
}

pub fn write_points(points: &[Vector3<f64>], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_points(points))?;
    Ok(())
}
