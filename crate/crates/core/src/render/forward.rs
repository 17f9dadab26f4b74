use std::cmp::Ordering;

use nalgebra::Vector2;
use rayon::prelude::*;

use super::project::project_full;
use super::{GaussianCloud, RenderOptions};
use crate::camera::{offset_camera, Camera};
use crate::raster::{DepthMap, RgbImage, HOLE};

/// Screen-space splat ready for compositing.
#[derive(Clone, Copy, Debug)]
pub(crate) struct ScreenSplat {
    pub gaussian: u32,
    pub mean: Vector2<f64>,
    /// Inverse of the dilated screen covariance as `(a, b, c)` for
    /// `[[a, b], [b, c]]`.
    pub conic: [f64; 3],
    pub opacity: f64,
    pub color: [f64; 3],
    pub depth: f64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Contribution {
    /// Index into the depth-sorted splat list.
    pub splat: u32,
    /// Gaussian falloff `G(u)` at the pixel.
    pub falloff: f64,
    /// Transmittance before this splat.
    pub transmittance: f64,
}

#[derive(Clone, Debug)]
pub(crate) struct BackwardCache {
    pub splats: Vec<ScreenSplat>,
    /// `offsets[p]..offsets[p + 1]` indexes the contributions of pixel `p`.
    pub offsets: Vec<usize>,
    pub contributions: Vec<Contribution>,
    pub final_transmittance: Vec<f64>,
    pub generation: u64,
    pub cloud_len: usize,
    pub camera: Camera,
    pub options: RenderOptions,
}

/// Result of a forward pass.
#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub color: RgbImage,
    pub depth: DepthMap,
    /// Accumulated opacity `1 - T_final` per pixel, row-major.
    pub alpha: Vec<f64>,
    pub(crate) cache: BackwardCache,
}

impl RenderOutput {
    /// `(gaussian index, compositing weight)` for every splat that touched
    /// the pixel, front to back.
    pub fn pixel_contributions(&self, x: usize, y: usize) -> Vec<(usize, f64)> {
        let c = &self.cache;
        let p = y * self.color.width() + x;
        c.contributions[c.offsets[p]..c.offsets[p + 1]]
            .iter()
            .map(|k| {
                let s = &c.splats[k.splat as usize];
                (s.gaussian as usize, s.opacity * k.falloff * k.transmittance)
            })
            .collect()
    }

    /// Transmittance left after the last composited splat, row-major.
    pub fn final_transmittance(&self) -> &[f64] {
        &self.cache.final_transmittance
    }
}

fn screen_splats(cloud: &GaussianCloud, cam: &Camera, opts: &RenderOptions) -> Vec<ScreenSplat> {
    let mut splats: Vec<ScreenSplat> = cloud
        .gaussians()
        .par_iter()
        .enumerate()
        .filter_map(|(i, g)| {
            let p = project_full(g, cam, opts.near)?;
            let a = p.cov2d[(0, 0)] + opts.dilation;
            let b = p.cov2d[(0, 1)];
            let c = p.cov2d[(1, 1)] + opts.dilation;
            let det = a * c - b * b;
            if !(det > 0.0) || !det.is_finite() {
                return None;
            }
            Some(ScreenSplat {
                gaussian: i as u32,
                mean: p.mean2d,
                conic: [c / det, -b / det, a / det],
                opacity: g.opacity(),
                color: g.color,
                depth: p.t_cam.z,
            })
        })
        .collect();
    splats.sort_by(|a, b| match a.depth.total_cmp(&b.depth) {
        Ordering::Equal => a.gaussian.cmp(&b.gaussian),
        o => o,
    });
    splats
}

/// Conservative pixel bounding box of a splat's footprint, or `None` when
/// it misses the image.
fn footprint_bbox(s: &ScreenSplat, k: f64, w: usize, h: usize) -> Option<[usize; 4]> {
    // covariance back from the conic
    let [ca, cb, cc] = s.conic;
    let det = ca * cc - cb * cb;
    let (a, c, b) = (cc / det, ca / det, -cb / det);
    let mid = 0.5 * (a + c);
    let lambda = mid + (mid * mid - (a * c - b * b)).max(0.0).sqrt();
    let r = k * lambda.sqrt();
    let x0 = (s.mean.x - r).ceil().max(0.0);
    let x1 = (s.mean.x + r).floor().min((w - 1) as f64);
    let y0 = (s.mean.y - r).ceil().max(0.0);
    let y1 = (s.mean.y + r).floor().min((h - 1) as f64);
    if !(x0 <= x1 && y0 <= y1) {
        return None;
    }
    Some([x0 as usize, x1 as usize, y0 as usize, y1 as usize])
}

/// Per-tile lists of splat indices in depth order. With no footprint cutoff
/// there is a single tile covering the whole image.
fn bin_splats(splats: &[ScreenSplat], opts: &RenderOptions, w: usize, h: usize) -> (usize, usize, Vec<Vec<u32>>) {
    let Some(k) = opts.footprint_sigma else {
        return (usize::MAX, 1, vec![(0..splats.len() as u32).collect()]);
    };
    let ts = opts.tile_size.max(1);
    let tiles_x = w.div_ceil(ts);
    let tiles_y = h.div_ceil(ts);
    let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
    for (i, s) in splats.iter().enumerate() {
        let Some([x0, x1, y0, y1]) = footprint_bbox(s, k, w, h) else {
            continue;
        };
        for ty in y0 / ts..=y1 / ts {
            for tx in x0 / ts..=x1 / ts {
                tiles[ty * tiles_x + tx].push(i as u32);
            }
        }
    }
    (ts, tiles_x, tiles)
}

struct RowResult {
    color: Vec<[f64; 3]>,
    depth: Vec<f64>,
    transmittance: Vec<f64>,
    counts: Vec<usize>,
    contributions: Vec<Contribution>,
}

fn rasterize(splats: &[ScreenSplat], cam: &Camera, opts: &RenderOptions, with_color: bool) -> Vec<RowResult> {
    let (w, h) = cam.dims();
    let (ts, tiles_x, tiles) = bin_splats(splats, opts, w, h);
    let cutoff = opts.footprint_sigma.map(|k| k * k);
    let t_min = opts.min_transmittance;

    (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = RowResult {
                color: Vec::with_capacity(if with_color { w } else { 0 }),
                depth: Vec::with_capacity(w),
                transmittance: Vec::with_capacity(w),
                counts: Vec::with_capacity(if with_color { w } else { 0 }),
                contributions: Vec::new(),
            };
            let py = y as f64;
            for x in 0..w {
                let list = if ts == usize::MAX { &tiles[0] } else { &tiles[(y / ts) * tiles_x + x / ts] };
                let px = x as f64;
                let mut t = 1.0;
                let mut rgb = [0.0; 3];
                let mut depth = 0.0;
                let mut count = 0;
                for &si in list {
                    if t_min > 0.0 && t < t_min {
                        break;
                    }
                    let s = &splats[si as usize];
                    let dx = px - s.mean.x;
                    let dy = py - s.mean.y;
                    let [a, b, c] = s.conic;
                    let q = a * dx * dx + 2.0 * b * dx * dy + c * dy * dy;
                    if let Some(limit) = cutoff {
                        if q > limit {
                            continue;
                        }
                    }
                    let g = (-0.5 * q).exp();
                    let alpha = s.opacity * g;
                    let weight = alpha * t;
                    depth += weight * s.depth;
                    if with_color {
                        for ch in 0..3 {
                            rgb[ch] += weight * s.color[ch];
                        }
                        row.contributions.push(Contribution { splat: si, falloff: g, transmittance: t });
                        count += 1;
                    }
                    t *= 1.0 - alpha;
                }
                if with_color {
                    for ch in 0..3 {
                        rgb[ch] += t * opts.background[ch];
                    }
                    row.color.push(rgb);
                    row.counts.push(count);
                }
                row.depth.push(depth);
                row.transmittance.push(t);
            }
            row
        })
        .collect()
}

fn finish_depth(raw: &[f64], transmittance: &[f64], hole_alpha: f64) -> Vec<f64> {
    raw.iter()
        .zip(transmittance)
        .map(|(&d, &t)| {
            let alpha = 1.0 - t;
            if alpha < hole_alpha || !(d > 0.0) {
                HOLE
            } else {
                d
            }
        })
        .collect()
}

/// Forward pass with default options.
pub fn render(cloud: &GaussianCloud, cam: &Camera) -> RenderOutput {
    render_with(cloud, cam, &RenderOptions::default())
}

pub fn render_with(cloud: &GaussianCloud, cam: &Camera, opts: &RenderOptions) -> RenderOutput {
    let (w, h) = cam.dims();
    let splats = screen_splats(cloud, cam, opts);
    let rows = rasterize(&splats, cam, opts, true);

    let total: usize = rows.iter().map(|r| r.contributions.len()).sum();
    let mut color = Vec::with_capacity(w * h);
    let mut raw_depth = Vec::with_capacity(w * h);
    let mut transmittance = Vec::with_capacity(w * h);
    let mut offsets = Vec::with_capacity(w * h + 1);
    let mut contributions = Vec::with_capacity(total);
    offsets.push(0);
    for row in rows {
        color.extend(row.color);
        raw_depth.extend(row.depth);
        transmittance.extend_from_slice(&row.transmittance);
        for c in row.counts {
            let last = *offsets.last().unwrap();
            offsets.push(last + c);
        }
        contributions.extend(row.contributions);
    }

    let depth = finish_depth(&raw_depth, &transmittance, opts.hole_alpha);
    let alpha = transmittance.iter().map(|t| 1.0 - t).collect();
    RenderOutput {
        color: RgbImage::new(w, h, color).expect("render dims"),
        depth: DepthMap::new(w, h, depth).expect("rendered depth is positive or hole"),
        alpha,
        cache: BackwardCache {
            splats,
            offsets,
            contributions,
            final_transmittance: transmittance,
            generation: cloud.generation(),
            cloud_len: cloud.len(),
            camera: cam.clone(),
            options: opts.clone(),
        },
    }
}

/// Depth and alpha only; skips color and the backward cache.
pub fn render_depth(cloud: &GaussianCloud, cam: &Camera, opts: &RenderOptions) -> (DepthMap, Vec<f64>) {
    let (w, h) = cam.dims();
    let splats = screen_splats(cloud, cam, opts);
    let rows = rasterize(&splats, cam, opts, false);
    let mut raw = Vec::with_capacity(w * h);
    let mut transmittance = Vec::with_capacity(w * h);
    for row in rows {
        raw.extend(row.depth);
        transmittance.extend(row.transmittance);
    }
    let depth = finish_depth(&raw, &transmittance, opts.hole_alpha);
    let alpha = transmittance.iter().map(|t| 1.0 - t).collect();
    (DepthMap::new(w, h, depth).expect("rendered depth is positive or hole"), alpha)
}

/// Depth from the camera and from a virtual right eye shifted by `baseline`
/// along the camera `x` axis.
pub fn render_stereo_depth(
    cloud: &GaussianCloud,
    cam: &Camera,
    baseline: f64,
    opts: &RenderOptions,
) -> (DepthMap, DepthMap) {
    let (left, _) = render_depth(cloud, cam, opts);
    let (right, _) = render_depth(cloud, &offset_camera(cam, baseline), opts);
    (left, right)
}
