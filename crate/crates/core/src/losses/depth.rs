use super::LossValue;
use crate::error::{check_dims, Error, Result};
use crate::raster::{is_hole, BinMask, DepthMap};

/// Cells whose gradient-norm product falls below this are skipped by the
/// cosine loss.
pub const COSINE_EPS: f64 = 1e-8;

/// Patches whose population variance falls below this are skipped by the
/// correlation loss.
pub const NCC_MIN_VARIANCE: f64 = 1e-12;

#[inline]
fn sign(d: f64) -> f64 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn both_valid(r: f64, p: f64) -> bool {
    !is_hole(r) && !is_hole(p)
}

/// Absolute error summed over cells selected by `keep` and non-hole in both
/// maps, divided by the size of that support or, with `over_valid`, by the
/// count of cells non-hole in both maps. Returns the divisor as well.
fn l1_over(
    rendered: &DepthMap,
    prior: &DepthMap,
    keep: impl Fn(usize) -> bool,
    over_valid: bool,
) -> (LossValue, usize) {
    let r = rendered.cells();
    let p = prior.cells();
    let mut grad = vec![0.0; r.len()];
    let support: Vec<usize> = (0..r.len()).filter(|&i| keep(i) && both_valid(r[i], p[i])).collect();
    let n = if over_valid { (0..r.len()).filter(|&i| both_valid(r[i], p[i])).count() } else { support.len() };
    if support.is_empty() {
        return (LossValue { value: 0.0, grad }, n);
    }
    let inv = 1.0 / n as f64;
    let mut total = 0.0;
    for &i in &support {
        let d = r[i] - p[i];
        total += d.abs();
        grad[i] = sign(d) * inv;
    }
    (LossValue { value: total * inv, grad }, n)
}

/// Mean absolute depth error over cells that are non-hole in both maps.
pub fn l1_depth(rendered: &DepthMap, prior: &DepthMap) -> Result<LossValue> {
    check_dims(prior.dims(), rendered.dims())?;
    let (loss, n) = l1_over(rendered, prior, |_| true, false);
    if n == 0 {
        return Err(Error::NoOverlap);
    }
    Ok(loss)
}

/// L1 between the masked maps: errors on unmasked cells count as zero, so
/// the sum over masked cells is divided by every cell that is non-hole in
/// both maps. Zero when nothing masked is valid.
pub fn masked_l1_depth(rendered: &DepthMap, prior: &DepthMap, mask: &BinMask) -> Result<LossValue> {
    check_dims(prior.dims(), rendered.dims())?;
    check_dims(rendered.dims(), mask.dims())?;
    let m = mask.cells();
    Ok(l1_over(rendered, prior, |i| m[i], true).0)
}

/// [`l1_depth`] restricted to cells where the mask is set, averaged over
/// that restricted support; zero when it is empty.
pub fn masked_l1_depth_over_mask(rendered: &DepthMap, prior: &DepthMap, mask: &BinMask) -> Result<LossValue> {
    check_dims(prior.dims(), rendered.dims())?;
    check_dims(rendered.dims(), mask.dims())?;
    let m = mask.cells();
    Ok(l1_over(rendered, prior, |i| m[i], false).0)
}

fn check_min_size(d: &DepthMap) -> Result<()> {
    let (w, h) = d.dims();
    if w < 2 || h < 2 {
        return Err(Error::invalid(format!("map must be at least 2x2, got {w}x{h}")));
    }
    Ok(())
}

/// Gradient-alignment loss: mean absolute difference of horizontal forward
/// differences plus the same for vertical ones. A difference is used only
/// when both of its cells are non-hole in both maps.
pub fn gal(rendered: &DepthMap, prior: &DepthMap) -> Result<LossValue> {
    gal_impl(rendered, prior, None)
}

/// [`gal`] using only differences whose two cells are both masked.
pub fn gal_masked(rendered: &DepthMap, prior: &DepthMap, mask: &BinMask) -> Result<LossValue> {
    check_dims(rendered.dims(), mask.dims())?;
    gal_impl(rendered, prior, Some(mask))
}

fn gal_impl(rendered: &DepthMap, prior: &DepthMap, mask: Option<&BinMask>) -> Result<LossValue> {
    check_dims(prior.dims(), rendered.dims())?;
    check_min_size(rendered)?;
    let (w, h) = rendered.dims();
    let r = rendered.cells();
    let p = prior.cells();
    let ok = |i: usize| both_valid(r[i], p[i]) && mask.is_none_or(|m| m.cells()[i]);
    let mut out = LossValue::zero(w * h);
    let valid: Vec<bool> = (0..w * h).map(ok).collect();
    let step = |dx: usize, dy: usize| {
        (0..h - dy).flat_map(move |y| (0..w - dx).map(move |x| (y * w + x, (y + dy) * w + x + dx)))
    };
    for (dx, dy) in [(1, 0), (0, 1)] {
        let n = step(dx, dy).filter(|&(a, b)| valid[a] && valid[b]).count();
        if n == 0 {
            continue;
        }
        let inv = 1.0 / n as f64;
        let mut total = 0.0;
        for (a, b) in step(dx, dy) {
            if valid[a] && valid[b] {
                let e = (r[b] - r[a]) - (p[b] - p[a]);
                total += e.abs();
                let s = sign(e) * inv;
                out.grad[b] += s;
                out.grad[a] -= s;
            }
        }
        out.value += total * inv;
    }
    Ok(out)
}

/// Mean over non-overlapping `window × window` tiles (edge tiles included)
/// of `1 - r`, with `r` the Pearson correlation over cells valid in both
/// maps. Tiles with fewer than two valid cells or with negligible variance
/// in either operand are skipped.
pub fn ncc_patch_loss(rendered: &DepthMap, prior: &DepthMap, window: usize) -> Result<LossValue> {
    check_dims(prior.dims(), rendered.dims())?;
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!("window must be odd and at least 3, got {window}")));
    }
    let (w, h) = rendered.dims();
    let r = rendered.cells();
    let p = prior.cells();
    let mut grad = vec![0.0; w * h];
    // (cell index, d(1 - r)/dx) per valid patch
    let mut patches: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    for ty in (0..h).step_by(window) {
        for tx in (0..w).step_by(window) {
            let cells: Vec<usize> = (ty..(ty + window).min(h))
                .flat_map(|y| (tx..(tx + window).min(w)).map(move |x| y * w + x))
                .filter(|&i| both_valid(r[i], p[i]))
                .collect();
            let n = cells.len();
            if n < 2 {
                continue;
            }
            let nf = n as f64;
            let mx = cells.iter().map(|&i| r[i]).sum::<f64>() / nf;
            let my = cells.iter().map(|&i| p[i]).sum::<f64>() / nf;
            let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
            for &i in &cells {
                let (a, b) = (r[i] - mx, p[i] - my);
                sxx += a * a;
                syy += b * b;
                sxy += a * b;
            }
            if sxx / nf < NCC_MIN_VARIANCE || syy / nf < NCC_MIN_VARIANCE {
                continue;
            }
            let root = (sxx * syy).sqrt();
            let corr = sxy / root;
            let g = cells.iter().map(|&i| (i, -((p[i] - my) / root - corr * (r[i] - mx) / sxx))).collect();
            patches.push((1.0 - corr, g));
        }
    }
    if patches.is_empty() {
        return Err(Error::NoValidPatch);
    }
    let inv = 1.0 / patches.len() as f64;
    let mut value = 0.0;
    for (term, g) in &patches {
        value += term;
        for &(i, v) in g {
            grad[i] += v * inv;
        }
    }
    Ok(LossValue { value: value * inv, grad })
}

/// Mean over cells of `1 - cos` between the forward-difference gradient
/// vectors of the two maps. A cell needs itself and its right and lower
/// neighbors valid in both maps, and a gradient-norm product of at least
/// [`COSINE_EPS`]. Zero when no cell qualifies.
pub fn cosine_grad_loss(rendered: &DepthMap, prior: &DepthMap) -> Result<LossValue> {
    check_dims(prior.dims(), rendered.dims())?;
    check_min_size(rendered)?;
    let (w, h) = rendered.dims();
    let r = rendered.cells();
    let p = prior.cells();
    let mut terms = Vec::new();
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let (c, e, s) = (y * w + x, y * w + x + 1, (y + 1) * w + x);
            if ![c, e, s].iter().all(|&i| both_valid(r[i], p[i])) {
                continue;
            }
            let gr = [r[e] - r[c], r[s] - r[c]];
            let gp = [p[e] - p[c], p[s] - p[c]];
            let nr = gr[0].hypot(gr[1]);
            let np = gp[0].hypot(gp[1]);
            if nr * np < COSINE_EPS {
                continue;
            }
            let cos = (gr[0] * gp[0] + gr[1] * gp[1]) / (nr * np);
            // d cos / d gr
            let dg = [gp[0] / (nr * np) - cos * gr[0] / (nr * nr), gp[1] / (nr * np) - cos * gr[1] / (nr * nr)];
            terms.push((c, e, s, 1.0 - cos, dg));
        }
    }
    let mut out = LossValue::zero(w * h);
    if terms.is_empty() {
        return Ok(out);
    }
    let inv = 1.0 / terms.len() as f64;
    for &(c, e, s, term, dg) in &terms {
        out.value += term;
        out.grad[e] -= dg[0] * inv;
        out.grad[s] -= dg[1] * inv;
        out.grad[c] += (dg[0] + dg[1]) * inv;
    }
    out.value *= inv;
    Ok(out)
}
