use super::LossValue;
use crate::error::{check_dims, Error, Result};
use crate::raster::RgbImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Normalized 1D Gaussian taps; the 2D window is their outer product.
fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Zero-padded same-size separable convolution. The kernel is symmetric, so
/// this is also its own adjoint.
fn blur(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                let xs = x as isize + t as isize - r;
                if xs >= 0 && (xs as usize) < w {
                    acc += kv * row[xs as usize];
                }
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for (t, kv) in k.iter().enumerate() {
            let ys = y as isize + t as isize - r;
            if ys < 0 || ys as usize >= h {
                continue;
            }
            let src_row = &tmp[ys as usize * w..(ys as usize + 1) * w];
            let dst_row = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst_row.iter_mut().zip(src_row) {
                *d += kv * s;
            }
        }
    }
    out
}

/// Mean SSIM of one channel, optionally with `d(mean SSIM)/dx` scaled by
/// `grad_scale`.
fn ssim_channel(x: &[f64], y: &[f64], w: usize, h: usize, grad_scale: Option<f64>) -> (f64, Option<Vec<f64>>) {
    let k = gaussian_taps();
    let n = w * h;
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = blur(x, w, h, &k);
    let my = blur(y, w, h, &k);
    let exx = blur(&xx, w, h, &k);
    let eyy = blur(&yy, w, h, &k);
    let exy = blur(&xy, w, h, &k);

    let mut total = 0.0;
    let mut g_mx = grad_scale.map(|_| vec![0.0; n]);
    let mut g_exx = grad_scale.map(|_| vec![0.0; n]);
    let mut g_exy = grad_scale.map(|_| vec![0.0; n]);
    for i in 0..n {
        let (a, b) = (mx[i], my[i]);
        let n1 = 2.0 * a * b + SSIM_C1;
        let n2 = 2.0 * (exy[i] - a * b) + SSIM_C2;
        let d1 = a * a + b * b + SSIM_C1;
        let d2 = (exx[i] - a * a) + (eyy[i] - b * b) + SSIM_C2;
        let s = n1 * n2 / (d1 * d2);
        total += s;
        if let Some(scale) = grad_scale {
            let gs = scale * s / n as f64;
            g_mx.as_mut().unwrap()[i] = gs * (2.0 * b / n1 - 2.0 * b / n2 - 2.0 * a / d1 + 2.0 * a / d2);
            g_exx.as_mut().unwrap()[i] = -gs / d2;
            g_exy.as_mut().unwrap()[i] = 2.0 * gs / n2;
        }
    }
    let grad = grad_scale.map(|_| {
        let a = blur(&g_mx.unwrap(), w, h, &k);
        let b = blur(&g_exx.unwrap(), w, h, &k);
        let c = blur(&g_exy.unwrap(), w, h, &k);
        (0..n).map(|i| a[i] + 2.0 * x[i] * b[i] + y[i] * c[i]).collect()
    });
    (total / n as f64, grad)
}

/// Mean SSIM over pixels and channels: 11×11 Gaussian window with
/// `σ = 1.5`, zero padding at the borders.
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let (w, h) = a.dims();
    let total: f64 = (0..3).map(|c| ssim_channel(&a.channel(c), &b.channel(c), w, h, None).0).sum();
    Ok(total / 3.0)
}

/// `(1 - λ) L1 + λ (1 - SSIM) / 2`, differentiated with respect to
/// `rendered`.
pub fn color_loss(rendered: &RgbImage, target: &RgbImage, lambda: f64) -> Result<LossValue> {
    check_dims(target.dims(), rendered.dims())?;
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    let (w, h) = rendered.dims();
    let n = (3 * w * h) as f64;
    let mut grad = vec![0.0; 3 * w * h];
    let mut l1 = 0.0;
    for (p, (r, t)) in rendered.pixels().iter().zip(target.pixels()).enumerate() {
        for c in 0..3 {
            let d = r[c] - t[c];
            l1 += d.abs();
            grad[3 * p + c] = (1.0 - lambda) * sign(d) / n;
        }
    }
    l1 /= n;
    let mut value = (1.0 - lambda) * l1;
    if lambda > 0.0 {
        // d/dx of -λ/2 * mean over channels
        let scale = -0.5 * lambda / 3.0;
        let mut s_total = 0.0;
        for c in 0..3 {
            let (s, g) = ssim_channel(&rendered.channel(c), &target.channel(c), w, h, Some(scale));
            s_total += s;
            for (p, gv) in g.unwrap().into_iter().enumerate() {
                grad[3 * p + c] += gv;
            }
        }
        value += lambda * (1.0 - s_total / 3.0) / 2.0;
    }
    Ok(LossValue { value, grad })
}

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
