use std::fs;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub const PARAMS_PER_GAUSSIAN: usize = 14;

const CLOUD_MAGIC: &[u8; 4] = b"GCL1";

/// One primitive. The quaternion `(w, x, y, z)` is normalized on use, so
/// optimizer steps may leave it slightly off unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vector3<f64>,
    pub rotation: [f64; 4],
    /// Per-axis log standard deviations.
    pub log_scale: Vector3<f64>,
    /// Opacity is `sigmoid(opacity_logit)`.
    pub opacity_logit: f64,
    pub color: [f64; 3],
}

impl Gaussian {
    pub fn isotropic(mean: Vector3<f64>, sigma: f64, opacity_logit: f64, color: [f64; 3]) -> Self {
        Self { mean, rotation: [1.0, 0.0, 0.0, 0.0], log_scale: Vector3::repeat(sigma.ln()), opacity_logit, color }
    }

    pub fn opacity(&self) -> f64 {
        super::sigmoid(self.opacity_logit)
    }

    /// Flat parameter vector in checkpoint order:
    /// mean (3), quaternion (4), log-scale (3), opacity logit (1), color (3).
    pub fn to_params(&self) -> [f64; PARAMS_PER_GAUSSIAN] {
        let m = &self.mean;
        let q = &self.rotation;
        let s = &self.log_scale;
        let c = &self.color;
        [m.x, m.y, m.z, q[0], q[1], q[2], q[3], s.x, s.y, s.z, self.opacity_logit, c[0], c[1], c[2]]
    }

    pub fn from_params(p: &[f64; PARAMS_PER_GAUSSIAN]) -> Self {
        Self {
            mean: Vector3::new(p[0], p[1], p[2]),
            rotation: [p[3], p[4], p[5], p[6]],
            log_scale: Vector3::new(p[7], p[8], p[9]),
            opacity_logit: p[10],
            color: [p[11], p[12], p[13]],
        }
    }
}

/// Ordered primitives plus a gradient buffer of the same shape.
///
/// Every mutable access to the primitives bumps a generation counter so a
/// render cache can tell it is stale.
#[derive(Clone, Debug)]
pub struct GaussianCloud {
    gaussians: Vec<Gaussian>,
    grads: Vec<[f64; PARAMS_PER_GAUSSIAN]>,
    generation: u64,
}

impl PartialEq for GaussianCloud {
    fn eq(&self, other: &Self) -> bool {
        self.gaussians == other.gaussians
    }
}

impl GaussianCloud {
    pub fn new(gaussians: Vec<Gaussian>) -> Self {
        let grads = vec![[0.0; PARAMS_PER_GAUSSIAN]; gaussians.len()];
        Self { gaussians, grads, generation: 0 }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn gaussians(&self) -> &[Gaussian] {
        &self.gaussians
    }

    pub fn gaussians_mut(&mut self) -> &mut [Gaussian] {
        self.generation += 1;
        &mut self.gaussians
    }

    pub fn grads(&self) -> &[[f64; PARAMS_PER_GAUSSIAN]] {
        &self.grads
    }

    pub(crate) fn grads_mut(&mut self) -> &mut [[f64; PARAMS_PER_GAUSSIAN]] {
        &mut self.grads
    }

    /// Mutable access to primitives and gradients together, for optimizers.
    pub fn params_and_grads_mut(&mut self) -> (&mut [Gaussian], &[[f64; PARAMS_PER_GAUSSIAN]]) {
        self.generation += 1;
        (&mut self.gaussians, &self.grads)
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            *g = [0.0; PARAMS_PER_GAUSSIAN];
        }
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Bitwise equality of all parameters.
    pub fn bit_eq(&self, other: &GaussianCloud) -> bool {
        self.len() == other.len()
            && self
                .gaussians
                .iter()
                .zip(&other.gaussians)
                .all(|(a, b)| a.to_params().iter().zip(b.to_params().iter()).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

/// Checkpoint bytes: `GCL1`, count as little-endian `u32`, then 14
/// little-endian `f32` per primitive.
pub fn encode_cloud(cloud: &GaussianCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + cloud.len() * PARAMS_PER_GAUSSIAN * 4);
    out.extend_from_slice(CLOUD_MAGIC);
    out.extend_from_slice(&(cloud.len() as u32).to_le_bytes());
    for g in cloud.gaussians() {
        for v in g.to_params() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

pub fn decode_cloud(bytes: &[u8]) -> Result<GaussianCloud> {
    if bytes.len() < 8 {
        return Err(Error::format("checkpoint too short"));
    }
    if &bytes[..4] != CLOUD_MAGIC {
        return Err(Error::format("bad checkpoint magic"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let payload = &bytes[8..];
    if payload.len() != count * PARAMS_PER_GAUSSIAN * 4 {
        return Err(Error::format(format!(
            "checkpoint payload has {} bytes, expected {}",
            payload.len(),
            count * PARAMS_PER_GAUSSIAN * 4
        )));
    }
    let gaussians = payload
        .chunks_exact(PARAMS_PER_GAUSSIAN * 4)
        .map(|chunk| {
            let mut p = [0.0; PARAMS_PER_GAUSSIAN];
            for (dst, c) in p.iter_mut().zip(chunk.chunks_exact(4)) {
                *dst = f32::from_le_bytes(c.try_into().unwrap()) as f64;
            }
            Gaussian::from_params(&p)
        })
        .collect();
    Ok(GaussianCloud::new(gaussians))
}

pub fn write_cloud(cloud: &GaussianCloud, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_cloud(cloud))?;
    Ok(())
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<GaussianCloud> {
    decode_cloud(&fs::read(path)?)
}
