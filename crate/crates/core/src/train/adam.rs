use super::LearningRates;
use crate::render::{Gaussian, GaussianCloud, PARAMS_PER_GAUSSIAN};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-15;

/// Adam with one step size per parameter slot, bias-corrected moments and
/// unit-quaternion projection after each step.
#[derive(Clone, Debug)]
pub(crate) struct Adam {
    lr: [f64; PARAMS_PER_GAUSSIAN],
    m: Vec<[f64; PARAMS_PER_GAUSSIAN]>,
    v: Vec<[f64; PARAMS_PER_GAUSSIAN]>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: &LearningRates, extent: f64) -> Self {
        let mut slots = [0.0; PARAMS_PER_GAUSSIAN];
        slots[0..3].fill(lr.means * extent);
        slots[3..7].fill(lr.rotations);
        slots[7..10].fill(lr.scales);
        slots[10] = lr.opacities;
        slots[11..14].fill(lr.colors);
        Self { lr: slots, m: vec![[0.0; PARAMS_PER_GAUSSIAN]; len], v: vec![[0.0; PARAMS_PER_GAUSSIAN]; len], t: 0 }
    }

    /// One update from the gradients stored in the cloud.
    pub fn step(&mut self, cloud: &mut GaussianCloud) {
        self.t += 1;
        let c1 = 1.0 - BETA1.powi(self.t);
        let c2 = 1.0 - BETA2.powi(self.t);
        let (gaussians, grads) = cloud.params_and_grads_mut();
        for (i, (g, grad)) in gaussians.iter_mut().zip(grads).enumerate() {
            let mut p = g.to_params();
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for k in 0..PARAMS_PER_GAUSSIAN {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * grad[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * grad[k] * grad[k];
                p[k] -= self.lr[k] * (m[k] / c1) / ((v[k] / c2).sqrt() + EPS);
            }
            let n = (p[3] * p[3] + p[4] * p[4] + p[5] * p[5] + p[6] * p[6]).sqrt();
            if n > 0.0 {
                for q in &mut p[3..7] {
                    *q /= n;
                }
            }
            *g = Gaussian::from_params(&p);
        }
    }
}
