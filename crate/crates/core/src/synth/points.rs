use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, WeightedIndex};

use super::{nearest_hit, Primitive, SceneSpec};
use crate::camera::{project, Camera};
use crate::error::{Error, Result};
use crate::render::{Gaussian, GaussianCloud};

/// Relative tolerance for a ray hit to count as reaching the sampled point.
const VISIBILITY_TOL: f64 = 1e-6;

fn sample_surface(p: &Primitive, rng: &mut impl Rng) -> Vector3<f64> {
    match p {
        Primitive::Plane { center, u, v, half_extents, .. } => {
            center
                + u * rng.gen_range(-half_extents[0]..=half_extents[0])
                + v * rng.gen_range(-half_extents[1]..=half_extents[1])
        }
        Primitive::Sphere { center, radius, .. } => {
            let n = Normal::new(0.0, 1.0).unwrap();
            loop {
                let d = Vector3::from_fn(|_, _| n.sample(rng));
                if let Some(d) = d.try_normalize(1e-9) {
                    return center + d * *radius;
                }
            }
        }
    }
}

/// Whether `cam` sees `p` unoccluded at an in-bounds pixel.
pub(crate) fn visible(spec: &SceneSpec, cam: &Camera, p: &Vector3<f64>) -> bool {
    let Ok(proj) = project(p, cam) else { return false };
    if !cam.in_bounds(proj.pixel.x, proj.pixel.y) {
        return false;
    }
    let o = cam.center();
    let d = p - o;
    match nearest_hit(spec, &o, &d) {
        Some(hit) => (hit.t - 1.0).abs() <= VISIBILITY_TOL,
        None => false,
    }
}

/// Area-weighted surface samples seen by at least two cameras, the way a
/// feature track needs two views to triangulate. Gives up after `200 n`
/// draws and returns what it has.
pub fn sample_sfm_points(spec: &SceneSpec, n: usize, seed: u64) -> Result<Vec<Vector3<f64>>> {
    let cams = spec.cameras()?;
    let weights = WeightedIndex::new(spec.primitives.iter().map(Primitive::area))
        .map_err(|e| Error::invalid(format!("primitive areas: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..200 * n.max(1) {
        if out.len() == n {
            break;
        }
        let p = sample_surface(&spec.primitives[weights.sample(&mut rng)], &mut rng);
        if cams.iter().filter(|c| visible(spec, c, &p)).take(2).count() == 2 {
            out.push(p);
        }
    }
    Ok(out)
}

/// Per camera, the indices of the points it sees unoccluded.
pub fn visibility_tracks(spec: &SceneSpec, points: &[Vector3<f64>]) -> Result<Vec<Vec<usize>>> {
    Ok(spec.cameras()?.iter().map(|c| (0..points.len()).filter(|&i| visible(spec, c, &points[i])).collect()).collect())
}

/// One isotropic Gaussian per point: half the nearest-neighbor distance as
/// its size, the albedo of the closest surface as its color, opacity 0.5 and
/// Gaussian position noise of std `spec.init_jitter`.
pub fn fit_initial_cloud(spec: &SceneSpec, points: &[Vector3<f64>], seed: u64) -> Result<GaussianCloud> {
    if points.is_empty() {
        return Err(Error::TooFewPoints { found: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter =
        Normal::new(0.0, spec.init_jitter.max(0.0)).map_err(|e| Error::invalid(format!("init jitter: {e}")))?;
    let gaussians = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| (p - q).norm())
                .fold(f64::INFINITY, f64::min);
            let sigma = if nn.is_finite() { (nn / 2.0).max(1e-4) } else { 0.01 * spec.ring.radius };
            let prim = spec
                .primitives
                .iter()
                .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
                .expect("validated scenes have primitives");
            let mean = if spec.init_jitter > 0.0 { p + Vector3::from_fn(|_, _| jitter.sample(&mut rng)) } else { *p };
            Gaussian::isotropic(mean, sigma, 0.0, prim.albedo_at(p))
        })
        .collect();
    Ok(GaussianCloud::new(gaussians))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_lie_on_surfaces_and_are_seen_twice() {
        let s = SceneSpec::desk();
        let cams = s.cameras().unwrap();
        let pts = sample_sfm_points(&s, 64, 5).unwrap();
        assert_eq!(pts.len(), 64);
        for p in &pts {
            let d = s.primitives.iter().map(|q| q.distance(p)).fold(f64::INFINITY, f64::min);
            assert!(d < 1e-9);
            assert!(cams.iter().filter(|c| visible(&s, c, p)).count() >= 2);
        }
        assert_eq!(pts, sample_sfm_points(&s, 64, 5).unwrap());
        let tracks = visibility_tracks(&s, &pts).unwrap();
        assert_eq!(tracks.len(), cams.len());
        for i in 0..pts.len() {
            assert!(tracks.iter().filter(|t| t.contains(&i)).count() >= 2);
        }
    }

    #[test]
    fn hidden_points_are_not_visible() {
        let s = SceneSpec::desk();
        let cam = &s.cameras().unwrap()[5];
        // the ball center is inside the sphere, always occluded
        let Primitive::Sphere { center, .. } = s.primitives[3] else { panic!() };
        assert!(!visible(&s, cam, &center));
    }

    #[test]
    fn initial_cloud_shape() {
        let s = SceneSpec { init_jitter: 0.0, ..SceneSpec::desk() };
        let pts = vec![Vector3::new(0.0, -0.6, 0.0), Vector3::new(0.2, -0.6, 0.0)];
        let c = fit_initial_cloud(&s, &pts, 0).unwrap();
        assert_eq!(c.len(), 2);
        let g = c.gaussians()[0];
        assert_eq!(g.mean, pts[0]);
        assert!((g.log_scale.x.exp() - 0.1).abs() < 1e-12);
        assert_eq!(g.opacity(), 0.5);
        assert_eq!(g.color, s.primitives[0].albedo_at(&pts[0]));

        let single = fit_initial_cloud(&s, &pts[..1], 0).unwrap();
        assert!((single.gaussians()[0].log_scale.x.exp() - 0.032).abs() < 1e-12);
        assert!(matches!(fit_initial_cloud(&s, &[], 0), Err(Error::TooFewPoints { found: 0 })));
    }

    #[test]
    fn jitter_moves_means() {
        let s = SceneSpec::desk();
        let pts = sample_sfm_points(&s, 200, 1).unwrap();
        let c = fit_initial_cloud(&s, &pts, 2).unwrap();
        let rms = (c.gaussians().iter().zip(&pts).map(|(g, p)| (g.mean - p).norm_squared()).sum::<f64>()
            / (3.0 * pts.len() as f64))
            .sqrt();
        assert!((rms - s.init_jitter).abs() < 0.2 * s.init_jitter, "{rms}");
    }
}
