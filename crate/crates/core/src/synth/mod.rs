//! Synthetic scenes with exact ground truth, simulated monocular priors and
//! simulated SfM points.
//!
//! A scene is a handful of textured planes and spheres watched by a ring of
//! cameras looking at a common target. Ray casting gives exact color and
//! z-depth per pixel; priors are the ground truth pushed through an affine
//! map, multiplicative noise, smooth local blobs and box smoothing.

mod bundle;
mod planted;
mod points;
mod prior;
mod raycast;

pub use bundle::{format_tracks, parse_tracks, read_bundle, write_bundle, SceneBundle};
pub use planted::plane_cloud;
pub use points::{fit_initial_cloud, sample_sfm_points, visibility_tracks};
pub use prior::{make_prior, PriorCorruption};
pub use raycast::{nearest_hit, raycast_ground_truth, Hit};

use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::camera::Camera;
use crate::error::{Error, Result};

/// Surface color pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Albedo {
    Solid([f64; 3]),
    /// Two-color checkerboard with square cells of side `period`, laid out
    /// in plane coordinates for planes and world coordinates for spheres.
    Checker {
        a: [f64; 3],
        b: [f64; 3],
        period: f64,
    },
}

impl Albedo {
    fn at(&self, coords: [f64; 3]) -> [f64; 3] {
        match *self {
            Albedo::Solid(c) => c,
            Albedo::Checker { a, b, period } => {
                let k: i64 = coords.iter().map(|c| (c / period).floor() as i64).sum();
                if k.rem_euclid(2) == 0 {
                    a
                } else {
                    b
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    /// Rectangle through `center` spanned by unit orthogonal axes `u`, `v`
    /// with the given half extents along each.
    Plane {
        center: Vector3<f64>,
        u: Vector3<f64>,
        v: Vector3<f64>,
        half_extents: [f64; 2],
        albedo: Albedo,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
        albedo: Albedo,
    },
}

impl Primitive {
    pub fn area(&self) -> f64 {
        match self {
            Primitive::Plane { half_extents, .. } => 4.0 * half_extents[0] * half_extents[1],
            Primitive::Sphere { radius, .. } => 4.0 * std::f64::consts::PI * radius * radius,
        }
    }

    /// Surface color at a point on the primitive.
    pub fn albedo_at(&self, p: &Vector3<f64>) -> [f64; 3] {
        match self {
            Primitive::Plane { center, u, v, albedo, .. } => {
                let d = p - center;
                albedo.at([d.dot(u), d.dot(v), 0.0])
            }
            Primitive::Sphere { albedo, .. } => albedo.at([p.x, p.y, p.z]),
        }
    }

    /// Distance from a point to the primitive surface.
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        match self {
            Primitive::Plane { center, u, v, half_extents, .. } => {
                let d = p - center;
                let n = u.cross(v);
                let a = (d.dot(u).abs() - half_extents[0]).max(0.0);
                let b = (d.dot(v).abs() - half_extents[1]).max(0.0);
                (a * a + b * b + d.dot(&n).powi(2)).sqrt()
            }
            Primitive::Sphere { center, radius, .. } => ((p - center).norm() - radius).abs(),
        }
    }
}

/// Cameras evenly spaced on a horizontal arc around `target`, each looking
/// at it with world `+y` up.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraRing {
    pub count: usize,
    pub radius: f64,
    pub height: f64,
    pub target: Vector3<f64>,
    /// Arc start and span in degrees; a full ring is `(0, 360)`.
    pub arc_start: f64,
    pub arc_span: f64,
    /// Uniform jitter of each eye coordinate, in scene units.
    pub jitter: f64,
    pub seed: u64,
    pub focal: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneSpec {
    pub primitives: Vec<Primitive>,
    pub ring: CameraRing,
    pub width: usize,
    pub height: usize,
    pub background: [f64; 3],
    /// Points used for prior alignment.
    pub sfm_point_count: usize,
    /// Points used to initialize the Gaussian cloud.
    pub init_point_count: usize,
    /// Std of the Gaussian position noise added at initialization.
    pub init_jitter: f64,
    /// Every `test_every`-th view (starting at 0) is held out.
    pub test_every: usize,
    pub prior: PriorCorruption,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.ring.count < 2 {
            return Err(Error::invalid("a scene needs at least 2 cameras"));
        }
        if self.primitives.is_empty() {
            return Err(Error::invalid("a scene needs at least one primitive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be non-zero"));
        }
        if self.test_every < 2 {
            return Err(Error::invalid("test_every must be at least 2"));
        }
        if !(self.ring.focal > 0.0) || !(self.ring.radius > 0.0) {
            return Err(Error::invalid("ring focal and radius must be positive"));
        }
        if self.prior.noise_sigma < 0.0 {
            return Err(Error::invalid("prior noise must be non-negative"));
        }
        let cams = self.cameras()?;
        for (i, p) in self.primitives.iter().enumerate() {
            let c = match p {
                Primitive::Plane { center, .. } | Primitive::Sphere { center, .. } => center,
            };
            if !cams.iter().any(|cam| cam.to_camera(c).z > 0.0) {
                return Err(Error::invalid(format!("primitive {i} is behind every camera")));
            }
        }
        Ok(())
    }

    pub fn cameras(&self) -> Result<Vec<Camera>> {
        let r = &self.ring;
        let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
        let step = if (r.arc_span - 360.0).abs() < 1e-9 {
            r.arc_span / r.count as f64
        } else {
            r.arc_span / (r.count - 1).max(1) as f64
        };
        (0..r.count)
            .map(|i| {
                let a = (r.arc_start + step * i as f64).to_radians();
                let mut eye = r.target + Vector3::new(r.radius * a.sin(), r.height, r.radius * a.cos());
                if r.jitter > 0.0 {
                    eye += Vector3::from_fn(|_, _| rng.gen_range(-r.jitter..=r.jitter));
                }
                Camera::look_at(
                    eye,
                    r.target,
                    Vector3::y(),
                    r.focal,
                    r.focal,
                    (self.width as f64 - 1.0) / 2.0,
                    (self.height as f64 - 1.0) / 2.0,
                    self.width,
                    self.height,
                )
            })
            .collect()
    }

    /// `(train, test)` view indices.
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.ring.count).partition(|i| i % self.test_every != 0)
    }

    /// Axis-aligned extent scale used for learning-rate scaling.
    pub fn extent(&self) -> f64 {
        self.ring.radius
    }

    /// The reference desk scene: a checkered floor and side wall, a plain
    /// back wall and a checkered ball, seen by 16 cameras on a 110° arc with
    /// 64×48 images.
    pub fn desk() -> Self {
        let checker = |a: [f64; 3], b: [f64; 3], period: f64| Albedo::Checker { a, b, period };
        SceneSpec {
            primitives: vec![
                Primitive::Plane {
                    center: Vector3::new(0.0, -0.6, 0.0),
                    u: Vector3::x(),
                    v: Vector3::z(),
                    half_extents: [2.0, 2.0],
                    albedo: checker([0.85, 0.8, 0.7], [0.3, 0.25, 0.2], 0.35),
                },
                Primitive::Plane {
                    center: Vector3::new(0.0, 0.6, -1.2),
                    u: Vector3::x(),
                    v: Vector3::y(),
                    half_extents: [2.0, 1.2],
                    albedo: Albedo::Solid([0.55, 0.65, 0.8]),
                },
                Primitive::Plane {
                    center: Vector3::new(-1.4, 0.6, 0.2),
                    u: Vector3::z(),
                    v: Vector3::y(),
                    half_extents: [1.4, 1.2],
                    albedo: checker([0.9, 0.5, 0.4], [0.5, 0.2, 0.2], 0.5),
                },
                Primitive::Sphere {
                    center: Vector3::new(0.2, -0.15, 0.1),
                    radius: 0.45,
                    albedo: checker([0.95, 0.9, 0.3], [0.2, 0.5, 0.3], 0.25),
                },
            ],
            ring: CameraRing {
                count: 16,
                radius: 3.2,
                height: 0.9,
                target: Vector3::new(0.0, -0.1, 0.0),
                arc_start: -10.0,
                arc_span: 110.0,
                jitter: 0.1,
                seed: 11,
                focal: 52.0,
            },
            width: 64,
            height: 48,
            background: [0.0; 3],
            sfm_point_count: 256,
            init_point_count: 1200,
            init_jitter: 0.05,
            test_every: 4,
            prior: PriorCorruption::default(),
            seed: 1,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SceneSpec { primitives: Vec::new(), ..SceneSpec::desk() };
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(format!("expected key=value, got `{line}`")))?;
            let nums = |n: usize| -> Result<Vec<f64>> {
                let v: Vec<f64> = value
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(format!("{key}: {e}")))?;
                if v.len() != n {
                    return Err(bad(format!("{key}: expected {n} numbers, found {}", v.len())));
                }
                Ok(v)
            };
            let num = || nums(1).map(|v| v[0]);
            let count = || -> Result<usize> {
                value.parse().map_err(|_| bad(format!("{key}: expected a non-negative integer")))
            };
            let seed =
                || -> Result<u64> { value.parse().map_err(|_| bad(format!("{key}: expected an unsigned integer"))) };
            let vec3 = || nums(3).map(|v| Vector3::new(v[0], v[1], v[2]));
            match key {
                "width" => spec.width = count()?,
                "height" => spec.height = count()?,
                "focal" => spec.ring.focal = num()?,
                "cameras" => spec.ring.count = count()?,
                "ring_radius" => spec.ring.radius = num()?,
                "ring_height" => spec.ring.height = num()?,
                "target" => spec.ring.target = vec3()?,
                "arc_start" => spec.ring.arc_start = num()?,
                "arc_span" => spec.ring.arc_span = num()?,
                "jitter" => spec.ring.jitter = num()?,
                "camera_seed" => spec.ring.seed = seed()?,
                "background" => {
                    let v = nums(3)?;
                    spec.background = [v[0], v[1], v[2]];
                }
                "sfm_points" => spec.sfm_point_count = count()?,
                "init_points" => spec.init_point_count = count()?,
                "init_jitter" => spec.init_jitter = num()?,
                "test_every" => spec.test_every = count()?,
                "seed" => spec.seed = seed()?,
                "prior_scale" => spec.prior.scale = num()?,
                "prior_shift" => spec.prior.shift = num()?,
                "prior_noise" => spec.prior.noise_sigma = num()?,
                "prior_blobs" => spec.prior.blob_count = count()?,
                "prior_blob_radius" => spec.prior.blob_radius = num()?,
                "prior_blob_magnitude" => spec.prior.blob_magnitude = num()?,
                "prior_smoothing" => spec.prior.smoothing_radius = count()?,
                "prior_seed" => spec.prior.seed = seed()?,
                "plane" | "sphere" => {
                    spec.primitives.push(parse_primitive(key, value).map_err(|e| bad(e.to_string()))?)
                }
                _ => return Err(bad(format!("unknown key `{key}`"))),
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn format(&self) -> String {
        let r = &self.ring;
        let p = &self.prior;
        let v3 = |v: &Vector3<f64>| format!("{:?} {:?} {:?}", v.x, v.y, v.z);
        let mut s = format!(
            "width={}\nheight={}\nfocal={:?}\ncameras={}\nring_radius={:?}\nring_height={:?}\ntarget={}\n\
             arc_start={:?}\narc_span={:?}\njitter={:?}\ncamera_seed={}\nbackground={:?} {:?} {:?}\n\
             sfm_points={}\ninit_points={}\ninit_jitter={:?}\ntest_every={}\nseed={}\n\
             prior_scale={:?}\nprior_shift={:?}\nprior_noise={:?}\nprior_blobs={}\nprior_blob_radius={:?}\n\
             prior_blob_magnitude={:?}\nprior_smoothing={}\nprior_seed={}\n",
            self.width,
            self.height,
            r.focal,
            r.count,
            r.radius,
            r.height,
            v3(&r.target),
            r.arc_start,
            r.arc_span,
            r.jitter,
            r.seed,
            self.background[0],
            self.background[1],
            self.background[2],
            self.sfm_point_count,
            self.init_point_count,
            self.init_jitter,
            self.test_every,
            self.seed,
            p.scale,
            p.shift,
            p.noise_sigma,
            p.blob_count,
            p.blob_radius,
            p.blob_magnitude,
            p.smoothing_radius,
            p.seed,
        );
        for prim in &self.primitives {
            let (key, body, albedo) = match prim {
                Primitive::Plane { center, u, v, half_extents, albedo } => (
                    "plane",
                    format!("{} {} {} {:?} {:?}", v3(center), v3(u), v3(v), half_extents[0], half_extents[1]),
                    albedo,
                ),
                Primitive::Sphere { center, radius, albedo } => {
                    ("sphere", format!("{} {:?}", v3(center), radius), albedo)
                }
            };
            let pat = match albedo {
                Albedo::Solid(c) => format!("solid {:?} {:?} {:?}", c[0], c[1], c[2]),
                Albedo::Checker { a, b, period } => {
                    format!("checker {:?} {:?} {:?} {:?} {:?} {:?} {:?}", a[0], a[1], a[2], b[0], b[1], b[2], period)
                }
            };
            s.push_str(&format!("{key}={body} {pat}\n"));
        }
        s
    }
}

/// `plane = cx cy cz ux uy uz vx vy vz hu hv PATTERN` or
/// `sphere = cx cy cz r PATTERN`, with `PATTERN` either `solid r g b` or
/// `checker r g b r g b period`.
fn parse_primitive(kind: &str, value: &str) -> Result<Primitive> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    let n_geom = if kind == "plane" { 11 } else { 4 };
    if tokens.len() < n_geom + 1 {
        return Err(Error::format(format!("{kind} needs {n_geom} numbers and a pattern")));
    }
    let num = |t: &str| t.parse::<f64>().map_err(|e| Error::format(format!("{kind}: {e}")));
    let g: Vec<f64> = tokens[..n_geom].iter().map(|t| num(t)).collect::<Result<_>>()?;
    let pat: Vec<f64> = tokens[n_geom + 1..].iter().map(|t| num(t)).collect::<Result<_>>()?;
    let albedo = match (tokens[n_geom], pat.len()) {
        ("solid", 3) => Albedo::Solid([pat[0], pat[1], pat[2]]),
        ("checker", 7) if pat[6] > 0.0 => {
            Albedo::Checker { a: [pat[0], pat[1], pat[2]], b: [pat[3], pat[4], pat[5]], period: pat[6] }
        }
        (name, _) => return Err(Error::format(format!("{kind}: bad pattern `{name}` with {} values", pat.len()))),
    };
    let v3 = |i: usize| Vector3::new(g[i], g[i + 1], g[i + 2]);
    if kind == "plane" {
        let u = v3(3).try_normalize(1e-12).ok_or_else(|| Error::format("plane: zero u axis"))?;
        let v = v3(6).try_normalize(1e-12).ok_or_else(|| Error::format("plane: zero v axis"))?;
        if u.dot(&v).abs() > 1e-6 {
            return Err(Error::format("plane: axes must be orthogonal"));
        }
        if !(g[9] > 0.0 && g[10] > 0.0) {
            return Err(Error::format("plane: half extents must be positive"));
        }
        Ok(Primitive::Plane { center: v3(0), u, v, half_extents: [g[9], g[10]], albedo })
    } else {
        if !(g[3] > 0.0) {
            return Err(Error::format("sphere: radius must be positive"));
        }
        Ok(Primitive::Sphere { center: v3(0), radius: g[3], albedo })
    }
}
