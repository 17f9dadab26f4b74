use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{fit_initial_cloud, make_prior, raycast_ground_truth, sample_sfm_points, visibility_tracks, SceneSpec};
use crate::align::{read_points, write_points};
use crate::camera::{read_cameras, write_cameras, Camera};
use crate::error::{Error, Result};
use crate::raster::{read_depth, read_image, write_depth, write_image, DepthMap, ImageFormat, RgbImage};
use crate::render::{read_cloud, write_cloud, GaussianCloud};

/// Everything a training run reads: per-view images, exact depths and
/// simulated priors, alignment points, the initial cloud and the split.
#[derive(Clone, Debug)]
pub struct SceneBundle {
    pub spec: SceneSpec,
    pub cameras: Vec<Camera>,
    pub images: Vec<RgbImage>,
    pub depths: Vec<DepthMap>,
    pub priors: Vec<DepthMap>,
    pub sfm_points: Vec<Vector3<f64>>,
    /// Per view, indices into `sfm_points` of the points it observes.
    pub tracks: Vec<Vec<usize>>,
    pub init_cloud: GaussianCloud,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SceneBundle {
    /// Ray-casts every view and draws points and priors from the seeds in
    /// `spec`.
    pub fn generate(spec: &SceneSpec) -> Result<Self> {
        spec.validate()?;
        let cameras = spec.cameras()?;
        let (images, depths): (Vec<_>, Vec<_>) =
            cameras.par_iter().map(|c| raycast_ground_truth(spec, c)).collect::<Vec<_>>().into_iter().unzip();
        let priors = depths.iter().enumerate().map(|(i, d)| make_prior(d, &spec.prior.for_view(i))).collect();
        let sfm_points = sample_sfm_points(spec, spec.sfm_point_count, spec.seed)?;
        let tracks = visibility_tracks(spec, &sfm_points)?;
        let init_points = sample_sfm_points(spec, spec.init_point_count, spec.seed.wrapping_add(1))?;
        let init_cloud = fit_initial_cloud(spec, &init_points, spec.seed.wrapping_add(2))?;
        let (train, test) = spec.split();
        Ok(Self { spec: spec.clone(), cameras, images, depths, priors, sfm_points, tracks, init_cloud, train, test })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }
}

fn view_path(dir: &Path, i: usize, what: &str) -> std::path::PathBuf {
    dir.join(format!("view_{i:03}_{what}"))
}

fn format_indices(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// Writes `scene.txt`, `cameras.txt`, `points.txt`, `tracks.txt`,
/// `init.gcl`, `split.txt` and per view `view_NNN_rgb.imgf` (with a `.ppm` preview),
/// `view_NNN_depth.dmap` and `view_NNN_prior.dmap`.
pub fn write_bundle(b: &SceneBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("scene.txt"), b.spec.format())?;
    write_cameras(&b.cameras, dir.join("cameras.txt"))?;
    write_points(&b.sfm_points, dir.join("points.txt"))?;
    fs::write(dir.join("tracks.txt"), format_tracks(&b.tracks))?;
    write_cloud(&b.init_cloud, dir.join("init.gcl"))?;
    fs::write(
        dir.join("split.txt"),
        format!("train={}\ntest={}\n", format_indices(&b.train), format_indices(&b.test)),
    )?;
    for i in 0..b.len() {
        write_image(&b.images[i], view_path(dir, i, "rgb.imgf"), ImageFormat::Raw)?;
        write_image(&b.images[i], view_path(dir, i, "rgb.ppm"), ImageFormat::Ppm)?;
        write_depth(&b.depths[i], view_path(dir, i, "depth.dmap"))?;
        write_depth(&b.priors[i], view_path(dir, i, "prior.dmap"))?;
    }
    Ok(())
}

/// One `view=N points=I J ...` line per view.
pub fn format_tracks(tracks: &[Vec<usize>]) -> String {
    tracks.iter().enumerate().map(|(v, t)| format!("view={v} points={}\n", format_indices(t))).collect()
}

pub fn parse_tracks(text: &str, views: usize, points: usize) -> Result<Vec<Vec<usize>>> {
    let bad = |line: &str| Error::format(format!("tracks: bad line `{line}`"));
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let rest = line.strip_prefix(&format!("view={} points=", out.len())).ok_or_else(|| bad(line))?;
        let ids = rest
            .split_whitespace()
            .map(|t| t.parse::<usize>().ok().filter(|&i| i < points).ok_or_else(|| bad(line)))
            .collect::<Result<Vec<_>>>()?;
        out.push(ids);
    }
    if out.len() != views {
        return Err(Error::format(format!("tracks: expected {views} views, found {}", out.len())));
    }
    Ok(out)
}

fn parse_split(text: &str, views: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut train = None;
    let mut test = None;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let (k, v) =
            line.split_once('=').ok_or_else(|| Error::format(format!("split: expected key=value, got `{line}`")))?;
        let ids = v
            .split_whitespace()
            .map(|t| match t.parse::<usize>() {
                Ok(i) if i < views => Ok(i),
                _ => Err(Error::format(format!("split: bad view id `{t}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        match k.trim() {
            "train" => train = Some(ids),
            "test" => test = Some(ids),
            other => return Err(Error::format(format!("split: unknown key `{other}`"))),
        }
    }
    match (train, test) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::format("split: needs both train and test lines")),
    }
}

pub fn read_bundle(dir: impl AsRef<Path>) -> Result<SceneBundle> {
    let dir = dir.as_ref();
    let spec = SceneSpec::read(dir.join("scene.txt"))?;
    let cameras = read_cameras(dir.join("cameras.txt"))?;
    let (train, test) = parse_split(&fs::read_to_string(dir.join("split.txt"))?, cameras.len())?;
    let mut images = Vec::with_capacity(cameras.len());
    let mut depths = Vec::with_capacity(cameras.len());
    let mut priors = Vec::with_capacity(cameras.len());
    for (i, cam) in cameras.iter().enumerate() {
        let img = read_image(view_path(dir, i, "rgb.imgf"))?;
        let depth = read_depth(view_path(dir, i, "depth.dmap"))?;
        let prior = read_depth(view_path(dir, i, "prior.dmap"))?;
        for dims in [img.dims(), depth.dims(), prior.dims()] {
            if dims != cam.dims() {
                return Err(Error::DimensionMismatch { expected: cam.dims(), actual: dims });
            }
        }
        images.push(img);
        depths.push(depth);
        priors.push(prior);
    }
    let sfm_points = read_points(dir.join("points.txt"))?;
    let tracks = parse_tracks(&fs::read_to_string(dir.join("tracks.txt"))?, cameras.len(), sfm_points.len())?;
    Ok(SceneBundle {
        spec,
        sfm_points,
        tracks,
        init_cloud: read_cloud(dir.join("init.gcl"))?,
        cameras,
        images,
        depths,
        priors,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::PriorCorruption;

    fn small() -> SceneSpec {
        let mut s = SceneSpec::desk();
        s.ring.count = 4;
        s.width = 16;
        s.height = 12;
        s.ring.focal = 13.0;
        s.sfm_point_count = 20;
        s.init_point_count = 30;
        s.test_every = 2;
        s.prior = PriorCorruption { noise_sigma: 0.1, seed: 3, ..PriorCorruption::default() };
        s
    }

    #[test]
    fn roundtrip_is_f32_exact() {
        let b = SceneBundle::generate(&small()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&b, dir.path()).unwrap();
        let r = read_bundle(dir.path()).unwrap();
        assert_eq!(r.spec, b.spec);
        assert_eq!((r.train.clone(), r.test.clone()), (vec![1, 3], vec![0, 2]));
        assert_eq!(r.len(), 4);
        for i in 0..4 {
            for (a, b) in r.priors[i].cells().iter().zip(b.priors[i].cells()) {
                assert!(a.is_nan() && b.is_nan() || *a == *b as f32 as f64);
            }
        }
        assert_eq!(r.sfm_points.len(), 20);
        assert_eq!(r.tracks, b.tracks);
        assert_eq!(r.init_cloud.len(), 30);
        // a second round trip is bit-stable
        let dir2 = tempfile::tempdir().unwrap();
        write_bundle(&r, dir2.path()).unwrap();
        for name in ["view_001_prior.dmap", "init.gcl", "points.txt", "tracks.txt", "cameras.txt"] {
            assert_eq!(fs::read(dir.path().join(name)).unwrap(), fs::read(dir2.path().join(name)).unwrap(), "{name}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = SceneBundle::generate(&small()).unwrap();
        let b = SceneBundle::generate(&small()).unwrap();
        assert!(a.init_cloud.bit_eq(&b.init_cloud));
        assert!(a.priors.iter().zip(&b.priors).all(|(x, y)| x.bit_eq(y)));
        assert_eq!(a.sfm_points, b.sfm_points);
    }

    #[test]
    fn bad_split_is_rejected() {
        assert!(parse_split("train=0 1\n", 4).is_err());
        assert!(parse_split("train=0 9\ntest=1\n", 4).is_err());
        assert!(parse_split("train=0\ntest=1\nval=2\n", 4).is_err());
        assert!(parse_tracks("view=0 points=1\n", 2, 5).is_err());
        assert!(parse_tracks("view=0 points=1\nview=1 points=7\n", 2, 5).is_err());
        assert_eq!(parse_tracks(&format_tracks(&[vec![1, 2], vec![]]), 2, 5).unwrap(), vec![vec![1, 2], vec![]]);
    }
}
