//! Grid containers shared by every stage: depth maps with explicit holes,
//! RGB images and binary masks.
//!
//! All grids are row-major with the origin at the top-left pixel, `x` growing
//! rightward and `y` downward. Cell `(x, y)` lives at index `y * width + x`.

mod io;

pub use io::{
    decode_depth, decode_image, decode_mask, encode_depth, encode_image_ppm, encode_image_raw, encode_mask, read_depth,
    read_image, read_mask, write_depth, write_image, write_mask, ImageFormat, QUIET_NAN_BITS,
};

use crate::error::{Error, Result};

/// Returns true when a depth cell holds the hole sentinel.
///
/// Holes are NaN, so `v == v` is false for them; never compare depth cells
/// with `==` to detect holes.
#[inline]
pub fn is_hole(v: f64) -> bool {
    v.is_nan()
}

/// The in-memory hole sentinel.
pub const HOLE: f64 = f64::NAN;

fn check_nonzero(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("grid dimensions must be at least 1x1, got {width}x{height}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct DepthMap {
    width: usize,
    height: usize,
    cells: Vec<f64>,
}

impl DepthMap {
    /// Builds a depth map from row-major cells. NaN cells are holes; every
    /// other cell must be finite and strictly positive.
    pub fn new(width: usize, height: usize, cells: Vec<f64>) -> Result<Self> {
        check_nonzero(width, height)?;
        if cells.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} cells for a {width}x{height} map, got {}",
                width * height,
                cells.len()
            )));
        }
        if let Some((i, v)) = cells.iter().enumerate().find(|(_, v)| !is_hole(**v) && !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!("depth cell {i} is {v}; non-hole depths must be finite and positive")));
        }
        Ok(Self { width, height, cells })
    }

    pub fn filled(width: usize, height: usize, depth: f64) -> Result<Self> {
        Self::new(width, height, vec![depth; width * height])
    }

    /// A map with every cell a hole.
    pub fn holes(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![HOLE; width * height])
    }

    /// Builds a map by evaluating `f(x, y)`; `None` yields a hole.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> Option<f64>) -> Result<Self> {
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                cells.push(f(x, y).unwrap_or(HOLE));
            }
        }
        Self::new(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Raw row-major cells, holes included as NaN.
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn into_cells(self) -> Vec<f64> {
        self.cells
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let v = self.cells[self.index(x, y)];
        (!is_hole(v)).then_some(v)
    }

    #[inline]
    pub fn is_hole(&self, x: usize, y: usize) -> bool {
        is_hole(self.cells[self.index(x, y)])
    }

    /// Overwrites a cell. Panics if `depth` is non-positive or not finite.
    pub fn set(&mut self, x: usize, y: usize, depth: Option<f64>) {
        let v = match depth {
            Some(d) => {
                assert!(d.is_finite() && d > 0.0, "invalid depth {d}");
                d
            }
            None => HOLE,
        };
        let i = self.index(x, y);
        self.cells[i] = v;
    }

    pub fn valid_count(&self) -> usize {
        self.cells.iter().filter(|v| !is_hole(**v)).count()
    }

    /// Median of the non-hole cells (lower median for even counts).
    pub fn median(&self) -> Option<f64> {
        let mut vals: Vec<f64> = self.cells.iter().copied().filter(|v| !is_hole(*v)).collect();
        if vals.is_empty() {
            return None;
        }
        let mid = (vals.len() - 1) / 2;
        let (_, m, _) = vals.select_nth_unstable_by(mid, f64::total_cmp);
        Some(*m)
    }

    /// Applies `f` to every non-hole cell; results that are not finite and
    /// positive become holes.
    pub fn map_valid(&self, mut f: impl FnMut(f64) -> f64) -> DepthMap {
        let cells = self
            .cells
            .iter()
            .map(|&v| {
                if is_hole(v) {
                    HOLE
                } else {
                    let r = f(v);
                    if r.is_finite() && r > 0.0 {
                        r
                    } else {
                        HOLE
                    }
                }
            })
            .collect();
        DepthMap { width: self.width, height: self.height, cells }
    }

    /// Bitwise equality of all cells, holes included.
    pub fn bit_eq(&self, other: &DepthMap) -> bool {
        self.dims() == other.dims()
            && self
                .cells
                .iter()
                .zip(&other.cells)
                .all(|(a, b)| a.to_bits() == b.to_bits() || (is_hole(*a) && is_hole(*b)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, pixels: Vec<[f64; 3]>) -> Result<Self> {
        check_nonzero(width, height)?;
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} pixels for a {width}x{height} image, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 3]) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[[f64; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[f64; 3]] {
        &mut self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 3] {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let w = self.width;
        self.pixels[y * w + x] = rgb;
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.pixels.iter().map(|p| p[c]).collect()
    }

    /// Copy with every channel clamped into `[0, 1]`.
    pub fn clamped(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| p.map(|v| v.clamp(0.0, 1.0))).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinMask {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl BinMask {
    pub fn new(width: usize, height: usize, cells: Vec<bool>) -> Result<Self> {
        check_nonzero(width, height)?;
        if cells.len() != width * height {
            return Err(Error::invalid(format!(
                "expected {} cells for a {width}x{height} mask, got {}",
                width * height,
                cells.len()
            )));
        }
        Ok(Self { width, height, cells })
    }

    pub fn filled(width: usize, height: usize, on: bool) -> Result<Self> {
        Self::new(width, height, vec![on; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                cells.push(f(x, y));
            }
        }
        Self::new(width, height, cells)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        let w = self.width;
        self.cells[y * w + x] = on;
    }

    pub fn count_ones(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count_ones() as f64 / self.cells.len() as f64
    }

    /// White-on-black visualization of the mask.
    pub fn to_image(&self) -> RgbImage {
        RgbImage {
            width: self.width,
            height: self.height,
            pixels: self.cells.iter().map(|&c| if c { [1.0; 3] } else { [0.0; 3] }).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_rejects_bad_cells() {
        assert!(DepthMap::new(2, 1, vec![1.0, 0.0]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0, -2.0]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0, f64::INFINITY]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0, HOLE]).is_ok());
        assert!(DepthMap::new(0, 1, vec![]).is_err());
        assert!(DepthMap::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn row_major_layout() {
        let m = DepthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.get(1, 0), Some(2.0));
        assert_eq!(m.get(0, 1), Some(3.0));
    }

    #[test]
    fn holes_are_not_self_equal() {
        let m = DepthMap::holes(1, 1).unwrap();
        let v = m.cells()[0];
        #[allow(clippy::eq_op)]
        let self_equal = v == v;
        assert!(!self_equal);
        assert!(m.is_hole(0, 0));
        assert_eq!(m.get(0, 0), None);
    }

    #[test]
    fn median_skips_holes() {
        let m = DepthMap::new(4, 1, vec![5.0, HOLE, 1.0, 3.0]).unwrap();
        assert_eq!(m.median(), Some(3.0));
        assert_eq!(DepthMap::holes(2, 2).unwrap().median(), None);
    }

    #[test]
    fn map_valid_turns_non_positive_into_holes() {
        let m = DepthMap::new(2, 1, vec![3.0, 1.0]).unwrap();
        let out = m.map_valid(|v| v - 2.0);
        assert_eq!(out.get(0, 0), Some(1.0));
        assert!(out.is_hole(1, 0));
    }
}
