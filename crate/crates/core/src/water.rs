//! Binary water masks and the exact Euclidean pixel-clearance map.
//!
//! Clearance of a pixel is the Euclidean distance between pixel centres to the
//! nearest non-water pixel, or `+∞` when the mask has no non-water pixel.

use std::path::Path;

use image::GrayImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Default height of the forced-water band at the bottom of the image.
pub const DEFAULT_BOTTOM_BAND_ROWS: u32 = 8;
pub const DEFAULT_MASK_THRESHOLD: u8 = 128;

/// Row-major boolean grid, `true` = water.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: u32,
    height: u32,
    cells: Vec<bool>,
}

impl Mask {
    pub fn new(width: u32, height: u32, cells: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("mask must be non-empty"));
        }
        if cells.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "mask has {} cells, expected {}×{}",
                cells.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, cells })
    }

    pub fn filled(width: u32, height: u32, water: bool) -> Result<Self> {
        Self::new(width, height, vec![water; width as usize * height as usize])
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut cells = Vec::with_capacity(width as usize * height as usize);
        for row in 0..height {
            for col in 0..width {
                cells.push(f(col, row));
            }
        }
        Self::new(width, height, cells)
    }

    /// Thresholds a grayscale raster: a pixel is bright when `value >= threshold`,
    /// and water when its brightness equals `water_is_bright`.
    pub fn from_gray(img: &GrayImage, threshold: u8, water_is_bright: bool) -> Result<Self> {
        let cells = img.pixels().map(|p| (p.0[0] >= threshold) == water_is_bright).collect();
        Self::new(img.width(), img.height(), cells)
    }

    /// Loads an 8-bit PNG or PGM mask.
    pub fn load(path: &Path, threshold: u8, water_is_bright: bool) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let img = image::open(path)
            .map_err(|source| Error::Image { context: path.display().to_string(), source })?;
        Self::from_gray(&img.to_luma8(), threshold, water_is_bright)
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |c, r| {
            image::Luma([if self.get(c, r) { 255 } else { 0 }])
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn get(&self, col: u32, row: u32) -> bool {
        self.cells[row as usize * self.width as usize + col as usize]
    }

    pub fn set(&mut self, col: u32, row: u32, water: bool) {
        let w = self.width as usize;
        self.cells[row as usize * w + col as usize] = water;
    }

    pub fn water_count(&self) -> usize {
        self.cells.iter().filter(|&&w| w).count()
    }
}

/// Forces the lowest `band_rows` rows to water.
pub fn apply_bottom_band(mask: &Mask, band_rows: u32) -> Result<Mask> {
    if band_rows > mask.height {
        return Err(Error::invalid(format!(
            "bottom band of {band_rows} rows exceeds mask height {}",
            mask.height
        )));
    }
    let mut out = mask.clone();
    let w = mask.width as usize;
    let start = (mask.height - band_rows) as usize * w;
    out.cells[start..].iter_mut().for_each(|c| *c = true);
    Ok(out)
}

/// Water mask together with its clearance map (pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct WaterGrid<T = f64> {
    width: u32,
    height: u32,
    water: Vec<bool>,
    clearance: Vec<T>,
}

impl<T: Real> WaterGrid<T> {
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn water(&self) -> &[bool] {
        &self.water
    }
    pub fn clearance(&self) -> &[T] {
        &self.clearance
    }

    fn index(&self, col: i64, row: i64) -> Option<usize> {
        (col >= 0 && row >= 0 && col < self.width as i64 && row < self.height as i64)
            .then(|| row as usize * self.width as usize + col as usize)
    }

    /// Water flag at an integer cell; `None` outside the grid.
    pub fn is_water(&self, col: i64, row: i64) -> Option<bool> {
        self.index(col, row).map(|i| self.water[i])
    }

    /// Clearance at an integer cell; `None` outside the grid.
    pub fn clearance_at(&self, col: i64, row: i64) -> Option<T> {
        self.index(col, row).map(|i| self.clearance[i])
    }

    pub fn mask(&self) -> Mask {
        Mask { width: self.width, height: self.height, cells: self.water.clone() }
    }
}

/// Exact Euclidean distance transform of the non-water set.
///
/// Separable lower-envelope method on integer squared distances; envelope
/// intersections are compared as exact fractions, so the result equals the
/// brute-force minimum bit for bit after the final square root.
pub fn clearance_map<T: Real>(mask: &Mask) -> WaterGrid<T> {
    let sq = squared_clearance(mask);
    let clearance = sq
        .iter()
        .map(|&d| match d {
            Some(d) => T::from_u64(d).expect("squared distance representable").sqrt(),
            None => T::infinity(),
        })
        .collect();
    WaterGrid { width: mask.width, height: mask.height, water: mask.cells.clone(), clearance }
}

/// Squared clearance per cell, `None` when no non-water pixel exists.
pub fn squared_clearance(mask: &Mask) -> Vec<Option<u64>> {
    let (w, h) = (mask.width as usize, mask.height as usize);

    // column pass: vertical distance to the nearest obstacle in the same column
    let mut col_dist: Vec<Option<u64>> = vec![None; w * h];
    for c in 0..w {
        let mut last: Option<usize> = None;
        for r in 0..h {
            if !mask.cells[r * w + c] {
                last = Some(r);
            }
            col_dist[r * w + c] = last.map(|l| (r - l) as u64);
        }
        let mut next: Option<usize> = None;
        for r in (0..h).rev() {
            if !mask.cells[r * w + c] {
                next = Some(r);
            }
            if let Some(n) = next {
                let d = (n - r) as u64;
                let cell = &mut col_dist[r * w + c];
                *cell = Some(cell.map_or(d, |e| e.min(d)));
            }
        }
    }

    // row pass: lower envelope of parabolas (x − q)² + f(q)
    let mut out = vec![None; w * h];
    let mut sites: Vec<(i64, i128)> = Vec::with_capacity(w);
    let mut starts: Vec<Boundary> = Vec::with_capacity(w);
    for r in 0..h {
        sites.clear();
        starts.clear();
        for q in 0..w {
            let Some(d) = col_dist[r * w + q] else { continue };
            let f = (d as i128) * (d as i128);
            let q = q as i64;
            while let Some(&(v, fv)) = sites.last() {
                let s = intersection(q, f, v, fv);
                if s.le(starts.last().expect("one boundary per site")) {
                    sites.pop();
                    starts.pop();
                } else {
                    break;
                }
            }
            let start = match sites.last() {
                None => Boundary::NegInf,
                Some(&(v, fv)) => intersection(q, f, v, fv),
            };
            sites.push((q, f));
            starts.push(start);
        }
        if sites.is_empty() {
            continue;
        }
        let mut k = 0;
        for x in 0..w as i64 {
            while k + 1 < sites.len() && starts[k + 1].lt_int(x) {
                k += 1;
            }
            let (v, fv) = sites[k];
            let dx = (x - v) as i128;
            out[r * w + x as usize] = Some((dx * dx + fv) as u64);
        }
    }
    out
}

/// Left boundary of a parabola's region in the lower envelope.
#[derive(Debug, Clone, Copy)]
enum Boundary {
    NegInf,
    /// `num / den` with `den > 0`.
    Frac(i128, i128),
}

impl Boundary {
    fn le(&self, other: &Boundary) -> bool {
        match (self, other) {
            (_, Boundary::NegInf) => matches!(self, Boundary::NegInf),
            (Boundary::NegInf, _) => true,
            (Boundary::Frac(a, b), Boundary::Frac(c, d)) => a * d <= c * b,
        }
    }

    fn lt_int(&self, x: i64) -> bool {
        match self {
            Boundary::NegInf => true,
            Boundary::Frac(n, d) => *n < (x as i128) * d,
        }
    }
}

/// Abscissa where parabolas rooted at `q > v` intersect.
fn intersection(q: i64, fq: i128, v: i64, fv: i128) -> Boundary {
    let (q128, v128) = (q as i128, v as i128);
    Boundary::Frac((fq + q128 * q128) - (fv + v128 * v128), 2 * (q128 - v128))
}

/// Scenario-level description of how a mask image is ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskSource {
    pub path: std::path::PathBuf,
    #[serde(default = "default_true")]
    pub water_is_bright: bool,
    #[serde(default = "default_threshold")]
    pub threshold: u8,
    #[serde(default = "default_band")]
    pub bottom_band_rows: u32,
}

fn default_true() -> bool {
    true
}
fn default_threshold() -> u8 {
    DEFAULT_MASK_THRESHOLD
}
fn default_band() -> u32 {
    DEFAULT_BOTTOM_BAND_ROWS
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(mask: &Mask) -> Vec<f64> {
        let (w, h) = (mask.width() as i64, mask.height() as i64);
        let obstacles: Vec<(i64, i64)> = (0..h)
            .flat_map(|r| (0..w).map(move |c| (c, r)))
            .filter(|&(c, r)| !mask.get(c as u32, r as u32))
            .collect();
        (0..h)
            .flat_map(|r| (0..w).map(move |c| (c, r)))
            .map(|(c, r)| {
                obstacles
                    .iter()
                    .map(|&(oc, or)| (((c - oc).pow(2) + (r - or).pow(2)) as f64).sqrt())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn all_water_is_infinite() {
        let g: WaterGrid = clearance_map(&Mask::filled(8, 8, true).unwrap());
        assert!(g.clearance().iter().all(|d| d.is_infinite() && *d > 0.0));
    }

    #[test]
    fn three_four_five() {
        let mut m = Mask::filled(8, 8, true).unwrap();
        m.set(0, 0, false);
        let g: WaterGrid = clearance_map(&m);
        assert_eq!(g.clearance_at(3, 4), Some(5.0));
        assert_eq!(g.clearance_at(0, 0), Some(0.0));
    }

    #[test]
    fn band_noop_and_forced_rows() {
        let m = Mask::filled(4, 10, false).unwrap();
        assert_eq!(apply_bottom_band(&m, 0).unwrap(), m);
        let b = apply_bottom_band(&m, 3).unwrap();
        for r in 0..10 {
            for c in 0..4 {
                assert_eq!(b.get(c, r), r >= 7);
            }
        }
        assert!(apply_bottom_band(&m, 11).is_err());
    }

    #[test]
    fn gray_threshold_and_polarity() {
        let img = GrayImage::from_raw(3, 1, vec![0, 127, 128]).unwrap();
        let m = Mask::from_gray(&img, 128, true).unwrap();
        assert_eq!(m.cells(), &[false, false, true]);
        let m = Mask::from_gray(&img, 128, false).unwrap();
        assert_eq!(m.cells(), &[true, true, false]);
    }

    fn arb_mask() -> impl Strategy<Value = Mask> {
        (1u32..20, 1u32..20).prop_flat_map(|(w, h)| {
            proptest::collection::vec(proptest::bool::weighted(0.8), (w * h) as usize)
                .prop_map(move |cells| Mask::new(w, h, cells).unwrap())
        })
    }

    proptest! {
        #[test]
        fn matches_brute_force(mask in arb_mask()) {
            let g: WaterGrid = clearance_map(&mask);
            prop_assert_eq!(g.clearance().to_vec(), brute(&mask));
        }

        #[test]
        fn zero_iff_non_water(mask in arb_mask()) {
            let g: WaterGrid = clearance_map(&mask);
            for (d, w) in g.clearance().iter().zip(mask.cells()) {
                prop_assert_eq!(*d == 0.0, !*w);
            }
        }

        #[test]
        fn lipschitz(mask in arb_mask()) {
            let g: WaterGrid = clearance_map(&mask);
            if g.clearance().iter().all(|d| d.is_finite()) {
                let w = mask.width() as i64;
                for r in 0..mask.height() as i64 {
                    for c in 0..w {
                        let a = g.clearance_at(c, r).unwrap();
                        for (dc, dr) in [(1, 0), (0, 1), (1, 1)] {
                            if let Some(b) = g.clearance_at(c + dc, r + dr) {
                                let step = ((dc * dc + dr * dr) as f64).sqrt();
                                prop_assert!((a - b).abs() <= step + 1e-12);
                            }
                        }
                    }
                }
            }
        }

        #[test]
        fn adding_obstacle_never_increases(mask in arb_mask(), pick in any::<prop::sample::Index>()) {
            let before: WaterGrid = clearance_map(&mask);
            let mut m2 = mask.clone();
            let i = pick.index(mask.cells().len());
            let (c, r) = ((i % mask.width() as usize) as u32, (i / mask.width() as usize) as u32);
            m2.set(c, r, false);
            let after: WaterGrid = clearance_map(&m2);
            for (a, b) in after.clearance().iter().zip(before.clearance()) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn band_idempotent_and_union(mask in arb_mask(), frac in 0.0f64..=1.0) {
            let rows = (frac * mask.height() as f64).floor() as u32;
            let once = apply_bottom_band(&mask, rows).unwrap();
            prop_assert_eq!(apply_bottom_band(&once, rows).unwrap(), once.clone());
            // set-union count oracle
            let w = mask.width() as usize;
            let band_start = (mask.height() - rows) as usize * w;
            let expected = mask.cells().iter().enumerate()
                .filter(|(i, &c)| c || *i >= band_start)
                .count();
            prop_assert_eq!(once.water_count(), expected);
        }
    }
}
