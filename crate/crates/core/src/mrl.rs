//! Multi-region luminance (MRL) features.
//!
//! The square bounding box of the image circle is split into a `g × g` grid
//! of equal cells. A field-of-view mask selects the cells that take part, and
//! the feature vector holds the plain mean luminance of each selected cell in
//! row-major order (top to bottom, left to right).
//!
//! Mask geometry works in normalized grid coordinates: `u` runs left to right
//! and `v` top to bottom, both in `(-0.5, 0.5)`, so one unit is the image
//! circle diameter. A cell belongs to the ellipse mask when its center
//! satisfies `(u/a_h)² + ((v − offset_v)/a_v)² ≤ 1`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdr_io::LuminanceMap;
use crate::photometry::FisheyeGeometry;

/// The seven grid densities and their published in-view region counts.
pub const REFERENCE_GRIDS: [(usize, usize); 7] = [
    (10, 62),
    (15, 133),
    (20, 244),
    (25, 374),
    (30, 554),
    (35, 739),
    (40, 980),
];

/// Ellipse obtained by [`calibrate_ellipse`] over [`CalibrationSearch::default`]
/// against [`REFERENCE_GRIDS`].
///
/// Counts: 62, 134, 244, 375, 554, 740, 980 (residuals 0, +1, 0, +1, 0, +1, 0).
pub const CALIBRATED_ELLIPSE: EllipseParams = EllipseParams {
    a_h: 0.400,
    a_v: 0.514,
    offset_v: 0.093,
};

const INCLUSION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub g: usize,
}

impl GridSpec {
    pub fn new(g: usize) -> Result<Self> {
        if g < 2 {
            return Err(Error::InvalidParameter(format!("grid size {g} must be at least 2")));
        }
        Ok(GridSpec { g })
    }

    /// Normalized center of cell `(row, col)` as `(u, v)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        let g = self.g as f64;
        ((col as f64 + 0.5) / g - 0.5, (row as f64 + 0.5) / g - 0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipseParams {
    /// Horizontal semi-axis, diameter units.
    pub a_h: f64,
    /// Vertical semi-axis, diameter units.
    pub a_v: f64,
    /// Downward shift of the ellipse center, diameter units.
    #[serde(default)]
    pub offset_v: f64,
}

impl Default for EllipseParams {
    fn default() -> Self {
        CALIBRATED_ELLIPSE
    }
}

impl EllipseParams {
    pub fn centered(a_h: f64, a_v: f64) -> Self {
        EllipseParams {
            a_h,
            a_v,
            offset_v: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |a: f64| a > 0.0 && a <= 1.0;
        if !ok(self.a_h) || !ok(self.a_v) || !self.offset_v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "ellipse semi-axes ({}, {}) must lie in (0, 1]",
                self.a_h, self.a_v
            )));
        }
        Ok(())
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        let x = u / self.a_h;
        let y = (v - self.offset_v) / self.a_v;
        x * x + y * y <= 1.0 + INCLUSION_EPS
    }

    pub fn id(&self) -> String {
        format!("ellipse({:.3},{:.3},{:+.3})", self.a_h, self.a_v, self.offset_v)
    }
}

/// `ellipse:a_h,a_v[,offset_v]`
impl FromStr for EllipseParams {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.strip_prefix("ellipse:").unwrap_or(s);
        let nums: Vec<f64> = body
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("bad ellipse spec `{s}`")))?;
        let p = match nums.as_slice() {
            [a, b] => EllipseParams::centered(*a, *b),
            [a, b, o] => EllipseParams {
                a_h: *a,
                a_v: *b,
                offset_v: *o,
            },
            _ => return Err(Error::InvalidParameter(format!("bad ellipse spec `{s}`"))),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MaskKind {
    Ellipse(EllipseParams),
    Explicit,
}

/// Set of grid cells inside the field of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FovMask {
    pub grid: GridSpec,
    pub kind: MaskKind,
    /// `(row, col)` of every included cell, row-major.
    cells: Vec<(usize, usize)>,
}

impl FovMask {
    /// Mask from an explicit cell list; cells are sorted and deduplicated.
    pub fn explicit(grid: GridSpec, mut cells: Vec<(usize, usize)>) -> Result<Self> {
        if let Some(&(r, c)) = cells.iter().find(|(r, c)| *r >= grid.g || *c >= grid.g) {
            return Err(Error::InvalidParameter(format!(
                "cell ({r}, {c}) outside a {0}x{0} grid",
                grid.g
            )));
        }
        cells.sort_unstable();
        cells.dedup();
        Ok(FovMask {
            grid,
            kind: MaskKind::Explicit,
            cells,
        })
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn region_count(&self) -> usize {
        self.cells.len()
    }

    pub fn id(&self) -> String {
        match &self.kind {
            MaskKind::Ellipse(p) => p.id(),
            MaskKind::Explicit => "explicit".to_string(),
        }
    }

    /// Dataset code for this mask, e.g. `MRL-374`.
    pub fn reference_code(&self) -> String {
        format!("MRL-{}", self.cells.len())
    }

    /// One `grid,row,col` line per included cell.
    pub fn to_lines(&self) -> String {
        let mut s = String::new();
        for (r, c) in &self.cells {
            let _ = writeln!(s, "{},{},{}", self.grid.g, r, c);
        }
        s
    }

    /// Parses `grid,row,col` lines, keeping those for `grid`. Blank lines and
    /// `#` comments are ignored.
    pub fn from_lines(grid: GridSpec, text: &str) -> Result<Self> {
        let mut cells = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            let parsed: Option<Vec<usize>> = parts.iter().map(|p| p.parse().ok()).collect();
            match parsed.as_deref() {
                Some([g, r, c]) => {
                    if *g == grid.g {
                        cells.push((*r, *c));
                    }
                }
                _ if n == 0 && line.starts_with("grid") => {}
                _ => {
                    return Err(Error::Format(format!("bad mask line {}: `{line}`", n + 1)));
                }
            }
        }
        FovMask::explicit(grid, cells)
    }

    fn lookup(&self) -> Vec<Option<usize>> {
        let g = self.grid.g;
        let mut map = vec![None; g * g];
        for (k, (r, c)) in self.cells.iter().enumerate() {
            map[r * g + c] = Some(k);
        }
        map
    }
}

/// Cells whose centers fall inside the ellipse.
pub fn build_mask(grid: GridSpec, fov: &EllipseParams) -> Result<FovMask> {
    fov.validate()?;
    let mut cells = Vec::new();
    for row in 0..grid.g {
        for col in 0..grid.g {
            let (u, v) = grid.cell_center(row, col);
            if fov.contains(u, v) {
                cells.push((row, col));
            }
        }
    }
    Ok(FovMask {
        grid,
        kind: MaskKind::Ellipse(*fov),
        cells,
    })
}

/// Mean luminance of every masked region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrlFeatureVector {
    pub region_means: Vec<f64>,
    /// `true` where the region holds no in-circle pixel (its mean is 0).
    pub empty_regions: Vec<bool>,
    pub grid: GridSpec,
    pub mask_id: String,
}

/// Pixel-to-region assignment for a fixed image size, geometry and mask.
#[derive(Debug, Clone)]
pub struct MrlExtractor {
    width: usize,
    height: usize,
    region_of_pixel: Vec<Option<u32>>,
    pixel_counts: Vec<usize>,
    grid: GridSpec,
    mask_id: String,
}

impl MrlExtractor {
    pub fn new(width: usize, height: usize, geom: &FisheyeGeometry, mask: &FovMask) -> Result<Self> {
        geom.validate(width, height)?;
        let g = mask.grid.g;
        let lookup = mask.lookup();
        let left = geom.center_x - geom.radius_px;
        let top = geom.center_y - geom.radius_px;
        let side = 2.0 * geom.radius_px;
        let mut region_of_pixel = vec![None; width * height];
        let mut pixel_counts = vec![0; mask.region_count()];
        for y in 0..height {
            for x in 0..width {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let (dx, dy) = (px - geom.center_x, py - geom.center_y);
                if dx.hypot(dy) > geom.radius_px {
                    continue;
                }
                let col = (((px - left) / side * g as f64).floor() as isize).clamp(0, g as isize - 1) as usize;
                let row = (((py - top) / side * g as f64).floor() as isize).clamp(0, g as isize - 1) as usize;
                if let Some(k) = lookup[row * g + col] {
                    region_of_pixel[y * width + x] = Some(k as u32);
                    pixel_counts[k] += 1;
                }
            }
        }
        Ok(MrlExtractor {
            width,
            height,
            region_of_pixel,
            pixel_counts,
            grid: mask.grid,
            mask_id: mask.id(),
        })
    }

    pub fn region_count(&self) -> usize {
        self.pixel_counts.len()
    }

    pub fn extract(&self, lum: &LuminanceMap) -> Result<MrlFeatureVector> {
        if lum.width() != self.width || lum.height() != self.height {
            return Err(Error::Shape(format!(
                "image {}x{} does not match extractor {}x{}",
                lum.width(),
                lum.height(),
                self.width,
                self.height
            )));
        }
        let mut sums = vec![0.0; self.pixel_counts.len()];
        for (v, region) in lum.values().iter().zip(&self.region_of_pixel) {
            if let Some(k) = region {
                sums[*k as usize] += v;
            }
        }
        let region_means = sums
            .iter()
            .zip(&self.pixel_counts)
            .map(|(s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
            .collect();
        Ok(MrlFeatureVector {
            region_means,
            empty_regions: self.pixel_counts.iter().map(|&n| n == 0).collect(),
            grid: self.grid,
            mask_id: self.mask_id.clone(),
        })
    }
}

pub fn extract_mrl(lum: &LuminanceMap, geom: &FisheyeGeometry, mask: &FovMask) -> Result<MrlFeatureVector> {
    MrlExtractor::new(lum.width(), lum.height(), geom, mask)?.extract(lum)
}

/// Parameter grid explored by [`calibrate_ellipse`]; all values in
/// thousandths of a diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSearch {
    pub axis_min: u32,
    pub axis_max: u32,
    pub offset_min: u32,
    pub offset_max: u32,
}

impl Default for CalibrationSearch {
    fn default() -> Self {
        CalibrationSearch {
            axis_min: 300,
            axis_max: 600,
            offset_min: 0,
            offset_max: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub params: EllipseParams,
    pub counts: Vec<usize>,
    /// `count − target` per grid.
    pub residuals: Vec<i64>,
    pub total_abs_deviation: u64,
    pub exact_matches: usize,
}

/// Grid search for the ellipse whose region counts deviate least (total
/// absolute deviation) from `targets`. Ties prefer more exact matches, then
/// smaller offset, smaller `a_h`, smaller `a_v`.
pub fn calibrate_ellipse(targets: &[(usize, usize)], search: &CalibrationSearch) -> Result<Calibration> {
    if targets.is_empty() || search.axis_min == 0 || search.axis_min > search.axis_max {
        return Err(Error::InvalidParameter("empty calibration search".into()));
    }
    let axes: Vec<f64> = (search.axis_min..=search.axis_max).map(|i| i as f64 / 1000.0).collect();
    let centers: Vec<Vec<f64>> = targets
        .iter()
        .map(|&(g, _)| (0..g).map(|i| (i as f64 + 0.5) / g as f64 - 0.5).collect())
        .collect();

    // (deviation, -exact, offset index, a_h index, a_v index)
    type Key = (u64, i64, u32, usize, usize);
    let mut best: Option<(Key, Vec<usize>)> = None;
    let mut counts = vec![vec![0usize; targets.len()]; axes.len()];
    let mut thresholds = Vec::new();
    for offset_i in search.offset_min..=search.offset_max {
        let offset = offset_i as f64 / 1000.0;
        for (av_i, &a_v) in axes.iter().enumerate() {
            for (k, c) in centers.iter().enumerate() {
                // a cell is inside iff a_h ≥ |u| / sqrt(1 − ((v − offset)/a_v)²)
                thresholds.clear();
                for &v in c {
                    let y = (v - offset) / a_v;
                    let rhs = 1.0 - y * y;
                    if rhs <= 0.0 {
                        continue;
                    }
                    let root = rhs.sqrt();
                    thresholds.extend(c.iter().map(|u| u.abs() / root));
                }
                thresholds.sort_unstable_by(f64::total_cmp);
                for (ah_i, &a_h) in axes.iter().enumerate() {
                    counts[ah_i][k] = thresholds.partition_point(|&t| t <= a_h + INCLUSION_EPS);
                }
            }
            for (ah_i, row) in counts.iter().enumerate() {
                let dev: u64 = row
                    .iter()
                    .zip(targets)
                    .map(|(&n, &(_, t))| (n as i64 - t as i64).unsigned_abs())
                    .sum();
                let exact = row.iter().zip(targets).filter(|(n, (_, t))| *n == t).count() as i64;
                let key = (dev, -exact, offset_i, ah_i, av_i);
                if best.as_ref().is_none_or(|(b, _)| key < *b) {
                    best = Some((key, row.clone()));
                }
            }
        }
    }
    let ((dev, neg_exact, offset_i, ah_i, av_i), counts) = best.expect("non-empty search");
    Ok(Calibration {
        params: EllipseParams {
            a_h: axes[ah_i],
            a_v: axes[av_i],
            offset_v: offset_i as f64 / 1000.0,
        },
        residuals: counts
            .iter()
            .zip(targets)
            .map(|(&n, &(_, t))| n as i64 - t as i64)
            .collect(),
        counts,
        total_abs_deviation: dev,
        exact_matches: (-neg_exact) as usize,
    })
}
