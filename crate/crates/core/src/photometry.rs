//! Equidistant fisheye geometry and scene-level photometry.
//!
//! Pixel coordinates refer to pixel centers, so pixel `(x, y)` sits at
//! `(x + 0.5, y + 0.5)` in image space. Azimuth is measured from "up",
//! clockwise, and the view axis points out of the image center.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdr_io::LuminanceMap;

/// Image-circle description of an equidistant fisheye image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisheyeGeometry {
    pub center_x: f64,
    pub center_y: f64,
    /// Radius of the image circle in pixels; maps to a 90° field angle.
    pub radius_px: f64,
}

impl FisheyeGeometry {
    /// Circle centered in the image with radius `min(width, height) / 2`.
    pub fn for_image(width: usize, height: usize) -> Self {
        FisheyeGeometry {
            center_x: width as f64 / 2.0,
            center_y: height as f64 / 2.0,
            radius_px: width.min(height) as f64 / 2.0,
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let r = self.radius_px;
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Geometry(format!("radius {r} must be positive")));
        }
        const SLACK: f64 = 1e-9;
        if self.center_x - r < -SLACK
            || self.center_y - r < -SLACK
            || self.center_x + r > width as f64 + SLACK
            || self.center_y + r > height as f64 + SLACK
        {
            return Err(Error::Geometry(format!(
                "image circle (c=({}, {}), r={r}) exceeds {width}x{height} image",
                self.center_x, self.center_y
            )));
        }
        Ok(())
    }

    /// Equidistant focal length `f = radius / (π/2)` in pixels per radian.
    pub fn focal_px(&self) -> f64 {
        self.radius_px / FRAC_PI_2
    }

    /// Image position (pixel-space, not pixel index) of a view direction
    /// given as field angle and azimuth.
    pub fn project(&self, theta: f64, phi: f64) -> (f64, f64) {
        let r = theta * self.focal_px();
        (self.center_x + r * phi.sin(), self.center_y - r * phi.cos())
    }
}

/// Geometry of one pixel inside the image circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGeometry {
    /// Field angle from the view axis, radians.
    pub theta: f64,
    /// Azimuth, radians, 0 = up, positive clockwise, in (-π, π].
    pub phi: f64,
    /// Solid angle subtended by the pixel, sr.
    pub omega: f64,
    /// Guth position index (≥ 1).
    pub position_index: f64,
}

impl PixelGeometry {
    /// Unit direction as (right, up, forward).
    pub fn direction(&self) -> [f64; 3] {
        direction(self.theta, self.phi)
    }
}

pub fn direction(theta: f64, phi: f64) -> [f64; 3] {
    let s = theta.sin();
    [s * phi.sin(), s * phi.cos(), theta.cos()]
}

/// Great-circle angle between two unit vectors.
pub fn angle_between(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    cn.atan2(dot)
}

/// Solid angle of one pixel at field angle `theta`: `sin(θ)/θ / f²`.
pub fn pixel_solid_angle(theta: f64, focal_px: f64) -> f64 {
    let sinc = if theta.abs() < 1e-8 {
        1.0 - theta * theta / 6.0
    } else {
        theta.sin() / theta
    };
    sinc / (focal_px * focal_px)
}

/// Guth position index for a direction at field angle `theta` and azimuth
/// `phi` (radians).
///
/// Above the horizontal plane through the line of sight this is the Guth
/// equation in its IES handbook form, capped at 16. Below it, the Iwata
/// extension `1 + f·R` applies, where `R` is the radial offset in the plane
/// perpendicular to the line of sight (capped at 3) and `f` is 0.8 for
/// `R ≤ 0.6` and 1.2 beyond.
pub fn guth_position_index(theta: f64, phi: f64) -> f64 {
    let up = theta.sin() * phi.cos();
    if up < 0.0 {
        let r = if theta >= FRAC_PI_2 { 3.0 } else { theta.tan().min(3.0) };
        let fact = if r > 0.6 { 1.2 } else { 0.8 };
        return 1.0 + fact * r;
    }
    let tau = phi.abs().to_degrees();
    let sigma = theta.to_degrees();
    let linear = (35.2 - 0.31889 * tau - 1.22 * (-2.0 * tau / 9.0).exp()) / 1000.0;
    let quad = (21.0 + 0.26667 * tau - 0.002963 * tau * tau) / 100_000.0;
    (linear * sigma + quad * sigma * sigma).exp().min(16.0)
}

/// Computes the geometry of pixel `(x, y)`, or `None` when its center lies
/// outside the image circle. Pixels exactly on the boundary are inside.
pub fn pixel_geometry(geom: &FisheyeGeometry, x: usize, y: usize) -> Option<PixelGeometry> {
    let dx = x as f64 + 0.5 - geom.center_x;
    let dy_up = geom.center_y - (y as f64 + 0.5);
    let r = dx.hypot(dy_up);
    if r > geom.radius_px {
        return None;
    }
    let theta = r / geom.radius_px * FRAC_PI_2;
    let phi = if r == 0.0 { 0.0 } else { dx.atan2(dy_up) };
    Some(PixelGeometry {
        theta,
        phi,
        omega: pixel_solid_angle(theta, geom.focal_px()),
        position_index: guth_position_index(theta, phi),
    })
}

/// Per-pixel geometry for a whole image, computed once and reused.
#[derive(Debug, Clone)]
pub struct PixelTable {
    width: usize,
    height: usize,
    geom: FisheyeGeometry,
    cells: Vec<Option<PixelGeometry>>,
}

impl PixelTable {
    pub fn new(geom: FisheyeGeometry, width: usize, height: usize) -> Result<Self> {
        geom.validate(width, height)?;
        let mut cells = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                cells.push(pixel_geometry(&geom, x, y));
            }
        }
        Ok(PixelTable {
            width,
            height,
            geom,
            cells,
        })
    }

    pub fn for_map(lum: &LuminanceMap, geom: &FisheyeGeometry) -> Result<Self> {
        PixelTable::new(*geom, lum.width(), lum.height())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn geometry(&self) -> &FisheyeGeometry {
        &self.geom
    }

    pub fn get(&self, x: usize, y: usize) -> Option<&PixelGeometry> {
        self.cells[y * self.width + x].as_ref()
    }

    pub fn cells(&self) -> &[Option<PixelGeometry>] {
        &self.cells
    }

    /// `(index, geometry)` of every in-circle pixel in row-major order.
    pub fn inside(&self) -> impl Iterator<Item = (usize, &PixelGeometry)> {
        self.cells
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.as_ref().map(|g| (i, g)))
    }

    pub fn total_solid_angle(&self) -> f64 {
        self.inside().map(|(_, g)| g.omega).sum()
    }

    fn check(&self, lum: &LuminanceMap) -> Result<()> {
        if lum.width() != self.width || lum.height() != self.height {
            return Err(Error::Shape(format!(
                "luminance map {}x{} does not match geometry table {}x{}",
                lum.width(),
                lum.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

/// Vertical illuminance at the lens, `Σ L·ω·cos θ` over the image circle, lux.
pub fn vertical_illuminance(lum: &LuminanceMap, geom: &FisheyeGeometry) -> Result<f64> {
    let table = PixelTable::for_map(lum, geom)?;
    vertical_illuminance_with(lum, &table)
}

pub fn vertical_illuminance_with(lum: &LuminanceMap, table: &PixelTable) -> Result<f64> {
    table.check(lum)?;
    let values = lum.values();
    Ok(table.inside().map(|(i, g)| values[i] * g.omega * g.theta.cos()).sum())
}

/// Circular task area on the view hemisphere, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskZone {
    /// Field angle of the zone center.
    pub theta_deg: f64,
    /// Azimuth of the zone center (0 = up, clockwise).
    pub phi_deg: f64,
    /// Angular radius of the zone.
    pub radius_deg: f64,
}

impl Default for TaskZone {
    fn default() -> Self {
        TaskZone {
            theta_deg: 0.0,
            phi_deg: 0.0,
            radius_deg: 30.0,
        }
    }
}

impl TaskZone {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_deg > 0.0) || self.theta_deg < 0.0 || self.theta_deg + self.radius_deg > 90.0 + 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "task zone (θ={}°, r={}°) must lie inside the image circle",
                self.theta_deg, self.radius_deg
            )));
        }
        Ok(())
    }

    fn center(&self) -> [f64; 3] {
        direction(self.theta_deg.to_radians(), self.phi_deg.to_radians())
    }

    pub fn contains(&self, g: &PixelGeometry) -> bool {
        angle_between(self.center(), g.direction()) <= self.radius_deg.to_radians() + 1e-12
    }

    /// Row-major indices of the table pixels that fall in the zone.
    pub fn pixels(&self, table: &PixelTable) -> Vec<usize> {
        let c = self.center();
        let r = self.radius_deg.to_radians() + 1e-12;
        table
            .inside()
            .filter(|(_, g)| angle_between(c, g.direction()) <= r)
            .map(|(i, _)| i)
            .collect()
    }
}

/// `theta,phi,radius` in degrees.
impl std::str::FromStr for TaskZone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("bad task zone `{s}`")))?;
        let [theta_deg, phi_deg, radius_deg] = v[..] else {
            return Err(Error::InvalidParameter(format!(
                "task zone `{s}` needs theta,phi,radius"
            )));
        };
        let z = TaskZone {
            theta_deg,
            phi_deg,
            radius_deg,
        };
        z.validate()?;
        Ok(z)
    }
}

/// Luminance statistics of a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneStats {
    pub ev: f64,
    pub av_lum: f64,
    pub med_lum: f64,
    pub max_lum: f64,
    pub task_lum: f64,
    pub av_lum_pos: f64,
    pub av_lum_pos2: f64,
    pub med_lum_pos: f64,
    pub med_lum_pos2: f64,
}

/// Smallest value whose cumulative weight reaches half the total.
pub fn weighted_lower_median(samples: &mut [(f64, f64)]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if !(total > 0.0) {
        return None;
    }
    let half = total / 2.0;
    let mut acc = 0.0;
    for &(v, w) in samples.iter() {
        acc += w;
        if acc >= half {
            return Some(v);
        }
    }
    samples.last().map(|s| s.0)
}

fn weighted_mean(values: &[f64], weights: impl Iterator<Item = (usize, f64)>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, w) in weights {
        num += values[i] * w;
        den += w;
    }
    num / den
}

pub fn scene_stats(lum: &LuminanceMap, geom: &FisheyeGeometry, zone: &TaskZone) -> Result<SceneStats> {
    let table = PixelTable::for_map(lum, geom)?;
    scene_stats_with(lum, &table, zone)
}

/// Solid-angle weighted statistics; the `_pos` variants additionally weight
/// each pixel by `1/P` and the `_pos2` variants by `1/P²`.
pub fn scene_stats_with(lum: &LuminanceMap, table: &PixelTable, zone: &TaskZone) -> Result<SceneStats> {
    table.check(lum)?;
    zone.validate()?;
    let values = lum.values();

    let task = zone.pixels(table);
    if task.is_empty() {
        return Err(Error::EmptyRegion("task zone covers no pixel centers".into()));
    }
    let task_lum = weighted_mean(values, task.iter().map(|&i| (i, table.cells[i].unwrap().omega)));

    let inside: Vec<(usize, &PixelGeometry)> = table.inside().collect();
    if inside.is_empty() {
        return Err(Error::EmptyRegion("image circle covers no pixel centers".into()));
    }
    let ev = inside.iter().map(|(i, g)| values[*i] * g.omega * g.theta.cos()).sum();
    let av_lum = weighted_mean(values, inside.iter().map(|(i, g)| (*i, g.omega)));
    let av_lum_pos = weighted_mean(values, inside.iter().map(|(i, g)| (*i, g.omega / g.position_index)));
    let av_lum_pos2 = weighted_mean(
        values,
        inside
            .iter()
            .map(|(i, g)| (*i, g.omega / (g.position_index * g.position_index))),
    );
    let max_lum = inside.iter().map(|(i, _)| values[*i]).fold(f64::NEG_INFINITY, f64::max);

    let median = |weight: &dyn Fn(&PixelGeometry) -> f64| {
        let mut s: Vec<(f64, f64)> = inside.iter().map(|(i, g)| (values[*i], weight(g))).collect();
        weighted_lower_median(&mut s).unwrap_or(0.0)
    };
    let med_lum = median(&|g| g.omega);
    let med_lum_pos = median(&|g| g.omega / g.position_index);
    let med_lum_pos2 = median(&|g| g.omega / (g.position_index * g.position_index));

    Ok(SceneStats {
        ev,
        av_lum,
        med_lum,
        max_lum,
        task_lum,
        av_lum_pos,
        av_lum_pos2,
        med_lum_pos,
        med_lum_pos2,
    })
}

/// Solid angle of a cone with half-angle `alpha`.
pub fn cone_solid_angle(alpha: f64) -> f64 {
    2.0 * PI * (1.0 - alpha.cos())
}
