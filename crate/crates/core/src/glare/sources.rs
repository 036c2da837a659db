//! Glare source detection: threshold, connected components, centroid merge.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdr_io::LuminanceMap;
use crate::photometry::{angle_between, FisheyeGeometry, PixelTable, TaskZone};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceDetectionParams {
    /// Candidate pixels exceed this multiple of the task luminance.
    pub threshold_multiplier: f64,
    /// Fixed luminance threshold, cd/m²; overrides the multiplier when set.
    pub absolute_floor: Option<f64>,
    /// Components whose centroids are closer than this (radians) are merged.
    pub merge_radius: f64,
}

impl Default for SourceDetectionParams {
    fn default() -> Self {
        SourceDetectionParams {
            threshold_multiplier: 5.0,
            absolute_floor: None,
            merge_radius: 0.2,
        }
    }
}

impl SourceDetectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_multiplier > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "threshold multiplier {} must exceed 1",
                self.threshold_multiplier
            )));
        }
        if !(self.merge_radius >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "merge radius {} must be non-negative",
                self.merge_radius
            )));
        }
        if let Some(f) = self.absolute_floor {
            if !(f.is_finite() && f >= 0.0) {
                return Err(Error::InvalidParameter(format!("absolute floor {f} must be ≥ 0")));
            }
        }
        Ok(())
    }

    /// Luminance above which a pixel is a source candidate.
    pub fn threshold(&self, task_lum: f64) -> Result<f64> {
        match self.absolute_floor {
            Some(f) => Ok(f),
            None if task_lum > 0.0 => Ok(self.threshold_multiplier * task_lum),
            None => Err(Error::Detection(
                "task luminance is zero and no absolute floor is set".into(),
            )),
        }
    }
}

/// One detected glare source.
#[derive(Debug, Clone, PartialEq)]
pub struct GlareSource {
    /// Row-major pixel indices, ascending.
    pub pixel_ids: Vec<usize>,
    /// Solid-angle weighted mean luminance, cd/m².
    pub luminance: f64,
    /// Total solid angle, sr.
    pub omega: f64,
    /// Solid-angle weighted mean position index.
    pub position_index: f64,
    /// Illuminance contributed at the lens, `Σ L·ω·cos θ`, lux.
    pub illuminance: f64,
    pub centroid_theta: f64,
    pub centroid_phi: f64,
}

struct Component {
    pixels: Vec<usize>,
    // ω-weighted direction sum
    dir: [f64; 3],
}

/// Detects sources using the task luminance of `zone` for the threshold.
pub fn detect_sources(
    lum: &LuminanceMap,
    geom: &FisheyeGeometry,
    params: &SourceDetectionParams,
    zone: &TaskZone,
) -> Result<Vec<GlareSource>> {
    let table = PixelTable::for_map(lum, geom)?;
    let stats = crate::photometry::scene_stats_with(lum, &table, zone)?;
    detect_sources_with(lum, &table, params, stats.task_lum)
}

pub fn detect_sources_with(
    lum: &LuminanceMap,
    table: &PixelTable,
    params: &SourceDetectionParams,
    task_lum: f64,
) -> Result<Vec<GlareSource>> {
    params.validate()?;
    if lum.width() != table.width() || lum.height() != table.height() {
        return Err(Error::Shape("luminance map and geometry table differ in size".into()));
    }
    let threshold = params.threshold(task_lum)?;
    let (w, h) = (table.width(), table.height());
    let values = lum.values();
    let cells = table.cells();

    let candidate = |i: usize| cells[i].is_some() && values[i] > threshold;
    let mut seen = vec![false; w * h];
    let mut components = Vec::new();
    let mut stack = Vec::new();
    for start in 0..w * h {
        if seen[start] || !candidate(start) {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            pixels.push(i);
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] && candidate(j) {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        let mut dir = [0.0; 3];
        for &i in &pixels {
            let g = cells[i].as_ref().unwrap();
            let d = g.direction();
            for k in 0..3 {
                dir[k] += g.omega * d[k];
            }
        }
        components.push(Component { pixels, dir });
    }

    // single-linkage merge of component centroids
    let mut parent: Vec<usize> = (0..components.len()).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let centroids: Vec<[f64; 3]> = components.iter().map(|c| normalize(c.dir)).collect();
    for a in 0..components.len() {
        for b in a + 1..components.len() {
            if angle_between(centroids[a], centroids[b]) <= params.merge_radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); components.len()];
    for (c, comp) in components.iter().enumerate() {
        let r = find(&mut parent, c);
        groups[r].extend_from_slice(&comp.pixels);
    }

    let mut sources: Vec<GlareSource> = groups
        .into_iter()
        .filter(|g| !g.is_empty())
        .map(|mut ids| {
            ids.sort_unstable();
            aggregate(ids, values, table)
        })
        .collect();
    sources.sort_by_key(|s| s.pixel_ids[0]);
    Ok(sources)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if n == 0.0 {
        [0.0, 0.0, 1.0]
    } else {
        [v[0] / n, v[1] / n, v[2] / n]
    }
}

fn aggregate(pixel_ids: Vec<usize>, values: &[f64], table: &PixelTable) -> GlareSource {
    let (mut omega, mut lw, mut pw, mut e) = (0.0, 0.0, 0.0, 0.0);
    let mut dir = [0.0; 3];
    for &i in &pixel_ids {
        let g = table.cells()[i].as_ref().unwrap();
        omega += g.omega;
        lw += values[i] * g.omega;
        pw += g.position_index * g.omega;
        e += values[i] * g.omega * g.theta.cos();
        let d = g.direction();
        for k in 0..3 {
            dir[k] += g.omega * d[k];
        }
    }
    let c = normalize(dir);
    let centroid_theta = c[2].clamp(-1.0, 1.0).acos();
    let centroid_phi = if c[0] == 0.0 && c[1] == 0.0 {
        0.0
    } else {
        c[0].atan2(c[1])
    };
    GlareSource {
        pixel_ids,
        luminance: lw / omega,
        omega,
        position_index: pw / omega,
        illuminance: e,
        centroid_theta,
        centroid_phi,
    }
}
