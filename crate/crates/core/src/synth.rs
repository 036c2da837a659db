//! Synthetic labelled fisheye scenes for desk-scale testing.
//!
//! A scene is a smoothed log-normal grey background plus one to a few bright
//! disk or rectangle sources placed in fixed "window" zones with jitter. The
//! generative glare score is
//!
//! `gen_score = log10(1 + max_s(L_s²·ω_s / P_s²) / Ev^1.87)`
//!
//! and the pre-noise label is glare iff `gen_score > score_threshold`. Scenes
//! closer than `score_margin` to the threshold are redrawn. The
//! constants are arbitrary and only echo the contrast term of common indices.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hdr_io::{quantize_rgbe, to_luminance, write_radiance_hdr, HdrImage, LuminanceConversion};
use crate::photometry::{guth_position_index, vertical_illuminance_with, FisheyeGeometry, PixelTable};

/// Zone centers `(θ, φ)` in degrees where sources are placed.
pub const SOURCE_ZONES: [(f64, f64); 4] = [(35.0, -55.0), (45.0, 65.0), (62.0, -15.0), (25.0, 150.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSampling {
    /// Exactly `round(n · positive_fraction)` glare scenes.
    #[default]
    Quota,
    /// Each scene is glare with probability `positive_fraction`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub n_scenes: usize,
    pub positive_fraction: f64,
    pub sampling: LabelSampling,
    /// Square image side, pixels.
    pub size: usize,
    /// Median of the log-normal background luminance, cd/m².
    pub background_median: f64,
    /// Log-space standard deviation of the scene background level.
    pub background_sigma: f64,
    /// Log-space standard deviation of the smooth spatial variation.
    pub texture_sigma: f64,
    /// Accepted vertical illuminance range, lux.
    pub ev_range: (f64, f64),
    pub source_count: (usize, usize),
    /// Source luminance range (sampled log-uniformly), cd/m².
    pub source_luminance: (f64, f64),
    /// Source angular radius range, degrees.
    pub source_radius_deg: (f64, f64),
    /// Angular jitter around the zone centers, degrees.
    pub zone_jitter_deg: f64,
    pub score_threshold: f64,
    /// Scenes whose score lies within this distance of the threshold are
    /// rejected, leaving a gap between the two classes.
    pub score_margin: f64,
    /// Probability that a scene's label disagrees with the generative rule.
    pub label_noise: f64,
    /// Attempts per scene before giving up.
    pub max_attempts: usize,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            n_scenes: 80,
            positive_fraction: 0.375,
            sampling: LabelSampling::Quota,
            size: 240,
            background_median: 110.0,
            background_sigma: 0.3,
            texture_sigma: 0.25,
            ev_range: (200.0, 600.0),
            source_count: (1, 3),
            source_luminance: (1000.0, 40000.0),
            source_radius_deg: (1.5, 6.0),
            zone_jitter_deg: 3.0,
            score_threshold: 0.3,
            score_margin: 0.15,
            label_noise: 0.0,
            max_attempts: 500,
            seed: 0,
        }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_scenes == 0 {
            return Err(Error::EmptyInput("zero scenes requested".into()));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return bad(format!(
                "positive fraction {} must lie in (0, 1)",
                self.positive_fraction
            ));
        }
        if !(0.0..0.5).contains(&self.label_noise) && self.label_noise != 0.5 {
            return bad(format!("label noise {} must lie in [0, 0.5]", self.label_noise));
        }
        if self.size < 16 {
            return bad(format!("image size {} is too small", self.size));
        }
        let range_ok = |(a, b): (f64, f64)| a > 0.0 && a < b;
        if !range_ok(self.ev_range) || !range_ok(self.source_luminance) || !range_ok(self.source_radius_deg) {
            return bad("ranges must be positive and non-degenerate".into());
        }
        if self.source_count.0 == 0
            || self.source_count.0 > self.source_count.1
            || self.source_count.1 > SOURCE_ZONES.len()
        {
            return bad(format!("source count range must lie within 1..={}", SOURCE_ZONES.len()));
        }
        if !(self.background_median > 0.0) || self.background_sigma < 0.0 || self.texture_sigma < 0.0 {
            return bad("background parameters must be positive".into());
        }
        if !(self.score_margin >= 0.0) {
            return bad(format!("score margin {} must be ≥ 0", self.score_margin));
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1".into());
        }
        Ok(())
    }

    /// Glare scene count under quota sampling.
    pub fn quota_positives(&self) -> usize {
        (self.n_scenes as f64 * self.positive_fraction).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceShape {
    Disk,
    Rect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedSource {
    pub shape: SourceShape,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub radius_deg: f64,
    /// Height over width of rectangles.
    pub aspect: f64,
    pub luminance: f64,
    /// Solid angle actually covered in the image, sr.
    pub omega: f64,
    /// Solid-angle weighted mean position index of the covered pixels.
    pub position_index: f64,
}

impl PlacedSource {
    pub fn contrast_term(&self) -> f64 {
        self.luminance * self.luminance * self.omega / (self.position_index * self.position_index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeRecord {
    pub sources: Vec<PlacedSource>,
    pub background_median: f64,
    /// Vertical illuminance of the stored (RGBE-quantized) image, lux.
    pub ev: f64,
    pub gen_score: f64,
    pub pre_noise_label: bool,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SyntheticScene {
    pub id: usize,
    pub image: HdrImage,
    pub label: bool,
    pub record: GenerativeRecord,
}

impl SyntheticScene {
    pub fn file_name(&self) -> String {
        scene_file_name(self.id)
    }
}

pub fn scene_file_name(id: usize) -> String {
    format!("scene_{id:04}.hdr")
}

/// `log10(1 + max_s(L_s²ω_s/P_s²) / Ev^1.87)`; zero without sources.
pub fn generative_score(sources: &[PlacedSource], ev: f64) -> f64 {
    let max = sources.iter().map(PlacedSource::contrast_term).fold(0.0, f64::max);
    if max <= 0.0 || !(ev > 0.0) {
        return 0.0;
    }
    (1.0 + max / ev.powf(1.87)).log10()
}

/// Per-scene label targets: the published label and whether it was flipped
/// relative to the generative rule.
pub fn label_plan(params: &ScenarioParams) -> Result<Vec<(bool, bool)>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_scenes;
    let labels: Vec<bool> = match params.sampling {
        LabelSampling::Quota => {
            let pos = params.quota_positives();
            let mut l: Vec<bool> = (0..n).map(|i| i < pos).collect();
            l.shuffle(&mut rng);
            l
        }
        LabelSampling::Bernoulli => (0..n).map(|_| rng.random_bool(params.positive_fraction)).collect(),
    };
    Ok(labels
        .into_iter()
        .map(|l| (l, rng.random_bool(params.label_noise)))
        .collect())
}

/// Seed of scene `id`, derived from the corpus seed.
pub fn scene_seed(corpus_seed: u64, id: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(corpus_seed);
    rng.set_stream(id as u64 + 1);
    rng.next_u64()
}

/// Precomputed state shared by all scenes of a corpus.
pub struct SceneGenerator {
    params: ScenarioParams,
    table: PixelTable,
    plan: Vec<(bool, bool)>,
}

impl SceneGenerator {
    pub fn new(params: &ScenarioParams) -> Result<Self> {
        let plan = label_plan(params)?;
        let geom = FisheyeGeometry::for_image(params.size, params.size);
        Ok(SceneGenerator {
            params: *params,
            table: PixelTable::new(geom, params.size, params.size)?,
            plan,
        })
    }

    pub fn len(&self) -> usize {
        self.plan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plan.is_empty()
    }

    /// Scene `id`; independent of the order in which scenes are generated.
    pub fn scene(&self, id: usize) -> Result<SyntheticScene> {
        let (label, flipped) = self.plan[id];
        let target = label ^ flipped;
        let seed = scene_seed(self.params.seed, id);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..self.params.max_attempts {
            if let Some((image, mut record)) = self.attempt(&mut rng)? {
                let gap = (record.gen_score - self.params.score_threshold).abs();
                if (record.gen_score > self.params.score_threshold) == target && gap >= self.params.score_margin {
                    record.pre_noise_label = target;
                    record.seed = seed;
                    return Ok(SyntheticScene {
                        id,
                        image,
                        label,
                        record,
                    });
                }
            }
        }
        Err(Error::Generation(format!(
            "scene {id}: no {} scene with Ev in [{}, {}] lux after {} attempts",
            if target { "glare" } else { "no-glare" },
            self.params.ev_range.0,
            self.params.ev_range.1,
            self.params.max_attempts
        )))
    }

    fn attempt(&self, rng: &mut ChaCha8Rng) -> Result<Option<(HdrImage, GenerativeRecord)>> {
        let p = &self.params;
        let size = p.size;
        let median = LogNormal::new(p.background_median.ln(), p.background_sigma.max(1e-12))
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .sample(rng);
        let field = smooth_field(rng, size, p.texture_sigma);

        let mut lum: Vec<f64> = (0..size * size)
            .map(|i| {
                let y = (i / size) as f64 / size as f64;
                // brighter ceiling, darker floor
                median * field[i] * (1.25 - 0.5 * y)
            })
            .collect();

        let count = rng.random_range(p.source_count.0..=p.source_count.1);
        let mut zones: Vec<usize> = (0..SOURCE_ZONES.len()).collect();
        zones.shuffle(rng);
        let (lmin, lmax) = p.source_luminance;
        let mut sources = Vec::with_capacity(count);
        for &z in zones.iter().take(count) {
            let (zt, zp) = SOURCE_ZONES[z];
            let theta = (zt + rng.random_range(-1.0..=1.0) * p.zone_jitter_deg).clamp(0.0, 85.0);
            let phi = zp + rng.random_range(-1.0..=1.0) * p.zone_jitter_deg;
            let radius = rng.random_range(p.source_radius_deg.0..=p.source_radius_deg.1);
            let luminance = (rng.random_range(lmin.ln()..=lmax.ln())).exp();
            let shape = if rng.random_bool(0.5) {
                SourceShape::Disk
            } else {
                SourceShape::Rect
            };
            let aspect = if shape == SourceShape::Rect {
                rng.random_range(0.5..=1.5)
            } else {
                1.0
            };
            let mut src = PlacedSource {
                shape,
                theta_deg: theta,
                phi_deg: phi,
                radius_deg: radius,
                aspect,
                luminance,
                omega: 0.0,
                position_index: guth_position_index(theta.to_radians(), phi.to_radians()),
            };
            self.paint(&mut src, &mut lum);
            if src.omega > 0.0 {
                sources.push(src);
            }
        }

        let conv = LuminanceConversion::default();
        let weight_sum: f64 = conv.weights.iter().sum();
        let pixels: Vec<[f32; 3]> = lum
            .iter()
            .map(|&l| {
                let v = (l / (conv.efficacy * weight_sum)) as f32;
                [v, v, v]
            })
            .collect();
        let image = quantize_rgbe(&HdrImage::new(size, size, pixels)?);
        let ev = vertical_illuminance_with(&to_luminance(&image), &self.table)?;
        if ev < p.ev_range.0 || ev > p.ev_range.1 {
            return Ok(None);
        }
        let gen_score = generative_score(&sources, ev);
        Ok(Some((
            image,
            GenerativeRecord {
                sources,
                background_median: median,
                ev,
                gen_score,
                pre_noise_label: false,
                seed: 0,
            },
        )))
    }

    /// Writes the source into `lum` and fills in its covered ω and mean P.
    fn paint(&self, src: &mut PlacedSource, lum: &mut [f64]) {
        let geom = self.table.geometry();
        let (cx, cy) = geom.project(src.theta_deg.to_radians(), src.phi_deg.to_radians());
        let center = crate::photometry::direction(src.theta_deg.to_radians(), src.phi_deg.to_radians());
        let r = src.radius_deg.to_radians();
        let half_w = r * geom.focal_px();
        let half_h = half_w * src.aspect;
        let (mut omega, mut pw) = (0.0, 0.0);
        for (i, g) in self.table.inside() {
            let covered = match src.shape {
                SourceShape::Disk => crate::photometry::angle_between(center, g.direction()) <= r,
                SourceShape::Rect => {
                    let x = (i % self.table.width()) as f64 + 0.5;
                    let y = (i / self.table.width()) as f64 + 0.5;
                    (x - cx).abs() <= half_w && (y - cy).abs() <= half_h
                }
            };
            if covered {
                lum[i] = src.luminance;
                omega += g.omega;
                pw += g.omega * g.position_index;
            }
        }
        src.omega = omega;
        if omega > 0.0 {
            src.position_index = pw / omega;
        }
    }
}

/// Bilinear upsampling of a coarse 6×6 log-normal grid (median 1).
fn smooth_field(rng: &mut ChaCha8Rng, size: usize, sigma: f64) -> Vec<f64> {
    const C: usize = 6;
    let coarse: Vec<f64> = (0..C * C)
        .map(|_| (sigma * rng.sample::<f64, _>(rand_distr::StandardNormal)).exp())
        .collect();
    let mut out = vec![0.0; size * size];
    for y in 0..size {
        let fy = (y as f64 + 0.5) / size as f64 * (C - 1) as f64;
        let (y0, ty) = (fy.floor() as usize, fy.fract());
        let y1 = (y0 + 1).min(C - 1);
        for x in 0..size {
            let fx = (x as f64 + 0.5) / size as f64 * (C - 1) as f64;
            let (x0, tx) = (fx.floor() as usize, fx.fract());
            let x1 = (x0 + 1).min(C - 1);
            let top = coarse[y0 * C + x0] * (1.0 - tx) + coarse[y0 * C + x1] * tx;
            let bottom = coarse[y1 * C + x0] * (1.0 - tx) + coarse[y1 * C + x1] * tx;
            out[y * size + x] = top * (1.0 - ty) + bottom * ty;
        }
    }
    out
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    pub label: u8,
    pub ev: f64,
    pub gen_score: f64,
    pub seed: u64,
}

impl From<&SyntheticScene> for ManifestRow {
    fn from(s: &SyntheticScene) -> Self {
        ManifestRow {
            id: format!("{:04}", s.id),
            label: u8::from(s.label),
            ev: s.record.ev,
            gen_score: s.record.gen_score,
            seed: s.record.seed,
        }
    }
}

/// Generates every scene in id order.
pub fn generate_corpus(params: &ScenarioParams) -> Result<Vec<SyntheticScene>> {
    let generator = SceneGenerator::new(params)?;
    (0..generator.len()).map(|id| generator.scene(id)).collect()
}

pub fn write_scene(dir: &Path, scene: &SyntheticScene) -> Result<()> {
    let f = fs::File::create(dir.join(scene.file_name()))?;
    let mut w = BufWriter::new(f);
    write_radiance_hdr(&scene.image, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `manifest.csv` (`id,label,ev,gen_score,seed`) after the given
/// `#` comment lines.
pub fn write_manifest(path: &Path, rows: &[ManifestRow], comments: &[String]) -> Result<()> {
    let mut f = BufWriter::new(fs::File::create(path)?);
    for c in comments {
        writeln!(f, "# {c}")?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_corpus(dir: &Path, scenes: &[SyntheticScene], comments: &[String]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for s in scenes {
        write_scene(dir, s)?;
    }
    let rows: Vec<ManifestRow> = scenes.iter().map(ManifestRow::from).collect();
    write_manifest(&dir.join("manifest.csv"), &rows, comments)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> ScenarioParams {
        ScenarioParams {
            n_scenes: n,
            size: 96,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn quota_is_exact_and_labels_follow_rule() {
        let p = small(16, 7);
        let scenes = generate_corpus(&p).unwrap();
        assert_eq!(scenes.iter().filter(|s| s.label).count(), 6);
        for s in &scenes {
            let score = generative_score(&s.record.sources, s.record.ev);
            assert_eq!(score, s.record.gen_score);
            assert_eq!(score > p.score_threshold, s.record.pre_noise_label);
            assert_eq!(s.label, s.record.pre_noise_label);
            assert!((200.0..=600.0).contains(&s.record.ev));
        }
    }

    #[test]
    fn scenes_are_order_independent() {
        let g = SceneGenerator::new(&small(6, 3)).unwrap();
        let late = g.scene(5).unwrap();
        let all = generate_corpus(&small(6, 3)).unwrap();
        assert_eq!(late.image, all[5].image);
        assert_eq!(late.record, all[5].record);
    }

    #[test]
    fn invalid_params() {
        assert!(matches!(small(0, 1).validate(), Err(Error::EmptyInput(_))));
        let p = ScenarioParams {
            positive_fraction: 1.0,
            ..small(4, 1)
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn impossible_ev_range_fails() {
        let p = ScenarioParams {
            ev_range: (1e6, 2e6),
            max_attempts: 3,
            ..small(2, 1)
        };
        assert!(matches!(generate_corpus(&p), Err(Error::Generation(_))));
    }
}
