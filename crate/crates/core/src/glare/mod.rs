//! Glare source detection and the 24 luminance, illuminance and glare-index
//! values reported per image.

pub mod formulas;
mod sources;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use formulas::SourceTerm;
pub use sources::{detect_sources, detect_sources_with, GlareSource, SourceDetectionParams};

use crate::error::{Error, Result};
use crate::hdr_io::LuminanceMap;
use crate::photometry::{FisheyeGeometry, PixelTable, SceneStats};

/// Column order of the 24 values, as used in every CSV.
pub const METRIC_NAMES: [&str; 24] = [
    "Ev",
    "Ev_dir",
    "DGP",
    "UGP",
    "UGR",
    "UGR_exp",
    "VCP",
    "DGI",
    "DGI_mod",
    "CGI",
    "DGR",
    "Lveil",
    "Lveil_CIE",
    "Omega_S",
    "Lum_sources",
    "Av_Lum_pos",
    "Av_Lum_pos2",
    "Med_lum",
    "Med_lum_pos",
    "Med_lum_pos2",
    "Av_Lum",
    "Lum_Background",
    "Task_Lum",
    "Max_Lum",
];

/// How the background luminance `Lb` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    /// `(Ev − Ev_dir) / π`
    #[default]
    IndirectIlluminance,
    /// Solid-angle weighted mean luminance of the non-source pixels.
    MeanNonSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexParams {
    pub background: BackgroundMode,
    /// Observer age for the CIE veiling luminance, years.
    pub observer_age: f64,
    /// Eye pigmentation factor for the CIE veiling luminance (0 dark … 1 light).
    pub pigmentation: f64,
    /// Pixels closer to the line of sight than this are left out of the
    /// Stiles–Holladay veiling sum, degrees.
    pub veil_min_angle_deg: f64,
}

impl Default for IndexParams {
    fn default() -> Self {
        IndexParams {
            background: BackgroundMode::IndirectIlluminance,
            observer_age: 40.0,
            pigmentation: 0.5,
            veil_min_angle_deg: 1.5,
        }
    }
}

/// The 24 per-image values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct GlareMetricsRecord {
    pub Ev: f64,
    pub Ev_dir: f64,
    pub DGP: f64,
    pub UGP: f64,
    pub UGR: f64,
    pub UGR_exp: f64,
    pub VCP: f64,
    pub DGI: f64,
    pub DGI_mod: f64,
    pub CGI: f64,
    pub DGR: f64,
    pub Lveil: f64,
    pub Lveil_CIE: f64,
    pub Omega_S: f64,
    pub Lum_sources: f64,
    pub Av_Lum_pos: f64,
    pub Av_Lum_pos2: f64,
    pub Med_lum: f64,
    pub Med_lum_pos: f64,
    pub Med_lum_pos2: f64,
    pub Av_Lum: f64,
    pub Lum_Background: f64,
    pub Task_Lum: f64,
    pub Max_Lum: f64,
}

impl GlareMetricsRecord {
    /// Values in [`METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 24] {
        [
            self.Ev,
            self.Ev_dir,
            self.DGP,
            self.UGP,
            self.UGR,
            self.UGR_exp,
            self.VCP,
            self.DGI,
            self.DGI_mod,
            self.CGI,
            self.DGR,
            self.Lveil,
            self.Lveil_CIE,
            self.Omega_S,
            self.Lum_sources,
            self.Av_Lum_pos,
            self.Av_Lum_pos2,
            self.Med_lum,
            self.Med_lum_pos,
            self.Med_lum_pos2,
            self.Av_Lum,
            self.Lum_Background,
            self.Task_Lum,
            self.Max_Lum,
        ]
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        METRIC_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values()[i])
            .ok_or_else(|| Error::UnknownMetric(name.to_string()))
    }
}

fn source_terms(sources: &[GlareSource]) -> Vec<SourceTerm> {
    sources
        .iter()
        .map(|s| SourceTerm {
            luminance: s.luminance,
            omega: s.omega,
            position_index: s.position_index,
            illuminance: s.illuminance,
            theta: s.centroid_theta,
        })
        .collect()
}

pub fn compute_indices(
    lum: &LuminanceMap,
    geom: &FisheyeGeometry,
    sources: &[GlareSource],
    stats: &SceneStats,
) -> Result<GlareMetricsRecord> {
    let table = PixelTable::for_map(lum, geom)?;
    compute_indices_with(lum, &table, sources, stats, &IndexParams::default())
}

/// Evaluates all 24 values. `stats` must come from the same map and table.
pub fn compute_indices_with(
    lum: &LuminanceMap,
    table: &PixelTable,
    sources: &[GlareSource],
    stats: &SceneStats,
    params: &IndexParams,
) -> Result<GlareMetricsRecord> {
    if lum.width() != table.width() || lum.height() != table.height() {
        return Err(Error::Shape("luminance map and geometry table differ in size".into()));
    }
    let values = lum.values();
    let terms = source_terms(sources);

    let ev = stats.ev;
    let ev_dir: f64 = sources.iter().map(|s| s.illuminance).sum();
    let omega_s: f64 = sources.iter().map(|s| s.omega).sum();
    let lum_sources = if omega_s > 0.0 {
        sources.iter().map(|s| s.luminance * s.omega).sum::<f64>() / omega_s
    } else {
        0.0
    };

    let background = match params.background {
        BackgroundMode::IndirectIlluminance => ((ev - ev_dir) / PI).max(0.0),
        BackgroundMode::MeanNonSource => {
            let mut in_source = vec![false; values.len()];
            for s in sources {
                for &i in &s.pixel_ids {
                    in_source[i] = true;
                }
            }
            let (mut num, mut den) = (0.0, 0.0);
            for (i, g) in table.inside() {
                if !in_source[i] {
                    num += values[i] * g.omega;
                    den += g.omega;
                }
            }
            if den > 0.0 {
                num / den
            } else {
                0.0
            }
        }
    };

    let min_veil = params.veil_min_angle_deg.to_radians();
    let lveil: f64 = table
        .inside()
        .filter(|(_, g)| g.theta >= min_veil)
        .map(|(i, g)| formulas::stiles_holladay(values[i] * g.omega * g.theta.cos(), g.theta))
        .sum();

    let dgr = formulas::dgr(stats.av_lum, &terms);
    Ok(GlareMetricsRecord {
        Ev: ev,
        Ev_dir: ev_dir,
        DGP: formulas::dgp(ev, &terms),
        UGP: formulas::ugp(background, &terms),
        UGR: formulas::ugr(background, &terms),
        UGR_exp: formulas::ugr_exp(ev, background, &terms),
        VCP: formulas::vcp(dgr),
        DGI: formulas::dgi(background, &terms),
        DGI_mod: formulas::dgi_mod(ev, &terms),
        CGI: formulas::cgi(ev_dir, background, &terms),
        DGR: dgr,
        Lveil: lveil,
        Lveil_CIE: formulas::veiling_luminance_cie(&terms, params.observer_age, params.pigmentation),
        Omega_S: omega_s,
        Lum_sources: lum_sources,
        Av_Lum_pos: stats.av_lum_pos,
        Av_Lum_pos2: stats.av_lum_pos2,
        Med_lum: stats.med_lum,
        Med_lum_pos: stats.med_lum_pos,
        Med_lum_pos2: stats.med_lum_pos2,
        Av_Lum: stats.av_lum,
        Lum_Background: background,
        Task_Lum: stats.task_lum,
        Max_Lum: stats.max_lum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photometry::{scene_stats_with, TaskZone};

    #[test]
    fn names_are_unique_and_complete() {
        let mut n = METRIC_NAMES.to_vec();
        n.sort();
        n.dedup();
        assert_eq!(n.len(), 24);
    }

    #[test]
    fn uniform_scene_record() {
        let size = 120;
        let lum = LuminanceMap::new(size, size, vec![80.0; size * size]).unwrap();
        let table = PixelTable::new(FisheyeGeometry::for_image(size, size), size, size).unwrap();
        let stats = scene_stats_with(&lum, &table, &TaskZone::default()).unwrap();
        let sources = detect_sources_with(&lum, &table, &SourceDetectionParams::default(), stats.task_lum).unwrap();
        assert!(sources.is_empty());
        let r = compute_indices_with(&lum, &table, &sources, &stats, &IndexParams::default()).unwrap();
        assert!(r.values().iter().all(|v| v.is_finite()));
        assert_eq!(r.Ev_dir, 0.0);
        assert_eq!(r.Omega_S, 0.0);
        assert_eq!(r.DGP, formulas::dgp_saturation_term(r.Ev));
        assert_eq!(r.VCP, 100.0);
        assert!((r.Lum_Background * PI - r.Ev).abs() < 1e-9 * r.Ev);
        assert!(r.get("DGX").is_err());
        assert_eq!(r.get("Max_Lum").unwrap(), 80.0);
    }
}
