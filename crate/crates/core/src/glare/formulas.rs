//! Closed-form glare indices evaluated from aggregated source terms.
//!
//! Each function takes the per-source aggregates it needs and returns a
//! finite value. When no source is present the source sum of the log-based
//! indices is replaced by [`EMPTY_SOURCE_SUM`].

use std::f64::consts::PI;

/// Stand-in for an empty source sum in logarithmic indices.
pub const EMPTY_SOURCE_SUM: f64 = 1e-9;

/// Lower bound applied to background/adaptation luminances used as divisors.
pub const MIN_ADAPTATION_LUMINANCE: f64 = 1e-6;

/// The aggregate quantities of one glare source the formulas consume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceTerm {
    /// cd/m²
    pub luminance: f64,
    /// sr
    pub omega: f64,
    pub position_index: f64,
    /// Illuminance at the eye from this source, lux.
    pub illuminance: f64,
    /// Angle between source centroid and line of sight, radians.
    pub theta: f64,
}

fn contrast_sum(sources: &[SourceTerm]) -> f64 {
    sources
        .iter()
        .map(|s| s.luminance * s.luminance * s.omega / (s.position_index * s.position_index))
        .sum()
}

fn log_sum(sources: &[SourceTerm], f: impl Fn(&SourceTerm) -> f64) -> f64 {
    let s: f64 = sources.iter().map(f).sum();
    if sources.is_empty() || !(s > 0.0) {
        EMPTY_SOURCE_SUM
    } else {
        s
    }
}

fn floor_lum(l: f64) -> f64 {
    if l > MIN_ADAPTATION_LUMINANCE {
        l
    } else {
        MIN_ADAPTATION_LUMINANCE
    }
}

/// Daylight glare probability (Wienold & Christoffersen):
/// `5.87e-5·Ev + 9.18e-2·log10(1 + Σ L²ω / (Ev^1.87·P²)) + 0.16`.
pub fn dgp(ev: f64, sources: &[SourceTerm]) -> f64 {
    let saturation = dgp_saturation_term(ev);
    let contrast = if ev > 0.0 {
        9.18e-2 * (1.0 + contrast_sum(sources) / ev.powf(1.87)).log10()
    } else {
        0.0
    };
    saturation + contrast
}

/// The Ev-only part of DGP, `5.87e-5·Ev + 0.16`.
pub fn dgp_saturation_term(ev: f64) -> f64 {
    5.87e-5 * ev + 0.16
}

/// Unified glare rating, `8·log10(0.25/Lb · Σ L²ω/P²)`.
pub fn ugr(background: f64, sources: &[SourceTerm]) -> f64 {
    8.0 * (0.25 / floor_lum(background) * log_sum(sources, contrast_term)).log10()
}

fn contrast_term(s: &SourceTerm) -> f64 {
    s.luminance * s.luminance * s.omega / (s.position_index * s.position_index)
}

/// Unified glare probability for open-plan offices, `0.26·log10(0.25/Lb · Σ L²ω/P²)`,
/// i.e. a linear rescaling of UGR by 0.26/8.
pub fn ugp(background: f64, sources: &[SourceTerm]) -> f64 {
    0.26 * (0.25 / floor_lum(background) * log_sum(sources, contrast_term)).log10()
}

/// Experimental UGR variant with an explicit adaptation term:
/// `8·log10(La) + 8·log10(Σ L²ω/P² / Lb)`, where `La = Ev/π`.
pub fn ugr_exp(ev: f64, background: f64, sources: &[SourceTerm]) -> f64 {
    let la = floor_lum(ev / PI);
    8.0 * la.log10() + 8.0 * (log_sum(sources, contrast_term) / floor_lum(background)).log10()
}

fn dgi_with(adapt: f64, sources: &[SourceTerm]) -> f64 {
    let adapt = floor_lum(adapt);
    let g = log_sum(sources, |s| {
        let modified = s.omega / (s.position_index * s.position_index);
        s.luminance.powf(1.6) * modified.powf(0.8) / (adapt + 0.07 * s.omega.sqrt() * s.luminance)
    });
    10.0 * (0.478 * g).log10()
}

/// Daylight glare index (Hopkinson/Chauvel):
/// `10·log10(0.478·Σ Ls^1.6·Ω^0.8 / (Lb + 0.07·ω^0.5·Ls))`, with the
/// position-modified solid angle `Ω = ω/P²`.
pub fn dgi(background: f64, sources: &[SourceTerm]) -> f64 {
    dgi_with(background, sources)
}

/// DGI with the adaptation luminance `Ev/π` in place of the background.
pub fn dgi_mod(ev: f64, sources: &[SourceTerm]) -> f64 {
    dgi_with(ev / PI, sources)
}

/// CIE glare index (Einhorn):
/// `8·log10(2·(1 + Ed/500)/(Ed + Ei) · Σ L²ω/P²)` with direct illuminance `Ed`
/// and indirect illuminance `Ei = π·Lb`.
pub fn cgi(direct: f64, background: f64, sources: &[SourceTerm]) -> f64 {
    let ei = PI * floor_lum(background);
    8.0 * (2.0 * (1.0 + direct / 500.0) / (direct + ei) * log_sum(sources, contrast_term)).log10()
}

/// Discomfort glare rating (Guth): `(Σ M)^(n^-0.0914)` with
/// `M = 0.5·Ls·Q / (P·F^0.44)`, `Q = 20.4ω + 1.52ω^0.2 − 0.075`, and `F` the
/// mean luminance of the field of view. Zero without sources.
pub fn dgr(field_luminance: f64, sources: &[SourceTerm]) -> f64 {
    if sources.is_empty() {
        return 0.0;
    }
    let f = floor_lum(field_luminance).powf(0.44);
    let sum: f64 = sources
        .iter()
        .map(|s| {
            let q = 20.4 * s.omega + 1.52 * s.omega.powf(0.2) - 0.075;
            0.5 * s.luminance * q / (s.position_index * f)
        })
        .sum();
    if !(sum > 0.0) {
        return 0.0;
    }
    sum.powf((sources.len() as f64).powf(-0.0914))
}

/// Visual comfort probability from DGR,
/// `50·(1 + erf((6.374 − 1.3227·ln DGR)/√2))`, clamped to [0, 100].
pub fn vcp(dgr: f64) -> f64 {
    if !(dgr > 0.0) {
        return 100.0;
    }
    let v = 50.0 * (1.0 + libm::erf((6.374 - 1.3227 * dgr.ln()) / std::f64::consts::SQRT_2));
    v.clamp(0.0, 100.0)
}

/// CIE general disability glare equation for an observer of age `age` and
/// eye pigmentation factor `pigmentation`, summed over sources at their
/// centroid angles (clamped to the 0.1°–100° validity range).
pub fn veiling_luminance_cie(sources: &[SourceTerm], age: f64, pigmentation: f64) -> f64 {
    let age_factor = 1.0 + (age / 62.5).powi(4);
    sources
        .iter()
        .map(|s| {
            let t = s.theta.to_degrees().clamp(0.1, 100.0);
            let k = 10.0 / t.powi(3) + (5.0 / (t * t) + 0.1 * pigmentation / t) * age_factor + 0.0025 * pigmentation;
            s.illuminance * k
        })
        .sum()
}

/// Stiles–Holladay veiling luminance contribution `10·E/θ²` (θ in degrees).
pub fn stiles_holladay(illuminance: f64, theta: f64) -> f64 {
    let t = theta.to_degrees();
    10.0 * illuminance / (t * t)
}
