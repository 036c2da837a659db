//! Image-to-feature compositions shared by the library API and the CLI.

use std::fs;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glare::{compute_indices_with, detect_sources_with, GlareMetricsRecord, IndexParams, SourceDetectionParams};
use crate::hdr_io::{read_radiance_hdr, to_luminance_with, HdrImage, LuminanceConversion};
use crate::mrl::{FovMask, MrlExtractor, MrlFeatureVector};
use crate::photometry::{scene_stats_with, FisheyeGeometry, PixelTable, TaskZone};

/// Settings for the 24-value metric path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub task_zone: TaskZone,
    pub detection: SourceDetectionParams,
    pub indices: IndexParams,
    pub conversion: LuminanceConversion,
}

/// How a model's feature vector is derived from an image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtractionRecipe {
    Mrl {
        mask: FovMask,
        #[serde(default)]
        conversion: LuminanceConversion,
    },
    Metrics(MetricsConfig),
}

impl ExtractionRecipe {
    pub fn features(&self, img: &HdrImage) -> Result<Vec<f64>> {
        match self {
            ExtractionRecipe::Mrl { mask, conversion } => Ok(image_mrl(img, mask, conversion)?.region_means),
            ExtractionRecipe::Metrics(cfg) => Ok(image_metrics(img, cfg)?.values().to_vec()),
        }
    }
}

pub fn load_hdr(path: &Path) -> Result<HdrImage> {
    read_radiance_hdr(BufReader::new(fs::File::open(path)?))
}

/// All 24 values for one image, with the image circle inscribed in the frame.
pub fn image_metrics(img: &HdrImage, cfg: &MetricsConfig) -> Result<GlareMetricsRecord> {
    let lum = to_luminance_with(img, &cfg.conversion);
    let table = PixelTable::new(
        FisheyeGeometry::for_image(lum.width(), lum.height()),
        lum.width(),
        lum.height(),
    )?;
    let stats = scene_stats_with(&lum, &table, &cfg.task_zone)?;
    let sources = detect_sources_with(&lum, &table, &cfg.detection, stats.task_lum)?;
    compute_indices_with(&lum, &table, &sources, &stats, &cfg.indices)
}

pub fn image_mrl(img: &HdrImage, mask: &FovMask, conversion: &LuminanceConversion) -> Result<MrlFeatureVector> {
    let lum = to_luminance_with(img, conversion);
    let geom = FisheyeGeometry::for_image(lum.width(), lum.height());
    MrlExtractor::new(lum.width(), lum.height(), &geom, mask)?.extract(&lum)
}

/// `.hdr`/`.pic` files directly inside `dir`, sorted by file name.
pub fn list_hdr_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && is_hdr_path(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

pub fn is_hdr_path(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("hdr" | "pic")
    )
}

/// File stem used as the image id.
pub fn image_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a `id,label` CSV (extra columns are ignored; `#` lines skipped).
pub fn read_labels(path: &Path) -> Result<Vec<(String, bool)>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(id_col), Some(label_col)) = (col("id"), col("label")) else {
        return Err(Error::Schema("labels file needs `id` and `label` columns".into()));
    };
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let label = match rec.get(label_col).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => return Err(Error::Schema(format!("label `{}` is not 0 or 1", other.unwrap_or("")))),
        };
        out.push((rec.get(id_col).unwrap_or("").to_string(), label));
    }
    Ok(out)
}
