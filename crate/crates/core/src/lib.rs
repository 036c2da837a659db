//! Glare evaluation from fisheye HDR images.
//!
//! Reads Radiance HDR captures, derives luminance maps and photometric
//! quantities, evaluates classical glare indices, extracts multi-region
//! luminance features and trains binary glare classifiers with ROC analysis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod falsecolor;
pub mod glare;
pub mod hdr_io;
pub mod ml;
pub mod mrl;
pub mod photometry;
pub mod pipeline;
pub mod roc;
pub mod synth;

pub use dataset::{assemble_metrics_matrix, assemble_mrl_matrix, FeatureMatrix, FeatureTable};
pub use error::{Error, Result};
pub use glare::{
    compute_indices, compute_indices_with, detect_sources, detect_sources_with, BackgroundMode, GlareMetricsRecord,
    GlareSource, IndexParams, SourceDetectionParams, METRIC_NAMES,
};
pub use hdr_io::{
    decode_hdr, encode_hdr, read_radiance_hdr, to_luminance, write_radiance_hdr, HdrImage, LuminanceConversion,
    LuminanceMap,
};
pub use ml::{
    apply_acceptance_gates, cross_validate, kfold_split, predict, train, Algorithm, ClassifierSpec, Confusion,
    EvaluationReport, FoldAssignment, GateResult, TrainedModel,
};
pub use mrl::{
    build_mask, calibrate_ellipse, extract_mrl, EllipseParams, FovMask, GridSpec, MrlExtractor, MrlFeatureVector,
    CALIBRATED_ELLIPSE, REFERENCE_GRIDS,
};
pub use photometry::{scene_stats, vertical_illuminance, FisheyeGeometry, PixelTable, SceneStats, TaskZone};
pub use pipeline::{ExtractionRecipe, MetricsConfig};
pub use roc::{
    cross_validated_cutoff, evaluate_at_cutoff, metric_roc_row, roc_curve, summarize, CutoffComparison, FoldEval,
    MetricRocRow, Orientation, RocCurve, RocOptions, RocSummary,
};
pub use synth::{generate_corpus, ScenarioParams, SyntheticScene};
