use std::io;

/// Errors produced anywhere in the glare pipeline.
///
/// Variants map one-to-one onto the failure kinds callers are expected to
/// distinguish; the CLI turns them into exit codes via [`Error::is_data_error`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed Radiance header: {0}")]
    Format(String),
    #[error("corrupt pixel data: {0}")]
    CorruptData(String),
    #[error("unsupported pixel orientation `{0}` (only -Y <h> +X <w> is accepted)")]
    UnsupportedOrientation(String),
    #[error("invalid image dimensions {width}x{height}")]
    InvalidDimension { width: usize, height: usize },
    #[error("invalid fisheye geometry: {0}")]
    Geometry(String),
    #[error("region contains no pixels: {0}")]
    EmptyRegion(String),
    #[error("glare source detection failed: {0}")]
    Detection(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("cannot split {n} rows into {k} folds")]
    Split { n: usize, k: usize },
    #[error("ROC analysis failed: {0}")]
    Roc(String),
    #[error("variation error undefined: fold-averaged cutoff C1 is zero")]
    VariationUndefined,
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("corpus generation failed: {0}")]
    Generation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("model file error: {0}")]
    Model(String),
    #[error("no input: {0}")]
    EmptyInput(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// `true` for errors caused by the inputs rather than by the program.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
