//! Output plumbing shared by the subcommands: provenance comments, output
//! targets, input discovery and label joins.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use oge_core::pipeline::{is_hdr_path, list_hdr_files};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Internal(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Internal(m) => f.write_str(m),
        }
    }
}

impl From<oge_core::Error> for Failure {
    fn from(e: oge_core::Error) -> Self {
        match e {
            oge_core::Error::InvalidParameter(_) => Failure::Usage(e.to_string()),
            e => Failure::Data(e.to_string()),
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

pub fn internal(context: &str) -> impl FnOnce(io::Error) -> Failure + '_ {
    move |e| Failure::Internal(format!("{context}: {e}"))
}

/// The `# oge …` and `# config: …` lines that open every output file.
pub fn provenance(subcommand: &str, config: &impl Serialize) -> Vec<String> {
    let json = serde_json::to_string(config).expect("config serializes");
    let hash: String = Sha256::digest(json.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    vec![format!("oge {VERSION} {subcommand} {hash}"), format!("config: {json}")]
}

/// Writes `bytes` to `out`, or to stdout when no path is given.
pub fn emit(out: Option<&Path>, bytes: &[u8]) -> Outcome {
    match out {
        Some(path) => fs::write(path, bytes).map_err(internal(&path.display().to_string())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(internal("stdout"))
        }
    }
}

/// An input left out of the run and why.
pub struct Skipped {
    pub path: PathBuf,
    pub reason: String,
}

/// HDR files named by `inputs` (directories are listed in file-name order);
/// other files are reported as skipped.
pub fn collect_images(inputs: &[PathBuf]) -> Outcome<(Vec<PathBuf>, Vec<Skipped>)> {
    let mut images = Vec::new();
    let mut skipped = Vec::new();
    for input in inputs {
        if input.is_dir() {
            images.extend(list_hdr_files(input)?);
            let mut others: Vec<PathBuf> = fs::read_dir(input)
                .map_err(|e| Failure::Data(format!("{}: {e}", input.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && !is_hdr_path(p))
                .collect();
            others.sort();
            skipped.extend(others.into_iter().map(|path| Skipped {
                path,
                reason: "not an HDR file".into(),
            }));
        } else if !input.exists() {
            return Err(Failure::Data(format!("{}: no such file or directory", input.display())));
        } else if is_hdr_path(input) {
            images.push(input.clone());
        } else {
            skipped.push(Skipped {
                path: input.clone(),
                reason: "not an HDR file".into(),
            });
        }
    }
    Ok((images, skipped))
}

/// Prints skipped inputs; under `strict` any skip fails the run.
pub fn report_skipped(skipped: &[Skipped], strict: bool) -> Outcome {
    for s in skipped {
        eprintln!("oge: skipped {}: {}", s.path.display(), s.reason);
    }
    if strict && !skipped.is_empty() {
        return Err(Failure::Data(format!(
            "{} input(s) skipped under --strict",
            skipped.len()
        )));
    }
    Ok(())
}

/// Label lookup matching either the image id or the id with a leading
/// `scene_` removed.
pub struct LabelIndex(HashMap<String, bool>);

impl LabelIndex {
    pub fn read(path: &Path) -> Outcome<Self> {
        let labels = oge_core::pipeline::read_labels(path).map_err(|e| match Failure::from(e) {
            Failure::Data(m) => Failure::Data(format!("{}: {m}", path.display())),
            f => f,
        })?;
        Ok(LabelIndex(labels.into_iter().collect()))
    }

    pub fn get(&self, id: &str) -> Option<bool> {
        self.0
            .get(id)
            .or_else(|| id.strip_prefix("scene_").and_then(|s| self.0.get(s)))
            .copied()
    }
}
