//! Labelled feature matrices and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glare::{GlareMetricsRecord, METRIC_NAMES};
use crate::mrl::MrlFeatureVector;

/// Dataset name used for matrices built from glare metric records.
pub const METRICS_DATASET: &str = "24-metrics";

/// `n × m` feature values plus one binary label per row (`true` = glare).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub name: String,
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(
        name: impl Into<String>,
        feature_names: Vec<String>,
        ids: Vec<String>,
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != labels.len() || rows.len() != ids.len() {
            return Err(Error::Shape(format!(
                "{} rows, {} labels, {} ids",
                rows.len(),
                labels.len(),
                ids.len()
            )));
        }
        let m = feature_names.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::Shape(format!("row {i} has {} features, expected {m}", r.len())));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Schema("feature values must be finite".into()));
        }
        Ok(FeatureMatrix {
            name: name.into(),
            feature_names,
            ids,
            rows,
            labels,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn m(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Same features with new labels.
    pub fn with_labels(&self, labels: Vec<bool>) -> Result<FeatureMatrix> {
        if labels.len() != self.n() {
            return Err(Error::Shape(format!("{} labels for {} rows", labels.len(), self.n())));
        }
        Ok(FeatureMatrix { labels, ..self.clone() })
    }

    /// Writes comment lines (each prefixed with `# `), the header
    /// `id,<features>,label` and one row per sample.
    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let labels: Vec<Option<bool>> = self.labels.iter().map(|l| Some(*l)).collect();
        write_table(out, comments, &self.feature_names, &self.ids, &self.rows, &labels)
    }
}

/// Formats `v` so that parsing the text gives back the same bits.
pub fn format_value(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn write_table<W: Write>(
    mut out: W,
    comments: &[String],
    feature_names: &[String],
    ids: &[String],
    rows: &[Vec<f64>],
    labels: &[Option<bool>],
) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let with_labels = labels.iter().any(Option::is_some);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(feature_names.iter().cloned());
    if with_labels {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = Vec::with_capacity(row.len() + 2);
        rec.push(ids[i].clone());
        rec.extend(row.iter().map(|v| format_value(*v)));
        if with_labels {
            rec.push(match labels.get(i).copied().flatten() {
                Some(true) => "1".into(),
                Some(false) => "0".into(),
                None => String::new(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// A parsed feature CSV; labels are present only when the file had a
/// `label` column.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub feature_names: Vec<String>,
    pub ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<bool>>,
    /// `#` comment lines with the marker and one following space removed.
    pub comments: Vec<String>,
}

impl FeatureTable {
    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let comments = text
            .lines()
            .filter_map(|l| l.strip_prefix('#'))
            .map(|l| l.strip_prefix(' ').unwrap_or(l).to_string())
            .collect();
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("id") {
            return Err(Error::Schema("first column must be `id`".into()));
        }
        let has_label = header.last().map(String::as_str) == Some("label") && header.len() > 1;
        let feat_end = if has_label { header.len() - 1 } else { header.len() };
        let feature_names = header[1..feat_end].to_vec();

        let mut ids = Vec::new();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (n, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = n + 2;
            if rec.len() != header.len() {
                return Err(Error::Schema(format!("row {line} has {} fields", rec.len())));
            }
            ids.push(rec[0].to_string());
            let row = (1..feat_end)
                .map(|j| {
                    rec[j]
                        .trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| {
                            Error::Schema(format!("row {line}, column `{}`: bad value `{}`", header[j], &rec[j]))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
            if has_label {
                labels.push(match rec[feat_end].trim() {
                    "1" => true,
                    "0" => false,
                    other => return Err(Error::Schema(format!("row {line}: label `{other}` is not 0 or 1"))),
                });
            }
        }
        Ok(FeatureTable {
            feature_names,
            ids,
            rows,
            labels: has_label.then_some(labels),
            comments,
        })
    }

    /// Writes the table back out; the label column appears only when
    /// labels are present.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let labels: Vec<Option<bool>> = match &self.labels {
            Some(l) => l.iter().map(|v| Some(*v)).collect(),
            None => vec![None; self.rows.len()],
        };
        write_table(out, &self.comments, &self.feature_names, &self.ids, &self.rows, &labels)
    }

    pub fn into_matrix(self, name: impl Into<String>) -> Result<FeatureMatrix> {
        let labels = self
            .labels
            .ok_or_else(|| Error::Schema("missing `label` column".into()))?;
        FeatureMatrix::new(name, self.feature_names, self.ids, self.rows, labels)
    }

    /// Value of the first `# key: value` comment.
    pub fn comment_value(&self, key: &str) -> Option<&str> {
        self.comments
            .iter()
            .find_map(|c| c.strip_prefix(key)?.strip_prefix(':').map(str::trim))
    }
}

/// `f001`, `f002`, …
pub fn region_feature_names(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("f{i:03}")).collect()
}

fn default_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Matrix from MRL vectors, named `MRL-<m>`.
pub fn assemble_mrl_matrix(
    vectors: &[MrlFeatureVector],
    labels: &[bool],
    ids: Option<Vec<String>>,
) -> Result<FeatureMatrix> {
    let first = vectors.first().ok_or(Error::EmptyDataset)?;
    let m = first.region_means.len();
    if let Some(v) = vectors.iter().find(|v| v.region_means.len() != m) {
        return Err(Error::Shape(format!(
            "feature vectors of length {m} and {} mixed",
            v.region_means.len()
        )));
    }
    let ids = ids.unwrap_or_else(|| default_ids(vectors.len()));
    FeatureMatrix::new(
        format!("MRL-{m}"),
        region_feature_names(m),
        ids,
        vectors.iter().map(|v| v.region_means.clone()).collect(),
        labels.to_vec(),
    )
}

/// Matrix from glare metric records, named `24-metrics`.
pub fn assemble_metrics_matrix(
    records: &[GlareMetricsRecord],
    labels: &[bool],
    ids: Option<Vec<String>>,
) -> Result<FeatureMatrix> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ids = ids.unwrap_or_else(|| default_ids(records.len()));
    FeatureMatrix::new(
        METRICS_DATASET,
        METRIC_NAMES.iter().map(|s| s.to_string()).collect(),
        ids,
        records.iter().map(|r| r.values().to_vec()).collect(),
        labels.to_vec(),
    )
}
