//! ROC curves, optimal cutoffs and cutoff stability across folds.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glare::METRIC_NAMES;
use crate::ml::{
    apply_gates, kfold_split, Confusion, EvaluationReport, FoldAssignment, FoldResult, GateInput, GateResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    HigherMeansGlare,
    LowerMeansGlare,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::HigherMeansGlare => 1.0,
            Orientation::LowerMeansGlare => -1.0,
        }
    }

    /// Whether `score` is called glare at `cutoff`.
    pub fn is_glare(self, score: f64, cutoff: f64) -> bool {
        match self {
            Orientation::HigherMeansGlare => score >= cutoff,
            Orientation::LowerMeansGlare => score <= cutoff,
        }
    }
}

/// How [`summarize`] picks the operating point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffObjective {
    /// Minimum `(1 − TPR)² + FPR²`.
    #[default]
    MinSquaredDistance,
    /// Maximum `TPR − FPR`.
    Youden,
}

impl FromStr for CutoffObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqd" | "min-sqd" => Ok(CutoffObjective::MinSquaredDistance),
            "youden" => Ok(CutoffObjective::Youden),
            _ => Err(Error::InvalidParameter(format!("unknown cutoff objective `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Score in the metric's own units; infinite for the two end points.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
    pub tp: usize,
    pub fp: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From (0, 0) to (1, 1); one point per distinct score between the two
    /// sentinel thresholds.
    pub points: Vec<RocPoint>,
    pub orientation: Orientation,
    pub positives: usize,
    pub negatives: usize,
}

pub fn roc_curve(scores: &[f64], labels: &[bool], orientation: Orientation) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Roc("scores must be finite".into()));
    }
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Roc("labels must contain both classes".into()));
    }
    let sign = orientation.sign();
    let mut order: Vec<(f64, bool)> = scores.iter().map(|s| sign * s).zip(labels.iter().copied()).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let (p, n) = (positives as f64, negatives as f64);
    let mut points = vec![RocPoint {
        threshold: sign * f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
        tp: 0,
        fp: 0,
    }];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = order[i].0;
        while i < order.len() && order[i].0 == s {
            if order[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: sign * s,
            fpr: fp as f64 / n,
            tpr: tp as f64 / p,
            tp,
            fp,
        });
    }
    points.push(RocPoint {
        threshold: -sign * f64::INFINITY,
        fpr: 1.0,
        tpr: 1.0,
        tp,
        fp,
    });
    Ok(RocCurve {
        points,
        orientation,
        positives,
        negatives,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocSummary {
    pub auc: f64,
    pub cutoff: f64,
    /// `(1 − TPR)² + FPR²` at the cutoff.
    pub sqd: f64,
    pub tpr_at_cutoff: f64,
    pub tnr_at_cutoff: f64,
}

/// Trapezoid area under the curve.
pub fn auc(curve: &RocCurve) -> f64 {
    curve
        .points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}

pub fn squared_distance(tpr: f64, fpr: f64) -> f64 {
    (1.0 - tpr).powi(2) + fpr * fpr
}

/// Picks the cutoff among the observed scores (sentinels excluded). Ties go
/// to the larger TPR, then the smaller threshold.
pub fn summarize(curve: &RocCurve, objective: CutoffObjective) -> RocSummary {
    let inner = &curve.points[1..curve.points.len() - 1];
    let cost = |p: &RocPoint| match objective {
        CutoffObjective::MinSquaredDistance => squared_distance(p.tpr, p.fpr),
        CutoffObjective::Youden => p.fpr - p.tpr,
    };
    let best = inner
        .iter()
        .min_by(|a, b| {
            cost(a)
                .total_cmp(&cost(b))
                .then(b.tpr.total_cmp(&a.tpr))
                .then(a.threshold.total_cmp(&b.threshold))
        })
        .expect("curve has at least one observed score");
    RocSummary {
        auc: auc(curve),
        cutoff: best.threshold,
        sqd: squared_distance(best.tpr, best.fpr),
        tpr_at_cutoff: best.tpr,
        tnr_at_cutoff: 1.0 - best.fpr,
    }
}

/// `|C1 − C2| / |C1| · 100`.
pub fn variation_error(c1: f64, c2: f64) -> Result<f64> {
    if c1 == 0.0 {
        return Err(Error::VariationUndefined);
    }
    Ok((c1 - c2).abs() / c1.abs() * 100.0)
}

/// Variation errors below this (percent) count as generalizable.
pub const GENERALIZABLE_MAX_E: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffComparison {
    /// Mean of the per-fold cutoffs.
    pub c1: f64,
    /// Cutoff on all rows.
    pub c2: f64,
    /// Percent variation error; `None` when `c1` is zero.
    pub e: Option<f64>,
    pub generalizable: bool,
    pub fold_summaries: Vec<RocSummary>,
    pub combined: RocSummary,
    pub folds: FoldAssignment,
}

/// Seeds tried, in order, until every fold holds both classes.
pub const FOLD_RETRY_LIMIT: u64 = 100;

/// Fold assignment in which every fold contains both classes, trying
/// `seed`, `seed + 1`, … up to [`FOLD_RETRY_LIMIT`] times.
pub fn stratified_enough_folds(labels: &[bool], k: usize, seed: u64) -> Result<FoldAssignment> {
    for attempt in 0..FOLD_RETRY_LIMIT {
        let folds = kfold_split(labels.len(), k, seed.wrapping_add(attempt))?;
        let ok = (1..=k).all(|f| {
            let rows = folds.test_rows(f);
            rows.iter().any(|&i| labels[i]) && rows.iter().any(|&i| !labels[i])
        });
        if ok {
            return Ok(folds);
        }
    }
    Err(Error::Roc(format!(
        "no fold assignment with both classes in all {k} folds after {FOLD_RETRY_LIMIT} draws"
    )))
}

/// Per-fold cutoffs come from each test fold alone.
pub fn cross_validated_cutoff(
    scores: &[f64],
    labels: &[bool],
    orientation: Orientation,
    k: usize,
    seed: u64,
    objective: CutoffObjective,
) -> Result<CutoffComparison> {
    let combined = summarize(&roc_curve(scores, labels, orientation)?, objective);
    let folds = stratified_enough_folds(labels, k, seed)?;
    let mut fold_summaries = Vec::with_capacity(k);
    for f in 1..=k {
        let rows = folds.test_rows(f);
        let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
        fold_summaries.push(summarize(&roc_curve(&s, &l, orientation)?, objective));
    }
    let c1 = fold_summaries.iter().map(|s| s.cutoff).sum::<f64>() / k as f64;
    let c2 = combined.cutoff;
    let e = variation_error(c1, c2).ok();
    Ok(CutoffComparison {
        c1,
        c2,
        e,
        generalizable: e.is_some_and(|e| e < GENERALIZABLE_MAX_E),
        fold_summaries,
        combined,
        folds,
    })
}

/// Confusion and rates when calling glare at `cutoff`.
pub fn evaluate_at_cutoff(
    scores: &[f64],
    labels: &[bool],
    cutoff: f64,
    orientation: Orientation,
) -> Result<EvaluationReport> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores, {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let predicted: Vec<bool> = scores.iter().map(|&s| orientation.is_glare(s, cutoff)).collect();
    let fold = FoldResult::new(1, Confusion::from_predictions(&predicted, labels));
    let mut report = EvaluationReport::from_folds(vec![fold], scores.to_vec(), labels);
    let summary = roc_curve(scores, labels, orientation)
        .ok()
        .map(|c| summarize(&c, CutoffObjective::MinSquaredDistance));
    report.auc = summary.map(|s| s.auc);
    report.sqd = summary.map(|s| s.sqd);
    Ok(report)
}

/// Orientation of each of the 24 metrics; only VCP (a comfort probability)
/// falls as glare rises.
pub fn metric_orientation_table() -> Vec<(&'static str, Orientation)> {
    METRIC_NAMES
        .iter()
        .map(|&n| {
            let o = if n == "VCP" {
                Orientation::LowerMeansGlare
            } else {
                Orientation::HigherMeansGlare
            };
            (n, o)
        })
        .collect()
}

pub fn metric_orientation(name: &str) -> Result<Orientation> {
    metric_orientation_table()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, o)| o)
        .ok_or_else(|| Error::UnknownMetric(name.to_string()))
}

/// How the fold half of a metric row is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldEval {
    /// Each test fold at its own cutoff, rates averaged over folds.
    #[default]
    PerFold,
    /// Each test fold at the mean cutoff C1, rates averaged over folds.
    MeanCutoff,
}

impl FromStr for FoldEval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-fold" => Ok(FoldEval::PerFold),
            "mean-cutoff" => Ok(FoldEval::MeanCutoff),
            _ => Err(Error::InvalidParameter(format!("unknown fold evaluation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub oa: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub cutoff: f64,
    pub auc: f64,
    pub sqd: f64,
}

/// One metric's cutoff analysis: fold-averaged and combined-data halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRocRow {
    pub metric: String,
    pub orientation: Orientation,
    pub folds: RateSummary,
    pub combined: RateSummary,
    pub e: Option<f64>,
    pub generalizable: bool,
    /// Gates applied to the combined half.
    pub gates: GateResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocOptions {
    pub folds: usize,
    pub seed: u64,
    pub objective: CutoffObjective,
    pub fold_eval: FoldEval,
}

impl Default for RocOptions {
    fn default() -> Self {
        RocOptions {
            folds: 5,
            seed: 0,
            objective: CutoffObjective::default(),
            fold_eval: FoldEval::default(),
        }
    }
}

pub fn metric_roc_row(
    metric: &str,
    scores: &[f64],
    labels: &[bool],
    orientation: Orientation,
    opts: &RocOptions,
) -> Result<MetricRocRow> {
    let k = opts.folds;
    let cmp = cross_validated_cutoff(scores, labels, orientation, k, opts.seed, opts.objective)?;
    let mut rates = Vec::with_capacity(k);
    for (f, summary) in (1..=k).zip(&cmp.fold_summaries) {
        let rows = cmp.folds.test_rows(f);
        let s: Vec<f64> = rows.iter().map(|&i| scores[i]).collect();
        let l: Vec<bool> = rows.iter().map(|&i| labels[i]).collect();
        let cutoff = match opts.fold_eval {
            FoldEval::PerFold => summary.cutoff,
            FoldEval::MeanCutoff => cmp.c1,
        };
        let predicted: Vec<bool> = s.iter().map(|&v| orientation.is_glare(v, cutoff)).collect();
        rates.push(Confusion::from_predictions(&predicted, &l));
    }
    let mean = |f: &dyn Fn(&Confusion) -> f64| rates.iter().map(f).sum::<f64>() / k as f64;
    let folds = RateSummary {
        oa: mean(&Confusion::oa),
        tpr: mean(&Confusion::tpr),
        tnr: mean(&Confusion::tnr),
        cutoff: cmp.c1,
        auc: cmp.fold_summaries.iter().map(|s| s.auc).sum::<f64>() / k as f64,
        sqd: cmp.fold_summaries.iter().map(|s| s.sqd).sum::<f64>() / k as f64,
    };
    let predicted: Vec<bool> = scores.iter().map(|&v| orientation.is_glare(v, cmp.c2)).collect();
    let all = Confusion::from_predictions(&predicted, labels);
    let combined = RateSummary {
        oa: all.oa(),
        tpr: all.tpr(),
        tnr: all.tnr(),
        cutoff: cmp.c2,
        auc: cmp.combined.auc,
        sqd: cmp.combined.sqd,
    };
    let gates = apply_gates(&GateInput {
        oa: combined.oa,
        tpr: combined.tpr,
        tnr: combined.tnr,
        auc: Some(combined.auc),
        sqd: Some(combined.sqd),
    });
    Ok(MetricRocRow {
        metric: metric.to_string(),
        orientation,
        folds,
        combined,
        e: cmp.e,
        generalizable: cmp.generalizable,
        gates,
    })
}
