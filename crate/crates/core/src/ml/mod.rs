//! Binary glare classifiers, cross-validation and acceptance gates.

mod ensemble;
mod folds;
mod simple;
mod tree;

use serde::{Deserialize, Serialize};

pub use ensemble::{fit_bagged, fit_rusboost, BoostRound, RusBoostParams, TreeEnsemble};
pub use folds::{kfold_split, FoldAssignment};
pub use simple::{GaussianNb, Knn, Logistic, Standardizer};
pub use tree::{DecisionTree, Sample, TreeNode};

use crate::dataset::FeatureMatrix;
use crate::error::{Error, Result};
use crate::pipeline::ExtractionRecipe;
use crate::roc::{roc_curve, summarize, CutoffObjective, Orientation};

/// Version written into every model file.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Warning text recorded when training data holds a single class.
pub const DEGENERATE_DATA_WARNING: &str = "DegenerateDataWarning";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum Algorithm {
    DecisionTree {
        max_splits: usize,
    },
    BaggedTrees {
        learners: usize,
        /// `None` grows trees until leaves are pure.
        max_splits: Option<usize>,
    },
    RusboostTrees {
        learners: usize,
        learning_rate: f64,
        max_splits: usize,
    },
    GaussianNaiveBayes {
        var_floor: f64,
    },
    Knn {
        k: usize,
    },
    LogisticRegression {
        l2: f64,
        max_iter: usize,
    },
}

pub const ALGORITHM_NAMES: [&str; 6] = [
    "decision_tree",
    "bagged_trees",
    "rusboost_trees",
    "gaussian_naive_bayes",
    "knn",
    "logistic_regression",
];

impl Algorithm {
    /// Algorithm with default hyperparameters.
    pub fn from_name(name: &str) -> Result<Algorithm> {
        Ok(match name {
            "decision_tree" => Algorithm::DecisionTree { max_splits: 20 },
            "bagged_trees" => Algorithm::BaggedTrees {
                learners: 30,
                max_splits: None,
            },
            "rusboost_trees" => {
                let p = RusBoostParams::default();
                Algorithm::RusboostTrees {
                    learners: p.learners,
                    learning_rate: p.learning_rate,
                    max_splits: p.max_splits,
                }
            }
            "gaussian_naive_bayes" => Algorithm::GaussianNaiveBayes { var_floor: 1e-9 },
            "knn" => Algorithm::Knn { k: 9 },
            "logistic_regression" => Algorithm::LogisticRegression { l2: 1.0, max_iter: 100 },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown algorithm `{other}` (expected one of {})",
                    ALGORITHM_NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::DecisionTree { .. } => "decision_tree",
            Algorithm::BaggedTrees { .. } => "bagged_trees",
            Algorithm::RusboostTrees { .. } => "rusboost_trees",
            Algorithm::GaussianNaiveBayes { .. } => "gaussian_naive_bayes",
            Algorithm::Knn { .. } => "knn",
            Algorithm::LogisticRegression { .. } => "logistic_regression",
        }
    }

    /// Sets one hyperparameter from text, e.g. `learners=50`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::InvalidParameter(format!("bad value `{v}` for `{key}`")))
        }
        match (self, key) {
            (Algorithm::DecisionTree { max_splits }, "max_splits")
            | (Algorithm::RusboostTrees { max_splits, .. }, "max_splits") => *max_splits = num(key, value)?,
            (Algorithm::BaggedTrees { max_splits, .. }, "max_splits") => {
                *max_splits = if value == "none" { None } else { Some(num(key, value)?) }
            }
            (Algorithm::BaggedTrees { learners, .. }, "learners")
            | (Algorithm::RusboostTrees { learners, .. }, "learners") => *learners = num(key, value)?,
            (Algorithm::RusboostTrees { learning_rate, .. }, "learning_rate") => *learning_rate = num(key, value)?,
            (Algorithm::GaussianNaiveBayes { var_floor }, "var_floor") => *var_floor = num(key, value)?,
            (Algorithm::Knn { k }, "k") => *k = num(key, value)?,
            (Algorithm::LogisticRegression { l2, .. }, "l2") => *l2 = num(key, value)?,
            (Algorithm::LogisticRegression { max_iter, .. }, "max_iter") => *max_iter = num(key, value)?,
            (a, _) => {
                return Err(Error::InvalidParameter(format!(
                    "`{key}` is not a hyperparameter of {}",
                    a.name()
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        match *self {
            Algorithm::BaggedTrees { learners: 0, .. } | Algorithm::RusboostTrees { learners: 0, .. } => {
                bad("learners must be at least 1")
            }
            Algorithm::RusboostTrees { learning_rate, .. } if !(learning_rate > 0.0 && learning_rate <= 1.0) => {
                bad("learning_rate must lie in (0, 1]")
            }
            Algorithm::Knn { k } if k == 0 || k % 2 == 0 => bad("knn k must be odd and at least 1"),
            Algorithm::GaussianNaiveBayes { var_floor } if !(var_floor >= 0.0) => bad("var_floor must be ≥ 0"),
            Algorithm::LogisticRegression { l2, max_iter } if !(l2 > 0.0) || max_iter == 0 => {
                bad("logistic regression needs l2 > 0 and max_iter ≥ 1")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSpec {
    #[serde(flatten)]
    pub algorithm: Algorithm,
    pub seed: u64,
}

impl ClassifierSpec {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        ClassifierSpec { algorithm, seed }
    }

    pub fn named(name: &str, seed: u64) -> Result<Self> {
        Ok(ClassifierSpec::new(Algorithm::from_name(name)?, seed))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Constant { glare: bool },
    Tree(DecisionTree),
    Ensemble(TreeEnsemble),
    NaiveBayes(GaussianNb),
    Knn(Knn),
    Logistic(Logistic),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub dataset: String,
    pub seed: u64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub spec: ClassifierSpec,
    pub params: ModelParams,
    pub feature_names: Vec<String>,
    pub fingerprint: Fingerprint,
    /// Scores at or above this are labelled glare.
    pub threshold: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    /// How features are derived from images, when known.
    #[serde(default)]
    pub extraction: Option<ExtractionRecipe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub glare: bool,
    pub score: f64,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        let model: TrainedModel = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Model(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }

    /// Glare probability in [0, 1].
    pub fn score(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.feature_names.len() {
            return Err(Error::Shape(format!(
                "row has {} features, model expects {}",
                row.len(),
                self.feature_names.len()
            )));
        }
        let s = match &self.params {
            ModelParams::Constant { glare } => f64::from(u8::from(*glare)),
            ModelParams::Tree(t) => t.predict(row),
            ModelParams::Ensemble(e) => e.predict(row),
            ModelParams::NaiveBayes(m) => m.predict(row),
            ModelParams::Knn(m) => m.predict(row),
            ModelParams::Logistic(m) => m.predict(row),
        };
        Ok(s.clamp(0.0, 1.0))
    }
}

pub fn predict(model: &TrainedModel, row: &[f64]) -> Result<Prediction> {
    let score = model.score(row)?;
    Ok(Prediction {
        glare: score >= model.threshold,
        score,
    })
}

pub fn train(data: &FeatureMatrix, spec: &ClassifierSpec) -> Result<TrainedModel> {
    train_traced(data, spec).map(|(m, _)| m)
}

/// Like [`train`], also returning the per-round record for RUSBoost.
pub fn train_traced(data: &FeatureMatrix, spec: &ClassifierSpec) -> Result<(TrainedModel, Vec<BoostRound>)> {
    spec.algorithm.validate()?;
    let x = data.rows();
    let y = data.labels();
    let positives = data.positives();
    let mut warnings = Vec::new();
    let mut trace = Vec::new();
    let params = if positives == 0 || positives == data.n() {
        warnings.push(format!(
            "{DEGENERATE_DATA_WARNING}: all {} training rows are {}; using a constant model",
            data.n(),
            if positives == 0 { "no-glare" } else { "glare" }
        ));
        ModelParams::Constant { glare: positives > 0 }
    } else {
        match spec.algorithm {
            Algorithm::DecisionTree { max_splits } => {
                let samples: Vec<Sample> = (0..data.n()).map(|row| Sample { row, weight: 1.0 }).collect();
                ModelParams::Tree(DecisionTree::fit(x, y, &samples, max_splits))
            }
            Algorithm::BaggedTrees { learners, max_splits } => ModelParams::Ensemble(fit_bagged(
                x,
                y,
                learners,
                max_splits.unwrap_or(data.n().saturating_sub(1)),
                spec.seed,
            )),
            Algorithm::RusboostTrees {
                learners,
                learning_rate,
                max_splits,
            } => {
                let p = RusBoostParams {
                    learners,
                    learning_rate,
                    max_splits,
                };
                let (ens, t) = fit_rusboost(x, y, &p, spec.seed);
                trace = t;
                ModelParams::Ensemble(ens)
            }
            Algorithm::GaussianNaiveBayes { var_floor } => ModelParams::NaiveBayes(GaussianNb::fit(x, y, var_floor)),
            Algorithm::Knn { k } => ModelParams::Knn(Knn::fit(x, y, k)),
            Algorithm::LogisticRegression { l2, max_iter } => ModelParams::Logistic(Logistic::fit(x, y, l2, max_iter)),
        }
    };
    Ok((
        TrainedModel {
            version: MODEL_FORMAT_VERSION,
            spec: spec.clone(),
            params,
            feature_names: data.feature_names.clone(),
            fingerprint: Fingerprint {
                dataset: data.name.clone(),
                seed: spec.seed,
                rows: data.n(),
            },
            threshold: 0.5,
            warnings,
            extraction: None,
        },
        trace,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn from_predictions(predicted: &[bool], actual: &[bool]) -> Confusion {
        let mut c = Confusion::default();
        for (p, a) in predicted.iter().zip(actual) {
            match (p, a) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(TP + TN) / (TP + FP + TN + FN)`; NaN when empty.
    pub fn oa(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    /// `TP / (TP + FN)`; NaN without positives.
    pub fn tpr(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    /// `TN / (TN + FP)`; NaN without negatives.
    pub fn tnr(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }

    pub fn add(&self, o: &Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            tn: self.tn + o.tn,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub confusion: Confusion,
    pub oa: f64,
    pub tpr: f64,
    pub tnr: f64,
}

impl FoldResult {
    pub fn new(fold: usize, confusion: Confusion) -> Self {
        FoldResult {
            fold,
            confusion,
            oa: confusion.oa(),
            tpr: confusion.tpr(),
            tnr: confusion.tnr(),
        }
    }
}

/// Pooled confusion and rates, per-fold breakdown and ROC summary of the
/// scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub confusion: Confusion,
    pub oa: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub per_fold: Vec<FoldResult>,
    /// Mean of the finite per-fold rates.
    pub macro_oa: f64,
    pub macro_tpr: f64,
    pub macro_tnr: f64,
    pub auc: Option<f64>,
    pub sqd: Option<f64>,
    /// Out-of-fold score per row.
    pub scores: Vec<f64>,
}

fn finite_mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

impl EvaluationReport {
    pub fn from_folds(per_fold: Vec<FoldResult>, scores: Vec<f64>, labels: &[bool]) -> Self {
        let confusion = per_fold.iter().fold(Confusion::default(), |a, f| a.add(&f.confusion));
        let summary = roc_curve(&scores, labels, Orientation::HigherMeansGlare)
            .ok()
            .map(|c| summarize(&c, CutoffObjective::MinSquaredDistance));
        EvaluationReport {
            confusion,
            oa: confusion.oa(),
            tpr: confusion.tpr(),
            tnr: confusion.tnr(),
            macro_oa: finite_mean(per_fold.iter().map(|f| f.oa)),
            macro_tpr: finite_mean(per_fold.iter().map(|f| f.tpr)),
            macro_tnr: finite_mean(per_fold.iter().map(|f| f.tnr)),
            per_fold,
            auc: summary.as_ref().map(|s| s.auc),
            sqd: summary.as_ref().map(|s| s.sqd),
            scores,
        }
    }
}

/// Out-of-fold evaluation: each fold is scored by a model trained on the
/// remaining folds.
pub fn cross_validate(data: &FeatureMatrix, spec: &ClassifierSpec, k: usize, seed: u64) -> Result<EvaluationReport> {
    let folds = kfold_split(data.n(), k, seed)?;
    cross_validate_with(data, spec, &folds)
}

pub fn cross_validate_with(
    data: &FeatureMatrix,
    spec: &ClassifierSpec,
    folds: &FoldAssignment,
) -> Result<EvaluationReport> {
    if folds.assignment.len() != data.n() {
        return Err(Error::Shape("fold assignment does not match the data".into()));
    }
    let mut scores = vec![f64::NAN; data.n()];
    let mut per_fold = Vec::with_capacity(folds.k);
    for fold in 1..=folds.k {
        let train_rows = folds.train_rows(fold);
        let test_rows = folds.test_rows(fold);
        let fold_spec = ClassifierSpec {
            algorithm: spec.algorithm.clone(),
            seed: spec.seed.wrapping_add(fold as u64),
        };
        let model = train(&data.subset(&train_rows), &fold_spec)?;
        let mut predicted = Vec::with_capacity(test_rows.len());
        let mut actual = Vec::with_capacity(test_rows.len());
        for &i in &test_rows {
            let p = predict(&model, data.row(i))?;
            scores[i] = p.score;
            predicted.push(p.glare);
            actual.push(data.labels()[i]);
        }
        per_fold.push(FoldResult::new(fold, Confusion::from_predictions(&predicted, &actual)));
    }
    Ok(EvaluationReport::from_folds(per_fold, scores, data.labels()))
}

/// Quantities the acceptance gates look at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateInput {
    pub oa: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub auc: Option<f64>,
    pub sqd: Option<f64>,
}

impl From<&EvaluationReport> for GateInput {
    fn from(r: &EvaluationReport) -> Self {
        GateInput {
            oa: r.oa,
            tpr: r.tpr,
            tnr: r.tnr,
            auc: r.auc,
            sqd: r.sqd,
        }
    }
}

/// Per-criterion outcome. `auc` and `sqd` are `None` when the input had no
/// value for them; such criteria do not block a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateResult {
    pub oa: bool,
    pub tpr: bool,
    pub tnr: bool,
    pub auc: Option<bool>,
    pub sqd: Option<bool>,
    pub pass: bool,
}

pub const GATE_MIN_OA: f64 = 0.70;
pub const GATE_MIN_RATE: f64 = 0.5;
pub const GATE_MIN_AUC: f64 = 0.6;
pub const GATE_MAX_SQD: f64 = 0.5;

/// `OA ≥ 0.70`, `TPR > 0.5`, `TNR > 0.5`, `AUC ≥ 0.6`, `SqD < 0.5`.
pub fn apply_gates(input: &GateInput) -> GateResult {
    let oa = input.oa >= GATE_MIN_OA;
    let tpr = input.tpr > GATE_MIN_RATE;
    let tnr = input.tnr > GATE_MIN_RATE;
    let auc = input.auc.map(|a| a >= GATE_MIN_AUC);
    let sqd = input.sqd.map(|s| s < GATE_MAX_SQD);
    GateResult {
        oa,
        tpr,
        tnr,
        auc,
        sqd,
        pass: oa && tpr && tnr && auc.unwrap_or(true) && sqd.unwrap_or(true),
    }
}

pub fn apply_acceptance_gates(report: &EvaluationReport) -> GateResult {
    apply_gates(&GateInput::from(report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable(n: usize) -> FeatureMatrix {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = (i * 37 % 101) as f64 / 101.0;
                let b = (i * 59 % 97) as f64 / 97.0;
                vec![a, b]
            })
            .collect();
        let labels = rows.iter().map(|r| r[0] + r[1] > 1.0).collect();
        FeatureMatrix::new(
            "sep",
            vec!["a".into(), "b".into()],
            (0..n).map(|i| i.to_string()).collect(),
            rows,
            labels,
        )
        .unwrap()
    }

    #[test]
    fn eq2_arithmetic() {
        let c = Confusion {
            tp: 24,
            fn_: 6,
            tn: 43,
            fp: 7,
        };
        assert_eq!(c.oa(), 0.8375);
        assert_eq!(c.tpr(), 0.80);
        assert_eq!(c.tnr(), 0.86);
    }

    #[test]
    fn gate_examples() {
        let g = |oa, tpr, tnr, auc, sqd| apply_gates(&GateInput { oa, tpr, tnr, auc, sqd });
        assert!(g(0.838, 0.80, 0.86, Some(0.85), Some(0.06)).pass);
        let r = g(0.738, 0.33, 0.98, None, None);
        assert!(!r.pass && !r.tpr && r.oa && r.auc.is_none());
        assert!(!g(0.69, 0.8, 0.8, Some(0.9), Some(0.1)).pass);
        assert!(!g(0.8, 0.8, 0.8, Some(0.59), Some(0.1)).pass);
        assert!(!g(0.8, 0.8, 0.8, Some(0.9), Some(0.5)).pass);
        assert!(!g(0.8, 0.5, 0.8, None, None).pass);
    }

    #[test]
    fn every_algorithm_fits_separable_training_data() {
        let data = separable(200);
        for name in ALGORITHM_NAMES {
            let model = train(&data, &ClassifierSpec::named(name, 1).unwrap()).unwrap();
            let correct = (0..data.n())
                .filter(|&i| predict(&model, data.row(i)).unwrap().glare == data.labels()[i])
                .count();
            assert!(correct as f64 / 200.0 >= 0.95, "{name}: {correct}");
        }
    }

    #[test]
    fn single_class_gives_constant_model() {
        let d = separable(20);
        let d = d.with_labels(vec![false; 20]).unwrap();
        let m = train(&d, &ClassifierSpec::named("knn", 0).unwrap()).unwrap();
        assert!(m.warnings[0].starts_with(DEGENERATE_DATA_WARNING));
        let p = predict(&m, &[0.3, 0.3]).unwrap();
        assert_eq!((p.glare, p.score), (false, 0.0));
    }

    #[test]
    fn shape_mismatch() {
        let m = train(&separable(20), &ClassifierSpec::named("decision_tree", 0).unwrap()).unwrap();
        assert!(matches!(predict(&m, &[1.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn hyperparameters() {
        let mut a = Algorithm::from_name("knn").unwrap();
        a.set("k", "4").unwrap();
        assert!(a.validate().is_err());
        assert!(a.set("learners", "3").is_err());
        assert!(Algorithm::from_name("svm").is_err());
        let mut a = Algorithm::from_name("bagged_trees").unwrap();
        a.set("max_splits", "7").unwrap();
        assert_eq!(
            a,
            Algorithm::BaggedTrees {
                learners: 30,
                max_splits: Some(7)
            }
        );
    }

    #[test]
    fn model_json_round_trip() {
        let data = separable(60);
        for name in ALGORITHM_NAMES {
            let m = train(&data, &ClassifierSpec::named(name, 4).unwrap()).unwrap();
            let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
            for i in 0..data.n() {
                assert_eq!(m.score(data.row(i)).unwrap(), back.score(data.row(i)).unwrap());
            }
        }
        let mut m = train(&data, &ClassifierSpec::named("knn", 4).unwrap()).unwrap();
        m.version = 99;
        assert!(TrainedModel::from_json(&m.to_json().unwrap()).is_err());
    }

    #[test]
    fn cross_validation_scores_every_row_once() {
        let data = separable(50);
        let r = cross_validate(&data, &ClassifierSpec::named("logistic_regression", 0).unwrap(), 5, 3).unwrap();
        assert!(r.scores.iter().all(|s| s.is_finite()));
        assert_eq!(r.confusion.total(), 50);
        assert_eq!(r.confusion.tp + r.confusion.fn_, data.positives());
        assert_eq!(r.oa, (r.confusion.tp + r.confusion.tn) as f64 / 50.0);
        assert_eq!(r.per_fold.len(), 5);
    }
}
