//! Bagged trees and RUSBoost (random undersampling + AdaBoost.M2).

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<DecisionTree>,
    /// Voting weight per tree.
    pub weights: Vec<f64>,
}

impl TreeEnsemble {
    /// Weighted mean of the trees' glare probabilities.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let total: f64 = self.weights.iter().sum();
        if total <= 0.0 {
            return 0.5;
        }
        let s: f64 = self
            .trees
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * t.predict(row))
            .sum();
        (s / total).clamp(0.0, 1.0)
    }
}

pub fn fit_bagged(x: &[Vec<f64>], y: &[bool], learners: usize, max_splits: usize, seed: u64) -> TreeEnsemble {
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(learners);
    for _ in 0..learners {
        let samples: Vec<Sample> = (0..n)
            .map(|_| Sample {
                row: rng.random_range(0..n),
                weight: 1.0,
            })
            .collect();
        trees.push(DecisionTree::fit(x, y, &samples, max_splits));
    }
    TreeEnsemble {
        weights: vec![1.0; trees.len()],
        trees,
    }
}

/// Per-round record of a RUSBoost fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    /// Glare rows in the round's training set.
    pub positives: usize,
    /// No-glare rows in the round's training set.
    pub negatives: usize,
    pub pseudo_loss: f64,
    /// Voting weight given to the round's tree; 0 when the tree was rejected.
    pub vote: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RusBoostParams {
    pub learners: usize,
    pub learning_rate: f64,
    pub max_splits: usize,
}

impl Default for RusBoostParams {
    fn default() -> Self {
        RusBoostParams {
            learners: 30,
            learning_rate: 0.1,
            max_splits: 20,
        }
    }
}

/// RUSBoost for two classes. Each round keeps every minority row, draws an
/// equal number of majority rows without replacement, fits a tree on the
/// boosting weights of that subset, and scores it by the AdaBoost.M2
/// pseudo-loss `ε = ½ Σ D_i (1 − h(x_i, y_i) + h(x_i, ȳ_i))` over all rows.
/// With `β = ε/(1−ε)` the weights become `D_i β^(ν·½(1 + h(x_i,y_i) − h(x_i,ȳ_i)))`
/// and the tree votes with `ν·ln(1/β)`. Boosting stops once `ε ≥ ½`.
pub fn fit_rusboost(x: &[Vec<f64>], y: &[bool], params: &RusBoostParams, seed: u64) -> (TreeEnsemble, Vec<BoostRound>) {
    let n = x.len();
    let pos: Vec<usize> = (0..n).filter(|&i| y[i]).collect();
    let neg: Vec<usize> = (0..n).filter(|&i| !y[i]).collect();
    let (minority, majority) = if pos.len() <= neg.len() {
        (&pos, &neg)
    } else {
        (&neg, &pos)
    };
    let keep = minority.len();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = vec![1.0 / n as f64; n];
    let mut ens = TreeEnsemble {
        trees: Vec::new(),
        weights: Vec::new(),
    };
    let mut trace = Vec::new();
    let nu = params.learning_rate;

    for _ in 0..params.learners {
        let mut rows: Vec<usize> = minority.clone();
        rows.extend(sample(&mut rng, majority.len(), keep).into_iter().map(|k| majority[k]));
        rows.sort_unstable();
        let mass: f64 = rows.iter().map(|&i| d[i]).sum();
        let samples: Vec<Sample> = rows
            .iter()
            .map(|&row| Sample {
                row,
                weight: if mass > 0.0 {
                    d[row] / mass
                } else {
                    1.0 / rows.len() as f64
                },
            })
            .collect();
        let tree = DecisionTree::fit(x, y, &samples, params.max_splits);

        // margin_i = h(x_i, y_i) − h(x_i, ȳ_i)
        let margin: Vec<f64> = (0..n)
            .map(|i| {
                let p = tree.predict(&x[i]);
                if y[i] {
                    2.0 * p - 1.0
                } else {
                    1.0 - 2.0 * p
                }
            })
            .collect();
        let eps = (0..n).map(|i| 0.5 * d[i] * (1.0 - margin[i])).sum::<f64>().max(1e-10);
        let positives = rows.iter().filter(|&&i| y[i]).count();
        let mut round = BoostRound {
            positives,
            negatives: rows.len() - positives,
            pseudo_loss: eps,
            vote: 0.0,
        };
        if eps >= 0.5 {
            if ens.trees.is_empty() {
                round.vote = 1.0;
                ens.trees.push(tree);
                ens.weights.push(1.0);
            }
            trace.push(round);
            break;
        }
        let beta = eps / (1.0 - eps);
        for i in 0..n {
            d[i] *= beta.powf(nu * 0.5 * (1.0 + margin[i]));
        }
        let total: f64 = d.iter().sum();
        if total > 0.0 {
            d.iter_mut().for_each(|v| *v /= total);
        }
        round.vote = nu * (1.0 / beta).ln();
        ens.trees.push(tree);
        ens.weights.push(round.vote);
        trace.push(round);
    }
    (ens, trace)
}
