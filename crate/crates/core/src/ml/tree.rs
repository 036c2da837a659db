//! Weighted CART classification trees (Gini impurity), grown best-first up
//! to a split budget.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Weighted fraction of glare samples in the leaf.
        glare: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
}

/// A training sample: row index into the feature rows and its weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub row: usize,
    pub weight: f64,
}

struct Candidate {
    node: usize,
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn gini_mass(w0: f64, w1: f64) -> f64 {
    let w = w0 + w1;
    if w <= 0.0 {
        0.0
    } else {
        w - (w0 * w0 + w1 * w1) / w
    }
}

fn leaf_value(w0: f64, w1: f64) -> f64 {
    if w0 + w1 > 0.0 {
        w1 / (w0 + w1)
    } else {
        0.5
    }
}

impl DecisionTree {
    /// Fits a tree with at most `max_splits` internal nodes.
    pub fn fit(x: &[Vec<f64>], y: &[bool], samples: &[Sample], max_splits: usize) -> DecisionTree {
        let m = x.first().map_or(0, Vec::len);
        let s = samples.len();
        let order: Vec<Vec<u32>> = (0..m)
            .map(|j| {
                let mut o: Vec<u32> = (0..s as u32).collect();
                o.sort_by(|&a, &b| {
                    x[samples[a as usize].row][j]
                        .total_cmp(&x[samples[b as usize].row][j])
                        .then(a.cmp(&b))
                });
                o
            })
            .collect();
        let mut node_of = vec![0u32; s];
        let mut nodes = Vec::new();
        let (w0, w1) = class_weights(samples, y, &node_of, 0);
        nodes.push(TreeNode::Leaf {
            glare: leaf_value(w0, w1),
        });

        let mut frontier: Vec<Candidate> = Vec::new();
        if max_splits > 0 {
            frontier.extend(best_split(x, y, samples, &order, &node_of, 0));
        }
        let mut splits = 0;
        while splits < max_splits && !frontier.is_empty() {
            // largest gain, earliest node on ties
            let best = (0..frontier.len())
                .max_by(|&a, &b| {
                    frontier[a]
                        .gain
                        .total_cmp(&frontier[b].gain)
                        .then(frontier[b].node.cmp(&frontier[a].node))
                })
                .unwrap();
            let c = frontier.swap_remove(best);
            let (left, right) = (nodes.len(), nodes.len() + 1);
            for (k, smp) in samples.iter().enumerate() {
                if node_of[k] as usize == c.node {
                    node_of[k] = if x[smp.row][c.feature] <= c.threshold {
                        left
                    } else {
                        right
                    } as u32;
                }
            }
            for child in [left, right] {
                let (w0, w1) = class_weights(samples, y, &node_of, child);
                nodes.push(TreeNode::Leaf {
                    glare: leaf_value(w0, w1),
                });
            }
            nodes[c.node] = TreeNode::Split {
                feature: c.feature,
                threshold: c.threshold,
                left,
                right,
            };
            splits += 1;
            if splits < max_splits {
                for child in [left, right] {
                    frontier.extend(best_split(x, y, samples, &order, &node_of, child));
                }
            }
        }
        DecisionTree { nodes }
    }

    /// Glare probability for `row`.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { glare } => return *glare,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn split_count(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Split { .. }))
            .count()
    }

    /// Largest feature index referenced by a split.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .max()
    }
}

fn class_weights(samples: &[Sample], y: &[bool], node_of: &[u32], node: usize) -> (f64, f64) {
    let (mut w0, mut w1) = (0.0, 0.0);
    for (k, s) in samples.iter().enumerate() {
        if node_of[k] as usize == node {
            if y[s.row] {
                w1 += s.weight;
            } else {
                w0 += s.weight;
            }
        }
    }
    (w0, w1)
}

fn best_split(
    x: &[Vec<f64>],
    y: &[bool],
    samples: &[Sample],
    order: &[Vec<u32>],
    node_of: &[u32],
    node: usize,
) -> Option<Candidate> {
    let (t0, t1) = class_weights(samples, y, node_of, node);
    let parent = gini_mass(t0, t1);
    if parent <= 0.0 {
        return None;
    }
    let min_gain = 1e-12 * (t0 + t1);
    let mut best: Option<Candidate> = None;
    let mut members: Vec<u32> = Vec::new();
    for (j, ord) in order.iter().enumerate() {
        members.clear();
        members.extend(ord.iter().copied().filter(|&k| node_of[k as usize] as usize == node));
        if members.len() < 2 {
            return None;
        }
        let (mut l0, mut l1) = (0.0, 0.0);
        for w in members.windows(2) {
            let s = &samples[w[0] as usize];
            if y[s.row] {
                l1 += s.weight;
            } else {
                l0 += s.weight;
            }
            let a = x[s.row][j];
            let b = x[samples[w[1] as usize].row][j];
            if a == b {
                continue;
            }
            let gain = parent - gini_mass(l0, l1) - gini_mass(t0 - l0, t1 - l1);
            if gain > min_gain && best.as_ref().is_none_or(|c| gain > c.gain) {
                let mid = a + (b - a) / 2.0;
                best = Some(Candidate {
                    node,
                    gain,
                    feature: j,
                    threshold: if mid < b { mid } else { a },
                });
            }
        }
    }
    best
}
