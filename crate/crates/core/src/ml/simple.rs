//! Gaussian naive Bayes, k-nearest neighbours and ridge logistic regression.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Per-feature z-score transform fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Standard deviation, 1 for constant features.
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let n = x.len() as f64;
        let m = x.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; m];
        for r in x {
            for j in 0..m {
                mean[j] += r[j] / n;
            }
        }
        let mut var = vec![0.0; m];
        for r in x {
            for j in 0..m {
                var[j] += (r[j] - mean[j]).powi(2) / n;
            }
        }
        let scale = var.iter().map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 }).collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    /// Prior log-probabilities, `[no glare, glare]`.
    pub log_prior: [f64; 2],
    pub mean: [Vec<f64>; 2],
    pub var: [Vec<f64>; 2],
}

impl GaussianNb {
    /// Class-conditional variances are raised by `var_floor` times the largest
    /// pooled feature variance (plus a tiny absolute floor).
    pub fn fit(x: &[Vec<f64>], y: &[bool], var_floor: f64) -> Self {
        let m = x[0].len();
        let pooled = Standardizer::fit(x);
        let max_var = pooled.scale.iter().map(|s| s * s).fold(0.0, f64::max);
        let floor = var_floor * max_var + 1e-12;
        let mut mean = [vec![0.0; m], vec![0.0; m]];
        let mut var = [vec![0.0; m], vec![0.0; m]];
        let mut count = [0usize; 2];
        for (r, &l) in x.iter().zip(y) {
            let c = usize::from(l);
            count[c] += 1;
            for j in 0..m {
                mean[c][j] += r[j];
            }
        }
        for c in 0..2 {
            if count[c] > 0 {
                mean[c].iter_mut().for_each(|v| *v /= count[c] as f64);
            }
        }
        for (r, &l) in x.iter().zip(y) {
            let c = usize::from(l);
            for j in 0..m {
                var[c][j] += (r[j] - mean[c][j]).powi(2);
            }
        }
        for c in 0..2 {
            for v in var[c].iter_mut() {
                *v = *v / count[c].max(1) as f64 + floor;
            }
        }
        let n = x.len() as f64;
        GaussianNb {
            log_prior: [(count[0] as f64 / n).ln(), (count[1] as f64 / n).ln()],
            mean,
            var,
        }
    }

    /// Posterior glare probability.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let ll = |c: usize| {
            self.log_prior[c]
                + row
                    .iter()
                    .zip(self.mean[c].iter().zip(&self.var[c]))
                    .map(|(v, (m, s2))| -0.5 * ((v - m).powi(2) / s2 + (2.0 * std::f64::consts::PI * s2).ln()))
                    .sum::<f64>()
        };
        let (l0, l1) = (ll(0), ll(1));
        let p = 1.0 / (1.0 + (l0 - l1).exp());
        if p.is_nan() {
            0.5
        } else {
            p
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    pub scaler: Standardizer,
    /// Standardized training rows.
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl Knn {
    pub fn fit(x: &[Vec<f64>], y: &[bool], k: usize) -> Self {
        let scaler = Standardizer::fit(x);
        Knn {
            k: k.min(x.len()),
            rows: x.iter().map(|r| scaler.apply(r)).collect(),
            labels: y.to_vec(),
            scaler,
        }
    }

    /// Fraction of glare rows among the `k` nearest (Euclidean, ties by
    /// training order).
    pub fn predict(&self, row: &[f64]) -> f64 {
        let q = self.scaler.apply(row);
        let mut d: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let hits = d[..self.k].iter().filter(|(_, i)| self.labels[*i]).count();
        hits as f64 / self.k as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub scaler: Standardizer,
    pub intercept: f64,
    pub coef: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Logistic {
    /// Newton iterations on the L2-penalized log-likelihood of standardized
    /// features; the intercept is not penalized.
    pub fn fit(x: &[Vec<f64>], y: &[bool], l2: f64, max_iter: usize) -> Self {
        let scaler = Standardizer::fit(x);
        let n = x.len();
        let m = x[0].len();
        let p = m + 1;
        let mut a = DMatrix::<f64>::zeros(n, p);
        for (i, r) in x.iter().enumerate() {
            a[(i, 0)] = 1.0;
            for (j, v) in scaler.apply(r).into_iter().enumerate() {
                a[(i, j + 1)] = v;
            }
        }
        let t = DVector::from_iterator(n, y.iter().map(|&l| f64::from(u8::from(l))));
        let mut pen = DVector::from_element(p, l2);
        pen[0] = 0.0;

        let objective = |w: &DVector<f64>| -> f64 {
            let z = &a * w;
            let nll: f64 = z
                .iter()
                .zip(t.iter())
                .map(|(z, t)| {
                    // log(1 + e^z) − t·z, stable
                    let sp = if *z > 0.0 {
                        z + (-z).exp().ln_1p()
                    } else {
                        z.exp().ln_1p()
                    };
                    sp - t * z
                })
                .sum();
            nll + 0.5 * w.iter().zip(pen.iter()).map(|(w, l)| l * w * w).sum::<f64>()
        };

        let mut w = DVector::<f64>::zeros(p);
        let mut f = objective(&w);
        for _ in 0..max_iter {
            let mu = (&a * &w).map(sigmoid);
            let grad = a.transpose() * (&mu - &t) + pen.component_mul(&w);
            let s = mu.map(|m| (m * (1.0 - m)).max(1e-12));
            let mut h = a.transpose() * DMatrix::from_diagonal(&s) * &a;
            for j in 0..p {
                h[(j, j)] += pen[j] + 1e-10;
            }
            let Some(step) = h.cholesky().map(|c| c.solve(&grad)) else {
                break;
            };
            let mut lr = 1.0;
            let mut improved = false;
            for _ in 0..30 {
                let cand = &w - &step * lr;
                let fc = objective(&cand);
                if fc <= f {
                    improved = fc < f;
                    w = cand;
                    f = fc;
                    break;
                }
                lr *= 0.5;
            }
            if !improved || grad.norm() < 1e-9 {
                break;
            }
        }
        Logistic {
            scaler,
            intercept: w[0],
            coef: w.iter().skip(1).copied().collect(),
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        let z = self.intercept
            + self
                .scaler
                .apply(row)
                .iter()
                .zip(&self.coef)
                .map(|(v, c)| v * c)
                .sum::<f64>();
        sigmoid(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Vec<Vec<f64>>, Vec<bool>) {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let c = if i < 20 { 0.0 } else { 10.0 };
                vec![c + (i % 5) as f64 * 0.3, 5.0 - c + (i % 3) as f64 * 0.2]
            })
            .collect();
        let y = (0..40).map(|i| i >= 20).collect();
        (x, y)
    }

    #[test]
    fn standardizer_constant_feature() {
        let s = Standardizer::fit(&[vec![1.0, 3.0], vec![3.0, 3.0]]);
        assert_eq!(s.scale, vec![1.0, 1.0]);
        assert_eq!(s.apply(&[3.0, 3.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn models_separate_blobs() {
        let (x, y) = blobs();
        let nb = GaussianNb::fit(&x, &y, 1e-9);
        let knn = Knn::fit(&x, &y, 9);
        let lr = Logistic::fit(&x, &y, 1.0, 100);
        for (r, l) in x.iter().zip(&y) {
            for p in [nb.predict(r), knn.predict(r), lr.predict(r)] {
                assert_eq!(p >= 0.5, *l);
            }
        }
        assert!(lr.predict(&[20.0, -10.0]) > 0.9);
    }

    #[test]
    fn zero_variance_features_are_finite() {
        let x = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let y = [false, false, true];
        let nb = GaussianNb::fit(&x, &y, 1e-9);
        assert!(nb.predict(&[1.0, 1.5]).is_finite());
    }
}
