//! Multinomial logistic regression over sparse rows, trained by full-batch
//! gradient descent.

use serde::{Deserialize, Serialize};

use super::features::FeatureBundle;
use super::tfidf::SparseVec;
use crate::corpus::Label;
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub lr: f64,
    pub epochs: usize,
    /// Recorded for reproducibility. Zero initialization and full-batch
    /// updates leave nothing random, so the fit does not depend on it.
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig { l2: 1e-4, lr: 0.1, epochs: 500, seed: 0 }
    }
}

/// Class weights (row-major, `NUM_CLASSES x dim`) and unpenalized biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogReg {
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: [f64; NUM_CLASSES],
    /// Training loss after each epoch.
    pub loss_history: Vec<f64>,
}

/// Concatenates `[text_p, text_c, ctx_p, ctx_c]` into one sparse row.
pub fn bundle_row(b: &FeatureBundle, text_dim: usize) -> SparseVec {
    let ctx_dim = b.context_parent.len();
    let mut row = Vec::with_capacity(b.text_parent.len() + b.text_child.len() + 2 * ctx_dim);
    row.extend(b.text_parent.iter().copied());
    row.extend(b.text_child.iter().map(|&(i, x)| (i + text_dim, x)));
    let base = 2 * text_dim;
    row.extend(b.context_parent.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, &x)| (base + i, x)));
    row.extend(b.context_child.iter().enumerate().filter(|(_, x)| **x != 0.0).map(|(i, &x)| (base + ctx_dim + i, x)));
    row
}

pub fn row_dim(text_dim: usize, context_dim: usize) -> usize {
    2 * text_dim + 2 * context_dim
}

fn softmax(z: [f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = z.map(|x| (x - m).exp());
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

impl LogReg {
    pub fn zeros(dim: usize) -> Self {
        LogReg { dim, weights: vec![0.0; NUM_CLASSES * dim], bias: [0.0; NUM_CLASSES], loss_history: Vec::new() }
    }

    fn logits(&self, row: &[(usize, f64)]) -> [f64; NUM_CLASSES] {
        let mut z = self.bias;
        for &(j, x) in row {
            for (k, zk) in z.iter_mut().enumerate() {
                *zk += self.weights[k * self.dim + j] * x;
            }
        }
        z
    }

    pub fn predict_proba(&self, row: &[(usize, f64)]) -> [f64; NUM_CLASSES] {
        softmax(self.logits(row))
    }

    /// Most probable class; ties go to the lower class index.
    pub fn predict(&self, row: &[(usize, f64)]) -> Label {
        let p = self.predict_proba(row);
        let mut best = 0;
        for k in 1..NUM_CLASSES {
            if p[k] > p[best] {
                best = k;
            }
        }
        Label::from_index(best).expect("class index in range")
    }

    /// Mean cross-entropy plus `l2/2 * |W|^2`.
    pub fn loss(&self, rows: &[SparseVec], labels: &[Label], l2: f64) -> f64 {
        let n = rows.len() as f64;
        let mut ce = 0.0;
        for (row, y) in rows.iter().zip(labels) {
            let z = self.logits(row);
            let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            ce += lse - z[y.index()];
        }
        ce / n + 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Gradient of [`LogReg::loss`]: weights first, then biases.
    pub fn gradient(&self, rows: &[SparseVec], labels: &[Label], l2: f64) -> (Vec<f64>, [f64; NUM_CLASSES]) {
        let n = rows.len() as f64;
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = [0.0; NUM_CLASSES];
        for (row, y) in rows.iter().zip(labels) {
            let mut r = self.predict_proba(row);
            r[y.index()] -= 1.0;
            for k in 0..NUM_CLASSES {
                gb[k] += r[k];
                for &(j, x) in row.iter() {
                    gw[k * self.dim + j] += r[k] * x;
                }
            }
        }
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g = *g / n + l2 * w;
        }
        for g in &mut gb {
            *g /= n;
        }
        (gw, gb)
    }

    pub fn fit(rows: &[SparseVec], labels: &[Label], dim: usize, cfg: &LogRegConfig) -> Result<Self> {
        if rows.is_empty() || rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!("{} rows but {} labels", rows.len(), labels.len())));
        }
        let mut seen = [false; NUM_CLASSES];
        for y in labels {
            seen[y.index()] = true;
        }
        if seen.iter().filter(|&&s| s).count() < 2 {
            return Err(Error::InvalidInput("training data needs at least two classes".into()));
        }
        if let Some(&(j, _)) = rows.iter().flatten().find(|(j, _)| *j >= dim) {
            return Err(Error::InvalidInput(format!("feature index {j} out of range for dimension {dim}")));
        }
        if !(cfg.lr > 0.0 && cfg.lr.is_finite()) || cfg.l2 < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lr must be positive and l2 non-negative (lr={}, l2={})",
                cfg.lr, cfg.l2
            )));
        }
        let mut model = LogReg::zeros(dim);
        for epoch in 0..cfg.epochs {
            let (gw, gb) = model.gradient(rows, labels, cfg.l2);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= cfg.lr * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= cfg.lr * g;
            }
            let loss = model.loss(rows, labels, cfg.l2);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss, lr: cfg.lr });
            }
            model.loss_history.push(loss);
        }
        Ok(model)
    }
}

/// Largest relative error between the analytic gradient and central finite
/// differences, `|a - n| / max(|a|, |n|, 1e-6)`. The floor keeps exactly-zero
/// components (balanced classes at initialization) from amplifying rounding noise.
pub fn gradient_check(model: &LogReg, rows: &[SparseVec], labels: &[Label], l2: f64, h: f64) -> f64 {
    let (gw, gb) = model.gradient(rows, labels, l2);
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-6);
    for i in 0..model.weights.len() {
        let w0 = probe.weights[i];
        probe.weights[i] = w0 + h;
        let up = probe.loss(rows, labels, l2);
        probe.weights[i] = w0 - h;
        let down = probe.loss(rows, labels, l2);
        probe.weights[i] = w0;
        worst = worst.max(rel(gw[i], (up - down) / (2.0 * h)));
    }
    for k in 0..NUM_CLASSES {
        let b0 = probe.bias[k];
        probe.bias[k] = b0 + h;
        let up = probe.loss(rows, labels, l2);
        probe.bias[k] = b0 - h;
        let down = probe.loss(rows, labels, l2);
        probe.bias[k] = b0;
        worst = worst.max(rel(gb[k], (up - down) / (2.0 * h)));
    }
    worst
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Three well-separated Gaussian blobs in `dim` dimensions.
    pub(crate) fn separable(n_per: usize, dim: usize, seed: u64) -> (Vec<SparseVec>, Vec<Label>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for k in 0..NUM_CLASSES {
            for _ in 0..n_per {
                let row: SparseVec = (0..dim)
                    .map(|j| {
                        let centre = if j % NUM_CLASSES == k { 2.0 } else { 0.0 };
                        (j, centre + rng.random_range(-0.5..0.5))
                    })
                    .collect();
                rows.push(row);
                labels.push(Label::from_index(k).unwrap());
            }
        }
        (rows, labels)
    }

    fn accuracy(m: &LogReg, rows: &[SparseVec], labels: &[Label]) -> f64 {
        rows.iter().zip(labels).filter(|(r, y)| m.predict(r) == **y).count() as f64 / rows.len() as f64
    }

    #[test]
    fn zero_epochs_uniform() {
        let (rows, labels) = separable(5, 6, 1);
        let cfg = LogRegConfig { epochs: 0, ..Default::default() };
        let m = LogReg::fit(&rows, &labels, 6, &cfg).unwrap();
        for p in m.predict_proba(&rows[0]) {
            assert_abs_diff_eq!(p, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn separable_within_200_epochs() {
        let (rows, labels) = separable(40, 6, 2);
        let cfg = LogRegConfig { epochs: 200, ..Default::default() };
        let m = LogReg::fit(&rows, &labels, 6, &cfg).unwrap();
        assert!(accuracy(&m, &rows, &labels) >= 0.95);
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..5 {
            let (rows, labels) = separable(4, 5, trial);
            let mut m = LogReg::zeros(5);
            if trial > 0 {
                m.weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
                m.bias.iter_mut().for_each(|b| *b = rng.random_range(-1.0..1.0));
            }
            let err = gradient_check(&m, &rows, &labels, 1e-2, 1e-5);
            assert!(err < 1e-4, "trial {trial}: {err}");
        }
    }

    #[test]
    fn duplicated_training_set_same_predictions() {
        let (rows, labels) = separable(10, 6, 4);
        let cfg = LogRegConfig { epochs: 50, ..Default::default() };
        let a = LogReg::fit(&rows, &labels, 6, &cfg).unwrap();
        let rows2: Vec<_> = rows.iter().chain(&rows).cloned().collect();
        let labels2: Vec<_> = labels.iter().chain(&labels).copied().collect();
        let b = LogReg::fit(&rows2, &labels2, 6, &cfg).unwrap();
        for r in &rows {
            assert_eq!(a.predict(r), b.predict(r));
        }
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
    }

    #[test]
    fn deterministic() {
        let (rows, labels) = separable(10, 6, 5);
        let cfg = LogRegConfig { epochs: 30, ..Default::default() };
        assert_eq!(LogReg::fit(&rows, &labels, 6, &cfg).unwrap(), LogReg::fit(&rows, &labels, 6, &cfg).unwrap());
    }

    #[test]
    fn single_class_rejected() {
        let rows = vec![vec![(0, 1.0)]; 3];
        let labels = vec![Label::Agree; 3];
        assert!(LogReg::fit(&rows, &labels, 1, &LogRegConfig::default()).is_err());
    }

    #[test]
    fn divergence_reported() {
        let rows = vec![vec![(0, 1e200)], vec![(0, -1e200)]];
        let labels = vec![Label::Agree, Label::Disagree];
        let cfg = LogRegConfig { lr: 1e10, epochs: 5, ..Default::default() };
        assert!(matches!(LogReg::fit(&rows, &labels, 1, &cfg), Err(Error::Diverged { .. })));
    }
}
