//! Downstream evaluation: a multinomial logistic classifier trained by
//! full-batch gradient descent on L2-normalized features, clustering and
//! graph agreement metrics, and a 2-D PCA projection for figure export.

use crate::error::{Error, Result};
use crate::graph::SignedGraph;
use crate::linalg::sym_eigen;
use crate::tensor::{normalize_rows, Matrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Unlabeled / train / test fractions; they must sum to one.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub unlabeled: f64,
    pub train: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            unlabeled: 0.7,
            train: 0.15,
            test: 0.15,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, f) in [
            ("unlabeled", self.unlabeled),
            ("train", self.train),
            ("test", self.test),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Config(format!("split fraction {name}={f} outside [0,1]")));
            }
        }
        let sum = self.unlabeled + self.train + self.test;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("split fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }

    /// Shuffle 0..n by seed and cut into (unlabeled, train, test) index sets.
    pub fn split(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        self.validate()?;
        let mut idx: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            idx.swap(i, j);
        }
        let n_unlabeled = (self.unlabeled * n as f64).floor() as usize;
        let n_train = (self.train * n as f64).floor() as usize;
        let train_end = (n_unlabeled + n_train).min(n);
        let unlabeled = idx[..n_unlabeled].to_vec();
        let train = idx[n_unlabeled..train_end].to_vec();
        let test = idx[train_end..].to_vec();
        Ok((unlabeled, train, test))
    }
}

/// Softmax classifier parameters.
#[derive(Debug, Clone)]
pub struct LogisticModel {
    /// classes x feature-dim weight matrix.
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl LogisticModel {
    pub fn n_classes(&self) -> usize {
        self.weights.rows()
    }

    /// Class scores for one already-normalized feature row.
    fn scores(&self, row: &[f64]) -> Vec<f64> {
        let c = self.n_classes();
        let mut out = self.bias.clone();
        for (cls, slot) in out.iter_mut().enumerate().take(c) {
            *slot += self
                .weights
                .row(cls)
                .iter()
                .zip(row.iter())
                .map(|(w, x)| w * x)
                .sum::<f64>();
        }
        out
    }

    /// Argmax prediction per row; ties go to the lowest class index.
    pub fn predict(&self, features: &Matrix) -> Vec<usize> {
        let (normed, _) = normalize_rows(features);
        (0..normed.rows())
            .map(|i| {
                let s = self.scores(normed.row(i));
                let mut best = 0usize;
                for (cls, &v) in s.iter().enumerate().skip(1) {
                    if v > s[best] {
                        best = cls;
                    }
                }
                best
            })
            .collect()
    }
}

/// Mean softmax cross-entropy plus l2*||W||^2, with gradients.
fn loss_and_grad(
    normed: &Matrix,
    labels: &[usize],
    w: &Matrix,
    b: &[f64],
    l2: f64,
) -> (f64, Matrix, Vec<f64>) {
    let n = normed.rows();
    let c = w.rows();
    let r = w.cols();
    let mut loss = 0.0;
    let mut grad_w = Matrix::zeros(c, r);
    let mut grad_b = vec![0.0; c];
    let inv_n = 1.0 / n as f64;
    for i in 0..n {
        let x = normed.row(i);
        let mut logits = vec![0.0; c];
        for cls in 0..c {
            logits[cls] = b[cls]
                + w.row(cls)
                    .iter()
                    .zip(x.iter())
                    .map(|(wv, xv)| wv * xv)
                    .sum::<f64>();
        }
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        loss -= inv_n * ((logits[labels[i]] - m) - z.ln());
        for cls in 0..c {
            let p = exps[cls] / z;
            let delta = (p - if cls == labels[i] { 1.0 } else { 0.0 }) * inv_n;
            grad_b[cls] += delta;
            for (g, &xv) in grad_w.row_mut(cls).iter_mut().zip(x.iter()) {
                *g += delta * xv;
            }
        }
    }
    for (g, &wv) in grad_w.data_mut().iter_mut().zip(w.data().iter()) {
        *g += 2.0 * l2 * wv;
    }
    loss += l2 * w.data().iter().map(|v| v * v).sum::<f64>();
    (loss, grad_w, grad_b)
}

/// Train by full-batch gradient descent; returns the model and the per-epoch
/// loss curve (cross-entropy + l2 penalty, evaluated before each step).
pub fn train_logistic_with_history(
    features: &Matrix,
    labels: &[usize],
    lr: f64,
    epochs: usize,
    l2: f64,
    seed: u64,
) -> Result<(LogisticModel, Vec<f64>)> {
    if features.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} feature rows vs {} labels",
            features.rows(),
            labels.len()
        )));
    }
    if features.rows() == 0 {
        return Err(Error::Input("empty training set".into()));
    }
    let c = labels.iter().max().unwrap() + 1;
    let distinct = {
        let mut seen = vec![false; c];
        for &l in labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    };
    if distinct < 2 {
        return Err(Error::Input("training labels contain a single class".into()));
    }
    let (normed, _) = normalize_rows(features);
    let r = features.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = Matrix::new(
        c,
        r,
        (0..c * r).map(|_| 0.01 * rng.gen_range(-1.0..1.0)).collect(),
    )?;
    let mut b = vec![0.0; c];
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let (loss, grad_w, grad_b) = loss_and_grad(&normed, labels, &w, &b, l2);
        history.push(loss);
        for (wv, g) in w.data_mut().iter_mut().zip(grad_w.data().iter()) {
            *wv -= lr * g;
        }
        for (bv, g) in b.iter_mut().zip(grad_b.iter()) {
            *bv -= lr * g;
        }
    }
    Ok((LogisticModel { weights: w, bias: b }, history))
}

/// Multinomial logistic regression on L2-normalized features.
pub fn train_logistic(
    features: &Matrix,
    labels: &[usize],
    lr: f64,
    epochs: usize,
    l2: f64,
    seed: u64,
) -> Result<LogisticModel> {
    train_logistic_with_history(features, labels, lr, epochs, l2, seed).map(|(m, _)| m)
}

/// Fraction of correct argmax predictions.
pub fn accuracy(model: &LogisticModel, features: &Matrix, labels: &[usize]) -> f64 {
    let preds = model.predict(features);
    let correct = preds
        .iter()
        .zip(labels.iter())
        .filter(|(p, l)| p == l)
        .count();
    correct as f64 / labels.len() as f64
}

/// Best matching fraction over all cluster-id permutations (exhaustive, so
/// capped at 8 clusters).
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "label lengths differ: {} vs {}",
            pred.len(),
            truth.len()
        )));
    }
    let k = pred
        .iter()
        .chain(truth.iter())
        .max()
        .map_or(0, |&m| m + 1);
    if k > 8 {
        return Err(Error::Input(format!(
            "exhaustive permutation matching supports at most 8 clusters, got {k}"
        )));
    }
    let n = pred.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = 0usize;
    // Heap's algorithm over cluster-id permutations
    let mut stack = vec![0usize; k];
    let eval = |perm: &[usize], best: &mut usize| {
        let hits = pred
            .iter()
            .zip(truth.iter())
            .filter(|(&p, &t)| perm[p] == t)
            .count();
        if hits > *best {
            *best = hits;
        }
    };
    eval(&perm, &mut best);
    let mut i = 1;
    while i < k {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            eval(&perm, &mut best);
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    Ok(best as f64 / n as f64)
}

/// Fraction of off-diagonal signed-adjacency entries on which two graphs
/// agree. A single-node graph has no off-diagonal entries and counts as 1.
pub fn graph_agreement(pred: &SignedGraph, truth: &SignedGraph) -> Result<f64> {
    if pred.n() != truth.n() {
        return Err(Error::Dimension(format!(
            "graph sizes differ: {} vs {}",
            pred.n(),
            truth.n()
        )));
    }
    let n = pred.n();
    if n < 2 {
        return Ok(1.0);
    }
    let mut hits = 0usize;
    for i in 0..n {
        for j in 0..n {
            if i != j && pred.at(i, j) == truth.at(i, j) {
                hits += 1;
            }
        }
    }
    Ok(hits as f64 / (n * (n - 1)) as f64)
}

/// Mean-centered projection onto the top-2 principal directions. Columns are
/// ordered by decreasing variance; each direction's sign is fixed so its
/// largest-magnitude loading is positive. Rank-0 input maps to all zeros.
pub fn pca2d(features: &Matrix) -> Result<Matrix> {
    let n = features.rows();
    if n < 2 {
        return Err(Error::Input(format!("pca2d needs at least 2 rows, got {n}")));
    }
    let r = features.cols();
    let mut mean = vec![0.0; r];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(features.row(i)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = features.clone();
    for i in 0..n {
        for (v, m) in centered.row_mut(i).iter_mut().zip(mean.iter()) {
            *v -= m;
        }
    }
    let cov = centered.gram();
    if cov.data().iter().all(|&v| v.abs() < 1e-300) {
        log::warn!("pca2d: rank-0 input, projecting to zeros");
        return Ok(Matrix::zeros(n, 2));
    }
    let (evals, evecs) = sym_eigen(cov.data(), r);
    // top-2 columns, descending eigenvalue order
    let mut out = Matrix::zeros(n, 2);
    for comp in 0..2usize.min(r) {
        let col = r - 1 - comp;
        let mut dir: Vec<f64> = (0..r).map(|row| evecs[row * r + col]).collect();
        let _ = evals;
        // sign convention: largest |loading| positive
        let lead = (0..r)
            .max_by(|&a, &b| dir[a].abs().partial_cmp(&dir[b].abs()).unwrap())
            .unwrap();
        if dir[lead] < 0.0 {
            for d in &mut dir {
                *d = -*d;
            }
        }
        for i in 0..n {
            let proj = centered
                .row(i)
                .iter()
                .zip(dir.iter())
                .map(|(x, d)| x * d)
                .sum::<f64>();
            out.set(i, comp, proj);
        }
    }
    Ok(out)
}
