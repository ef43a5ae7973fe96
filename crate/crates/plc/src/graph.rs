//! Pseudo-label estimation and the signed-graph machinery built on it.
//!
//! Feature rows are clustered with k-means (k-means++ seeding, cosine
//! geometry via row normalization), the cluster ids define a signed
//! adjacency (+1 same cluster, -1 different), and from that the degree
//! normalized signed Laplacian L = I - D^{-1/2} S D^{-1/2}. The effective
//! Laplacian folds the transformation-invariance pull into the same matrix,
//! so one penalty expression serves the whole contrastive term.

use crate::error::{Error, Result};
use crate::tensor::{normalize_rows, Matrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Signed sample-affinity graph: S in {-1, 0, +1}^{n x n}, symmetric,
/// zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedGraph {
    n: usize,
    adjacency: Vec<i8>,
}

impl SignedGraph {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> i8 {
        self.adjacency[i * self.n + j]
    }

    pub fn adjacency(&self) -> &[i8] {
        &self.adjacency
    }
}

/// Degree normalized signed Laplacian together with the absolute degrees.
#[derive(Debug, Clone)]
pub struct SignedLaplacian {
    matrix: Matrix,
    degrees: Vec<f64>,
}

impl SignedLaplacian {
    /// Test-only constructor for hand-built Laplacians (identity, zero, ...).
    #[cfg(test)]
    pub(crate) fn test_override(matrix: Matrix, degrees: Vec<f64>) -> Self {
        Self { matrix, degrees }
    }

    pub fn n(&self) -> usize {
        self.degrees.len()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }
}

/// gamma * L - (1/n) * I: the single matrix whose cross-view quadratic form
/// is the whole contrastive penalty (Laplacian push/pull plus the identity
/// alignment term).
#[derive(Debug, Clone)]
pub struct EffectiveLaplacian {
    matrix: Matrix,
    gamma: f64,
}

impl EffectiveLaplacian {
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.matrix.row(i)
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Number of k-means++ restarts; the run with the lowest objective wins.
const KMEANS_RESTARTS: u64 = 10;

/// Lloyd's k-means over L2-normalized feature rows with k-means++ seeding,
/// best of [`KMEANS_RESTARTS`] restarts by within-cluster sum of squares.
///
/// Deterministic for a fixed seed: ties in the assignment step go to the
/// lowest centroid index, and empty clusters are reseeded from the point
/// farthest from its assigned centroid.
pub fn kmeans(features: &Matrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = features.rows();
    if k < 2 {
        return Err(Error::Input(format!("kmeans needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Input(format!("kmeans needs at least k={k} points, got {n}")));
    }
    let (normed, _) = normalize_rows(features);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let (labels, objective) = lloyd_run(&normed, k, seed.wrapping_add(restart));
        if best.as_ref().is_none_or(|(obj, _)| objective < *obj) {
            best = Some((objective, labels));
        }
    }
    Ok(best.unwrap().1)
}

/// One seeded k-means++ + Lloyd run; returns labels and the final objective.
fn lloyd_run(normed: &Matrix, k: usize, seed: u64) -> (Vec<usize>, f64) {
    let n = normed.rows();
    let d = normed.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.gen_range(0..n);
    centroids.push(normed.row(first).to_vec());
    let mut dist2: Vec<f64> = (0..n)
        .map(|i| squared_distance(normed.row(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = dist2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &w) in dist2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            // all remaining mass zero (duplicate points): any index works
            rng.gen_range(0..n)
        };
        centroids.push(normed.row(pick).to_vec());
        for i in 0..n {
            let nd = squared_distance(normed.row(i), centroids.last().unwrap());
            if nd < dist2[i] {
                dist2[i] = nd;
            }
        }
    }

    let mut labels = vec![0usize; n];
    for _iter in 0..100 {
        // assignment, lowest index wins ties
        for i in 0..n {
            let mut best = 0usize;
            let mut best_d = squared_distance(normed.row(i), &centroids[0]);
            for (c, centroid) in centroids.iter().enumerate().skip(1) {
                let dd = squared_distance(normed.row(i), centroid);
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            labels[i] = best;
        }

        // update
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for (s, v) in sums[labels[i]].iter_mut().zip(normed.row(i)) {
                *s += v;
            }
        }
        // reseed empty clusters from the farthest point
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = squared_distance(normed.row(a), &centroids[labels[a]]);
                        let db = squared_distance(normed.row(b), &centroids[labels[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                sums[c] = normed.row(far).to_vec();
                counts[c] = 1;
                labels[far] = c;
            }
        }

        let mut movement: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / counts[c] as f64;
            let mut new_centroid = sums[c].clone();
            for v in &mut new_centroid {
                *v *= inv;
            }
            movement += squared_distance(&new_centroid, &centroids[c]).sqrt();
            centroids[c] = new_centroid;
        }
        if movement < 1e-6 {
            break;
        }
    }

    // final assignment against the settled centroids
    let mut objective = 0.0;
    for i in 0..n {
        let mut best = 0usize;
        let mut best_d = squared_distance(normed.row(i), &centroids[0]);
        for (c, centroid) in centroids.iter().enumerate().skip(1) {
            let dd = squared_distance(normed.row(i), centroid);
            if dd < best_d {
                best_d = dd;
                best = c;
            }
        }
        labels[i] = best;
        objective += best_d;
    }
    (labels, objective)
}

/// Signed graph from labels: +1 same label, -1 different, 0 on the diagonal.
pub fn build_signed_graph(labels: &[usize]) -> SignedGraph {
    let n = labels.len();
    let mut adjacency = vec![0i8; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                adjacency[i * n + j] = if labels[i] == labels[j] { 1 } else { -1 };
            }
        }
    }
    SignedGraph { n, adjacency }
}

/// Degree normalized signed Laplacian L = I - D^{-1/2} S D^{-1/2} with
/// d_i = sum_j |S_ij|. Isolated nodes (d_i = 0) keep L_ii = 1 with a zero
/// row/column elsewhere.
pub fn signed_laplacian(g: &SignedGraph) -> SignedLaplacian {
    let n = g.n();
    let degrees: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| g.at(i, j).abs() as f64).sum())
        .collect();
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut matrix = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            let s = g.at(i, j);
            if s != 0 {
                let v = matrix.at(i, j) - inv_sqrt[i] * (s as f64) * inv_sqrt[j];
                matrix.set(i, j, v);
            }
        }
    }
    SignedLaplacian { matrix, degrees }
}

/// Fold the identity alignment term into the Laplacian:
/// L_eff = gamma * L - (1/n) * I.
pub fn effective_laplacian(l: &SignedLaplacian, gamma: f64, n: usize) -> EffectiveLaplacian {
    debug_assert_eq!(l.n(), n);
    let size = l.n();
    let mut matrix = l.matrix().scale(gamma);
    let pull = 1.0 / n as f64;
    for i in 0..size {
        let v = matrix.at(i, i) - pull;
        matrix.set(i, i, v);
    }
    EffectiveLaplacian { matrix, gamma }
}
