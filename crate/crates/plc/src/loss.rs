//! Objective terms: CP reconstruction, Frobenius regularization, the
//! cross-view signed-Laplacian penalty with its transformation-invariance
//! pull, and the InfoNCE / expanded-form diagnostics used to cross-check it.
//!
//! All contrastive terms consume row-normalized features, so each loss value
//! is invariant to positive rescaling of individual feature rows.

use crate::error::{Error, Result};
use crate::graph::{EffectiveLaplacian, SignedGraph, SignedLaplacian};
use crate::tensor::{normalize_rows, reconstruction_error, DenseTensor, KruskalModel, Matrix};
use serde::{Deserialize, Serialize};

/// Training hyperparameters. `gamma = None` resolves to 1/(2N) at use, which
/// keeps the diagonal of the effective Laplacian negative (a net pull on
/// positive pairs) for any sample count.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyperparams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub rank: usize,
    pub outer_max_iters: usize,
    pub inner_max_iters: usize,
    pub outer_tol: f64,
    pub inner_tol: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 1e-2,
            beta: 1.0,
            gamma: None,
            rank: 32,
            outer_max_iters: 100,
            inner_max_iters: 20,
            outer_tol: 1e-3,
            inner_tol: 1e-6,
            seed: 0,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::Config("alpha and beta must be nonnegative".into()));
        }
        if let Some(g) = self.gamma {
            if g < 0.0 {
                return Err(Error::Config("gamma must be nonnegative".into()));
            }
        }
        if self.rank < 1 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if self.outer_tol <= 0.0 || self.inner_tol <= 0.0 {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    /// Resolved contrast weight for a batch of `n` samples.
    pub fn effective_gamma(&self, n: usize) -> f64 {
        self.gamma.unwrap_or(1.0 / (2.0 * n as f64))
    }
}

/// One evaluation of the full objective, term by term.
///
/// Invariants: `plc = -trans_inv + gamma * cross_view` and
/// `total = cp + alpha * reg + beta * plc`, both exact because the fields are
/// assembled from the same term values.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossReport {
    pub cp: f64,
    pub reg: f64,
    pub trans_inv: f64,
    pub cross_view: f64,
    pub plc: f64,
    pub total: f64,
}

/// Tr(W^T Λ(W) L Λ(W) W): the classic Laplacian penalty on one view.
pub fn same_view_laplacian(w: &Matrix, l: &SignedLaplacian) -> f64 {
    let (normed, _) = normalize_rows(w);
    quadratic_trace(&normed, l.matrix(), &normed)
}

/// Tr(W^T Λ(W) L Λ(W~) W~): the Laplacian penalty across the two views.
pub fn cross_view_laplacian(w: &Matrix, w_aug: &Matrix, l: &SignedLaplacian) -> f64 {
    let (nw, _) = normalize_rows(w);
    let (nwa, _) = normalize_rows(w_aug);
    quadratic_trace(&nw, l.matrix(), &nwa)
}

/// Mean cosine alignment of each sample with its own augmentation; equals the
/// cross-view penalty with an identity Laplacian scaled by 1/N.
pub fn trans_inv(w: &Matrix, w_aug: &Matrix) -> f64 {
    let (nw, _) = normalize_rows(w);
    let (nwa, _) = normalize_rows(w_aug);
    let n = w.rows();
    let mut sum = 0.0;
    for i in 0..n {
        sum += dot(nw.row(i), nwa.row(i));
    }
    sum / n as f64
}

/// The contrastive penalty: -trans_inv + gamma * cross_view.
pub fn plc_loss(w: &Matrix, w_aug: &Matrix, l: &SignedLaplacian, gamma: f64) -> f64 {
    -trans_inv(w, w_aug) + gamma * cross_view_laplacian(w, w_aug, l)
}

/// Same penalty through the folded matrix: Tr(W^T Λ(W) L_eff Λ(W~) W~).
pub fn plc_loss_effective(w: &Matrix, w_aug: &Matrix, eff: &EffectiveLaplacian) -> f64 {
    let (nw, _) = normalize_rows(w);
    let (nwa, _) = normalize_rows(w_aug);
    quadratic_trace(&nw, eff.matrix(), &nwa)
}

/// Reconstruction of both views against the shared factors:
/// 0.5 ||X - [[W,A,B,C]]||^2 + 0.5 ||X~ - [[W~,A,B,C]]||^2.
pub fn cp_loss(
    x: &DenseTensor,
    x_aug: &DenseTensor,
    model: &KruskalModel,
    w_aug: &Matrix,
) -> Result<f64> {
    let aug_model = KruskalModel::new(w_aug.clone(), model.factors.clone())?;
    Ok(reconstruction_error(x, model)? + reconstruction_error(x_aug, &aug_model)?)
}

/// 0.5 (||W||^2 + ||W~||^2 + sum_k ||F_k||^2), Frobenius.
pub fn reg_loss(model: &KruskalModel, w_aug: &Matrix) -> f64 {
    let mut sum = model.weights.data().iter().map(|v| v * v).sum::<f64>();
    sum += w_aug.data().iter().map(|v| v * v).sum::<f64>();
    for f in &model.factors {
        sum += f.data().iter().map(|v| v * v).sum::<f64>();
    }
    0.5 * sum
}

/// Evaluate every term of the objective at the current state.
pub fn total_loss(
    x: &DenseTensor,
    x_aug: &DenseTensor,
    model: &KruskalModel,
    w_aug: &Matrix,
    l: &SignedLaplacian,
    hp: &Hyperparams,
) -> Result<LossReport> {
    let n = model.weights.rows();
    let gamma = hp.effective_gamma(n);
    let cp = cp_loss(x, x_aug, model, w_aug)?;
    let reg = reg_loss(model, w_aug);
    let ti = trans_inv(&model.weights, w_aug);
    let cv = cross_view_laplacian(&model.weights, w_aug, l);
    let plc = -ti + gamma * cv;
    let total = cp + hp.alpha * reg + hp.beta * plc;
    Ok(LossReport {
        cp,
        reg,
        trans_inv: ti,
        cross_view: cv,
        plc,
        total,
    })
}

/// InfoNCE on row-normalized features, diagnostic only:
/// -(1/N) sum_i <w_i, w~_i> + (tau/N) sum_i log sum_j exp(<w_i, w~_j>/tau).
pub fn infonce_loss(w: &Matrix, w_aug: &Matrix, tau: f64) -> Result<f64> {
    if tau <= 0.0 {
        return Err(Error::Config(format!("infonce tau must be positive, got {tau}")));
    }
    let (nw, _) = normalize_rows(w);
    let (nwa, _) = normalize_rows(w_aug);
    let n = w.rows();
    let mut align = 0.0;
    let mut spread = 0.0;
    for i in 0..n {
        align += dot(nw.row(i), nwa.row(i));
        // log-sum-exp over j, stabilized by the row maximum
        let logits: Vec<f64> = (0..n).map(|j| dot(nw.row(i), nwa.row(j)) / tau).collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logits.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        spread += lse;
    }
    let nf = n as f64;
    Ok(-align / nf + tau * spread / nf)
}

/// The contrastive penalty expanded into inner-product sums over the
/// degree-normalized adjacency, an algebraically independent route to
/// `plc_loss` used as a test oracle:
/// -(1/N) sum_i c_ii + gamma * (sum_i c_ii - sum_ij Sbar_ij c_ij)
/// with c_ij = <w_i, w~_j> on normalized rows and Sbar = D^{-1/2} S D^{-1/2}.
pub fn plc_expanded(w: &Matrix, w_aug: &Matrix, s: &SignedGraph, gamma: f64) -> f64 {
    let (nw, _) = normalize_rows(w);
    let (nwa, _) = normalize_rows(w_aug);
    let n = s.n();
    let degrees: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| s.at(i, j).abs() as f64).sum())
        .collect();
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let mut diag = 0.0;
    let mut off = 0.0;
    for i in 0..n {
        diag += dot(nw.row(i), nwa.row(i));
        for j in 0..n {
            let sij = s.at(i, j);
            if sij != 0 {
                off += inv_sqrt[i] * (sij as f64) * inv_sqrt[j] * dot(nw.row(i), nwa.row(j));
            }
        }
    }
    -diag / n as f64 + gamma * (diag - off)
}

/// Per-sample block vs pairwise contrast terms, reported for inspection.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BlockPairwise {
    pub block_term: f64,
    pub pairwise_term: f64,
}

/// For each sample i:
/// block    = -<w_i, sum_{S_ij=1} w~_j - sum_{S_ij=-1} (-w~_j)>
/// pairwise = -<w_i, w~_i - sum_j |S_ij| w~_j>
/// computed on normalized rows. No inequality between the two is asserted
/// anywhere; the numbers are diagnostics.
pub fn block_pairwise_diagnostic(w: &Matrix, w_aug: &Matrix, s: &SignedGraph) -> Vec<BlockPairwise> {
    let (nw, _) = normalize_rows(w);
    let (nwa, _) = normalize_rows(w_aug);
    let n = s.n();
    let r = w.cols();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut block_vec = vec![0.0; r];
        let mut abs_vec = vec![0.0; r];
        for j in 0..n {
            match s.at(i, j) {
                1 => {
                    for (b, v) in block_vec.iter_mut().zip(nwa.row(j)) {
                        *b += v;
                    }
                    for (a, v) in abs_vec.iter_mut().zip(nwa.row(j)) {
                        *a += v;
                    }
                }
                -1 => {
                    // minus the negated row: a net positive contribution
                    for (b, v) in block_vec.iter_mut().zip(nwa.row(j)) {
                        *b += v;
                    }
                    for (a, v) in abs_vec.iter_mut().zip(nwa.row(j)) {
                        *a += v;
                    }
                }
                _ => {}
            }
        }
        let block_term = -dot(nw.row(i), &block_vec);
        let mut pair_vec: Vec<f64> = nwa.row(i).to_vec();
        for (p, a) in pair_vec.iter_mut().zip(abs_vec.iter()) {
            *p -= a;
        }
        let pairwise_term = -dot(nw.row(i), &pair_vec);
        out.push(BlockPairwise {
            block_term,
            pairwise_term,
        });
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// Tr(A^T M B) for row-matrices A, B (n x r) and M (n x n).
fn quadratic_trace(a: &Matrix, m: &Matrix, b: &Matrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for i in 0..n {
        let mi = m.row(i);
        let ai = a.row(i);
        for j in 0..n {
            let w = mi[j];
            if w != 0.0 {
                sum += w * dot(ai, b.row(j));
            }
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_signed_graph, effective_laplacian, signed_laplacian};
    use crate::tensor::kruskal_reconstruct;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laplacian_from(labels: &[usize]) -> SignedLaplacian {
        signed_laplacian(&build_signed_graph(labels))
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::new(
            rows,
            cols,
            (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    fn random_model(rng: &mut ChaCha8Rng, n: usize, dims: &[usize], rank: usize) -> KruskalModel {
        KruskalModel::new(
            random_matrix(rng, n, rank),
            dims.iter().map(|&d| random_matrix(rng, d, rank)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn same_view_orthonormal_two_classes() {
        let w = Matrix::identity(2);
        let l = laplacian_from(&[1, 2]); // L = [[1,1],[1,1]]
        assert!((same_view_laplacian(&w, &l) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn same_view_zero_laplacian() {
        let w = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let mut l = laplacian_from(&[0, 1]);
        // zero out the matrix by hand to model L = 0
        let zero = Matrix::zeros(2, 2);
        l = SignedLaplacian::test_override(zero, l.degrees().to_vec());
        assert_eq!(same_view_laplacian(&w, &l), 0.0);
    }

    #[test]
    fn same_view_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = random_matrix(&mut rng, 5, 3);
        let labels = [0, 1, 0, 2, 1];
        let l = laplacian_from(&labels);
        let (nw, _) = normalize_rows(&w);
        let mut oracle = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                oracle += l.matrix().at(i, j) * dot(nw.row(i), nw.row(j));
            }
        }
        assert!((same_view_laplacian(&w, &l) - oracle).abs() < 1e-12);
    }

    #[test]
    fn cross_view_reduces_to_same_view() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = random_matrix(&mut rng, 4, 3);
        let l = laplacian_from(&[0, 0, 1, 1]);
        assert_eq!(
            cross_view_laplacian(&w, &w, &l),
            same_view_laplacian(&w, &l)
        );
    }

    #[test]
    fn cross_view_pair_same_class() {
        let w = Matrix::identity(2);
        let l = laplacian_from(&[0, 0]); // [[1,-1],[-1,1]]
        assert!((cross_view_laplacian(&w, &w, &l) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cross_view_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = random_matrix(&mut rng, 5, 2);
        let wa = random_matrix(&mut rng, 5, 2);
        let l = laplacian_from(&[0, 1, 1, 0, 2]);
        let (nw, _) = normalize_rows(&w);
        let (nwa, _) = normalize_rows(&wa);
        let mut oracle = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                oracle += l.matrix().at(i, j) * dot(nw.row(i), nwa.row(j));
            }
        }
        assert!((cross_view_laplacian(&w, &wa, &l) - oracle).abs() < 1e-12);
    }

    #[test]
    fn trans_inv_self_alignment() {
        let w = Matrix::from_rows(&[&[1.0, 2.0], &[-3.0, 0.5]]);
        assert!((trans_inv(&w, &w) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trans_inv_orthogonal_views() {
        let w = Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]]);
        let wa = Matrix::from_rows(&[&[0.0, 3.0], &[5.0, 0.0]]);
        assert_eq!(trans_inv(&w, &wa), 0.0);
    }

    #[test]
    fn trans_inv_is_identity_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = random_matrix(&mut rng, 6, 3);
        let wa = random_matrix(&mut rng, 6, 3);
        let l = SignedLaplacian::test_override(Matrix::identity(6), vec![1.0; 6]);
        let via_cross = cross_view_laplacian(&w, &wa, &l) / 6.0;
        assert!((trans_inv(&w, &wa) - via_cross).abs() < 1e-14);
    }

    #[test]
    fn plc_gamma_zero_self() {
        let w = Matrix::from_rows(&[&[1.0, 1.0], &[2.0, 0.0]]);
        let l = laplacian_from(&[0, 1]);
        assert!((plc_loss(&w, &w, &l, 0.0) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn plc_two_sample_hand_value() {
        let w = Matrix::identity(2);
        let l = laplacian_from(&[0, 0]);
        for gamma in [0.0, 0.3, 1.0, 2.5] {
            let expect = -1.0 + 2.0 * gamma;
            assert!((plc_loss(&w, &w, &l, gamma) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn plc_fold_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random_matrix(&mut rng, 7, 4);
        let wa = random_matrix(&mut rng, 7, 4);
        let labels = [0, 1, 2, 0, 1, 2, 0];
        let l = laplacian_from(&labels);
        let gamma = 0.17;
        let eff = effective_laplacian(&l, gamma, 7);
        let direct = plc_loss(&w, &wa, &l, gamma);
        let folded = plc_loss_effective(&w, &wa, &eff);
        assert!((direct - folded).abs() < 1e-12);
    }

    #[test]
    fn cp_loss_exact_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = random_model(&mut rng, 3, &[2, 2, 2], 2);
        let wa = random_matrix(&mut rng, 3, 2);
        let x = kruskal_reconstruct(&model).unwrap();
        let aug_model = KruskalModel::new(wa.clone(), model.factors.clone()).unwrap();
        let xa = kruskal_reconstruct(&aug_model).unwrap();
        assert!(cp_loss(&x, &xa, &model, &wa).unwrap() < 1e-18);
    }

    #[test]
    fn cp_loss_duplicated_view() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = random_model(&mut rng, 3, &[2, 3], 2);
        let x = DenseTensor::new(
            vec![3, 2, 3],
            (0..18).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let single = reconstruction_error(&x, &model).unwrap();
        let double = cp_loss(&x, &x, &model, &model.weights).unwrap();
        assert!((double - 2.0 * single).abs() < 1e-12);
    }

    #[test]
    fn cp_loss_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let model = random_model(&mut rng, 2, &[3, 2], 2);
        let wa = random_matrix(&mut rng, 2, 2);
        let x = DenseTensor::new(
            vec![2, 3, 2],
            (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let xa = DenseTensor::new(
            vec![2, 3, 2],
            (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        // brute force: elementwise residuals of both views
        let recon = kruskal_reconstruct(&model).unwrap();
        let aug_model = KruskalModel::new(wa.clone(), model.factors.clone()).unwrap();
        let recon_a = kruskal_reconstruct(&aug_model).unwrap();
        let mut expect = 0.0;
        for (a, b) in x.data().iter().zip(recon.data().iter()) {
            expect += 0.5 * (a - b) * (a - b);
        }
        for (a, b) in xa.data().iter().zip(recon_a.data().iter()) {
            expect += 0.5 * (a - b) * (a - b);
        }
        assert!((cp_loss(&x, &xa, &model, &wa).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn reg_loss_zero_model() {
        let model = KruskalModel::new(
            Matrix::zeros(2, 2),
            vec![Matrix::zeros(3, 2), Matrix::zeros(2, 2)],
        )
        .unwrap();
        assert_eq!(reg_loss(&model, &Matrix::zeros(2, 2)), 0.0);
    }

    #[test]
    fn reg_loss_identity_weights() {
        let model = KruskalModel::new(
            Matrix::identity(2),
            vec![Matrix::zeros(3, 2), Matrix::zeros(2, 2)],
        )
        .unwrap();
        assert!((reg_loss(&model, &Matrix::zeros(2, 2)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reg_loss_matches_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = random_model(&mut rng, 3, &[2, 2], 2);
        let wa = random_matrix(&mut rng, 3, 2);
        let mut expect = 0.0;
        for v in model.weights.data() {
            expect += v * v;
        }
        for v in wa.data() {
            expect += v * v;
        }
        for f in &model.factors {
            for v in f.data() {
                expect += v * v;
            }
        }
        expect *= 0.5;
        assert!((reg_loss(&model, &wa) - expect).abs() < 1e-12);
    }

    #[test]
    fn total_loss_exact_fit_no_penalties() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = random_model(&mut rng, 4, &[2, 2, 2], 2);
        let wa = random_matrix(&mut rng, 4, 2);
        let x = kruskal_reconstruct(&model).unwrap();
        let aug_model = KruskalModel::new(wa.clone(), model.factors.clone()).unwrap();
        let xa = kruskal_reconstruct(&aug_model).unwrap();
        let l = laplacian_from(&[0, 0, 1, 1]);
        let hp = Hyperparams {
            alpha: 0.0,
            beta: 0.0,
            ..Hyperparams::default()
        };
        let report = total_loss(&x, &xa, &model, &wa, &l, &hp).unwrap();
        assert!(report.total.abs() < 1e-15);
    }

    #[test]
    fn total_loss_beta_zero_decomposition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = random_model(&mut rng, 4, &[2, 3], 2);
        let wa = random_matrix(&mut rng, 4, 2);
        let x = DenseTensor::new(
            vec![4, 2, 3],
            (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let l = laplacian_from(&[0, 1, 0, 1]);
        let hp = Hyperparams {
            alpha: 0.3,
            beta: 0.0,
            ..Hyperparams::default()
        };
        let report = total_loss(&x, &x, &model, &wa, &l, &hp).unwrap();
        assert!((report.total - (report.cp + 0.3 * report.reg)).abs() < 1e-12);
    }

    #[test]
    fn total_loss_matches_independent_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let model = random_model(&mut rng, 5, &[2, 2], 3);
        let wa = random_matrix(&mut rng, 5, 3);
        let x = DenseTensor::new(
            vec![5, 2, 2],
            (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let xa = DenseTensor::new(
            vec![5, 2, 2],
            (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let labels = [0, 1, 2, 1, 0];
        let l = laplacian_from(&labels);
        let hp = Hyperparams {
            alpha: 0.05,
            beta: 0.7,
            gamma: Some(0.2),
            ..Hyperparams::default()
        };
        let report = total_loss(&x, &xa, &model, &wa, &l, &hp).unwrap();
        let expect = cp_loss(&x, &xa, &model, &wa).unwrap()
            + 0.05 * reg_loss(&model, &wa)
            + 0.7 * plc_loss(&model.weights, &wa, &l, 0.2);
        assert!((report.total - expect).abs() < 1e-10);
    }

    #[test]
    fn infonce_single_sample_cancels() {
        let w = Matrix::from_rows(&[&[2.0, 0.0]]);
        for tau in [0.1, 0.5, 1.0, 3.0] {
            assert_eq!(infonce_loss(&w, &w, tau).unwrap(), 0.0);
        }
    }

    #[test]
    fn infonce_matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = random_matrix(&mut rng, 4, 3);
        let wa = random_matrix(&mut rng, 4, 3);
        let tau = 1.0;
        let (nw, _) = normalize_rows(&w);
        let (nwa, _) = normalize_rows(&wa);
        let mut oracle = 0.0;
        for i in 0..4 {
            oracle -= dot(nw.row(i), nwa.row(i)) / 4.0;
            let mut inner = 0.0;
            for j in 0..4 {
                inner += (dot(nw.row(i), nwa.row(j)) / tau).exp();
            }
            oracle += tau * inner.ln() / 4.0;
        }
        assert!((infonce_loss(&w, &wa, tau).unwrap() - oracle).abs() < 1e-10);
    }

    #[test]
    fn infonce_row_rescale_invariant() {
        let w = Matrix::from_rows(&[&[1.0, 0.5], &[0.2, -1.0], &[0.7, 0.7]]);
        let wa = Matrix::from_rows(&[&[0.3, 0.4], &[-0.5, 0.1], &[1.0, -1.0]]);
        let mut w2 = w.clone();
        for v in w2.row_mut(1) {
            *v *= 37.0;
        }
        assert_eq!(
            infonce_loss(&w, &wa, 0.5).unwrap(),
            infonce_loss(&w2, &wa, 0.5).unwrap()
        );
    }

    #[test]
    fn infonce_rejects_bad_tau() {
        let w = Matrix::identity(2);
        assert!(infonce_loss(&w, &w, 0.0).is_err());
    }

    #[test]
    fn expanded_equals_plc_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _case in 0..50 {
            let n = rng.gen_range(2..=16);
            let r = rng.gen_range(1..=6);
            let w = random_matrix(&mut rng, n, r);
            let wa = random_matrix(&mut rng, n, r);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let s = build_signed_graph(&labels);
            let l = signed_laplacian(&s);
            let gamma = rng.gen_range(0.0..2.0);
            let a = plc_expanded(&w, &wa, &s, gamma);
            let b = plc_loss(&w, &wa, &l, gamma);
            assert!((a - b).abs() < 1e-12, "case n={n} gamma={gamma}: {a} vs {b}");
        }
    }

    #[test]
    fn expanded_gamma_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let w = random_matrix(&mut rng, 5, 3);
        let wa = random_matrix(&mut rng, 5, 3);
        let s = build_signed_graph(&[0, 1, 0, 1, 2]);
        let expect = -trans_inv(&w, &wa);
        assert!((plc_expanded(&w, &wa, &s, 0.0) - expect).abs() < 1e-14);
    }

    #[test]
    fn expanded_empty_graph_matches_plc() {
        // single node: S has no nonzero entries
        let w = Matrix::from_rows(&[&[1.0, 1.0]]);
        let wa = Matrix::from_rows(&[&[1.0, -1.0]]);
        let s = build_signed_graph(&[0]);
        let l = signed_laplacian(&s);
        for gamma in [0.0, 0.5, 2.0] {
            let a = plc_expanded(&w, &wa, &s, gamma);
            let b = plc_loss(&w, &wa, &l, gamma);
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn block_pairwise_empty_graph() {
        let w = Matrix::from_rows(&[&[1.0, 0.0]]);
        let wa = Matrix::from_rows(&[&[0.6, 0.8]]);
        let s = build_signed_graph(&[0]);
        let report = block_pairwise_diagnostic(&w, &wa, &s);
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].block_term, 0.0);
        assert!((report[0].pairwise_term + 0.6).abs() < 1e-15);
    }

    #[test]
    fn block_pairwise_two_samples_by_hand() {
        let w = Matrix::identity(2);
        let s = build_signed_graph(&[0, 0]); // S_01 = S_10 = 1
        let report = block_pairwise_diagnostic(&w, &w, &s);
        // block_0   = -<e1, e2> = 0
        // pairwise_0 = -<e1, e1 - e2> = -1
        assert!((report[0].block_term - 0.0).abs() < 1e-15);
        assert!((report[0].pairwise_term + 1.0).abs() < 1e-15);
        assert!((report[1].block_term - 0.0).abs() < 1e-15);
        assert!((report[1].pairwise_term + 1.0).abs() < 1e-15);
    }

    #[test]
    fn block_pairwise_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for n in [1usize, 3, 8] {
            let w = random_matrix(&mut rng, n, 2);
            let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            let s = build_signed_graph(&labels);
            assert_eq!(block_pairwise_diagnostic(&w, &w, &s).len(), n);
        }
    }

    proptest! {
        #[test]
        fn prop_row_rescale_invariance(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=10);
            let r = rng.gen_range(1..=5);
            let w = random_matrix(&mut rng, n, r);
            let wa = random_matrix(&mut rng, n, r);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let l = laplacian_from(&labels);
            let gamma = rng.gen_range(0.0..1.0);
            let row = rng.gen_range(0..n);
            let scale = rng.gen_range(0.1..50.0);
            let mut w_scaled = w.clone();
            for v in w_scaled.row_mut(row) {
                *v *= scale;
            }
            let a = plc_loss(&w, &wa, &l, gamma);
            let b = plc_loss(&w_scaled, &wa, &l, gamma);
            prop_assert!((a - b).abs() < 1e-12);
            let c = cross_view_laplacian(&w, &wa, &l);
            let d = cross_view_laplacian(&w_scaled, &wa, &l);
            prop_assert!((c - d).abs() < 1e-12);
        }

        #[test]
        fn prop_fold_identity(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=32);
            let r = rng.gen_range(1..=8);
            let w = random_matrix(&mut rng, n, r);
            let wa = random_matrix(&mut rng, n, r);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..4)).collect();
            let l = laplacian_from(&labels);
            let gamma = rng.gen_range(0.0..1.5);
            let eff = effective_laplacian(&l, gamma, n);
            let a = plc_loss(&w, &wa, &l, gamma);
            let b = plc_loss_effective(&w, &wa, &eff);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn prop_trans_inv_bounded(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=12);
            let r = rng.gen_range(1..=5);
            let w = random_matrix(&mut rng, n, r);
            let wa = random_matrix(&mut rng, n, r);
            let v = trans_inv(&w, &wa);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }

        #[test]
        fn prop_same_class_self_cross_view_nonneg(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=12);
            let r = rng.gen_range(1..=5);
            let w = random_matrix(&mut rng, n, r);
            let l = laplacian_from(&vec![0usize; n]);
            prop_assert!(cross_view_laplacian(&w, &w, &l) >= -1e-10);
        }

        #[test]
        fn prop_loss_report_invariants(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=6);
            let model = random_model(&mut rng, n, &[3, 2], 2);
            let wa = random_matrix(&mut rng, n, 2);
            let len = n * 6;
            let x = DenseTensor::new(vec![n, 3, 2], (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let xa = DenseTensor::new(vec![n, 3, 2], (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let l = laplacian_from(&labels);
            let hp = Hyperparams {
                alpha: rng.gen_range(0.0..1.0),
                beta: rng.gen_range(0.0..2.0),
                gamma: Some(rng.gen_range(0.0..1.0)),
                ..Hyperparams::default()
            };
            let rep = total_loss(&x, &xa, &model, &wa, &l, &hp).unwrap();
            let gamma = hp.effective_gamma(n);
            prop_assert!((rep.plc - (-rep.trans_inv + gamma * rep.cross_view)).abs() < 1e-12);
            prop_assert!((rep.total - (rep.cp + hp.alpha * rep.reg + hp.beta * rep.plc)).abs() < 1e-12);
        }
    }
}
