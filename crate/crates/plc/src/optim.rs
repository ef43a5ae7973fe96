//! The training procedure: ridge CP-ALS initialization, per-row fixed-point
//! feature updates against the effective Laplacian, shared-factor ridge
//! updates over both views, and the outer loop that re-estimates pseudo
//! labels each iteration until the total loss settles.
//!
//! Feature rows update Jacobi style — every row reads the frozen partner
//! view and a frozen graph — so rows are independent and run in parallel
//! with results identical for any thread count. Randomness is derived from
//! (seed, phase, index) only.

use crate::error::{Error, Result};
use crate::graph::{
    build_signed_graph, effective_laplacian, kmeans, signed_laplacian, EffectiveLaplacian,
    SignedGraph, SignedLaplacian,
};
use crate::linalg;
use crate::loss::{total_loss, Hyperparams, LossReport};
use crate::seeding;
use crate::tensor::{
    gram_hadamard, khatri_rao, normalize_rows, solve_ridge, unfold, unfold_samples, DenseTensor,
    KruskalModel, Matrix,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::time::Instant;

/// Ridge ALS sweeps applied by `fit` during initialization.
const INIT_SWEEPS: usize = 10;

/// Norm below which a feature row counts as numerically zero.
const NORM_FLOOR: f64 = 1e-12;

/// Evolving optimizer state, exposed to per-iteration observers.
#[derive(Debug, Clone)]
pub struct FitState {
    pub model: KruskalModel,
    pub w_aug: Matrix,
    pub graph: SignedGraph,
    pub laplacian: SignedLaplacian,
    pub loss_history: Vec<LossReport>,
    pub outer_iter: usize,
}

/// Cumulative wall-clock seconds spent in each phase of the outer loop.
#[derive(Debug, Clone, Copy, Default)]
pub struct PhaseTimings {
    pub graph_s: f64,
    pub features_s: f64,
    pub factors_s: f64,
    pub loss_s: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub state: FitState,
    pub converged: bool,
    pub pseudo_labels: Vec<usize>,
    pub timings: PhaseTimings,
    pub seconds_per_iter: Vec<f64>,
}

/// One per-row fixed-point update outcome.
#[derive(Debug, Clone)]
pub struct FeatureRowUpdate {
    pub w: Vec<f64>,
    pub iters: usize,
    /// Successive step-length ratios ||w_{t+1}-w_t|| / ||w_t-w_{t-1}||.
    pub ratios: Vec<f64>,
    /// Smallest and largest iterate norms seen (w0 included), for
    /// contraction-constant checks.
    pub min_norm: f64,
    pub max_norm: f64,
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    use rand_distr::StandardNormal;
    Matrix::new(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )
    .unwrap()
}

/// Seeded random CP model refined by `iters` ridge ALS sweeps on one tensor.
/// The objective 0.5||X - [[W,F..]]||^2 + (alpha/2)(||W||^2 + sum ||F||^2)
/// never increases across sweeps.
pub fn cp_als_init(
    x: &DenseTensor,
    rank: usize,
    alpha: f64,
    iters: usize,
    seed: u64,
) -> Result<KruskalModel> {
    if rank < 1 {
        return Err(Error::Config("rank must be at least 1".into()));
    }
    if x.order() < 3 {
        return Err(Error::Dimension(format!(
            "CP init needs an order >= 3 tensor, got {}",
            x.order()
        )));
    }
    let dims = x.dims().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(seed, "cp-init", 0));
    let mut weights = random_matrix(&mut rng, dims[0], rank);
    let mut factors: Vec<Matrix> = dims[1..]
        .iter()
        .map(|&d| random_matrix(&mut rng, d, rank))
        .collect();

    for _sweep in 0..iters {
        // sample mode first, then each factor mode in order
        for mode in 0..dims.len() {
            let mut others: Vec<&Matrix> = Vec::with_capacity(dims.len() - 1);
            if mode != 0 {
                others.push(&weights);
            }
            for (k, f) in factors.iter().enumerate() {
                if k + 1 != mode {
                    others.push(f);
                }
            }
            let gram = gram_hadamard(&others)?;
            let kr = khatri_rao(&others)?;
            let rhs = unfold(x, mode)?.matmul(&kr)?;
            let updated = solve_ridge(&gram, &rhs, alpha)?;
            if mode == 0 {
                weights = updated;
            } else {
                factors[mode - 1] = updated;
            }
        }
    }
    KruskalModel::new(weights, factors)
}

/// Internals shared by every row update in one feature-matrix pass.
struct RowSolveContext<'a> {
    /// Cholesky factor of H1^T H1 + alpha I.
    chol: &'a [f64],
    rank: usize,
    beta: f64,
    inner_tol: f64,
    inner_max: usize,
}

/// Right-multiply a row vector by (H1^T H1 + alpha I)^{-1} via the
/// prefactored Cholesky.
fn solve_row(ctx: &RowSolveContext, row: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    linalg::cholesky_solve(ctx.chol, ctx.rank, &mut out);
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fixed-point iteration for one feature row:
/// w <- (x_row H1 - (beta/2) h2 (I - w^T w / ||w||^2) / ||w||) (H1^T H1 + alpha I)^{-1}
/// starting from `w0`, stopping when the step length drops below `inner_tol`
/// or after `inner_max` applications.
fn update_row_prepared(
    ctx: &RowSolveContext,
    xh1_row: &[f64],
    h2: &[f64],
    w0: &[f64],
) -> Result<FeatureRowUpdate> {
    let ridge = solve_row(ctx, xh1_row);
    if ctx.beta == 0.0 {
        return Ok(FeatureRowUpdate {
            min_norm: norm(w0).min(norm(&ridge)),
            max_norm: norm(w0).max(norm(&ridge)),
            w: ridge,
            iters: 1,
            ratios: Vec::new(),
        });
    }
    let r = ctx.rank;
    let mut w = w0.to_vec();
    let mut min_norm = norm(&w);
    let mut max_norm = min_norm;
    let mut prev_step: Option<f64> = None;
    let mut ratios = Vec::new();
    let mut iters = 0;
    for _ in 0..ctx.inner_max {
        let wn = norm(&w);
        if wn < NORM_FLOOR {
            return Err(Error::Numerical(format!(
                "feature row norm underflow ({wn:.3e}) during fixed-point iteration"
            )));
        }
        // h2 (I - w^T w / ||w||^2) = h2 - (h2 . w_hat) w_hat
        let what: Vec<f64> = w.iter().map(|v| v / wn).collect();
        let h2_dot: f64 = h2.iter().zip(what.iter()).map(|(a, b)| a * b).sum();
        let mut rhs = vec![0.0; r];
        for i in 0..r {
            rhs[i] = xh1_row[i] - 0.5 * ctx.beta * (h2[i] - h2_dot * what[i]) / wn;
        }
        let next = solve_row(ctx, &rhs);
        let step = sub_norm(&next, &w);
        if let Some(p) = prev_step {
            if p > 0.0 {
                ratios.push(step / p);
            }
        }
        prev_step = Some(step);
        w = next;
        iters += 1;
        let n = norm(&w);
        min_norm = min_norm.min(n);
        max_norm = max_norm.max(n);
        if step < ctx.inner_tol {
            break;
        }
    }
    Ok(FeatureRowUpdate {
        w,
        iters,
        ratios,
        min_norm,
        max_norm,
    })
}

/// Standalone per-row update. `x_row` is the flattened sample slice,
/// `h1` the Khatri-Rao of the shared factors, `h2` the row's Laplacian
/// coupling term.
#[allow(clippy::too_many_arguments)]
pub fn update_feature_row(
    x_row: &[f64],
    h1: &Matrix,
    h2: &[f64],
    w0: &[f64],
    alpha: f64,
    beta: f64,
    inner_tol: f64,
    inner_max: usize,
) -> Result<FeatureRowUpdate> {
    if x_row.len() != h1.rows() {
        return Err(Error::Dimension(format!(
            "x_row length {} vs H1 rows {}",
            x_row.len(),
            h1.rows()
        )));
    }
    let r = h1.cols();
    if h2.len() != r || w0.len() != r {
        return Err(Error::Dimension("h2 and w0 must have rank length".into()));
    }
    if beta != 0.0 && norm(w0) < NORM_FLOOR {
        return Err(Error::Numerical("w0 must be nonzero when beta > 0".into()));
    }
    let gram = h1.gram();
    let mut reg = gram.clone();
    for i in 0..r {
        reg.data_mut()[i * r + i] += alpha;
    }
    let chol = linalg::cholesky(reg.data(), r)?;
    let mut xh1 = vec![0.0; r];
    for (i, &xv) in x_row.iter().enumerate() {
        if xv != 0.0 {
            for (slot, &hv) in xh1.iter_mut().zip(h1.row(i)) {
                *slot += xv * hv;
            }
        }
    }
    let ctx = RowSolveContext {
        chol: &chol,
        rank: r,
        beta,
        inner_tol,
        inner_max,
    };
    update_row_prepared(&ctx, &xh1, h2, w0)
}

/// Update every feature row of one view against a frozen partner matrix.
/// Rows are independent (Jacobi) and processed in parallel.
pub fn update_features(
    x: &DenseTensor,
    model: &KruskalModel,
    w_partner: &Matrix,
    l_eff: &EffectiveLaplacian,
    hp: &Hyperparams,
) -> Result<Matrix> {
    let n = x.dims()[0];
    let r = model.rank;
    let factor_refs: Vec<&Matrix> = model.factors.iter().collect();
    let gram = gram_hadamard(&factor_refs)?;
    let kr = khatri_rao(&factor_refs)?;
    let xh1 = unfold_samples(x)?.matmul(&kr)?;

    if hp.beta == 0.0 {
        return solve_ridge(&gram, &xh1, hp.alpha);
    }

    let mut reg = gram.clone();
    for i in 0..r {
        reg.data_mut()[i * r + i] += hp.alpha;
    }
    let chol = linalg::cholesky(reg.data(), r)?;
    // h2 row n = (L_eff row n) * Lambda(partner) * partner
    let (partner_normed, _) = normalize_rows(w_partner);
    let h2 = l_eff.matrix().matmul(&partner_normed)?;

    let ctx = RowSolveContext {
        chol: &chol,
        rank: r,
        beta: hp.beta,
        inner_tol: hp.inner_tol,
        inner_max: hp.inner_max_iters,
    };
    let mut out = Matrix::zeros(n, r);
    let results: Result<Vec<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let w0 = model.weights.row(i);
            if norm(w0) < NORM_FLOOR {
                // a vanished row contributes nothing to any Laplacian term;
                // the limit of its update is the plain ridge solution
                log::warn!("feature row {i} is numerically zero; using ridge update");
                return Ok(solve_row(&ctx, xh1.row(i)));
            }
            update_row_prepared(&ctx, xh1.row(i), h2.row(i), w0).map(|u| u.w)
        })
        .collect();
    for (i, row) in results?.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&row);
    }
    Ok(out)
}

/// Ridge ALS update of the shared factors against both views stacked along
/// the sample mode. Modes update in order; each sub-update exactly minimizes
/// its ridge least-squares problem, so the factor-restricted objective never
/// increases.
pub fn update_factors(
    x: &DenseTensor,
    x_aug: &DenseTensor,
    w: &Matrix,
    w_aug: &Matrix,
    factors: &[Matrix],
    alpha: f64,
) -> Result<Vec<Matrix>> {
    if x.dims() != x_aug.dims() {
        return Err(Error::Dimension(format!(
            "view dims differ: {:?} vs {:?}",
            x.dims(),
            x_aug.dims()
        )));
    }
    let n = x.dims()[0];
    let r = w.cols();
    // stacked tensor [2N, ...] and stacked weights [W; W_aug]
    let mut stacked_dims = x.dims().to_vec();
    stacked_dims[0] = 2 * n;
    let mut data = Vec::with_capacity(2 * x.len());
    data.extend_from_slice(x.data());
    data.extend_from_slice(x_aug.data());
    let y = DenseTensor::new(stacked_dims, data)?;
    let mut v = Matrix::zeros(2 * n, r);
    for i in 0..n {
        v.row_mut(i).copy_from_slice(w.row(i));
        v.row_mut(n + i).copy_from_slice(w_aug.row(i));
    }

    let mut updated: Vec<Matrix> = factors.to_vec();
    for m in 0..updated.len() {
        let mut others: Vec<&Matrix> = vec![&v];
        for (k, f) in updated.iter().enumerate() {
            if k != m {
                others.push(f);
            }
        }
        let gram = gram_hadamard(&others)?;
        let kr = khatri_rao(&others)?;
        let rhs = unfold(&y, m + 1)?.matmul(&kr)?;
        updated[m] = solve_ridge(&gram, &rhs, alpha)?;
    }
    Ok(updated)
}

/// Full training loop over two views.
pub fn fit(
    x: &DenseTensor,
    x_aug: &DenseTensor,
    hp: &Hyperparams,
    k_clusters: usize,
) -> Result<FitResult> {
    fit_with_observer(x, x_aug, hp, k_clusters, |_| {})
}

/// [`fit`] with a per-iteration observer, called after each outer iteration
/// with the freshly updated state (graph, features, factors, loss history).
pub fn fit_with_observer<F>(
    x: &DenseTensor,
    x_aug: &DenseTensor,
    hp: &Hyperparams,
    k_clusters: usize,
    mut observer: F,
) -> Result<FitResult>
where
    F: FnMut(&FitState),
{
    hp.validate()?;
    if x.dims() != x_aug.dims() {
        return Err(Error::Dimension(format!(
            "views must share dims: {:?} vs {:?}",
            x.dims(),
            x_aug.dims()
        )));
    }
    if k_clusters < 2 {
        return Err(Error::Input("k_clusters must be at least 2".into()));
    }
    let n = x.dims()[0];
    let gamma = hp.effective_gamma(n);

    // initialization: plain ridge CP on the raw view, then ridge features
    // for the augmented view against the shared factors
    let model = cp_als_init(x, hp.rank, hp.alpha, INIT_SWEEPS, hp.seed)?;
    let factor_refs: Vec<&Matrix> = model.factors.iter().collect();
    let gram = gram_hadamard(&factor_refs)?;
    let kr = khatri_rao(&factor_refs)?;
    let w_aug = solve_ridge(&gram, &unfold_samples(x_aug)?.matmul(&kr)?, hp.alpha)?;

    let mut state = FitState {
        graph: build_signed_graph(&vec![0; n]),
        laplacian: signed_laplacian(&build_signed_graph(&vec![0; n])),
        model,
        w_aug,
        loss_history: Vec::new(),
        outer_iter: 0,
    };

    let mut timings = PhaseTimings::default();
    let mut seconds_per_iter = Vec::new();
    let mut converged = false;

    for outer in 1..=hp.outer_max_iters {
        let iter_start = Instant::now();

        let t = Instant::now();
        let labels = kmeans(
            &state.model.weights,
            k_clusters,
            seeding::derive(hp.seed, "kmeans", outer as u64),
        )?;
        state.graph = build_signed_graph(&labels);
        state.laplacian = signed_laplacian(&state.graph);
        let l_eff = effective_laplacian(&state.laplacian, gamma, n);
        timings.graph_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        // raw view first against the frozen augmented features, then the
        // augmented view against the refreshed raw features (L_eff is
        // symmetric, so the same rows serve both directions)
        let new_w = update_features(x, &state.model, &state.w_aug, &l_eff, hp)?;
        state.model.weights = new_w;
        let aug_model = KruskalModel::new(state.w_aug.clone(), state.model.factors.clone())?;
        state.w_aug = update_features(x_aug, &aug_model, &state.model.weights, &l_eff, hp)?;
        timings.features_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        state.model.factors = update_factors(
            x,
            x_aug,
            &state.model.weights,
            &state.w_aug,
            &state.model.factors,
            hp.alpha,
        )?;
        timings.factors_s += t.elapsed().as_secs_f64();

        let t = Instant::now();
        let report = total_loss(x, x_aug, &state.model, &state.w_aug, &state.laplacian, hp)?;
        timings.loss_s += t.elapsed().as_secs_f64();

        state.loss_history.push(report);
        state.outer_iter = outer;
        seconds_per_iter.push(iter_start.elapsed().as_secs_f64());
        observer(&state);

        if state.loss_history.len() >= 2 {
            let prev = state.loss_history[state.loss_history.len() - 2].total;
            if (report.total - prev).abs() < hp.outer_tol {
                converged = true;
                break;
            }
        }
    }

    // final pseudo-labels from the settled features
    let pseudo_labels = kmeans(
        &state.model.weights,
        k_clusters,
        seeding::derive(hp.seed, "kmeans-final", 0),
    )?;
    state.graph = build_signed_graph(&pseudo_labels);
    state.laplacian = signed_laplacian(&state.graph);

    Ok(FitResult {
        state,
        converged,
        pseudo_labels,
        timings,
        seconds_per_iter,
    })
}
