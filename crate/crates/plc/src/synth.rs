//! Class-structured synthetic tensors with known weights, factors, labels
//! and signed graph, for desk-scale end-to-end runs. Samples are built from
//! per-class centroids in weight space, pushed through shared unit-norm
//! factors, and observed under elementwise Gaussian noise. A second view of
//! the same weights under fresh noise stands in for the augmented tensor.

use crate::error::Result;
use crate::graph::{build_signed_graph, SignedGraph};
use crate::seeding;
use crate::tensor::{kruskal_reconstruct, DenseTensor, KruskalModel, Matrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub n_per_class: usize,
    pub n_classes: usize,
    pub rank: usize,
    pub dims: [usize; 3],
    pub centroid_scale: f64,
    pub within_class_sigma: f64,
    pub tensor_noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_per_class: 50,
            n_classes: 3,
            rank: 8,
            dims: [12, 16, 16],
            centroid_scale: 3.0,
            within_class_sigma: 0.3,
            tensor_noise_sigma: 0.1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn n_samples(&self) -> usize {
        self.n_per_class * self.n_classes
    }

    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if self.n_per_class == 0 || self.n_classes == 0 || self.rank == 0 {
            return Err(Error::Config("counts and rank must be positive".into()));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("dims must be positive".into()));
        }
        if self.centroid_scale < 0.0
            || self.within_class_sigma < 0.0
            || self.tensor_noise_sigma < 0.0
        {
            return Err(Error::Config("scales and sigmas must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Everything the generator knows about the data it made.
#[derive(Debug, Clone)]
pub struct SynthData {
    /// Observed tensor [N, I, J, K].
    pub x: DenseTensor,
    /// Second view: same weights, independent observation noise.
    pub x_aug: DenseTensor,
    pub labels: Vec<usize>,
    pub true_graph: SignedGraph,
    pub true_model: KruskalModel,
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::new(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )
    .unwrap()
}

fn unit_norm_columns(m: &mut Matrix) {
    let (rows, cols) = (m.rows(), m.cols());
    for c in 0..cols {
        let norm: f64 = (0..rows).map(|r| m.at(r, c) * m.at(r, c)).sum::<f64>().sqrt();
        if norm > 0.0 {
            for r in 0..rows {
                let v = m.at(r, c) / norm;
                m.set(r, c, v);
            }
        }
    }
}

/// Generate a labeled two-view synthetic dataset.
pub fn generate(cfg: &SynthConfig) -> Result<SynthData> {
    cfg.validate()?;
    let n = cfg.n_samples();
    let r = cfg.rank;

    let mut factor_rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, "factors", 0));
    let factors: Vec<Matrix> = cfg
        .dims
        .iter()
        .map(|&d| {
            let mut f = normal_matrix(&mut factor_rng, d, r);
            unit_norm_columns(&mut f);
            f
        })
        .collect();

    let mut centroid_rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, "centroids", 0));
    let centroids: Vec<Vec<f64>> = (0..cfg.n_classes)
        .map(|_| {
            (0..r)
                .map(|_| cfg.centroid_scale * centroid_rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    // per-class labels, shuffled so class blocks are not contiguous
    let mut labels: Vec<usize> = (0..n).map(|i| i / cfg.n_per_class).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, "shuffle", 0));
    for i in (1..n).rev() {
        let j = shuffle_rng.gen_range(0..=i);
        labels.swap(i, j);
    }

    let mut weight_rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, "weights", 0));
    let mut weights = Matrix::zeros(n, r);
    for i in 0..n {
        let mu = &centroids[labels[i]];
        for c in 0..r {
            let z: f64 = weight_rng.sample(StandardNormal);
            weights.set(i, c, mu[c] + cfg.within_class_sigma * z);
        }
    }

    let true_model = KruskalModel::new(weights, factors)?;
    let clean = kruskal_reconstruct(&true_model)?;

    let noisy_view = |tag: &str| -> Result<DenseTensor> {
        if cfg.tensor_noise_sigma == 0.0 {
            return Ok(clean.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seeding::derive(cfg.seed, tag, 0));
        let data = clean
            .data()
            .iter()
            .map(|&v| v + cfg.tensor_noise_sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        DenseTensor::new(clean.dims().to_vec(), data)
    };
    let x = noisy_view("noise-x")?;
    let x_aug = noisy_view("noise-xaug")?;

    let true_graph = build_signed_graph(&labels);
    Ok(SynthData {
        x,
        x_aug,
        labels,
        true_graph,
        true_model,
    })
}
