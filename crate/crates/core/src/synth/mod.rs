//! Synthetic training data: deformation priors, deformed models, rendered
//! views and the dataset manifest that ties them together.

mod dataset;
mod gmm;
mod image;
mod render;

pub use dataset::{
    generate_dataset, train_split, CameraRanges, DatasetManifest, DatasetRecord, GenerateOptions, MANIFEST_NAME,
};
pub use gmm::{fit_gmm, sample_gmm, GaussianMixture, VARIANCE_FLOOR};
pub use image::{
    prepare_input, resize_to_input, to_network_input, GrayImage, BACKGROUND, INPUT_SIZE, RENDER_HEIGHT,
    RENDER_WIDTH,
};
pub use render::{render, Camera, AMBIENT, DIFFUSE};

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EmbeddingGraph, ShapeParams};
use crate::mesh::Mesh;

/// Normal prior shared by every blending weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPrior {
    pub mean: f64,
    pub std: f64,
}

impl AlphaPrior {
    pub fn new(mean: f64, std: f64) -> Result<Self> {
        if !(std > 0.0) || !mean.is_finite() {
            return Err(Error::Validation(format!("invalid alpha prior N({mean}, {std}²)")));
        }
        Ok(Self { mean, std })
    }

    /// Maximum-likelihood normal fit.
    pub fn fit(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation("need at least two alpha samples".into()));
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        Self::new(mean, var.sqrt().max(1e-6))
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mean, self.std).expect("validated prior").sample(rng)
    }

    /// Weights over `node_count` nodes: `c` always drawn, each neighbor kept
    /// with probability `1 − sparsity`, everything else zero.
    pub fn sample_with<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        node_count: usize,
        c: usize,
        omega: &BTreeSet<usize>,
        sparsity: f64,
    ) -> Vec<f64> {
        let mut alpha = vec![0.0; node_count];
        alpha[c] = self.draw(rng);
        for &i in omega {
            let keep = rng.random::<f64>() >= sparsity;
            if keep && i != c {
                alpha[i] = self.draw(rng);
            }
        }
        alpha
    }
}

pub fn sample_alpha(
    prior: &AlphaPrior,
    node_count: usize,
    c: usize,
    omega: &BTreeSet<usize>,
    sparsity: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::Validation(format!("sparsity {sparsity} outside [0, 1]")));
    }
    if c >= node_count || omega.iter().any(|&i| i >= node_count) {
        return Err(Error::InvalidNode { id: c.max(omega.iter().copied().max().unwrap_or(0)), count: node_count });
    }
    Ok(prior.sample_with(&mut ChaCha8Rng::seed_from_u64(seed), node_count, c, omega, sparsity))
}

/// Deforms node `c` by `dp` and blends it with its neighbors by `alpha`.
/// This is the reconstruction path used at inference time.
pub fn synthesize_model(graph: &EmbeddingGraph, c: usize, dp: &[f64], alpha: &[f64]) -> Result<Mesh> {
    let params = ShapeParams {
        index: c,
        dp: crate::ffd::ReducedDisplacements::from_flat(dp)?,
        alpha: alpha.to_vec(),
    };
    crate::pipeline::reconstruct_from_params(graph, &params)
}
