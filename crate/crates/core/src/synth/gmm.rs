//! Diagonal-covariance Gaussian mixtures fitted by expectation maximization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

impl GaussianMixture {
    /// A single isotropic component.
    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Self {
        let dim = mean.len();
        Self {
            weights: vec![1.0],
            means: vec![mean],
            variances: vec![vec![variance; dim]],
        }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        if k == 0 || self.means.len() != k || self.variances.len() != k {
            return Err(Error::Validation("mixture component counts disagree".into()));
        }
        let dim = self.dim();
        if self.means.iter().chain(&self.variances).any(|v| v.len() != dim) {
            return Err(Error::Validation("mixture dimensions disagree".into()));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Validation("mixture weights must be non-negative and sum to 1".into()));
        }
        if self.variances.iter().flatten().any(|&v| !(v > 0.0)) {
            return Err(Error::Validation("mixture variances must be positive".into()));
        }
        Ok(())
    }

    fn component_log_density(&self, j: usize, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((xi, m), v) in x.iter().zip(&self.means[j]).zip(&self.variances[j]) {
            let d = xi - m;
            acc += d * d / v + v.ln();
        }
        -0.5 * (acc + x.len() as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    /// Log density of one point under the mixture.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.k())
            .map(|j| self.weights[j].ln() + self.component_log_density(j, x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Total log-likelihood of a sample set.
    pub fn log_likelihood(&self, samples: &[Vec<f64>]) -> f64 {
        samples.iter().map(|x| self.log_density(x)).sum()
    }

    /// Draws one vector: a component by weight, then a diagonal Gaussian.
    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = self.k() - 1;
        for (j, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                comp = j;
                break;
            }
        }
        self.means[comp]
            .iter()
            .zip(&self.variances[comp])
            .map(|(m, v)| {
                let z: f64 = StandardNormal.sample(rng);
                m + v.sqrt() * z
            })
            .collect()
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

pub fn sample_gmm(gmm: &GaussianMixture, seed: u64) -> Vec<f64> {
    gmm.sample_with(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kmeans_pp<R: Rng>(samples: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![samples[rng.random_range(0..samples.len())].clone()];
    let mut d2: Vec<f64> = samples.iter().map(|s| sq_dist(s, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            d2.iter()
                .position(|&d| {
                    acc += d;
                    acc > target
                })
                .unwrap_or(samples.len() - 1)
        } else {
            rng.random_range(0..samples.len())
        };
        centers.push(samples[next].clone());
        for (d, s) in d2.iter_mut().zip(samples) {
            *d = d.min(sq_dist(s, centers.last().unwrap()));
        }
    }
    centers
}

/// Fits a `k`-component diagonal mixture with `iters` EM iterations after a
/// k-means++ seeding. Returns the model and the log-likelihood recorded at
/// the start of every iteration, plus the final one.
pub fn fit_gmm(samples: &[Vec<f64>], k: usize, iters: usize, seed: u64) -> Result<(GaussianMixture, Vec<f64>)> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot fit a mixture to no samples".into()));
    }
    if k == 0 || samples.len() < k {
        return Err(Error::Validation(format!(
            "need at least k = {k} ≥ 1 samples, got {}",
            samples.len()
        )));
    }
    let dim = samples[0].len();
    if dim == 0 || samples.iter().any(|s| s.len() != dim) {
        return Err(Error::Validation("samples must share a non-zero dimension".into()));
    }
    let n = samples.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = kmeans_pp(samples, k, &mut rng);

    // Hard assignment to the seeds gives the starting responsibilities.
    let mut resp = vec![vec![0.0; k]; n];
    for (i, s) in samples.iter().enumerate() {
        let best = (0..k)
            .min_by(|&a, &b| sq_dist(s, &centers[a]).total_cmp(&sq_dist(s, &centers[b])))
            .unwrap();
        resp[i][best] = 1.0;
    }
    let mut model = m_step(samples, &resp, k, dim);
    let mut history = Vec::with_capacity(iters + 1);
    for _ in 0..iters {
        let ll = e_step(&model, samples, &mut resp);
        history.push(ll);
        model = m_step(samples, &resp, k, dim);
    }
    history.push(model.log_likelihood(samples));
    Ok((model, history))
}

fn e_step(model: &GaussianMixture, samples: &[Vec<f64>], resp: &mut [Vec<f64>]) -> f64 {
    let mut ll = 0.0;
    for (s, r) in samples.iter().zip(resp.iter_mut()) {
        let terms: Vec<f64> = (0..model.k())
            .map(|j| model.weights[j].ln() + model.component_log_density(j, s))
            .collect();
        let lse = log_sum_exp(&terms);
        ll += lse;
        for (rj, t) in r.iter_mut().zip(&terms) {
            *rj = (t - lse).exp();
        }
    }
    ll
}

fn m_step(samples: &[Vec<f64>], resp: &[Vec<f64>], k: usize, dim: usize) -> GaussianMixture {
    let n = samples.len() as f64;
    let mut weights = vec![0.0; k];
    let mut means = vec![vec![0.0; dim]; k];
    let mut variances = vec![vec![0.0; dim]; k];
    for j in 0..k {
        let nj: f64 = resp.iter().map(|r| r[j]).sum();
        if nj <= f64::MIN_POSITIVE {
            // Empty component: keep it harmless with zero weight.
            weights[j] = 0.0;
            variances[j] = vec![1.0; dim];
            continue;
        }
        weights[j] = nj / n;
        for (s, r) in samples.iter().zip(resp) {
            for (m, x) in means[j].iter_mut().zip(s) {
                *m += r[j] * x;
            }
        }
        means[j].iter_mut().for_each(|m| *m /= nj);
        for (s, r) in samples.iter().zip(resp) {
            for ((v, x), m) in variances[j].iter_mut().zip(s).zip(&means[j]) {
                *v += r[j] * (x - m) * (x - m);
            }
        }
        variances[j].iter_mut().for_each(|v| *v = (*v / nj).max(VARIANCE_FLOOR));
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    GaussianMixture {
        weights,
        means,
        variances,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_component_is_closed_form() {
        let samples: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1, (i as f64).sin()]).collect();
        let (g, _) = fit_gmm(&samples, 1, 5, 0).unwrap();
        for d in 0..2 {
            let mean: f64 = samples.iter().map(|s| s[d]).sum::<f64>() / 50.0;
            let var: f64 = samples.iter().map(|s| (s[d] - mean).powi(2)).sum::<f64>() / 50.0;
            assert!((g.means[0][d] - mean).abs() < 1e-6);
            assert!((g.variances[0][d] - var).abs() < 1e-6);
        }
        g.validate().unwrap();
    }

    #[test]
    fn collapsed_component_samples_its_mean() {
        let g = GaussianMixture::isotropic(vec![0.5, -1.0, 2.0], 1e-12);
        for (x, m) in sample_gmm(&g, 4).iter().zip([0.5, -1.0, 2.0]) {
            assert!((x - m).abs() < 1e-4);
        }
        assert_eq!(sample_gmm(&g, 9), sample_gmm(&g, 9));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fit_gmm(&[], 1, 1, 0).is_err());
        assert!(fit_gmm(&[vec![1.0]], 2, 1, 0).is_err());
        let mut g = GaussianMixture::isotropic(vec![0.0], 1.0);
        g.weights[0] = 0.5;
        assert!(g.validate().is_err());
    }
}
