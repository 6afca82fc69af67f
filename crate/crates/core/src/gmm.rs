//! Diagonal-covariance Gaussian mixtures: density evaluation and EM training.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Responsibility mass under which a component is considered collapsed.
pub const DEGENERATE_MASS: f64 = 1e-8;
const LLOYD_ITERATIONS: usize = 20;

/// `log N(x; mean, diag(variance))`.
pub fn component_log_density(x: &[f64], mean: &[f64], variance: &[f64]) -> Result<f64> {
    Error::check_dim(mean.len(), x.len())?;
    Error::check_dim(mean.len(), variance.len())?;
    let mut acc = 0.0;
    for ((&xi, &mi), &vi) in x.iter().zip(mean).zip(variance) {
        let d = xi - mi;
        acc += LN_2PI + vi.ln() + d * d / vi;
    }
    Ok(-0.5 * acc)
}

/// `ln Σ exp(v_i)` without overflow or underflow.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalGmm {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<f64>,
    variances: Vec<f64>,
}

impl DiagonalGmm {
    /// Validates and builds a mixture from row-major `means` and `variances`
    /// (`weights.len()` rows of `dim` columns each).
    pub fn new(dim: usize, weights: Vec<f64>, means: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        let gmm = Self { dim, weights, means, variances };
        gmm.validate()?;
        Ok(gmm)
    }

    pub fn from_rows(weights: Vec<f64>, means: &[Vec<f64>], variances: &[Vec<f64>]) -> Result<Self> {
        let dim = means.first().map(Vec::len).unwrap_or(0);
        Error::check_dim(weights.len(), means.len())?;
        Error::check_dim(weights.len(), variances.len())?;
        for row in means.iter().chain(variances) {
            Error::check_dim(dim, row.len())?;
        }
        Self::new(dim, weights, means.concat(), variances.concat())
    }

    fn validate(&self) -> Result<()> {
        let c = self.weights.len();
        if c == 0 || self.dim == 0 {
            return Err(Error::InvalidConfig("mixture needs at least one component and dimension".into()));
        }
        Error::check_dim(c * self.dim, self.means.len())?;
        Error::check_dim(c * self.dim, self.variances.len())?;
        if self.weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidConfig("mixture weights must be positive".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidConfig(format!("mixture weights sum to {sum}, not 1")));
        }
        if self.means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidConfig("non-finite mean".into()));
        }
        if self.variances.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("variances must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, c: usize) -> &[f64] {
        &self.means[c * self.dim..(c + 1) * self.dim]
    }

    pub fn variance(&self, c: usize) -> &[f64] {
        &self.variances[c * self.dim..(c + 1) * self.dim]
    }

    /// All means, component after component.
    pub fn means_flat(&self) -> &[f64] {
        &self.means
    }

    pub fn variances_flat(&self) -> &[f64] {
        &self.variances
    }

    /// Same weights and variances, different means.
    pub fn with_means(&self, means: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.weights.clone(), means, self.variances.clone())
    }

    /// Per-component `ln w_c + log N(x; μ_c, Σ_c)`.
    pub fn weighted_log_densities(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dim, x.len())?;
        (0..self.num_components())
            .map(|c| Ok(self.weights[c].ln() + component_log_density(x, self.mean(c), self.variance(c))?))
            .collect()
    }

    pub fn mixture_log_likelihood(&self, x: &[f64]) -> Result<f64> {
        Ok(log_sum_exp(&self.weighted_log_densities(x)?))
    }

    /// `Σ_t log p(x_t)`, frames treated as independent.
    pub fn sequence_log_likelihood(&self, features: &FeatureMatrix) -> Result<f64> {
        features.ensure_nonempty()?;
        Error::check_dim(self.dim, features.dim())?;
        features.frames().map(|x| self.mixture_log_likelihood(x)).sum()
    }

    /// Posterior component probabilities for one frame.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut lp = self.weighted_log_densities(x)?;
        let total = log_sum_exp(&lp);
        lp.iter_mut().for_each(|v| *v = (*v - total).exp());
        Ok(lp)
    }
}

/// Free-function forms of the mixture operations.
pub fn mixture_log_likelihood(x: &[f64], gmm: &DiagonalGmm) -> Result<f64> {
    gmm.mixture_log_likelihood(x)
}

pub fn sequence_log_likelihood(features: &FeatureMatrix, gmm: &DiagonalGmm) -> Result<f64> {
    gmm.sequence_log_likelihood(features)
}

pub fn responsibilities(x: &[f64], gmm: &DiagonalGmm) -> Result<Vec<f64>> {
    gmm.responsibilities(x)
}

/// Precomputed per-component constants for fast per-frame evaluation.
pub(crate) struct Evaluator<'a> {
    gmm: &'a DiagonalGmm,
    consts: Vec<f64>,
    inv_var: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(gmm: &'a DiagonalGmm) -> Self {
        let consts = (0..gmm.num_components())
            .map(|c| {
                let log_det: f64 = gmm.variance(c).iter().map(|v| v.ln()).sum();
                gmm.weights[c].ln() - 0.5 * (gmm.dim as f64 * LN_2PI + log_det)
            })
            .collect();
        let inv_var = gmm.variances.iter().map(|v| 1.0 / v).collect();
        Self { gmm, consts, inv_var }
    }

    /// Fills `out` with weighted log densities and returns their log-sum-exp.
    pub(crate) fn frame(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let dim = self.gmm.dim;
        for (c, slot) in out.iter_mut().enumerate() {
            let mean = &self.gmm.means[c * dim..(c + 1) * dim];
            let iv = &self.inv_var[c * dim..(c + 1) * dim];
            let mut q = 0.0;
            for d in 0..dim {
                let diff = x[d] - mean[d];
                q += diff * diff * iv[d];
            }
            *slot = self.consts[c] - 0.5 * q;
        }
        log_sum_exp(out)
    }

    /// Turns the output of [`Evaluator::frame`] into posteriors in place.
    pub(crate) fn posteriors(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let total = self.frame(x, out);
        out.iter_mut().for_each(|v| *v = (*v - total).exp());
        total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmTrainingConfig {
    pub num_components: usize,
    pub max_iterations: usize,
    /// Stop once the relative log-likelihood gain drops below this.
    pub convergence_tol: f64,
    pub variance_floor: f64,
    pub rng_seed: u64,
}

impl Default for GmmTrainingConfig {
    fn default() -> Self {
        Self { num_components: 64, max_iterations: 100, convergence_tol: 1e-5, variance_floor: 1e-3, rng_seed: 0 }
    }
}

impl GmmTrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_components == 0 {
            return Err(Error::InvalidConfig("num_components must be at least 1".into()));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::InvalidConfig("convergence_tol must be positive".into()));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::InvalidConfig("variance_floor must be positive".into()));
        }
        Ok(())
    }
}

/// A trained mixture plus the log-likelihood seen at every E-step.
#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub gmm: DiagonalGmm,
    /// `log_likelihoods[i]` is the total data log-likelihood of the model
    /// after `i` M-steps.
    pub log_likelihoods: Vec<f64>,
    pub converged: bool,
    /// Components re-seeded after their responsibility mass collapsed.
    pub reseeded: usize,
}

/// Fits a mixture to `features` (k-means++ seeding, Lloyd refinement, EM).
pub fn em_fit(features: &FeatureMatrix, config: &GmmTrainingConfig) -> Result<DiagonalGmm> {
    Ok(em_fit_with_history(features, config)?.gmm)
}

pub fn em_fit_with_history(features: &FeatureMatrix, config: &GmmTrainingConfig) -> Result<EmOutcome> {
    config.validate()?;
    let c = config.num_components;
    if features.len() < c {
        return Err(Error::TooFewFrames { frames: features.len(), components: c });
    }
    let mut gmm = kmeans_init(features, c, config.variance_floor, config.rng_seed);
    let mut history = Vec::new();
    let mut converged = false;
    let mut reseeded = 0;

    for iter in 0..=config.max_iterations {
        let stats = e_step(&gmm, features);
        let ll = stats.log_likelihood;
        if let Some(&prev) = history.last() {
            let gain = (ll - prev) / f64::abs(prev).max(f64::MIN_POSITIVE);
            if gain < config.convergence_tol {
                converged = true;
            }
        }
        history.push(ll);
        if converged || iter == config.max_iterations {
            break;
        }
        let (next, rescued) = m_step(&gmm, features, &stats, config.variance_floor)?;
        gmm = next;
        reseeded += rescued;
    }

    Ok(EmOutcome { gmm, log_likelihoods: history, converged, reseeded })
}

struct EStats {
    occupancy: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
    log_likelihood: f64,
    /// Frame indices ordered from worst to best modelled.
    worst_frames: Vec<usize>,
}

fn e_step(gmm: &DiagonalGmm, features: &FeatureMatrix) -> EStats {
    let (c, dim) = (gmm.num_components(), gmm.dim());
    let eval = Evaluator::new(gmm);
    let mut occupancy = vec![0.0; c];
    let mut first = vec![0.0; c * dim];
    let mut second = vec![0.0; c * dim];
    let mut frame_ll = Vec::with_capacity(features.len());
    let mut post = vec![0.0; c];
    for x in features.frames() {
        frame_ll.push(eval.posteriors(x, &mut post));
        for (k, &g) in post.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            occupancy[k] += g;
            let f = &mut first[k * dim..(k + 1) * dim];
            let s = &mut second[k * dim..(k + 1) * dim];
            for d in 0..dim {
                f[d] += g * x[d];
                s[d] += g * x[d] * x[d];
            }
        }
    }
    let log_likelihood = frame_ll.iter().sum();
    let mut worst_frames: Vec<usize> = (0..frame_ll.len()).collect();
    worst_frames.sort_by(|&a, &b| frame_ll[a].total_cmp(&frame_ll[b]).then(a.cmp(&b)));
    EStats { occupancy, first, second, log_likelihood, worst_frames }
}

fn m_step(gmm: &DiagonalGmm, features: &FeatureMatrix, stats: &EStats, floor: f64) -> Result<(DiagonalGmm, usize)> {
    let (c, dim) = (gmm.num_components(), gmm.dim());
    let total = features.len() as f64;
    let global_var = global_variance(features, floor);
    let mut weights = Vec::with_capacity(c);
    let mut means = Vec::with_capacity(c * dim);
    let mut variances = Vec::with_capacity(c * dim);
    let mut worst = stats.worst_frames.iter();
    let mut rescued = 0;

    for k in 0..c {
        let n = stats.occupancy[k];
        if n < DEGENERATE_MASS {
            // re-seed on the frame the current model explains worst
            let &t = worst.next().ok_or(Error::DegenerateComponent(k))?;
            weights.push(1.0 / total);
            means.extend_from_slice(features.frame(t));
            variances.extend_from_slice(&global_var);
            rescued += 1;
            continue;
        }
        weights.push(n / total);
        for d in 0..dim {
            let mu = stats.first[k * dim + d] / n;
            let var = stats.second[k * dim + d] / n - mu * mu;
            means.push(mu);
            variances.push(var.max(floor));
        }
    }
    normalize(&mut weights);
    Ok((DiagonalGmm::new(dim, weights, means, variances)?, rescued))
}

fn normalize(weights: &mut [f64]) {
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
}

fn global_variance(features: &FeatureMatrix, floor: f64) -> Vec<f64> {
    let dim = features.dim();
    let n = features.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in features.frames() {
        for d in 0..dim {
            mean[d] += x[d];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; dim];
    for x in features.frames() {
        for d in 0..dim {
            var[d] += (x[d] - mean[d]).powi(2);
        }
    }
    var.into_iter().map(|v| (v / n).max(floor)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by a few Lloyd passes. The resulting clusters
/// give the initial means, floored per-cluster variances and weights.
fn kmeans_init(features: &FeatureMatrix, c: usize, floor: f64, seed: u64) -> DiagonalGmm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = features.len();
    let dim = features.dim();

    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(c);
    centers.push(features.frame(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = features.frames().map(|x| sq_dist(x, &centers[0])).collect();
    while centers.len() < c {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let center = features.frame(pick).to_vec();
        for (i, x) in features.frames().enumerate() {
            d2[i] = d2[i].min(sq_dist(x, &center));
        }
        centers.push(center);
    }

    let mut assign = vec![0usize; n];
    for pass in 0..LLOYD_ITERATIONS {
        let mut changed = false;
        for (i, x) in features.frames().enumerate() {
            let best = (0..c).min_by(|&a, &b| sq_dist(x, &centers[a]).total_cmp(&sq_dist(x, &centers[b]))).unwrap();
            changed |= best != assign[i];
            assign[i] = best;
        }
        if pass > 0 && !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; c];
        let mut counts = vec![0usize; c];
        for (i, x) in features.frames().enumerate() {
            counts[assign[i]] += 1;
            for d in 0..dim {
                sums[assign[i]][d] += x[d];
            }
        }
        for k in 0..c {
            // empty clusters keep their previous center
            if counts[k] > 0 {
                centers[k] = sums[k].iter().map(|s| s / counts[k] as f64).collect();
            }
        }
    }

    let global_var = global_variance(features, floor);
    let mut counts = vec![0usize; c];
    let mut sq = vec![vec![0.0; dim]; c];
    for (i, x) in features.frames().enumerate() {
        let k = assign[i];
        counts[k] += 1;
        for d in 0..dim {
            sq[k][d] += (x[d] - centers[k][d]).powi(2);
        }
    }
    let mut weights: Vec<f64> = counts.iter().map(|&m| m.max(1) as f64).collect();
    normalize(&mut weights);
    let variances: Vec<f64> = (0..c)
        .flat_map(|k| {
            if counts[k] >= 2 {
                sq[k].iter().map(|s| (s / counts[k] as f64).max(floor)).collect::<Vec<_>>()
            } else {
                global_var.clone()
            }
        })
        .collect();
    DiagonalGmm::new(dim, weights, centers.concat(), variances).expect("k-means initialisation yields a valid mixture")
}
