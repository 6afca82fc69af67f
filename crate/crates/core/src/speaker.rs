//! Universal background model, Baum-Welch statistics, MAP mean adaptation
//! and supervectors.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gmm::{em_fit_with_history, DiagonalGmm, EmOutcome, Evaluator, GmmTrainingConfig};

/// Default MAP relevance factor.
pub const DEFAULT_RELEVANCE: f64 = 16.0;

/// The world model every speaker model is adapted from.
#[derive(Debug, Clone, PartialEq)]
pub struct Ubm {
    pub gmm: DiagonalGmm,
}

impl Ubm {
    pub fn new(gmm: DiagonalGmm) -> Self {
        Self { gmm }
    }

    pub fn num_components(&self) -> usize {
        self.gmm.num_components()
    }

    pub fn dim(&self) -> usize {
        self.gmm.dim()
    }

    pub fn supervector_dim(&self) -> usize {
        self.num_components() * self.dim()
    }
}

/// A UBM whose means were adapted towards one speaker's data.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerModel {
    pub speaker_id: String,
    pub gmm: DiagonalGmm,
}

impl SpeakerModel {
    /// Checks that `gmm` differs from `ubm` in its means only.
    pub fn new(speaker_id: impl Into<String>, gmm: DiagonalGmm, ubm: &Ubm) -> Result<Self> {
        if gmm.weights() != ubm.gmm.weights() || gmm.variances_flat() != ubm.gmm.variances_flat() {
            return Err(Error::InvalidConfig("speaker model must share the UBM's weights and variances".into()));
        }
        Ok(Self { speaker_id: speaker_id.into(), gmm })
    }
}

/// Zeroth- and first-order statistics of one utterance against a UBM.
#[derive(Debug, Clone, PartialEq)]
pub struct BaumWelchStats {
    dim: usize,
    /// Soft frame count per component.
    pub zeroth: Vec<f64>,
    /// Responsibility-weighted feature sums, component after component.
    pub first: Vec<f64>,
}

impl BaumWelchStats {
    pub fn new(dim: usize, zeroth: Vec<f64>, first: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("statistics dimension must be at least 1".into()));
        }
        Error::check_dim(zeroth.len() * dim, first.len())?;
        if zeroth.iter().any(|&n| !(n >= 0.0 && n.is_finite())) {
            return Err(Error::InvalidConfig("zeroth-order statistics must be finite and non-negative".into()));
        }
        if first.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidConfig("first-order statistics must be finite".into()));
        }
        Ok(Self { dim, zeroth, first })
    }

    pub fn zeros(num_components: usize, dim: usize) -> Self {
        Self { dim, zeroth: vec![0.0; num_components], first: vec![0.0; num_components * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_components(&self) -> usize {
        self.zeroth.len()
    }

    pub fn first_for(&self, c: usize) -> &[f64] {
        &self.first[c * self.dim..(c + 1) * self.dim]
    }

    pub fn total_frames(&self) -> f64 {
        self.zeroth.iter().sum()
    }

    /// Elementwise sum, the statistics of the concatenated utterances.
    pub fn merge(&self, other: &BaumWelchStats) -> Result<Self> {
        Error::check_dim(self.dim, other.dim)?;
        Error::check_dim(self.num_components(), other.num_components())?;
        Ok(Self {
            dim: self.dim,
            zeroth: self.zeroth.iter().zip(&other.zeroth).map(|(a, b)| a + b).collect(),
            first: self.first.iter().zip(&other.first).map(|(a, b)| a + b).collect(),
        })
    }

    /// Multiplies every statistic by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self {
            dim: self.dim,
            zeroth: self.zeroth.iter().map(|n| n * t).collect(),
            first: self.first.iter().map(|f| f * t).collect(),
        }
    }

    pub(crate) fn check_against(&self, ubm: &Ubm) -> Result<()> {
        Error::check_dim(ubm.dim(), self.dim)?;
        Error::check_dim(ubm.num_components(), self.num_components())
    }
}

/// Concatenated component means in component order.
#[derive(Debug, Clone, PartialEq)]
pub struct Supervector(pub Vec<f64>);

impl Supervector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Fits the UBM on every utterance, concatenated in identifier order.
pub fn train_ubm(pooled: &BTreeMap<String, FeatureMatrix>, config: &GmmTrainingConfig) -> Result<Ubm> {
    Ok(Ubm::new(train_ubm_with_history(pooled, config)?.gmm))
}

pub fn train_ubm_with_history(
    pooled: &BTreeMap<String, FeatureMatrix>,
    config: &GmmTrainingConfig,
) -> Result<EmOutcome> {
    if pooled.is_empty() {
        return Err(Error::EmptyFeatureMatrix);
    }
    let all = FeatureMatrix::concat(pooled.values())?;
    em_fit_with_history(&all, config)
}

/// `N_c = Σ_t γ_c(x_t)`, `F_c = Σ_t γ_c(x_t)·x_t`.
pub fn accumulate_stats(features: &FeatureMatrix, ubm: &Ubm) -> Result<BaumWelchStats> {
    features.ensure_nonempty()?;
    Error::check_dim(ubm.dim(), features.dim())?;
    let (c, dim) = (ubm.num_components(), ubm.dim());
    let eval = Evaluator::new(&ubm.gmm);
    let mut stats = BaumWelchStats::zeros(c, dim);
    let mut post = vec![0.0; c];
    for x in features.frames() {
        eval.posteriors(x, &mut post);
        for (k, &g) in post.iter().enumerate() {
            stats.zeroth[k] += g;
            let f = &mut stats.first[k * dim..(k + 1) * dim];
            for d in 0..dim {
                f[d] += g * x[d];
            }
        }
    }
    Ok(stats)
}

/// Relevance-MAP adaptation of the means; weights and variances are copied.
///
/// With `α_c = N_c / (N_c + r)` the adapted mean is
/// `α_c·F_c/N_c + (1 − α_c)·μ_c`, or `μ_c` when `N_c = 0`.
pub fn map_adapt(
    speaker_id: impl Into<String>,
    stats: &BaumWelchStats,
    ubm: &Ubm,
    relevance: f64,
) -> Result<SpeakerModel> {
    if !(relevance >= 0.0) || !relevance.is_finite() {
        return Err(Error::NegativeRelevance(relevance));
    }
    stats.check_against(ubm)?;
    let dim = ubm.dim();
    let mut means = Vec::with_capacity(ubm.supervector_dim());
    for c in 0..ubm.num_components() {
        let prior = ubm.gmm.mean(c);
        let n = stats.zeroth[c];
        if n <= 0.0 {
            means.extend_from_slice(prior);
            continue;
        }
        let alpha = n / (n + relevance);
        for (d, &fd) in stats.first_for(c).iter().enumerate() {
            let ml = fd / n;
            let adapted = alpha * ml + (1.0 - alpha) * prior[d];
            // keep rounding from stepping off the segment
            means.push(adapted.clamp(ml.min(prior[d]), ml.max(prior[d])));
        }
    }
    debug_assert_eq!(means.len(), ubm.num_components() * dim);
    let gmm = ubm.gmm.with_means(means)?;
    Ok(SpeakerModel { speaker_id: speaker_id.into(), gmm })
}

/// Anything that carries a mixture whose means form a supervector.
pub trait HasMeans {
    fn mixture(&self) -> &DiagonalGmm;
}

impl HasMeans for Ubm {
    fn mixture(&self) -> &DiagonalGmm {
        &self.gmm
    }
}

impl HasMeans for SpeakerModel {
    fn mixture(&self) -> &DiagonalGmm {
        &self.gmm
    }
}

impl HasMeans for DiagonalGmm {
    fn mixture(&self) -> &DiagonalGmm {
        self
    }
}

pub fn build_supervector(model: &impl HasMeans) -> Supervector {
    Supervector(model.mixture().means_flat().to_vec())
}
