//! Score functions and accept/reject decisions.
//!
//! Two backends: the log-likelihood ratio of a speaker model against the UBM,
//! z-normalized by the scores of a cohort, and the cosine between i-vectors.
//! The Bhattacharyya coefficient is the cosine of the square-root embeddings
//! of two discrete distributions, which is what ties the two views together.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ivector::IVector;
use crate::speaker::{SpeakerModel, Ubm};

const DISTRIBUTION_TOL: f64 = 1e-9;

/// Location and spread of the raw scores used for z-normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortStats {
    pub mean_mu: f64,
    pub std_sigma: f64,
}

impl CohortStats {
    pub fn new(mean_mu: f64, std_sigma: f64) -> Result<Self> {
        if !(std_sigma > 0.0) || !std_sigma.is_finite() || !mean_mu.is_finite() {
            return Err(Error::DegenerateCohort(format!("sigma {std_sigma} must be positive and finite")));
        }
        Ok(Self { mean_mu, std_sigma })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringMode {
    /// Log-likelihood ratio against the UBM, z-normalized per trial.
    Llr,
    /// Cosine between i-vectors.
    Cosine,
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoringMode::Llr => "llr",
            ScoringMode::Cosine => "cosine",
        })
    }
}

impl std::str::FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "llr" => Ok(ScoringMode::Llr),
            "cosine" => Ok(ScoringMode::Cosine),
            other => Err(Error::Usage(format!("unknown scoring mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionPolicy {
    pub threshold: f64,
    pub mode: ScoringMode,
}

impl DecisionPolicy {
    pub fn new(mode: ScoringMode, threshold: f64) -> Result<Self> {
        if !threshold.is_finite() {
            return Err(Error::InvalidConfig(format!("threshold {threshold} is not finite")));
        }
        if mode == ScoringMode::Cosine && !(-1.0..=1.0).contains(&threshold) {
            return Err(Error::InvalidConfig(format!("cosine threshold {threshold} outside [-1, 1]")));
        }
        Ok(Self { threshold, mode })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Accept => "accept",
            Decision::Reject => "reject",
        })
    }
}

/// `log P(X | speaker) − log P(X | UBM)`.
pub fn llr_score(features: &FeatureMatrix, speaker: &SpeakerModel, ubm: &Ubm) -> Result<f64> {
    Ok(speaker.gmm.sequence_log_likelihood(features)? - ubm.gmm.sequence_log_likelihood(features)?)
}

pub fn normalize_score(raw: f64, cohort: &CohortStats) -> Result<f64> {
    if !(cohort.std_sigma > 0.0) {
        return Err(Error::DegenerateCohort("sigma is zero".into()));
    }
    Ok((raw - cohort.mean_mu) / cohort.std_sigma)
}

/// Sample mean and standard deviation (divisor `n − 1`).
pub fn cohort_from_scores(scores: &[f64]) -> Result<CohortStats> {
    if scores.len() < 2 {
        return Err(Error::DegenerateCohort(format!("need at least 2 scores, got {}", scores.len())));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    if !(sd > 0.0) {
        return Err(Error::DegenerateCohort("all cohort scores are equal".into()));
    }
    CohortStats::new(mean, sd)
}

/// Inner product over the product of norms, before clamping.
pub fn cosine_unclamped(u: &[f64], v: &[f64]) -> Result<f64> {
    Error::check_dim(u.len(), v.len())?;
    let su: f64 = u.iter().map(|x| x * x).sum();
    let sv: f64 = v.iter().map(|x| x * x).sum();
    if su == 0.0 || sv == 0.0 {
        return Err(Error::ZeroVector);
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    // sqrt(s·s) == s exactly, so identical inputs give exactly 1
    let prod = su * sv;
    let denom = if prod.is_normal() { prod.sqrt() } else { su.sqrt() * sv.sqrt() };
    Ok(dot / denom)
}

/// Cosine similarity in `[-1, 1]`.
pub fn cosine_score(target: &IVector, test: &IVector) -> Result<f64> {
    cosine_similarity(target.as_slice(), test.as_slice())
}

pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    Ok(cosine_unclamped(u, v)?.clamp(-1.0, 1.0))
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::NotADistribution(format!("{name} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::NotADistribution(format!("{name} sums to {sum}")));
    }
    Ok(())
}

/// `Σ √(p_i q_i)`.
pub fn bhattacharyya_coefficient(p: &[f64], q: &[f64]) -> Result<f64> {
    Error::check_dim(p.len(), q.len())?;
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let rho: f64 = p.iter().zip(q).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(rho.clamp(0.0, 1.0))
}

/// Accept iff `score > threshold`; ties reject.
pub fn decide(score: f64, policy: &DecisionPolicy) -> Decision {
    if score > policy.threshold {
        Decision::Accept
    } else {
        Decision::Reject
    }
}
