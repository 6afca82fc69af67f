//! Enrolled speakers and one-to-many identification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::ivector::IVector;
use crate::scoring::{
    cohort_from_scores, cosine_score, decide, normalize_score, CohortStats, Decision, DecisionPolicy, ScoringMode,
};
use crate::speaker::{SpeakerModel, Ubm};

#[derive(Debug, Clone, PartialEq)]
pub struct RegistryEntry {
    pub speaker_id: String,
    pub cluster_id: u32,
    pub model: SpeakerModel,
    pub ivector: Option<IVector>,
    /// Free-form metadata, e.g. the enrollment language.
    pub language_tag: String,
    pub is_impostor: bool,
}

/// Enrolled speakers sharing one UBM, kept in speaker-id order.
///
/// Clusters are metadata only: identification always scores every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerRegistry {
    ubm: Ubm,
    entries: BTreeMap<String, RegistryEntry>,
}

impl SpeakerRegistry {
    pub fn new(ubm: Ubm) -> Self {
        Self { ubm, entries: BTreeMap::new() }
    }

    pub fn ubm(&self) -> &Ubm {
        &self.ubm
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &RegistryEntry> {
        self.entries.values()
    }

    pub fn get(&self, speaker_id: &str) -> Option<&RegistryEntry> {
        self.entries.get(speaker_id)
    }

    /// Whether entries carry i-vectors (cosine mode) or not. `None` while empty.
    pub fn has_ivectors(&self) -> Option<bool> {
        self.entries.values().next().map(|e| e.ivector.is_some())
    }

    pub fn insert(&mut self, entry: RegistryEntry) -> Result<()> {
        if self.entries.contains_key(&entry.speaker_id) {
            return Err(Error::DuplicateSpeakerId(entry.speaker_id));
        }
        if entry.model.gmm.weights() != self.ubm.gmm.weights()
            || entry.model.gmm.variances_flat() != self.ubm.gmm.variances_flat()
        {
            return Err(Error::ModeMismatch(format!(
                "model for {} was not adapted from this registry's UBM",
                entry.speaker_id
            )));
        }
        if let Some(has) = self.has_ivectors() {
            if has != entry.ivector.is_some() {
                return Err(Error::ModeMismatch("either every registry entry carries an i-vector or none does".into()));
            }
        }
        if let (Some(first), Some(iv)) =
            (self.entries.values().find_map(|e| e.ivector.as_ref()), entry.ivector.as_ref())
        {
            Error::check_dim(first.len(), iv.len())?;
        }
        self.entries.insert(entry.speaker_id.clone(), entry);
        Ok(())
    }
}

/// What a trial presents to the registry.
#[derive(Debug, Clone, PartialEq)]
pub enum Probe {
    Features(FeatureMatrix),
    IVector(IVector),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub trial_id: String,
    pub probe: Probe,
    /// Ground truth: every enrolled speaker actually present. Empty for
    /// unlabeled probes and for impostor probes from unenrolled speakers.
    pub true_speakers: Vec<String>,
    pub description: String,
}

/// Where LLR z-normalization takes its mean and spread from.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CohortPolicy {
    /// The trial's own raw scores against every registry entry.
    #[default]
    Registry,
    /// Fixed statistics, e.g. from an external impostor cohort.
    Fixed(CohortStats),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSpeaker {
    pub speaker_id: String,
    pub cluster_id: u32,
    /// LLR or cosine before normalization.
    pub raw_score: f64,
    /// The score the decision uses: z-normalized LLR, or the cosine itself.
    pub score: f64,
    pub decision: Decision,
}

/// Sorts by descending score, then ascending speaker id.
pub fn rank(scored: &mut [ScoredSpeaker]) {
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.speaker_id.cmp(&b.speaker_id)));
}

/// Raw LLR scores of `features` against every entry, in registry order.
/// Each equals [`crate::scoring::llr_score`]; the UBM term is computed once.
pub fn raw_llr_scores(features: &FeatureMatrix, registry: &SpeakerRegistry) -> Result<Vec<f64>> {
    let ubm_ll = registry.ubm.gmm.sequence_log_likelihood(features)?;
    registry.entries().map(|e| Ok(e.model.gmm.sequence_log_likelihood(features)? - ubm_ll)).collect()
}

/// Scores a trial against every registry entry and decides each at the
/// policy threshold.
pub fn identify(
    trial: &Trial,
    registry: &SpeakerRegistry,
    policy: &DecisionPolicy,
    cohort: CohortPolicy,
) -> Result<Vec<ScoredSpeaker>> {
    if registry.is_empty() {
        return Err(Error::EmptyRegistry);
    }
    let entries: Vec<&RegistryEntry> = registry.entries().collect();
    let (raw, normalized): (Vec<f64>, Vec<f64>) = match (policy.mode, &trial.probe) {
        (ScoringMode::Llr, Probe::Features(x)) => {
            let raw = raw_llr_scores(x, registry)?;
            let stats = match cohort {
                CohortPolicy::Fixed(c) => c,
                CohortPolicy::Registry => match cohort_from_scores(&raw) {
                    Ok(c) => c,
                    // one entry or identical scores: center only
                    Err(Error::DegenerateCohort(_)) => {
                        CohortStats::new(raw.iter().sum::<f64>() / raw.len() as f64, 1.0)?
                    }
                    Err(e) => return Err(e),
                },
            };
            let normalized = raw.iter().map(|&r| normalize_score(r, &stats)).collect::<Result<_>>()?;
            (raw, normalized)
        }
        (ScoringMode::Cosine, Probe::IVector(w)) => {
            if registry.has_ivectors() != Some(true) {
                return Err(Error::ModeMismatch("cosine scoring needs i-vectors in the registry".into()));
            }
            let raw: Vec<f64> = entries
                .iter()
                .map(|e| cosine_score(e.ivector.as_ref().expect("checked above"), w))
                .collect::<Result<_>>()?;
            (raw.clone(), raw)
        }
        (mode, _) => return Err(Error::ModeMismatch(format!("{mode} scoring does not match the trial's probe"))),
    };

    let mut scored: Vec<ScoredSpeaker> = entries
        .iter()
        .zip(raw.iter().zip(&normalized))
        .map(|(e, (&raw_score, &score))| ScoredSpeaker {
            speaker_id: e.speaker_id.clone(),
            cluster_id: e.cluster_id,
            raw_score,
            score,
            decision: decide(score, policy),
        })
        .collect();
    rank(&mut scored);
    Ok(scored)
}
