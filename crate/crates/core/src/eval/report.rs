//! Per-trial results, FA/FR bookkeeping and CSV export.

use std::fmt::Write as _;

use crate::error::Result;
use crate::eval::metrics::compute_eer;
use crate::eval::registry::ScoredSpeaker;
use crate::scoring::{Decision, ScoringMode};

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_id: String,
    pub description: String,
    pub true_speakers: Vec<String>,
    /// Descending by score, ties by ascending speaker id; decisions taken at
    /// the report's primary threshold.
    pub ranked: Vec<ScoredSpeaker>,
}

impl TrialResult {
    fn is_true(&self, speaker_id: &str) -> bool {
        self.true_speakers.iter().any(|t| t == speaker_id)
    }

    /// Whether any speaker outside the ground truth scores above `threshold`.
    pub fn false_accept_at(&self, threshold: f64) -> bool {
        self.ranked.iter().any(|s| s.score > threshold && !self.is_true(&s.speaker_id))
    }

    /// True speakers that are registered but not accepted at `threshold`.
    pub fn false_rejects_at(&self, threshold: f64) -> usize {
        self.ranked.iter().filter(|s| self.is_true(&s.speaker_id) && s.score <= threshold).count()
    }

    pub fn top1_correct(&self) -> Option<bool> {
        if self.true_speakers.is_empty() {
            return None;
        }
        self.ranked.first().map(|s| self.is_true(&s.speaker_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSummary {
    pub threshold: f64,
    /// Trials in which at least one non-true speaker was accepted.
    pub false_accepts: usize,
    /// (trial, true speaker) pairs where the true speaker was rejected.
    pub false_rejects: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub name: String,
    pub mode: ScoringMode,
    pub threshold: f64,
    pub trials: Vec<TrialResult>,
    pub false_accepts: usize,
    pub false_rejects: usize,
    /// `None` when there are no target or no non-target scores.
    pub eer: Option<f64>,
    /// Fraction of labeled trials whose top-ranked speaker is a true speaker.
    pub top1_accuracy: f64,
    /// Fraction of (trial, true speaker) pairs scoring above the threshold.
    pub true_accept_rate: f64,
    /// Counts at every studied threshold, in the order given.
    pub threshold_studies: Vec<ThresholdSummary>,
}

impl EvalReport {
    /// Tallies decisions and error counts. The first of `thresholds` is the
    /// primary threshold stored in each ranked entry's decision.
    pub fn assemble(
        name: impl Into<String>,
        mode: ScoringMode,
        thresholds: &[f64],
        trials: Vec<TrialResult>,
    ) -> Result<Self> {
        let threshold = *thresholds
            .first()
            .ok_or_else(|| crate::Error::InvalidExperimentConfig("at least one threshold is required".into()))?;
        let mut trials = trials;
        for t in &mut trials {
            for s in &mut t.ranked {
                s.decision = if s.score > threshold { Decision::Accept } else { Decision::Reject };
            }
        }

        let mut targets = Vec::new();
        let mut nontargets = Vec::new();
        let (mut labeled, mut correct, mut pairs, mut above) = (0usize, 0usize, 0usize, 0usize);
        for t in &trials {
            for s in &t.ranked {
                if t.is_true(&s.speaker_id) {
                    targets.push(s.score);
                    pairs += 1;
                    above += usize::from(s.score > threshold);
                } else {
                    nontargets.push(s.score);
                }
            }
            if let Some(ok) = t.top1_correct() {
                labeled += 1;
                correct += usize::from(ok);
            }
        }
        let eer =
            if targets.is_empty() || nontargets.is_empty() { None } else { Some(compute_eer(&targets, &nontargets)?) };
        let mut report = Self {
            name: name.into(),
            mode,
            threshold,
            trials,
            false_accepts: 0,
            false_rejects: 0,
            eer,
            top1_accuracy: ratio(correct, labeled),
            true_accept_rate: ratio(above, pairs),
            threshold_studies: Vec::new(),
        };
        report.threshold_studies = thresholds.iter().map(|&th| report.counts_at(th)).collect();
        let primary = report.counts_at(threshold);
        report.false_accepts = primary.false_accepts;
        report.false_rejects = primary.false_rejects;
        Ok(report)
    }

    /// FA/FR counts if the decisions were re-taken at `threshold`.
    pub fn counts_at(&self, threshold: f64) -> ThresholdSummary {
        ThresholdSummary {
            threshold,
            false_accepts: self.trials.iter().filter(|t| t.false_accept_at(threshold)).count(),
            false_rejects: self.trials.iter().map(|t| t.false_rejects_at(threshold)).sum(),
        }
    }

    /// One row per trial × speaker:
    /// `trial_id,speaker_id,raw_score,normalized_score,decision`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_id,speaker_id,raw_score,normalized_score,decision\n");
        for t in &self.trials {
            for s in &t.ranked {
                let _ = writeln!(
                    out,
                    "{},{},{:?},{:?},{}",
                    csv_field(&t.trial_id),
                    csv_field(&s.speaker_id),
                    s.raw_score,
                    s.score,
                    s.decision
                );
            }
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
