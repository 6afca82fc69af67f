//! Equal error rate and DET operating points.
//!
//! Candidate thresholds are the distinct values of the pooled scores. At a
//! threshold `θ` a non-target is falsely accepted when its score is `> θ`
//! and a target is falsely rejected when its score is `≤ θ`, matching the
//! strict accept rule of [`crate::scoring::decide`].

use crate::error::{Error, Result};

/// One operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

fn sorted(scores: &[f64]) -> Vec<f64> {
    let mut v = scores.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// `(FAR, FRR)` at every distinct score, in increasing threshold order.
pub fn det_curve(targets: &[f64], nontargets: &[f64]) -> Result<Vec<DetPoint>> {
    if targets.is_empty() {
        return Err(Error::EmptyScoreSet("target scores"));
    }
    if nontargets.is_empty() {
        return Err(Error::EmptyScoreSet("non-target scores"));
    }
    let tgt = sorted(targets);
    let non = sorted(nontargets);
    let mut thresholds: Vec<f64> = tgt.iter().chain(&non).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (nt, nn) = (tgt.len() as f64, non.len() as f64);
    let mut ti = 0; // targets ≤ θ
    let mut ni = 0; // non-targets ≤ θ
    Ok(thresholds
        .into_iter()
        .map(|th| {
            while ti < tgt.len() && tgt[ti] <= th {
                ti += 1;
            }
            while ni < non.len() && non[ni] <= th {
                ni += 1;
            }
            DetPoint { threshold: th, far: (non.len() - ni) as f64 / nn, frr: ti as f64 / nt }
        })
        .collect())
}

/// `(FAR, FRR)` pairs along increasing threshold.
pub fn det_points(targets: &[f64], nontargets: &[f64]) -> Result<Vec<(f64, f64)>> {
    Ok(det_curve(targets, nontargets)?.into_iter().map(|p| (p.far, p.frr)).collect())
}

/// Mean of FAR and FRR at the threshold where they are closest (lowest such
/// threshold on ties).
pub fn compute_eer(targets: &[f64], nontargets: &[f64]) -> Result<f64> {
    let curve = det_curve(targets, nontargets)?;
    let mut best = curve[0];
    for p in &curve[1..] {
        if (p.far - p.frr).abs() < (best.far - best.frr).abs() {
            best = *p;
        }
    }
    Ok((best.far + best.frr) / 2.0)
}
