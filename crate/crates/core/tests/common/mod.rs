#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use voxid::eval::{EvalReport, RegistryEntry, ScoredSpeaker, SpeakerRegistry, TrialResult};
use voxid::scoring::{Decision, ScoringMode};
use voxid::{
    AudioClip, BaumWelchStats, DiagonalGmm, FeatureMatrix, IVector, SpeakerModel, Supervector, TotalVariabilityModel,
    Ubm,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

pub fn random_weights(rng: &mut impl Rng, c: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..c).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    // push the rounding residue into the largest weight
    let residue = 1.0 - w.iter().sum::<f64>();
    let (imax, _) = w.iter().enumerate().fold((0, 0.0), |acc, (i, &x)| if x > acc.1 { (i, x) } else { acc });
    w[imax] += residue;
    w
}

pub fn random_gmm(rng: &mut impl Rng, c: usize, k: usize) -> DiagonalGmm {
    let weights = random_weights(rng, c);
    let means = (0..c * k).map(|_| 3.0 * normal(rng)).collect();
    let variances = (0..c * k).map(|_| rng.random_range(0.3..2.0)).collect();
    DiagonalGmm::new(k, weights, means, variances).unwrap()
}

pub fn sample_gmm(gmm: &DiagonalGmm, n: usize, rng: &mut impl Rng) -> FeatureMatrix {
    voxid::eval::experiment::sample_frames(gmm, n, rng)
}

pub fn random_features(rng: &mut impl Rng, frames: usize, dim: usize) -> FeatureMatrix {
    // f32-representable so the VOXF1 round trip is lossless
    let data = (0..frames * dim).map(|_| normal(rng) as f32 as f64).collect();
    FeatureMatrix::from_flat(dim, data).unwrap()
}

pub fn random_stats(rng: &mut impl Rng, c: usize, k: usize) -> BaumWelchStats {
    let zeroth: Vec<f64> =
        (0..c).map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..50.0) }).collect();
    let first = (0..c * k).map(|i| zeroth[i / k] * 2.0 * normal(rng)).collect();
    BaumWelchStats::new(k, zeroth, first).unwrap()
}

pub fn random_tv(rng: &mut impl Rng, c: usize, k: usize, r: usize) -> TotalVariabilityModel {
    let ubm = random_gmm(rng, c, k);
    let t = (0..c * k * r).map(|_| normal(rng)).collect();
    TotalVariabilityModel::new(c, k, r, Supervector(ubm.means_flat().to_vec()), ubm.variances_flat().to_vec(), t)
        .unwrap()
}

pub fn random_registry(rng: &mut impl Rng, with_ivectors: bool) -> SpeakerRegistry {
    let (c, k) = (rng.random_range(1..5), rng.random_range(1..4));
    let ubm = Ubm::new(random_gmm(rng, c, k));
    let mut registry = SpeakerRegistry::new(ubm.clone());
    let n = rng.random_range(0..6);
    let rank = rng.random_range(1..4);
    for i in 0..n {
        let means = ubm.gmm.means_flat().iter().map(|m| m + normal(rng)).collect();
        let gmm = ubm.gmm.with_means(means).unwrap();
        let id = format!("spk{i:02}-{}", rng.random_range(0..1000));
        registry
            .insert(RegistryEntry {
                speaker_id: id.clone(),
                cluster_id: rng.random_range(0..4),
                model: SpeakerModel::new(id, gmm, &ubm).unwrap(),
                ivector: with_ivectors.then(|| IVector::new(normals(rng, rank)).unwrap()),
                language_tag: ["English", "Hindi", "", "Oriya, \"x\""][i % 4].to_string(),
                is_impostor: rng.random_bool(0.3),
            })
            .unwrap();
    }
    registry
}

pub fn random_report(rng: &mut impl Rng) -> EvalReport {
    let speakers: Vec<String> = (0..rng.random_range(1..6)).map(|i| format!("s{i}")).collect();
    let trials = (0..rng.random_range(0..5))
        .map(|t| {
            let mut ranked: Vec<ScoredSpeaker> = speakers
                .iter()
                .map(|s| {
                    let raw = normal(rng) * 10.0;
                    ScoredSpeaker {
                        speaker_id: s.clone(),
                        cluster_id: rng.random_range(0..3),
                        raw_score: raw,
                        score: (raw / 3.0).round() / 2.0,
                        decision: Decision::Reject,
                    }
                })
                .collect();
            voxid::eval::registry::rank(&mut ranked);
            let truth = speakers.iter().filter(|_| rng.random_bool(0.3)).cloned().collect();
            TrialResult { trial_id: format!("t{t}"), description: "a, \"b\"".into(), true_speakers: truth, ranked }
        })
        .collect();
    let mode = if rng.random_bool(0.5) { ScoringMode::Llr } else { ScoringMode::Cosine };
    let thresholds = if mode == ScoringMode::Llr { vec![1.0, 1.5] } else { vec![0.5] };
    EvalReport::assemble("random", mode, &thresholds, trials).unwrap()
}

/// Voiced-speech-like test signal: harmonics of a speaker-specific pitch with
/// a fixed vowel-like envelope, plus a little noise.
pub fn synthetic_voice(speaker: u64, take: u64, seconds: f64, rate: u32) -> AudioClip {
    let mut r = rng(speaker * 1000 + take);
    let f0 = 90.0 + 25.0 * speaker as f64;
    let formants = [500.0 + 60.0 * speaker as f64, 1500.0 + 90.0 * speaker as f64, 2500.0];
    let n = (seconds * rate as f64) as usize;
    let nyquist = rate as f64 / 2.0;
    let mut samples = vec![0.0; n];
    let mut h = 1.0;
    while h * f0 < nyquist * 0.9 {
        let f = h * f0;
        let gain: f64 = formants.iter().map(|&fc| (-((f - fc) / 200.0).powi(2)).exp()).sum::<f64>() + 0.02;
        let phase = r.random_range(0.0..std::f64::consts::TAU);
        for (i, s) in samples.iter_mut().enumerate() {
            let t = i as f64 / rate as f64;
            *s += gain * (std::f64::consts::TAU * f * t + phase).sin();
        }
        h += 1.0;
    }
    let peak = samples.iter().fold(0.0f64, |m, s| m.max(s.abs())).max(1e-9);
    for s in &mut samples {
        *s = 0.6 * *s / peak + 0.01 * normal(&mut r);
        *s = s.clamp(-1.0, 1.0);
    }
    AudioClip::new(samples, rate).unwrap()
}

pub fn manifest_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)
}
