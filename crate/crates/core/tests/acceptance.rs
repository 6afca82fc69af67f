//! Acceptance suite: one PASS/FAIL line per criterion.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use voxid::dsp::fft::fft_in_place;
use voxid::dsp::hamming_window;
use voxid::eval::experiment::{build_experiment, score_trials};
use voxid::eval::{compute_eer, ExperimentConfig};
use voxid::gmm::{component_log_density, em_fit_with_history, mixture_log_likelihood};
use voxid::scoring::{bhattacharyya_coefficient, cosine_similarity, cosine_unclamped};
use voxid::store::{self, ArtifactKind, StoredArtifact};
use voxid::{
    extract_ivector, init_tv, map_adapt, train_tv, BaumWelchStats, DiagonalGmm, Error, GmmTrainingConfig, Supervector,
    TotalVariabilityModel, Ubm,
};

use common::*;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within_budget(start: Instant, budget: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure!(took < budget, "took {:.2?}, budget {:.0?}", took, budget);
    Ok(took)
}

fn direct_dft(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    (0..n)
        .map(|m| {
            x.iter()
                .enumerate()
                .map(|(t, &v)| {
                    let angle = -std::f64::consts::TAU * ((m * t) % n) as f64 / n as f64;
                    Complex64::from_polar(v, angle)
                })
                .sum()
        })
        .collect()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let mut rng = rng(101);
    let (mut worst_dft, mut worst_parseval) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let x: Vec<f64> = (0..64).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut fast: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_in_place(&mut fast).map_err(|e| e.to_string())?;
        let slow = direct_dft(&x);
        let scale = slow.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst_dft = worst_dft.max(err / scale);
        let time_energy: f64 = x.iter().map(|v| v * v).sum();
        let freq_energy: f64 = fast.iter().map(|c| c.norm_sqr()).sum::<f64>() / 64.0;
        worst_parseval = worst_parseval.max((time_energy - freq_energy).abs() / time_energy);
    }
    ensure!(worst_dft <= 1e-9, "FFT vs direct DFT relative error {worst_dft:e}");
    ensure!(worst_parseval <= 1e-9, "Parseval relative error {worst_parseval:e}");
    let w = hamming_window(&[1.0; 25]).map_err(|e| e.to_string())?;
    let formula = 0.54 - 0.46 * (0.0f64).cos();
    ensure!(w[0] == formula && w[24] == formula, "Hamming endpoint {} != {formula}", w[0]);
    ensure!((w[0] - 0.08).abs() < 1e-15, "Hamming endpoint {} far from 0.08", w[0]);
    let took = within_budget(start, Duration::from_secs(5))?;
    Ok(format!(
        "FFT rel err {worst_dft:.1e}, Parseval rel err {worst_parseval:.1e}, Hamming w[0]={formula:?}, {took:.2?}"
    ))
}

fn criterion_2() -> Check {
    let v = component_log_density(&[0.0], &[0.0], &[1.0]).map_err(|e| e.to_string())?;
    let exact = -0.5 * std::f64::consts::TAU.ln();
    ensure!((v - exact).abs() <= 1e-9, "log N(0;0,1) = {v}, expected {exact}");
    ensure!((v - -0.9189385).abs() < 5e-8, "log N(0;0,1) = {v} disagrees with -0.9189385 in the printed digits");

    let mut rng = rng(202);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (c, k) = (rng.random_range(1..6), rng.random_range(1..5));
        let gmm = random_gmm(&mut rng, c, k);
        let x: Vec<f64> = (0..k).map(|_| 2.0 * normal(&mut rng)).collect();
        // naive: Σ_i w_i Π_d (2π v)^(-1/2) exp(-(x-μ)²/(2v))
        let naive: f64 = (0..c)
            .map(|i| {
                gmm.weights()[i]
                    * (0..k)
                        .map(|d| {
                            let (m, var) = (gmm.mean(i)[d], gmm.variance(i)[d]);
                            (-(x[d] - m).powi(2) / (2.0 * var)).exp() / (std::f64::consts::TAU * var).sqrt()
                        })
                        .product::<f64>()
            })
            .sum::<f64>()
            .ln();
        let ll = mixture_log_likelihood(&x, &gmm).map_err(|e| e.to_string())?;
        worst = worst.max((ll - naive).abs() / naive.abs());
    }
    ensure!(worst <= 1e-12, "mixture vs naive relative error {worst:e}");
    Ok(format!("log N(0;0,1) = {v:.10}, mixture vs naive worst rel err {worst:.1e} over 100 models"))
}

fn criterion_3() -> Check {
    let mut worst_drop = 0.0f64;
    let mut iterations = 0;
    for seed in 0..20u64 {
        let mut rng = rng(3000 + seed);
        let truth = random_gmm(&mut rng, 3, 2);
        let x = sample_gmm(&truth, 600, &mut rng);
        let cfg = GmmTrainingConfig { num_components: 3, rng_seed: seed, ..GmmTrainingConfig::default() };
        let out = em_fit_with_history(&x, &cfg).map_err(|e| e.to_string())?;
        iterations += out.log_likelihoods.len();
        for pair in out.log_likelihoods.windows(2) {
            let drop = (pair[0] - pair[1]) / pair[0].abs();
            worst_drop = worst_drop.max(drop);
            ensure!(
                pair[1] >= pair[0] - 1e-8 * pair[0].abs(),
                "dataset {seed}: LL fell from {} to {}",
                pair[0],
                pair[1]
            );
        }
    }

    let mut rng = rng(303);
    let planted = DiagonalGmm::new(1, vec![0.5, 0.5], vec![-5.0, 5.0], vec![1.0, 1.0]).unwrap();
    let x = sample_gmm(&planted, 4000, &mut rng);
    let cfg = GmmTrainingConfig { num_components: 2, ..GmmTrainingConfig::default() };
    let fit = em_fit_with_history(&x, &cfg).map_err(|e| e.to_string())?.gmm;
    let mut comps: Vec<(f64, f64)> = (0..2).map(|c| (fit.mean(c)[0], fit.weights()[c])).collect();
    comps.sort_by(|a, b| a.0.total_cmp(&b.0));
    ensure!((comps[0].0 + 5.0).abs() <= 0.2 && (comps[1].0 - 5.0).abs() <= 0.2, "means {comps:?}");
    ensure!(comps.iter().all(|c| (c.1 - 0.5).abs() <= 0.05), "weights {comps:?}");
    Ok(format!(
        "20 datasets, {iterations} LL evaluations, largest relative decrease {:.1e}; planted means ({:.3}, {:.3}) weights ({:.3}, {:.3})",
        worst_drop.max(0.0),
        comps[0].0,
        comps[1].0,
        comps[0].1,
        comps[1].1
    ))
}

fn criterion_4() -> Check {
    let mut rng = rng(404);
    let ubm = Ubm::new(random_gmm(&mut rng, 4, 3));
    let err = |e: Error| e.to_string();

    let zero = BaumWelchStats::zeros(4, 3);
    let m = map_adapt("z", &zero, &ubm, 16.0).map_err(err)?;
    ensure!(m.gmm.means_flat() == ubm.gmm.means_flat(), "zero stats changed the means");

    let stats = BaumWelchStats::new(3, vec![2.0, 7.5, 0.25, 16.0], normals(&mut rng, 12)).map_err(err)?;
    let ml = |c: usize, d: usize| stats.first[c * 3 + d] / stats.zeroth[c];
    let pure = map_adapt("ml", &stats, &ubm, 0.0).map_err(err)?;
    for c in 0..4 {
        for d in 0..3 {
            ensure!(pure.gmm.mean(c)[d] == ml(c, d), "r=0 mean ({c},{d}) is not F/N");
        }
    }
    let half = map_adapt("half", &stats, &ubm, 16.0).map_err(err)?;
    for d in 0..3 {
        let mid = (ml(3, d) + ubm.gmm.mean(3)[d]) / 2.0;
        ensure!(half.gmm.mean(3)[d] == mid, "N_c = r: {} != midpoint {mid}", half.gmm.mean(3)[d]);
    }

    for trial in 0..100 {
        let (c, k) = (rng.random_range(1..6), rng.random_range(1..5));
        let ubm = Ubm::new(random_gmm(&mut rng, c, k));
        let stats = random_stats(&mut rng, c, k);
        let r = if trial % 10 == 0 { 0.0 } else { rng.random_range(0.0..40.0) };
        let adapted = map_adapt("s", &stats, &ubm, r).map_err(err)?;
        for ci in 0..c {
            if stats.zeroth[ci] == 0.0 {
                continue;
            }
            for d in 0..k {
                let a = stats.first[ci * k + d] / stats.zeroth[ci];
                let b = ubm.gmm.mean(ci)[d];
                let v = adapted.gmm.mean(ci)[d];
                ensure!(a.min(b) <= v && v <= a.max(b), "instance {trial}: {v} outside [{a}, {b}]");
            }
        }
    }
    Ok("zero stats, r=0 and N_c=r cases exact; shrinkage segment held on 100 random instances".into())
}

fn dense_posterior(tv: &TotalVariabilityModel, stats: &BaumWelchStats) -> DVector<f64> {
    let (sv, r, k) = (tv.supervector_dim(), tv.rank(), tv.dim());
    let t = DMatrix::from_row_slice(sv, r, tv.t_matrix());
    let scale = DVector::from_iterator(sv, (0..sv).map(|i| stats.zeroth[i / k] / tv.sigma()[i]));
    let centered = DVector::from_iterator(
        sv,
        (0..sv).map(|i| (stats.first[i] - stats.zeroth[i / k] * tv.m().0[i]) / tv.sigma()[i]),
    );
    let precision = DMatrix::identity(r, r) + t.transpose() * DMatrix::from_diagonal(&scale) * &t;
    precision.lu().solve(&(t.transpose() * centered)).expect("precision is invertible")
}

fn planted_stats(tv_true: &TotalVariabilityModel, w: &[f64], n: f64) -> BaumWelchStats {
    let (c, k, r) = (tv_true.num_components(), tv_true.dim(), tv_true.rank());
    let first = (0..c * k)
        .map(|row| {
            let tw: f64 = (0..r).map(|j| tv_true.t_matrix()[row * r + j] * w[j]).sum();
            n * (tv_true.m().0[row] + tw)
        })
        .collect();
    BaumWelchStats::new(k, vec![n; c], first).unwrap()
}

fn principal_angle_deg(a: &[f64], b: &[f64], rows: usize, cols: usize) -> f64 {
    let qa = DMatrix::from_row_slice(rows, cols, a).qr().q();
    let qb = DMatrix::from_row_slice(rows, cols, b).qr().q();
    let s = (qa.transpose() * qb).singular_values();
    let smallest = s.iter().cloned().fold(f64::INFINITY, f64::min).clamp(-1.0, 1.0);
    smallest.acos().to_degrees()
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let err = |e: Error| e.to_string();
    let mut rng = rng(505);

    let (c, k, r) = (8, 4, 4);
    let mut worst_recovery = 0.0f64;
    let mut worst_oracle = 0.0f64;
    for _ in 0..20 {
        let tv = random_tv(&mut rng, c, k, r);
        let w_star = normals(&mut rng, r);
        let stats = planted_stats(&tv, &w_star, 1e4);
        let w = extract_ivector(&stats, &tv).map_err(err)?;
        let oracle = dense_posterior(&tv, &stats);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = w.as_slice().iter().zip(&w_star).map(|(a, b)| a - b).collect();
        worst_recovery = worst_recovery.max(norm(&diff) / norm(&w_star));
        let od: Vec<f64> = w.as_slice().iter().zip(oracle.iter()).map(|(a, b)| a - b).collect();
        worst_oracle = worst_oracle.max(norm(&od) / norm(oracle.as_slice()));
    }
    ensure!(worst_recovery < 0.05, "i-vector recovery error {worst_recovery}");
    ensure!(worst_oracle < 1e-9, "i-vector differs from dense solve by {worst_oracle:e}");

    let tv = random_tv(&mut rng, c, k, r);
    let stats = planted_stats(&tv, &normals(&mut rng, r), 1e4);
    let zero_t = tv.with_t_matrix(vec![0.0; c * k * r]).map_err(err)?;
    ensure!(extract_ivector(&stats, &zero_t).map_err(err)?.0.iter().all(|&v| v == 0.0), "T = 0 gave non-zero w");
    let empty = BaumWelchStats::zeros(c, k);
    ensure!(extract_ivector(&empty, &tv).map_err(err)?.0.iter().all(|&v| v == 0.0), "N = 0 gave non-zero w");

    let (c2, k2, r2) = (8, 4, 2);
    let ubm = Ubm::new(random_gmm(&mut rng, c2, k2));
    let t_true: Vec<f64> = normals(&mut rng, c2 * k2 * r2);
    let truth = TotalVariabilityModel::new(
        c2,
        k2,
        r2,
        Supervector(ubm.gmm.means_flat().to_vec()),
        ubm.gmm.variances_flat().to_vec(),
        t_true.clone(),
    )
    .map_err(err)?;
    let utterances: Vec<BaumWelchStats> =
        (0..200).map(|_| planted_stats(&truth, &normals(&mut rng, r2), 1e3)).collect();
    let init = init_tv(&ubm, r2, 7).map_err(err)?;
    let trained = train_tv(&utterances, &init, 10).map_err(err)?;
    let angle = principal_angle_deg(trained.t_matrix(), &t_true, c2 * k2, r2);
    ensure!(angle < 5.0, "largest principal angle {angle:.3} degrees");
    let took = within_budget(start, Duration::from_secs(60))?;
    Ok(format!(
        "recovery rel err {worst_recovery:.2e}, dense-solve agreement {worst_oracle:.1e}, T=0 and N=0 give 0, subspace angle {angle:.3} deg, {took:.2?}"
    ))
}

fn criterion_6() -> Check {
    let err = |e: Error| e.to_string();
    let mut rng = rng(606);
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let u = normals(&mut rng, n);
        ensure!(cosine_similarity(&u, &u).map_err(err)? == 1.0, "cos(u, u) != 1 for {u:?}");
    }
    ensure!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).map_err(err)? == 0.0, "orthogonal cosine not 0");

    // scaling by powers of two is the exact case in binary floating point
    let mut max_ulps = 0u64;
    for _ in 0..100 {
        let n = rng.random_range(1..30);
        let (u, v) = (normals(&mut rng, n), normals(&mut rng, n));
        let base = cosine_similarity(&u, &v).map_err(err)?;
        let (a, b) = (2f64.powi(rng.random_range(-30..30)), 2f64.powi(rng.random_range(-30..30)));
        let su: Vec<f64> = u.iter().map(|x| a * x).collect();
        let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
        ensure!(cosine_similarity(&su, &sv).map_err(err)? == base, "cos(a·u, b·v) != cos(u, v) for a={a}, b={b}");
        let (a, b) = (rng.random_range(0.01..100.0), rng.random_range(0.01..100.0));
        let su: Vec<f64> = u.iter().map(|x| a * x).collect();
        let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
        let scaled = cosine_similarity(&su, &sv).map_err(err)?;
        max_ulps = max_ulps.max((scaled.to_bits() as i64 - base.to_bits() as i64).unsigned_abs());
        ensure!(cosine_unclamped(&u, &v).map_err(err)?.abs() <= 1.0 + 1e-12, "Cauchy-Schwarz violated");
    }

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..20);
        let p = random_weights(&mut rng, n);
        let q = random_weights(&mut rng, n);
        let self_rho = bhattacharyya_coefficient(&p, &p).map_err(err)?;
        ensure!((self_rho - 1.0).abs() <= 1e-12, "rho(p, p) = {self_rho}");
        let rho = bhattacharyya_coefficient(&p, &q).map_err(err)?;
        let sp: Vec<f64> = p.iter().map(|x| x.sqrt()).collect();
        let sq: Vec<f64> = q.iter().map(|x| x.sqrt()).collect();
        let cos = cosine_similarity(&sp, &sq).map_err(err)?;
        worst = worst.max((rho - cos).abs());
    }
    ensure!(worst <= 1e-12, "Bhattacharyya vs cosine of square roots differ by {worst:e}");
    Ok(format!(
        "cos(u,u)=1 and orthogonal=0 exact; power-of-two rescaling bit-exact (arbitrary a,b within {max_ulps} ulp); rho vs sqrt-cosine {worst:.1e}"
    ))
}

fn brute_force_eer(targets: &[f64], nontargets: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = targets.iter().chain(nontargets).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64, f64)> = None;
    for &th in &thresholds {
        let far = nontargets.iter().filter(|&&s| s > th).count() as f64 / nontargets.len() as f64;
        let frr = targets.iter().filter(|&&s| s <= th).count() as f64 / targets.len() as f64;
        let gap = (far - frr).abs();
        // first (lowest) threshold wins ties
        if best.is_none_or(|b| gap < b.0) {
            best = Some((gap, far, frr));
        }
    }
    let (_, far, frr) = best.unwrap();
    (far + frr) / 2.0
}

fn criterion_7() -> Check {
    let mut rng = rng(707);
    for i in 0..100 {
        let nt = rng.random_range(1..=50);
        let nn = rng.random_range(1..=50);
        let shift = rng.random_range(0.0..3.0);
        // coarse grid so ties occur
        let targets: Vec<f64> = (0..nt).map(|_| ((normal(&mut rng) + shift) * 4.0).round() / 4.0).collect();
        let nontargets: Vec<f64> = (0..nn).map(|_| (normal(&mut rng) * 4.0).round() / 4.0).collect();
        let fast = compute_eer(&targets, &nontargets).map_err(|e| e.to_string())?;
        let slow = brute_force_eer(&targets, &nontargets);
        ensure!(fast == slow, "set {i}: {fast} != brute force {slow}");
    }
    let sep = compute_eer(&[2.0, 3.0, 4.5], &[-1.0, 0.0, 1.0]).map_err(|e| e.to_string())?;
    let same = compute_eer(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?;
    ensure!(sep == 0.0, "perfect separation gave {sep}");
    ensure!(same == 0.5, "identical sets gave {same}");
    Ok("100 random score sets match exhaustive enumeration exactly; separation 0, identical 0.5".into())
}

fn load_config(name: &str) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(manifest_path(name)).map_err(|e| e.to_string())?;
    ExperimentConfig::from_toml_str(&text).map_err(|e| e.to_string())
}

fn criterion_8() -> Check {
    let start = Instant::now();
    let cfg = load_config("configs/stage1.toml")?;
    ensure!(
        cfg.num_speakers == 12 && cfg.num_components == 16 && cfg.feature_dim == 8,
        "stage 1 config is not the 12-speaker, 16-component, 8-D setup"
    );
    ensure!(cfg.enroll_seconds == 30.0 && cfg.test_seconds == 10.0, "stage 1 durations differ");
    ensure!(cfg.num_clusters == 3 && cfg.num_impostors > 0, "stage 1 needs 3 clusters and planted impostors");
    ensure!(cfg.thresholds().first() == Some(&1.0), "stage 1 primary threshold is not 1.0");
    let setup = build_experiment(&cfg).map_err(|e| e.to_string())?;
    let clusters: std::collections::BTreeSet<u32> = setup.registry.entries().map(|e| e.cluster_id).collect();
    ensure!(clusters.len() == 3, "registry spans {} clusters", clusters.len());
    let report = score_trials(&cfg.name, cfg.mode, &cfg.thresholds(), &setup).map_err(|e| e.to_string())?;

    let labeled: Vec<_> = report.trials.iter().filter(|t| !t.true_speakers.is_empty()).collect();
    ensure!(labeled.len() >= 12, "only {} labeled trials", labeled.len());
    let top1 = labeled.iter().filter(|t| t.true_speakers.contains(&t.ranked[0].speaker_id)).count() as f64
        / labeled.len() as f64;
    let above = labeled
        .iter()
        .filter(|t| t.true_speakers.iter().all(|id| t.ranked.iter().any(|s| &s.speaker_id == id && s.score > 1.0)))
        .count() as f64
        / labeled.len() as f64;
    ensure!(top1 >= 0.9, "top-1 accuracy {top1}");
    ensure!(above >= 0.9, "true speaker above 1.0 in only {above} of trials");
    let took = within_budget(start, Duration::from_secs(120))?;
    Ok(format!(
        "{} trials, top-1 {top1:.3}, true score > 1.0 in {above:.3}, FA/FR at 1.0 = {}/{}, at 1.5 = {}/{}, {took:.2?}",
        labeled.len(),
        report.threshold_studies[0].false_accepts,
        report.threshold_studies[0].false_rejects,
        report.threshold_studies.get(1).map_or(0, |s| s.false_accepts),
        report.threshold_studies.get(1).map_or(0, |s| s.false_rejects),
    ))
}

fn criterion_9() -> Check {
    let cfg = load_config("configs/stage2.toml")?;
    ensure!(cfg.mode == voxid::ScoringMode::Cosine && cfg.tv_rank == 8, "stage 2 must be rank-8 cosine");
    let setup = build_experiment(&cfg).map_err(|e| e.to_string())?;
    let target: Vec<_> = setup.registry.entries().filter(|e| e.cluster_id == 0).collect();
    let impostors = target.iter().filter(|e| e.is_impostor).count();
    ensure!(target.len() == 7 && impostors == 3, "target cluster has {} entries, {impostors} impostors", target.len());
    ensure!(setup.tv.as_ref().map(|t| t.rank()) == Some(8), "no rank-8 total-variability model");
    let report = score_trials(&cfg.name, cfg.mode, &cfg.thresholds(), &setup).map_err(|e| e.to_string())?;
    let own: Vec<_> = report.trials.iter().filter(|t| t.true_speakers.len() == 1).collect();
    ensure!(!own.is_empty(), "no self-trials");
    let first = own.iter().filter(|t| t.ranked[0].speaker_id == t.true_speakers[0]).count() as f64 / own.len() as f64;
    ensure!(first >= 0.9, "true speaker ranked first in {first} of self-trials");
    Ok(format!(
        "registry {} entries (target cluster 4 true + 3 impostors), {} self-trials, true speaker first in {first:.3}",
        setup.registry.len(),
        own.len()
    ))
}

fn random_artifact(kind: ArtifactKind, rng: &mut impl Rng) -> StoredArtifact {
    let (c, k) = (rng.random_range(1..6), rng.random_range(1..5));
    match kind {
        ArtifactKind::Features => {
            let frames = rng.random_range(0..40);
            StoredArtifact::Features(random_features(rng, frames, k))
        }
        ArtifactKind::Gmm => StoredArtifact::Gmm(random_gmm(rng, c, k)),
        ArtifactKind::Ubm => StoredArtifact::Ubm(Ubm::new(random_gmm(rng, c, k))),
        ArtifactKind::SpeakerModel => {
            let ubm = Ubm::new(random_gmm(rng, c, k));
            let stats = random_stats(rng, c, k);
            StoredArtifact::SpeakerModel(
                map_adapt(format!("speaker-{}", rng.random_range(0..99)), &stats, &ubm, 16.0).unwrap(),
            )
        }
        ArtifactKind::TvModel => {
            let c = c.max(2);
            let r = rng.random_range(1..c * k);
            StoredArtifact::TvModel(random_tv(rng, c, k, r))
        }
        ArtifactKind::IVector => {
            let n = rng.random_range(1..20);
            StoredArtifact::IVector(voxid::IVector::new(normals(rng, n)).unwrap())
        }
        ArtifactKind::Registry => {
            let iv = rng.random_bool(0.5);
            StoredArtifact::Registry(random_registry(rng, iv))
        }
        ArtifactKind::Report => StoredArtifact::Report(random_report(rng)),
    }
}

fn criterion_10() -> Check {
    let mut rng = rng(1010);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for kind in ArtifactKind::ALL {
        for i in 0..50 {
            let artifact = random_artifact(kind, &mut rng);
            let path = dir.path().join(format!("{kind}-{i}"));
            store::save(&artifact, &path).map_err(|e| e.to_string())?;
            let back = store::load(&path, kind).map_err(|e| format!("{kind} #{i}: {e}"))?;
            ensure!(back == artifact, "{kind} #{i} did not round-trip");
            let again = store::to_bytes(&back).map_err(|e| e.to_string())?;
            ensure!(again == std::fs::read(&path).unwrap(), "{kind} #{i} re-serialized differently");
        }
    }

    let gmm = DiagonalGmm::new(1, vec![0.5, 0.5], vec![-1.0, 1.0], vec![1.0, 1.0]).unwrap();
    let path = dir.path().join("gate.json");
    store::save(&StoredArtifact::Gmm(gmm), &path).map_err(|e| e.to_string())?;
    ensure!(matches!(store::load(&path, ArtifactKind::Ubm), Err(Error::WrongKind { .. })), "wrong kind accepted");
    let text = std::fs::read_to_string(&path).unwrap();
    let corrupt = dir.path().join("corrupt.json");
    std::fs::write(&corrupt, text.replacen("\"0.5\"", "\"0.4\"", 1)).unwrap();
    ensure!(
        matches!(store::load(&corrupt, ArtifactKind::Gmm), Err(Error::CorruptArtifact(_))),
        "weight sum 0.9 accepted"
    );
    let v2 = dir.path().join("v2.json");
    std::fs::write(&v2, text.replace("\"format_version\": 1", "\"format_version\": 2")).unwrap();
    ensure!(matches!(store::load(&v2, ArtifactKind::Gmm), Err(Error::UnsupportedVersion(2))), "version 2 accepted");
    let truncated = dir.path().join("short.voxf1");
    let feats = random_features(&mut rng, 3, 2).to_voxf1();
    std::fs::write(&truncated, &feats[..feats.len() - 1]).unwrap();
    ensure!(
        matches!(store::load(&truncated, ArtifactKind::Features), Err(Error::CorruptArtifact(_))),
        "truncated VOXF1 accepted"
    );
    Ok("50 random instances of each of the 8 kinds round-trip bit-exactly; wrong-kind, corrupt, version and truncation gates fire".into())
}

struct Run {
    code: i32,
    stdout: Vec<u8>,
}

fn voxid(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_voxid")).args(args).output().expect("binary runs");
    Run { code: out.status.code().unwrap_or(-1), stdout: out.stdout }
}

fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

type PipelineRun = (BTreeMap<String, Vec<u8>>, Vec<u8>);

fn pipeline(work: &Path, audio: &[String], experiment: &str) -> Result<PipelineRun, String> {
    let mut stdout = Vec::new();
    let s = |p: &Path| p.display().to_string();
    let mut step = |name: &str, args: Vec<String>| -> Result<(), String> {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let run = voxid(&refs);
        ensure!(run.code == 0, "{name} exited with {}", run.code);
        stdout.extend_from_slice(&run.stdout);
        Ok(())
    };
    let feats = work.join("features");
    let mut args = vec!["features".to_string()];
    args.extend(audio.iter().cloned());
    args.extend(["--out-dir".into(), s(&feats)]);
    step("features", args)?;
    let feature_files: Vec<String> = {
        let mut v: Vec<String> = std::fs::read_dir(&feats).unwrap().map(|e| s(&e.unwrap().path())).collect();
        v.sort();
        v
    };
    let ubm = s(&work.join("ubm.json"));
    let mut args = vec!["train-ubm".to_string()];
    args.extend(feature_files.iter().cloned());
    args.extend(["--out".into(), ubm.clone(), "--components".into(), "4".into(), "--seed".into(), "3".into()]);
    step("train-ubm", args)?;
    let tv = s(&work.join("tv.json"));
    let mut args = vec!["train-tv".to_string()];
    args.extend(feature_files.iter().cloned());
    args.extend([
        "--ubm".into(),
        ubm.clone(),
        "--out".into(),
        tv.clone(),
        "--rank".into(),
        "3".into(),
        "--iterations".into(),
        "3".into(),
    ]);
    step("train-tv", args)?;
    let ivec = s(&work.join("probe.ivector.json"));
    step(
        "ivector",
        vec![
            "ivector".into(),
            feature_files[0].clone(),
            "--ubm".into(),
            ubm.clone(),
            "--tv".into(),
            tv.clone(),
            "--out".into(),
            ivec.clone(),
        ],
    )?;
    let registry = s(&work.join("registry.json"));
    for (i, f) in feature_files.iter().enumerate().skip(1) {
        step(
            "enroll",
            vec![
                "enroll".into(),
                format!("speaker{i}"),
                f.clone(),
                "--ubm".into(),
                ubm.clone(),
                "--registry".into(),
                registry.clone(),
                "--cluster".into(),
                (i % 2).to_string(),
                "--tv".into(),
                tv.clone(),
            ],
        )?;
    }
    for (mode, probe) in [("llr", feature_files[0].clone()), ("cosine", ivec.clone())] {
        step(
            "identify",
            vec![
                "identify".into(),
                probe,
                "--registry".into(),
                registry.clone(),
                "--mode".into(),
                mode.into(),
                "--json".into(),
                s(&work.join(format!("id-{mode}.json"))),
                "--csv".into(),
                s(&work.join(format!("id-{mode}.csv"))),
                "--svg".into(),
                s(&work.join(format!("id-{mode}.svg"))),
            ],
        )?;
    }
    step("evaluate", vec!["evaluate".into(), experiment.into(), "--out-dir".into(), s(&work.join("eval"))])?;
    for target in [&ubm, &tv, &ivec, &registry] {
        step("inspect", vec!["inspect".into(), target.clone()])?;
    }
    Ok((tree_bytes(work), stdout))
}

fn criterion_11() -> Check {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let audio_dir = root.path().join("audio");
    std::fs::create_dir_all(&audio_dir).unwrap();
    let mut audio = Vec::new();
    for speaker in 0..4u64 {
        let path = audio_dir.join(format!("s{speaker}.wav"));
        voxid::write_wav(&synthetic_voice(speaker, 0, 1.5, 8000), &path).map_err(|e| e.to_string())?;
        audio.push(path.display().to_string());
    }
    let experiment = root.path().join("tiny.toml");
    std::fs::write(
        &experiment,
        "name = \"tiny\"\nnum_speakers = 4\nnum_impostors = 1\nnum_components = 4\nfeature_dim = 3\n\
         enroll_seconds = 4.0\ntest_seconds = 2.0\ndev_speakers = 8\ndev_seconds = 2.0\nspeaker_rank = 3\n",
    )
    .unwrap();
    let inputs_before = tree_bytes(&audio_dir);
    let (a, out_a) = pipeline(&root.path().join("run-a"), &audio, &experiment.display().to_string())?;
    let (b, out_b) = pipeline(&root.path().join("run-b"), &audio, &experiment.display().to_string())?;
    ensure!(tree_bytes(&audio_dir) == inputs_before, "an input file was modified");
    ensure!(a.len() == b.len(), "runs produced {} and {} files", a.len(), b.len());
    for (name, bytes) in &a {
        ensure!(b.get(name) == Some(bytes), "{name} differs between runs");
    }
    let norm = |o: &[u8]| String::from_utf8_lossy(o).replace("run-a", "run").replace("run-b", "run");
    ensure!(norm(&out_a) == norm(&out_b), "stdout differs between runs");
    Ok(format!("8 commands run twice: {} output files byte-identical, stdout identical, inputs untouched", a.len()))
}

fn main() {
    type Criterion = (&'static str, fn() -> Check);
    let criteria: [Criterion; 11] = [
        ("DSP correctness", criterion_1),
        ("GMM density", criterion_2),
        ("EM monotonicity and planted recovery", criterion_3),
        ("MAP adaptation", criterion_4),
        ("i-vector recovery and TV training", criterion_5),
        ("Scoring identities", criterion_6),
        ("EER oracle equivalence", criterion_7),
        ("Stage 1 LLR identification", criterion_8),
        ("Stage 2 cosine identification", criterion_9),
        ("Persistence", criterion_10),
        ("CLI determinism", criterion_11),
    ];
    let mut failed = 0;
    for (i, (title, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {title}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {title}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
