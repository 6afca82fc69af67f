//! Synthetic identification experiments.
//!
//! Speakers are drawn from the total-variability model itself: a common
//! "world" mixture supplies `m`, a planted low-rank basis `V` supplies speaker
//! offsets `V·y` with `y ~ N(0, I)`, and every recording session adds a small
//! isotropic offset. Frames are sampled from the resulting mixtures, so the
//! whole pipeline (UBM training, MAP enrollment, optional i-vectors, scoring)
//! runs without audio.
//!
//! Registry layout follows a clustered model list: true speakers (enrolled
//! and tested), impostor models (enrolled, never tested) and background
//! models (enrolled filler). With `layout = "target_cluster"` true speakers
//! and impostors share cluster 0 and background models fill the others;
//! with `layout = "spread"` everyone is dealt round-robin across clusters.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::registry::{identify, CohortPolicy, Probe, RegistryEntry, SpeakerRegistry, Trial};
use crate::eval::report::{EvalReport, TrialResult};
use crate::features::FeatureMatrix;
use crate::gmm::{DiagonalGmm, GmmTrainingConfig};
use crate::ivector::{extract_ivector, init_tv, train_tv, TotalVariabilityModel};
use crate::scoring::{DecisionPolicy, ScoringMode};
use crate::speaker::{accumulate_stats, map_adapt, train_ubm, Ubm};

/// Metadata cycled over enrolled speakers.
pub const LANGUAGES: [&str; 4] = ["English", "Bengali", "Hindi", "Oriya"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLayout {
    Spread,
    TargetCluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: ScoringMode,
    pub seed: u64,
    /// First entry is the primary threshold. Defaults: `[1.0, 1.5]` for LLR,
    /// `[0.5]` for cosine.
    pub thresholds: Option<Vec<f64>>,

    pub num_speakers: usize,
    pub num_impostors: usize,
    pub num_background: usize,
    pub num_clusters: usize,
    pub layout: ClusterLayout,
    pub tests_per_speaker: usize,
    /// 1-based indices of true speakers tested one extra time.
    pub extra_test_speakers: Vec<usize>,
    /// Probes from speakers who are not enrolled at all.
    pub impostor_trials: usize,
    /// Probes concatenating two consecutive true speakers' speech.
    pub conversation_trials: usize,

    pub num_components: usize,
    pub feature_dim: usize,
    pub frames_per_second: f64,
    pub enroll_seconds: f64,
    pub test_seconds: f64,
    pub speaker_rank: usize,
    pub speaker_scale: f64,
    pub session_scale: f64,

    pub dev_speakers: usize,
    pub dev_sessions: usize,
    pub dev_seconds: f64,
    pub ubm_max_iterations: usize,
    pub relevance: f64,
    pub tv_rank: usize,
    pub tv_iterations: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            mode: ScoringMode::Llr,
            seed: 0,
            thresholds: None,
            num_speakers: 12,
            num_impostors: 3,
            num_background: 0,
            num_clusters: 3,
            layout: ClusterLayout::Spread,
            tests_per_speaker: 1,
            extra_test_speakers: Vec::new(),
            impostor_trials: 0,
            conversation_trials: 0,
            num_components: 16,
            feature_dim: 8,
            frames_per_second: 100.0,
            enroll_seconds: 30.0,
            test_seconds: 10.0,
            speaker_rank: 6,
            speaker_scale: 0.6,
            session_scale: 0.1,
            dev_speakers: 40,
            dev_sessions: 2,
            dev_seconds: 10.0,
            ubm_max_iterations: 50,
            relevance: 16.0,
            tv_rank: 8,
            tv_iterations: 10,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidExperimentConfig(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.thresholds.clone().unwrap_or_else(|| match self.mode {
            ScoringMode::Llr => vec![1.0, 1.5],
            ScoringMode::Cosine => vec![0.5],
        })
    }

    fn frames(&self, seconds: f64) -> usize {
        (seconds * self.frames_per_second).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let thresholds = self.thresholds();
        if thresholds.is_empty() {
            return Err(invalid("thresholds must not be empty"));
        }
        for &t in &thresholds {
            DecisionPolicy::new(self.mode, t).map_err(|e| invalid(e.to_string()))?;
        }
        if self.num_speakers + self.num_impostors + self.num_background == 0 {
            return Err(invalid("registry would be empty"));
        }
        if self.num_clusters == 0 {
            return Err(invalid("num_clusters must be at least 1"));
        }
        if self.layout == ClusterLayout::TargetCluster && self.num_background > 0 && self.num_clusters < 2 {
            return Err(invalid("target_cluster layout with background models needs at least 2 clusters"));
        }
        if let Some(&bad) = self.extra_test_speakers.iter().find(|&&i| i == 0 || i > self.num_speakers) {
            return Err(invalid(format!("extra_test_speakers entry {bad} is not a speaker index")));
        }
        if self.conversation_trials > 0 && self.num_speakers < 2 {
            return Err(invalid("conversation trials need at least two speakers"));
        }
        if self.num_components == 0 || self.feature_dim == 0 {
            return Err(invalid("num_components and feature_dim must be positive"));
        }
        for (name, secs) in [
            ("enroll_seconds", self.enroll_seconds),
            ("test_seconds", self.test_seconds),
            ("dev_seconds", self.dev_seconds),
        ] {
            if !(secs > 0.0) || self.frames(secs) < 2 {
                return Err(invalid(format!("{name} yields fewer than 2 frames")));
            }
        }
        if !(self.frames_per_second > 0.0) {
            return Err(invalid("frames_per_second must be positive"));
        }
        if self.dev_speakers == 0 || self.dev_sessions == 0 {
            return Err(invalid("the development population must not be empty"));
        }
        if self.dev_speakers * self.dev_sessions * self.frames(self.dev_seconds) < self.num_components {
            return Err(invalid("development data has fewer frames than UBM components"));
        }
        let sv = self.num_components * self.feature_dim;
        if self.speaker_rank == 0 || self.speaker_rank > sv {
            return Err(invalid("speaker_rank must lie in 1..=num_components*feature_dim"));
        }
        if self.mode == ScoringMode::Cosine && (self.tv_rank == 0 || self.tv_rank >= sv) {
            return Err(invalid("tv_rank must lie in 1..num_components*feature_dim"));
        }
        if !(self.speaker_scale >= 0.0) || !(self.session_scale >= 0.0) {
            return Err(invalid("scales must be non-negative"));
        }
        if !(self.relevance >= 0.0) {
            return Err(invalid("relevance must be non-negative"));
        }
        Ok(())
    }
}

/// splitmix64 finalizer, used to derive independent per-entity seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed) ^ tag) ^ index))
}

const TAG_WORLD: u64 = 1;
const TAG_SPEAKER: u64 = 2;
const TAG_SESSION: u64 = 3;
const TAG_TV: u64 = 4;

/// Ground-truth generator shared by every speaker of one experiment.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    world: DiagonalGmm,
    /// Row-major `(C·k) × speaker_rank`.
    basis: Vec<f64>,
    rank: usize,
    session_scale: f64,
    seed: u64,
}

impl SyntheticWorld {
    pub fn new(cfg: &ExperimentConfig) -> Self {
        let mut rng = stream(cfg.seed, TAG_WORLD, 0);
        let (c, k) = (cfg.num_components, cfg.feature_dim);
        let mut weights: Vec<f64> = (0..c).map(|_| rng.random_range(0.5..1.5)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let spread = Normal::new(0.0, 2.0).expect("valid normal");
        let means = (0..c * k).map(|_| spread.sample(&mut rng)).collect();
        let variances = (0..c * k).map(|_| rng.random_range(0.5..1.5)).collect();
        let world = DiagonalGmm::new(k, weights, means, variances).expect("valid world mixture");
        let r = cfg.speaker_rank;
        let scale = cfg.speaker_scale / (r as f64).sqrt();
        let basis = (0..c * k * r)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        Self { world, basis, rank: r, session_scale: cfg.session_scale, seed: cfg.seed }
    }

    pub fn world(&self) -> &DiagonalGmm {
        &self.world
    }

    /// Mean supervector `m + V·y` of speaker `index` in population `tag`.
    pub fn speaker_supervector(&self, population: u64, index: u64) -> Vec<f64> {
        let mut rng = stream(self.seed, TAG_SPEAKER ^ (population << 8), index);
        let y: Vec<f64> = (0..self.rank).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.world
            .means_flat()
            .iter()
            .enumerate()
            .map(|(row, &m)| {
                m + self.basis[row * self.rank..(row + 1) * self.rank].iter().zip(&y).map(|(v, yi)| v * yi).sum::<f64>()
            })
            .collect()
    }

    /// Samples one recording session of `frames` frames.
    pub fn session(&self, supervector: &[f64], session_key: u64, frames: usize) -> FeatureMatrix {
        let mut rng = stream(self.seed, TAG_SESSION, session_key);
        let noise = Normal::new(0.0, self.session_scale.max(0.0)).expect("valid normal");
        let means: Vec<f64> = supervector.iter().map(|m| m + noise.sample(&mut rng)).collect();
        let gmm = self.world.with_means(means).expect("session means are finite");
        sample_frames(&gmm, frames, &mut rng)
    }
}

/// Draws `frames` i.i.d. vectors from a diagonal mixture.
pub fn sample_frames(gmm: &DiagonalGmm, frames: usize, rng: &mut impl Rng) -> FeatureMatrix {
    let dim = gmm.dim();
    let mut data = Vec::with_capacity(frames * dim);
    for _ in 0..frames {
        let mut u: f64 = rng.random();
        let mut comp = gmm.num_components() - 1;
        for (c, &w) in gmm.weights().iter().enumerate() {
            if u < w {
                comp = c;
                break;
            }
            u -= w;
        }
        let (mean, var) = (gmm.mean(comp), gmm.variance(comp));
        for d in 0..dim {
            let z: f64 = StandardNormal.sample(rng);
            data.push(mean[d] + var[d].sqrt() * z);
        }
    }
    FeatureMatrix::from_flat(dim, data).expect("sampled frames are finite")
}

const POP_TRUE: u64 = 1;
const POP_IMPOSTOR: u64 = 2;
const POP_BACKGROUND: u64 = 3;
const POP_DEV: u64 = 4;
const POP_UNENROLLED: u64 = 5;

fn session_key(population: u64, speaker: u64, session: u64) -> u64 {
    mix(population) ^ mix(speaker.wrapping_mul(1_000_003)) ^ mix(session.wrapping_add(77))
}

struct Enrollee {
    id: String,
    population: u64,
    index: u64,
    cluster: u32,
    is_impostor: bool,
}

/// Everything a run builds before scoring, exposed for inspection.
pub struct ExperimentSetup {
    pub ubm: Ubm,
    pub tv: Option<TotalVariabilityModel>,
    pub registry: SpeakerRegistry,
    pub trials: Vec<Trial>,
}

fn enrollees(cfg: &ExperimentConfig) -> Vec<Enrollee> {
    let mut out = Vec::new();
    let k = cfg.num_clusters as u32;
    let mut dealt = 0u32;
    let mut deal = |target: bool| -> u32 {
        match (cfg.layout, target) {
            (ClusterLayout::TargetCluster, true) => 0,
            (ClusterLayout::TargetCluster, false) => {
                let c = 1 + dealt % (k - 1).max(1);
                dealt += 1;
                c.min(k - 1)
            }
            (ClusterLayout::Spread, _) => {
                let c = dealt % k;
                dealt += 1;
                c
            }
        }
    };
    for i in 0..cfg.num_speakers {
        out.push(Enrollee {
            id: format!("spk{:02}", i + 1),
            population: POP_TRUE,
            index: i as u64,
            cluster: deal(true),
            is_impostor: false,
        });
    }
    for i in 0..cfg.num_impostors {
        out.push(Enrollee {
            id: format!("imp{:02}", i + 1),
            population: POP_IMPOSTOR,
            index: i as u64,
            cluster: deal(true),
            is_impostor: true,
        });
    }
    for i in 0..cfg.num_background {
        out.push(Enrollee {
            id: format!("bg{:03}", i + 1),
            population: POP_BACKGROUND,
            index: i as u64,
            cluster: deal(false),
            is_impostor: false,
        });
    }
    out
}

/// Builds the UBM, optional total-variability model, registry and trials.
pub fn build_experiment(cfg: &ExperimentConfig) -> Result<ExperimentSetup> {
    cfg.validate()?;
    let world = SyntheticWorld::new(cfg);

    let dev_frames = cfg.frames(cfg.dev_seconds);
    let mut dev = BTreeMap::new();
    for s in 0..cfg.dev_speakers as u64 {
        let sv = world.speaker_supervector(POP_DEV, s);
        for sess in 0..cfg.dev_sessions as u64 {
            dev.insert(format!("dev{s:04}-{sess:02}"), world.session(&sv, session_key(POP_DEV, s, sess), dev_frames));
        }
    }
    let gmm_cfg = GmmTrainingConfig {
        num_components: cfg.num_components,
        max_iterations: cfg.ubm_max_iterations,
        rng_seed: cfg.seed,
        ..GmmTrainingConfig::default()
    };
    let ubm = train_ubm(&dev, &gmm_cfg)?;

    let tv = if cfg.mode == ScoringMode::Cosine {
        let stats: Vec<_> = dev.values().map(|x| accumulate_stats(x, &ubm)).collect::<Result<_>>()?;
        let init = init_tv(&ubm, cfg.tv_rank, mix(cfg.seed ^ TAG_TV))?;
        Some(train_tv(&stats, &init, cfg.tv_iterations)?)
    } else {
        None
    };

    let mut registry = SpeakerRegistry::new(ubm.clone());
    let enroll_frames = cfg.frames(cfg.enroll_seconds);
    for (n, e) in enrollees(cfg).iter().enumerate() {
        let sv = world.speaker_supervector(e.population, e.index);
        let x = world.session(&sv, session_key(e.population, e.index, 0), enroll_frames);
        let stats = accumulate_stats(&x, &ubm)?;
        let model = map_adapt(e.id.clone(), &stats, &ubm, cfg.relevance)?;
        let ivector = tv.as_ref().map(|tv| extract_ivector(&stats, tv)).transpose()?;
        registry.insert(RegistryEntry {
            speaker_id: e.id.clone(),
            cluster_id: e.cluster,
            model,
            ivector,
            language_tag: LANGUAGES[n % LANGUAGES.len()].to_string(),
            is_impostor: e.is_impostor,
        })?;
    }

    let test_frames = cfg.frames(cfg.test_seconds);
    let probe = |x: FeatureMatrix| -> Result<Probe> {
        Ok(match &tv {
            Some(tv) => Probe::IVector(extract_ivector(&accumulate_stats(&x, &ubm)?, tv)?),
            None => Probe::Features(x),
        })
    };

    let mut trials = Vec::new();
    let mut plan: Vec<(usize, u64)> = Vec::new();
    for i in 0..cfg.num_speakers {
        for t in 0..cfg.tests_per_speaker {
            plan.push((i, 1 + t as u64));
        }
    }
    for (n, &one_based) in cfg.extra_test_speakers.iter().enumerate() {
        plan.push((one_based - 1, 1 + (cfg.tests_per_speaker + n) as u64));
    }
    for (i, session) in plan {
        let id = format!("spk{:02}", i + 1);
        let sv = world.speaker_supervector(POP_TRUE, i as u64);
        let x = world.session(&sv, session_key(POP_TRUE, i as u64, session), test_frames);
        trials.push(Trial {
            trial_id: format!("{id}-t{session}"),
            probe: probe(x)?,
            true_speakers: vec![id],
            description: format!(
                "new session {session} of speaker {}, test language {}",
                i + 1,
                LANGUAGES[(i + session as usize) % LANGUAGES.len()]
            ),
        });
    }
    for u in 0..cfg.impostor_trials as u64 {
        let sv = world.speaker_supervector(POP_UNENROLLED, u);
        let x = world.session(&sv, session_key(POP_UNENROLLED, u, 1), test_frames);
        trials.push(Trial {
            trial_id: format!("unk{:02}", u + 1),
            probe: probe(x)?,
            true_speakers: Vec::new(),
            description: "speaker not enrolled".into(),
        });
    }
    for n in 0..cfg.conversation_trials {
        let a = n % cfg.num_speakers;
        let b = (n + 1) % cfg.num_speakers;
        let half = (test_frames / 2).max(1);
        let session = 1000 + n as u64;
        let xa = world.session(
            &world.speaker_supervector(POP_TRUE, a as u64),
            session_key(POP_TRUE, a as u64, session),
            half,
        );
        let xb = world.session(
            &world.speaker_supervector(POP_TRUE, b as u64),
            session_key(POP_TRUE, b as u64, session),
            half,
        );
        let (ida, idb) = (format!("spk{:02}", a + 1), format!("spk{:02}", b + 1));
        trials.push(Trial {
            trial_id: format!("conv{:02}", n + 1),
            probe: probe(FeatureMatrix::concat([&xa, &xb])?)?,
            description: format!("conversation of {ida} and {idb}"),
            true_speakers: vec![ida, idb],
        });
    }

    Ok(ExperimentSetup { ubm, tv, registry, trials })
}

/// Scores every trial of an already built setup.
pub fn score_trials(
    name: &str,
    cfg_mode: ScoringMode,
    thresholds: &[f64],
    setup: &ExperimentSetup,
) -> Result<EvalReport> {
    let primary = DecisionPolicy::new(cfg_mode, thresholds[0])?;
    let results = setup
        .trials
        .iter()
        .map(|t| {
            Ok(TrialResult {
                trial_id: t.trial_id.clone(),
                description: t.description.clone(),
                true_speakers: t.true_speakers.clone(),
                ranked: identify(t, &setup.registry, &primary, CohortPolicy::Registry)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::assemble(name, cfg_mode, thresholds, results)
}

/// Builds the synthetic registry, runs every trial and tallies the report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    let setup = build_experiment(cfg)?;
    score_trials(&cfg.name, cfg.mode, &cfg.thresholds(), &setup)
}
