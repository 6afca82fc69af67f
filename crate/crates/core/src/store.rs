//! Versioned persistence.
//!
//! Models, registries, i-vectors and reports are JSON documents of the form
//! `{"kind": ..., "format_version": 1, "payload": {...}}` in which every real
//! number is a decimal string holding the shortest representation that
//! parses back to the same `f64`. Feature matrices use the binary `VOXF1`
//! layout. Every write goes to a temporary file in the target directory that
//! is then renamed into place.
//!
//! Loading re-runs the constructors of each type, so a file that decodes
//! into an invalid object is reported as [`Error::CorruptArtifact`].

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::eval::registry::{RegistryEntry, ScoredSpeaker, SpeakerRegistry};
use crate::eval::report::{EvalReport, TrialResult};
use crate::features::{FeatureMatrix, VOXF1_MAGIC};
use crate::gmm::DiagonalGmm;
use crate::ivector::{IVector, TotalVariabilityModel};
use crate::scoring::{Decision, ScoringMode};
use crate::speaker::{SpeakerModel, Supervector, Ubm};

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArtifactKind {
    Features,
    Gmm,
    Ubm,
    SpeakerModel,
    TvModel,
    IVector,
    Registry,
    Report,
}

impl ArtifactKind {
    pub const ALL: [ArtifactKind; 8] = [
        ArtifactKind::Features,
        ArtifactKind::Gmm,
        ArtifactKind::Ubm,
        ArtifactKind::SpeakerModel,
        ArtifactKind::TvModel,
        ArtifactKind::IVector,
        ArtifactKind::Registry,
        ArtifactKind::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactKind::Features => "features",
            ArtifactKind::Gmm => "gmm",
            ArtifactKind::Ubm => "ubm",
            ArtifactKind::SpeakerModel => "speaker_model",
            ArtifactKind::TvModel => "tv_model",
            ArtifactKind::IVector => "ivector",
            ArtifactKind::Registry => "registry",
            ArtifactKind::Report => "report",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StoredArtifact {
    Features(FeatureMatrix),
    Gmm(DiagonalGmm),
    Ubm(Ubm),
    SpeakerModel(SpeakerModel),
    TvModel(TotalVariabilityModel),
    IVector(IVector),
    Registry(SpeakerRegistry),
    Report(EvalReport),
}

impl StoredArtifact {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            StoredArtifact::Features(_) => ArtifactKind::Features,
            StoredArtifact::Gmm(_) => ArtifactKind::Gmm,
            StoredArtifact::Ubm(_) => ArtifactKind::Ubm,
            StoredArtifact::SpeakerModel(_) => ArtifactKind::SpeakerModel,
            StoredArtifact::TvModel(_) => ArtifactKind::TvModel,
            StoredArtifact::IVector(_) => ArtifactKind::IVector,
            StoredArtifact::Registry(_) => ArtifactKind::Registry,
            StoredArtifact::Report(_) => ArtifactKind::Report,
        }
    }
}

// Reals as strings.

fn real(v: f64) -> String {
    format!("{v:?}")
}

fn reals(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| real(x)).collect()
}

fn parse_real(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::CorruptArtifact(format!("{s:?} is not a real number")))
}

fn parse_reals(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| parse_real(s)).collect()
}

fn corrupt(e: Error) -> Error {
    match e {
        Error::CorruptArtifact(_) => e,
        other => Error::CorruptArtifact(other.to_string()),
    }
}

// Payload schemas.

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GmmDoc {
    dim: usize,
    weights: Vec<String>,
    means: Vec<String>,
    variances: Vec<String>,
}

impl GmmDoc {
    fn from_gmm(g: &DiagonalGmm) -> Self {
        Self {
            dim: g.dim(),
            weights: reals(g.weights()),
            means: reals(g.means_flat()),
            variances: reals(g.variances_flat()),
        }
    }

    fn to_gmm(&self) -> Result<DiagonalGmm> {
        DiagonalGmm::new(
            self.dim,
            parse_reals(&self.weights)?,
            parse_reals(&self.means)?,
            parse_reals(&self.variances)?,
        )
        .map_err(corrupt)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpeakerModelDoc {
    speaker_id: String,
    gmm: GmmDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TvDoc {
    num_components: usize,
    dim: usize,
    rank: usize,
    m: Vec<String>,
    sigma: Vec<String>,
    t_matrix: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IVectorDoc {
    values: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    speaker_id: String,
    cluster_id: u32,
    /// Adapted means; weights and variances are the registry UBM's.
    means: Vec<String>,
    ivector: Option<Vec<String>>,
    language_tag: String,
    is_impostor: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegistryDoc {
    ubm: GmmDoc,
    entries: Vec<EntryDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoredDoc {
    speaker_id: String,
    cluster_id: u32,
    raw_score: String,
    score: String,
    decision: Decision,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialDoc {
    trial_id: String,
    description: String,
    true_speakers: Vec<String>,
    ranked: Vec<ScoredDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyDoc {
    threshold: String,
    false_accepts: usize,
    false_rejects: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportDoc {
    name: String,
    mode: ScoringMode,
    threshold: String,
    false_accepts: usize,
    false_rejects: usize,
    eer: Option<String>,
    top1_accuracy: String,
    true_accept_rate: String,
    threshold_studies: Vec<StudyDoc>,
    trials: Vec<TrialDoc>,
}

fn report_doc(r: &EvalReport) -> ReportDoc {
    ReportDoc {
        name: r.name.clone(),
        mode: r.mode,
        threshold: real(r.threshold),
        false_accepts: r.false_accepts,
        false_rejects: r.false_rejects,
        eer: r.eer.map(real),
        top1_accuracy: real(r.top1_accuracy),
        true_accept_rate: real(r.true_accept_rate),
        threshold_studies: r
            .threshold_studies
            .iter()
            .map(|s| StudyDoc {
                threshold: real(s.threshold),
                false_accepts: s.false_accepts,
                false_rejects: s.false_rejects,
            })
            .collect(),
        trials: r
            .trials
            .iter()
            .map(|t| TrialDoc {
                trial_id: t.trial_id.clone(),
                description: t.description.clone(),
                true_speakers: t.true_speakers.clone(),
                ranked: t
                    .ranked
                    .iter()
                    .map(|s| ScoredDoc {
                        speaker_id: s.speaker_id.clone(),
                        cluster_id: s.cluster_id,
                        raw_score: real(s.raw_score),
                        score: real(s.score),
                        decision: s.decision,
                    })
                    .collect(),
            })
            .collect(),
    }
}

fn report_from_doc(d: ReportDoc) -> Result<EvalReport> {
    let mut trials = Vec::with_capacity(d.trials.len());
    for t in d.trials {
        let ranked = t
            .ranked
            .into_iter()
            .map(|s| {
                Ok(ScoredSpeaker {
                    speaker_id: s.speaker_id,
                    cluster_id: s.cluster_id,
                    raw_score: parse_real(&s.raw_score)?,
                    score: parse_real(&s.score)?,
                    decision: s.decision,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let ordered = ranked
            .windows(2)
            .all(|w| w[1].score.total_cmp(&w[0].score).then_with(|| w[0].speaker_id.cmp(&w[1].speaker_id)).is_lt());
        if !ordered {
            return Err(Error::CorruptArtifact(format!("trial {} is not ranked", t.trial_id)));
        }
        trials.push(TrialResult {
            trial_id: t.trial_id,
            description: t.description,
            true_speakers: t.true_speakers,
            ranked,
        });
    }
    let report = EvalReport {
        name: d.name,
        mode: d.mode,
        threshold: parse_real(&d.threshold)?,
        trials,
        false_accepts: d.false_accepts,
        false_rejects: d.false_rejects,
        eer: d.eer.as_deref().map(parse_real).transpose()?,
        top1_accuracy: parse_real(&d.top1_accuracy)?,
        true_accept_rate: parse_real(&d.true_accept_rate)?,
        threshold_studies: d
            .threshold_studies
            .iter()
            .map(|s| {
                Ok(crate::eval::report::ThresholdSummary {
                    threshold: parse_real(&s.threshold)?,
                    false_accepts: s.false_accepts,
                    false_rejects: s.false_rejects,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    // Every derived field must agree with a fresh tally of the trials.
    let mut thresholds: Vec<f64> = report.threshold_studies.iter().map(|s| s.threshold).collect();
    if thresholds.first() != Some(&report.threshold) {
        thresholds.insert(0, report.threshold);
    }
    let recomputed =
        EvalReport::assemble(report.name.clone(), report.mode, &thresholds, report.trials.clone()).map_err(corrupt)?;
    let consistent = recomputed.trials == report.trials
        && recomputed.false_accepts == report.false_accepts
        && recomputed.false_rejects == report.false_rejects
        && recomputed.eer.map(f64::to_bits) == report.eer.map(f64::to_bits)
        && recomputed.top1_accuracy.to_bits() == report.top1_accuracy.to_bits()
        && recomputed.true_accept_rate.to_bits() == report.true_accept_rate.to_bits()
        && recomputed.threshold_studies == report.threshold_studies;
    if !consistent {
        return Err(Error::CorruptArtifact("report counts disagree with its trials".into()));
    }
    Ok(report)
}

fn registry_doc(r: &SpeakerRegistry) -> RegistryDoc {
    RegistryDoc {
        ubm: GmmDoc::from_gmm(&r.ubm().gmm),
        entries: r
            .entries()
            .map(|e| EntryDoc {
                speaker_id: e.speaker_id.clone(),
                cluster_id: e.cluster_id,
                means: reals(e.model.gmm.means_flat()),
                ivector: e.ivector.as_ref().map(|v| reals(v.as_slice())),
                language_tag: e.language_tag.clone(),
                is_impostor: e.is_impostor,
            })
            .collect(),
    }
}

fn registry_from_doc(d: RegistryDoc) -> Result<SpeakerRegistry> {
    let ubm = Ubm::new(d.ubm.to_gmm()?);
    let mut registry = SpeakerRegistry::new(ubm.clone());
    for e in d.entries {
        let gmm = ubm.gmm.with_means(parse_reals(&e.means)?).map_err(corrupt)?;
        let model = SpeakerModel::new(e.speaker_id.clone(), gmm, &ubm).map_err(corrupt)?;
        let ivector = match e.ivector {
            Some(v) => Some(IVector::new(parse_reals(&v)?).map_err(corrupt)?),
            None => None,
        };
        registry
            .insert(RegistryEntry {
                speaker_id: e.speaker_id,
                cluster_id: e.cluster_id,
                model,
                ivector,
                language_tag: e.language_tag,
                is_impostor: e.is_impostor,
            })
            .map_err(corrupt)?;
    }
    Ok(registry)
}

fn payload(artifact: &StoredArtifact) -> Result<Value> {
    let value = match artifact {
        StoredArtifact::Features(_) => unreachable!("features are stored as VOXF1"),
        StoredArtifact::Gmm(g) => serde_json::to_value(GmmDoc::from_gmm(g)),
        StoredArtifact::Ubm(u) => serde_json::to_value(GmmDoc::from_gmm(&u.gmm)),
        StoredArtifact::SpeakerModel(s) => {
            serde_json::to_value(SpeakerModelDoc { speaker_id: s.speaker_id.clone(), gmm: GmmDoc::from_gmm(&s.gmm) })
        }
        StoredArtifact::TvModel(tv) => serde_json::to_value(TvDoc {
            num_components: tv.num_components(),
            dim: tv.dim(),
            rank: tv.rank(),
            m: reals(tv.m().as_slice()),
            sigma: reals(tv.sigma()),
            t_matrix: reals(tv.t_matrix()),
        }),
        StoredArtifact::IVector(v) => serde_json::to_value(IVectorDoc { values: reals(v.as_slice()) }),
        StoredArtifact::Registry(r) => serde_json::to_value(registry_doc(r)),
        StoredArtifact::Report(r) => serde_json::to_value(report_doc(r)),
    };
    value.map_err(|e| Error::CorruptArtifact(e.to_string()))
}

fn decode<T: for<'de> Deserialize<'de>>(value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::CorruptArtifact(e.to_string()))
}

fn from_payload(kind: ArtifactKind, value: Value) -> Result<StoredArtifact> {
    Ok(match kind {
        ArtifactKind::Features => unreachable!("features are stored as VOXF1"),
        ArtifactKind::Gmm => StoredArtifact::Gmm(decode::<GmmDoc>(value)?.to_gmm()?),
        ArtifactKind::Ubm => StoredArtifact::Ubm(Ubm::new(decode::<GmmDoc>(value)?.to_gmm()?)),
        ArtifactKind::SpeakerModel => {
            let d: SpeakerModelDoc = decode(value)?;
            StoredArtifact::SpeakerModel(SpeakerModel { speaker_id: d.speaker_id, gmm: d.gmm.to_gmm()? })
        }
        ArtifactKind::TvModel => {
            let d: TvDoc = decode(value)?;
            StoredArtifact::TvModel(
                TotalVariabilityModel::new(
                    d.num_components,
                    d.dim,
                    d.rank,
                    Supervector(parse_reals(&d.m)?),
                    parse_reals(&d.sigma)?,
                    parse_reals(&d.t_matrix)?,
                )
                .map_err(corrupt)?,
            )
        }
        ArtifactKind::IVector => {
            let d: IVectorDoc = decode(value)?;
            StoredArtifact::IVector(IVector::new(parse_reals(&d.values)?).map_err(corrupt)?)
        }
        ArtifactKind::Registry => StoredArtifact::Registry(registry_from_doc(decode(value)?)?),
        ArtifactKind::Report => StoredArtifact::Report(report_from_doc(decode(value)?)?),
    })
}

/// Serialized bytes of `artifact`; identical artifacts give identical bytes.
pub fn to_bytes(artifact: &StoredArtifact) -> Result<Vec<u8>> {
    if let StoredArtifact::Features(f) = artifact {
        return Ok(f.to_voxf1());
    }
    let envelope = serde_json::json!({
        "kind": artifact.kind().as_str(),
        "format_version": FORMAT_VERSION,
        "payload": payload(artifact)?,
    });
    let mut bytes = serde_json::to_vec_pretty(&envelope).map_err(|e| Error::CorruptArtifact(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Parses, version-checks and validates bytes produced by [`to_bytes`].
pub fn from_bytes(bytes: &[u8], expected: ArtifactKind) -> Result<StoredArtifact> {
    let is_voxf1 = bytes.starts_with(VOXF1_MAGIC);
    if expected == ArtifactKind::Features {
        if !is_voxf1 {
            let found = peek_kind(bytes).unwrap_or_else(|| "unknown".into());
            return Err(Error::WrongKind { expected: expected.to_string(), found });
        }
        return Ok(StoredArtifact::Features(FeatureMatrix::from_voxf1(bytes)?));
    }
    if is_voxf1 {
        return Err(Error::WrongKind { expected: expected.to_string(), found: "features".into() });
    }
    let mut doc: Value =
        serde_json::from_slice(bytes).map_err(|e| Error::CorruptArtifact(format!("not a JSON artifact: {e}")))?;
    let obj = doc.as_object_mut().ok_or_else(|| Error::CorruptArtifact("artifact is not a JSON object".into()))?;
    let kind_str = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::CorruptArtifact("missing kind".into()))?
        .to_string();
    let version = obj
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::CorruptArtifact("missing format_version".into()))?;
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let kind =
        ArtifactKind::parse(&kind_str).ok_or_else(|| Error::CorruptArtifact(format!("unknown kind {kind_str:?}")))?;
    if kind != expected {
        return Err(Error::WrongKind { expected: expected.to_string(), found: kind_str });
    }
    if obj.len() != 3 {
        return Err(Error::CorruptArtifact("unexpected envelope fields".into()));
    }
    let payload = obj.remove("payload").ok_or_else(|| Error::CorruptArtifact("missing payload".into()))?;
    from_payload(kind, payload)
}

fn peek_kind(bytes: &[u8]) -> Option<String> {
    let doc: Value = serde_json::from_slice(bytes).ok()?;
    doc.get("kind")?.as_str().map(str::to_string)
}

/// The kind recorded in a file, without validating the payload.
pub fn sniff_kind(path: impl AsRef<Path>) -> Result<ArtifactKind> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(VOXF1_MAGIC) {
        return Ok(ArtifactKind::Features);
    }
    let found = peek_kind(&bytes).ok_or_else(|| Error::CorruptArtifact("no artifact kind found".into()))?;
    ArtifactKind::parse(&found).ok_or_else(|| Error::CorruptArtifact(format!("unknown kind {found:?}")))
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn save(artifact: &StoredArtifact, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &to_bytes(artifact)?)
}

pub fn load(path: impl AsRef<Path>, expected: ArtifactKind) -> Result<StoredArtifact> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, expected)
}

macro_rules! typed_loader {
    ($(#[$doc:meta])* $name:ident, $variant:ident, $ty:ty) => {
        $(#[$doc])*
        pub fn $name(path: impl AsRef<Path>) -> Result<$ty> {
            match load(path, ArtifactKind::$variant)? {
                StoredArtifact::$variant(v) => Ok(v),
                _ => unreachable!("load returns the expected kind"),
            }
        }
    };
}

typed_loader!(load_features, Features, FeatureMatrix);
typed_loader!(load_gmm, Gmm, DiagonalGmm);
typed_loader!(load_ubm, Ubm, Ubm);
typed_loader!(load_speaker_model, SpeakerModel, SpeakerModel);
typed_loader!(load_tv_model, TvModel, TotalVariabilityModel);
typed_loader!(load_ivector, IVector, IVector);
typed_loader!(load_registry, Registry, SpeakerRegistry);
typed_loader!(load_report, Report, EvalReport);
