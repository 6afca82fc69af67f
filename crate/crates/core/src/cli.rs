//! Command implementations behind the `voxid` binary.
//!
//! Every command reads its inputs, writes only the outputs it declares and
//! reports failures by error name on stderr. Exit codes come from
//! [`ErrorCategory::exit_code`]; clap parse errors exit with 64.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::audio::read_wav;
use crate::dsp::{MfccConfig, MfccExtractor};
use crate::error::{Error, ErrorCategory, Result};
use crate::eval::experiment::{run_experiment, ExperimentConfig};
use crate::eval::plot::score_chart_svg;
use crate::eval::registry::{identify, CohortPolicy, Probe, RegistryEntry, SpeakerRegistry, Trial};
use crate::eval::report::{EvalReport, TrialResult};
use crate::features::FeatureMatrix;
use crate::gmm::GmmTrainingConfig;
use crate::ivector::{extract_ivector, init_tv, train_tv};
use crate::scoring::{DecisionPolicy, ScoringMode};
use crate::speaker::{accumulate_stats, map_adapt, train_ubm_with_history, BaumWelchStats, Ubm};
use crate::store::{self, ArtifactKind, StoredArtifact};

/// Settings shared by all commands: one flat TOML document, overridden by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub pre_emphasis_alpha: f64,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    pub dft_size: Option<usize>,
    pub num_mel_filters: usize,
    pub num_cepstra: usize,
    pub apply_cmvn: bool,

    pub num_components: usize,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub variance_floor: f64,

    pub relevance: f64,
    pub tv_rank: usize,
    pub tv_iterations: usize,

    pub mode: ScoringMode,
    /// `None` means 1.0 for LLR and 0.5 for cosine.
    pub threshold: Option<f64>,
    pub seed: u64,
}

impl Default for CliConfig {
    fn default() -> Self {
        let mfcc = MfccConfig::default();
        let gmm = GmmTrainingConfig::default();
        Self {
            pre_emphasis_alpha: mfcc.pre_emphasis_alpha,
            frame_length_ms: mfcc.frame_length_ms,
            frame_shift_ms: mfcc.frame_shift_ms,
            dft_size: mfcc.dft_size,
            num_mel_filters: mfcc.num_mel_filters,
            num_cepstra: mfcc.num_cepstra,
            apply_cmvn: mfcc.apply_cmvn,
            num_components: gmm.num_components,
            max_iterations: gmm.max_iterations,
            convergence_tol: gmm.convergence_tol,
            variance_floor: gmm.variance_floor,
            relevance: crate::speaker::DEFAULT_RELEVANCE,
            tv_rank: crate::ivector::DEFAULT_RANK,
            tv_iterations: 10,
            mode: ScoringMode::Llr,
            threshold: None,
            seed: 0,
        }
    }
}

impl CliConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn mfcc(&self) -> MfccConfig {
        MfccConfig {
            pre_emphasis_alpha: self.pre_emphasis_alpha,
            frame_length_ms: self.frame_length_ms,
            frame_shift_ms: self.frame_shift_ms,
            dft_size: self.dft_size,
            num_mel_filters: self.num_mel_filters,
            num_cepstra: self.num_cepstra,
            apply_cmvn: self.apply_cmvn,
        }
    }

    pub fn gmm(&self) -> GmmTrainingConfig {
        GmmTrainingConfig {
            num_components: self.num_components,
            max_iterations: self.max_iterations,
            convergence_tol: self.convergence_tol,
            variance_floor: self.variance_floor,
            rng_seed: self.seed,
        }
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(match self.mode {
            ScoringMode::Llr => 1.0,
            ScoringMode::Cosine => 0.5,
        })
    }

    pub fn policy(&self) -> Result<DecisionPolicy> {
        DecisionPolicy::new(self.mode, self.threshold())
    }

    pub fn validate(&self) -> Result<()> {
        self.mfcc().validate()?;
        self.gmm().validate()?;
        if !(self.relevance >= 0.0) || !self.relevance.is_finite() {
            return Err(Error::InvalidConfig(format!("relevance {} must be non-negative", self.relevance)));
        }
        if self.tv_rank == 0 {
            return Err(Error::InvalidConfig("tv_rank must be at least 1".into()));
        }
        self.policy().map_err(|e| Error::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "voxid", version, about = "Speaker identification toolkit")]
pub struct Cli {
    /// Flat TOML settings file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract MFCC features from WAV files into VOXF1 files.
    Features(FeaturesArgs),
    /// Train a UBM on pooled feature files.
    TrainUbm(TrainUbmArgs),
    /// MAP-enroll a speaker into a registry.
    Enroll(EnrollArgs),
    /// Train a total-variability model.
    TrainTv(TrainTvArgs),
    /// Extract one i-vector.
    Ivector(IvectorArgs),
    /// Score a test input against every registry entry.
    Identify(IdentifyArgs),
    /// Run a synthetic identification experiment.
    Evaluate(EvaluateArgs),
    /// Validate and summarize a stored artifact.
    Inspect(InspectArgs),
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    pub inputs: Vec<PathBuf>,
    /// Output directory; defaults to each input's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainUbmArgs {
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub components: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    pub speaker_id: String,
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub ubm: PathBuf,
    /// Registry file, created when absent.
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub cluster: u32,
    /// Also store an i-vector extracted with this model.
    #[arg(long)]
    pub tv: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub language: String,
    #[arg(long)]
    pub impostor: bool,
    #[arg(long)]
    pub relevance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainTvArgs {
    pub features: Vec<PathBuf>,
    #[arg(long)]
    pub ubm: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct IvectorArgs {
    pub features: PathBuf,
    #[arg(long)]
    pub ubm: PathBuf,
    #[arg(long)]
    pub tv: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct IdentifyArgs {
    /// VOXF1 features or a stored i-vector.
    pub test: PathBuf,
    #[arg(long)]
    pub registry: PathBuf,
    #[arg(long)]
    pub mode: Option<ScoringMode>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    /// Turns VOXF1 test features into an i-vector for cosine scoring.
    #[arg(long)]
    pub tv: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    pub experiment: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    pub path: PathBuf,
}

impl clap::ValueEnum for ScoringMode {
    fn value_variants<'a>() -> &'a [Self] {
        &[ScoringMode::Llr, ScoringMode::Cosine]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            ScoringMode::Llr => "llr",
            ScoringMode::Cosine => "cosine",
        }))
    }
}

/// Output sinks and global options for one invocation.
pub struct Context<'a> {
    pub config: CliConfig,
    pub verbose: bool,
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Context<'_> {
    fn say(&mut self, text: &str) {
        let _ = self.out.write_all(text.as_bytes());
    }

    fn note(&mut self, text: &str) {
        if self.verbose {
            let _ = writeln!(self.err, "{text}");
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

fn non_empty(paths: &[PathBuf], what: &str) -> Result<()> {
    if paths.is_empty() {
        Err(usage(format!("no {what} given")))
    } else {
        Ok(())
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn load_all_features(paths: &[PathBuf]) -> Result<Vec<FeatureMatrix>> {
    paths.iter().map(store::load_features).collect()
}

fn pooled_stats(features: &[FeatureMatrix], ubm: &Ubm) -> Result<BaumWelchStats> {
    let mut total = BaumWelchStats::zeros(ubm.num_components(), ubm.dim());
    for x in features {
        total = total.merge(&accumulate_stats(x, ubm)?)?;
    }
    Ok(total)
}

pub fn cmd_features(ctx: &mut Context<'_>, args: &FeaturesArgs) -> Result<()> {
    non_empty(&args.inputs, "audio inputs")?;
    let mfcc = ctx.config.mfcc();
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut first_error = None;
    for input in &args.inputs {
        let result = (|| {
            let clip = read_wav(input)?;
            let features = MfccExtractor::new(mfcc.clone(), clip.sample_rate_hz())?.extract(&clip)?;
            let name = input.file_stem().map(|s| s.to_os_string()).unwrap_or_else(|| "features".into());
            let dir = match &args.out_dir {
                Some(d) => d.clone(),
                None => input.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            let mut out = dir.join(name);
            out.set_extension("voxf1");
            if out == *input {
                return Err(usage(format!("output would overwrite input {}", input.display())));
            }
            store::save(&StoredArtifact::Features(features.clone()), &out)?;
            Ok((out, features.len()))
        })();
        match result {
            Ok((out, frames)) => ctx.say(&format!("{} -> {} ({frames} frames)\n", input.display(), out.display())),
            Err(e) => {
                let _ = writeln!(ctx.err, "{}: {e}", input.display());
                first_error.get_or_insert(e);
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}

pub fn cmd_train_ubm(ctx: &mut Context<'_>, args: &TrainUbmArgs) -> Result<()> {
    non_empty(&args.features, "feature files")?;
    let mut gmm = ctx.config.gmm();
    if let Some(c) = args.components {
        gmm.num_components = c;
    }
    if let Some(m) = args.max_iterations {
        gmm.max_iterations = m;
    }
    gmm.validate()?;
    let pooled: BTreeMap<String, FeatureMatrix> =
        load_all_features(&args.features)?.into_iter().enumerate().map(|(i, f)| (format!("{i:08}"), f)).collect();
    let outcome = train_ubm_with_history(&pooled, &gmm)?;
    let mut log = String::new();
    for (i, ll) in outcome.log_likelihoods.iter().enumerate() {
        let _ = writeln!(log, "iteration {i} log-likelihood {ll:?}");
    }
    let _ = writeln!(log, "converged {} reseeded {}", outcome.converged, outcome.reseeded);
    ctx.say(&log);
    store::save(&StoredArtifact::Ubm(Ubm::new(outcome.gmm)), &args.out)
}

pub fn cmd_enroll(ctx: &mut Context<'_>, args: &EnrollArgs) -> Result<()> {
    non_empty(&args.features, "feature files")?;
    let ubm = store::load_ubm(&args.ubm)?;
    let mut registry = if args.registry.exists() {
        let r = store::load_registry(&args.registry)?;
        if *r.ubm() != ubm {
            return Err(Error::ModeMismatch(format!("{} was built on a different UBM", args.registry.display())));
        }
        r
    } else {
        SpeakerRegistry::new(ubm.clone())
    };
    if registry.get(&args.speaker_id).is_some() {
        return Err(Error::DuplicateSpeakerId(args.speaker_id.clone()));
    }
    let features = load_all_features(&args.features)?;
    let stats = pooled_stats(&features, &ubm)?;
    let relevance = args.relevance.unwrap_or(ctx.config.relevance);
    let model = map_adapt(args.speaker_id.clone(), &stats, &ubm, relevance)?;
    let ivector = match &args.tv {
        Some(p) => Some(extract_ivector(&stats, &store::load_tv_model(p)?)?),
        None => None,
    };
    registry.insert(RegistryEntry {
        speaker_id: args.speaker_id.clone(),
        cluster_id: args.cluster,
        model,
        ivector,
        language_tag: args.language.clone(),
        is_impostor: args.impostor,
    })?;
    store::save(&StoredArtifact::Registry(registry), &args.registry)?;
    ctx.say(&format!(
        "enrolled {} in cluster {} ({:.1} frames)\n",
        args.speaker_id,
        args.cluster,
        stats.total_frames()
    ));
    Ok(())
}

pub fn cmd_train_tv(ctx: &mut Context<'_>, args: &TrainTvArgs) -> Result<()> {
    non_empty(&args.features, "feature files")?;
    let ubm = store::load_ubm(&args.ubm)?;
    let rank = args.rank.unwrap_or(ctx.config.tv_rank);
    let iterations = args.iterations.unwrap_or(ctx.config.tv_iterations);
    let init = init_tv(&ubm, rank, ctx.config.seed)?;
    let stats =
        load_all_features(&args.features)?.iter().map(|x| accumulate_stats(x, &ubm)).collect::<Result<Vec<_>>>()?;
    ctx.note(&format!("training rank {rank} on {} utterances", stats.len()));
    let tv = train_tv(&stats, &init, iterations)?;
    store::save(&StoredArtifact::TvModel(tv), &args.out)?;
    ctx.say(&format!("trained rank-{rank} model for {iterations} iterations\n"));
    Ok(())
}

pub fn cmd_ivector(ctx: &mut Context<'_>, args: &IvectorArgs) -> Result<()> {
    let ubm = store::load_ubm(&args.ubm)?;
    let tv = store::load_tv_model(&args.tv)?;
    let stats = accumulate_stats(&store::load_features(&args.features)?, &ubm)?;
    let w = extract_ivector(&stats, &tv)?;
    ctx.say(&format!("i-vector of dimension {} norm {:?}\n", w.len(), w.norm()));
    store::save(&StoredArtifact::IVector(w), &args.out)
}

pub fn cmd_identify(ctx: &mut Context<'_>, args: &IdentifyArgs) -> Result<()> {
    let mode = args.mode.unwrap_or(ctx.config.mode);
    let threshold = args.threshold.unwrap_or(CliConfig { mode, ..ctx.config.clone() }.threshold());
    let policy = DecisionPolicy::new(mode, threshold).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let registry = store::load_registry(&args.registry)?;

    let probe = match (store::sniff_kind(&args.test)?, mode) {
        (ArtifactKind::IVector, _) => Probe::IVector(store::load_ivector(&args.test)?),
        (ArtifactKind::Features, ScoringMode::Cosine) => {
            let tv = args.tv.as_ref().ok_or_else(|| usage("cosine scoring of features needs --tv"))?;
            let stats = accumulate_stats(&store::load_features(&args.test)?, registry.ubm())?;
            Probe::IVector(extract_ivector(&stats, &store::load_tv_model(tv)?)?)
        }
        (ArtifactKind::Features, ScoringMode::Llr) => Probe::Features(store::load_features(&args.test)?),
        (other, _) => {
            return Err(Error::WrongKind { expected: "features or ivector".into(), found: other.to_string() })
        }
    };
    let trial_id = args.test.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "test".into());
    let trial = Trial { trial_id: trial_id.clone(), probe, true_speakers: Vec::new(), description: String::new() };
    let ranked = identify(&trial, &registry, &policy, CohortPolicy::Registry)?;

    let mut table = format!("{:<24} {:>8} {:>14} {:>14}  decision\n", "speaker_id", "cluster", "raw", "score");
    for s in &ranked {
        let _ = writeln!(
            table,
            "{:<24} {:>8} {:>14.6} {:>14.6}  {}",
            s.speaker_id, s.cluster_id, s.raw_score, s.score, s.decision
        );
    }
    ctx.say(&table);

    if let Some(svg) = &args.svg {
        let chart = score_chart_svg(&format!("{trial_id} ({mode})"), &ranked, threshold);
        store::write_atomic(svg, chart.as_bytes())?;
    }
    if args.json.is_some() || args.csv.is_some() {
        let report = EvalReport::assemble(
            trial_id.clone(),
            mode,
            &[threshold],
            vec![TrialResult { trial_id, description: String::new(), true_speakers: Vec::new(), ranked }],
        )?;
        if let Some(csv) = &args.csv {
            store::write_atomic(csv, report.to_csv().as_bytes())?;
        }
        if let Some(json) = &args.json {
            store::save(&StoredArtifact::Report(report), json)?;
        }
    }
    Ok(())
}

/// File-name-safe form of a trial id.
fn slug(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

pub fn cmd_evaluate(ctx: &mut Context<'_>, args: &EvaluateArgs, seed_override: Option<u64>) -> Result<()> {
    let mut exp = ExperimentConfig::from_toml_str(&read_to_string(&args.experiment)?)?;
    if let Some(seed) = seed_override {
        exp.seed = seed;
    }
    let report = run_experiment(&exp)?;
    std::fs::create_dir_all(args.out_dir.join("plots")).map_err(|e| Error::io(&args.out_dir, e))?;
    store::save(&StoredArtifact::Report(report.clone()), args.out_dir.join("report.json"))?;
    store::write_atomic(args.out_dir.join("report.csv"), report.to_csv().as_bytes())?;
    for t in &report.trials {
        let svg = score_chart_svg(&format!("{}: {}", t.trial_id, t.description), &t.ranked, report.threshold);
        store::write_atomic(args.out_dir.join("plots").join(format!("{}.svg", slug(&t.trial_id))), svg.as_bytes())?;
    }
    ctx.say(&summarize_report(&report));
    Ok(())
}

pub fn summarize_report(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment {} ({} scoring, {} trials)", report.name, report.mode, report.trials.len());
    for study in &report.threshold_studies {
        let _ = writeln!(
            s,
            "threshold {:?}: false accepts {} false rejects {}",
            study.threshold, study.false_accepts, study.false_rejects
        );
    }
    let _ = writeln!(s, "top-1 accuracy {:.4}", report.top1_accuracy);
    let _ = writeln!(s, "true speaker above threshold {:.4}", report.true_accept_rate);
    match report.eer {
        Some(eer) => {
            let _ = writeln!(s, "EER {eer:.4}");
        }
        None => s.push_str("EER undefined\n"),
    }
    s
}

pub fn cmd_inspect(ctx: &mut Context<'_>, args: &InspectArgs) -> Result<()> {
    let kind = store::sniff_kind(&args.path)?;
    let text = match store::load(&args.path, kind)? {
        StoredArtifact::Features(f) => format!("features: {} frames of dimension {}\n", f.len(), f.dim()),
        StoredArtifact::Gmm(g) => format!("gmm: {} components of dimension {}\n", g.num_components(), g.dim()),
        StoredArtifact::Ubm(u) => format!("ubm: {} components of dimension {}\n", u.num_components(), u.dim()),
        StoredArtifact::SpeakerModel(m) => format!(
            "speaker_model {}: {} components of dimension {}\n",
            m.speaker_id,
            m.gmm.num_components(),
            m.gmm.dim()
        ),
        StoredArtifact::TvModel(tv) => {
            format!("tv_model: rank {} over {} components of dimension {}\n", tv.rank(), tv.num_components(), tv.dim())
        }
        StoredArtifact::IVector(w) => format!("ivector: dimension {} norm {:?}\n", w.len(), w.norm()),
        StoredArtifact::Registry(r) => {
            let mut s = format!(
                "registry: {} speakers, UBM {}x{}, i-vectors {}\n",
                r.len(),
                r.ubm().num_components(),
                r.ubm().dim(),
                if r.has_ivectors() == Some(true) { "yes" } else { "no" }
            );
            let _ = writeln!(s, "{:<24} {:>8}  {:<12} impostor", "speaker_id", "cluster", "language");
            for e in r.entries() {
                let _ =
                    writeln!(s, "{:<24} {:>8}  {:<12} {}", e.speaker_id, e.cluster_id, e.language_tag, e.is_impostor);
            }
            s
        }
        StoredArtifact::Report(r) => summarize_report(&r),
    };
    ctx.say(&text);
    Ok(())
}

fn dispatch(cli: &Cli, ctx: &mut Context<'_>) -> Result<()> {
    match &cli.command {
        Command::Features(a) => cmd_features(ctx, a),
        Command::TrainUbm(a) => cmd_train_ubm(ctx, a),
        Command::Enroll(a) => cmd_enroll(ctx, a),
        Command::TrainTv(a) => cmd_train_tv(ctx, a),
        Command::Ivector(a) => cmd_ivector(ctx, a),
        Command::Identify(a) => cmd_identify(ctx, a),
        Command::Evaluate(a) => cmd_evaluate(ctx, a, cli.seed),
        Command::Inspect(a) => cmd_inspect(ctx, a),
    }
}

fn build_config(cli: &Cli) -> Result<CliConfig> {
    let mut config = match &cli.config {
        Some(path) => CliConfig::from_toml_str(&read_to_string(path)?)?,
        None => CliConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ErrorCategory::Usage.exit_code() } else { 0 };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "Usage: {rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let result = build_config(&cli).and_then(|config| {
        let mut ctx = Context { config, verbose: cli.verbose, out: &mut *out, err: &mut *err };
        dispatch(&cli, &mut ctx)
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.category().exit_code()
        }
    }
}
