//! Identification against a registry, error accounting and synthetic
//! experiments.

pub mod experiment;
pub mod metrics;
pub mod plot;
pub mod registry;
pub mod report;

pub use experiment::{run_experiment, ClusterLayout, ExperimentConfig};
pub use metrics::{compute_eer, det_curve, det_points, DetPoint};
pub use plot::score_chart_svg;
pub use registry::{identify, CohortPolicy, Probe, RegistryEntry, ScoredSpeaker, SpeakerRegistry, Trial};
pub use report::{EvalReport, ThresholdSummary, TrialResult};
