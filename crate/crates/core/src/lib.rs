//! Speaker identification toolkit.
//!
//! The pipeline runs from PCM audio to identification decisions:
//!
//! - [`audio`]: PCM-16 WAV ingestion at 4, 8 or 16 kHz.
//! - [`dsp`]: MFCC front end (pre-emphasis, Hamming frames, FFT, mel bank, DCT, CMVN).
//! - [`gmm`]: diagonal Gaussian mixtures with EM training.
//! - [`speaker`]: universal background model, Baum-Welch statistics, MAP-adapted
//!   speaker models and supervectors.
//! - [`ivector`]: total-variability model `M = m + Tw` and i-vector extraction.
//! - [`scoring`]: log-likelihood ratios with cohort z-normalization, cosine and
//!   Bhattacharyya scoring, threshold decisions.
//! - [`eval`]: speaker registry, identification trials, EER/DET and synthetic
//!   two-stage experiments.
//! - [`store`]: versioned JSON artifacts and `VOXF1` feature files.
//! - [`cli`]: the command implementations behind the `voxid` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod cli;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod features;
pub mod gmm;
pub mod ivector;
mod linalg;
pub mod scoring;
pub mod speaker;
pub mod store;

pub use audio::{read_wav, write_wav, AudioClip};
pub use dsp::{extract_mfcc, MfccConfig};
pub use error::{Error, ErrorCategory, Result};
pub use features::FeatureMatrix;
pub use gmm::{em_fit, DiagonalGmm, GmmTrainingConfig};
pub use ivector::{extract_ivector, init_tv, train_tv, IVector, TotalVariabilityModel};
pub use scoring::{CohortStats, Decision, DecisionPolicy, ScoringMode};
pub use speaker::{
    accumulate_stats, build_supervector, map_adapt, train_ubm, BaumWelchStats, SpeakerModel, Supervector, Ubm,
};
