//! MFCC front end: pre-emphasis, framing, Hamming window, DFT, mel filter
//! bank, log, DCT and optional per-utterance mean/variance normalization.

pub mod fft;
pub mod mel;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use fft::{magnitude_spectrum, power_spectrum};
pub use mel::{hz_to_mel, mel_to_hz, MelFilterBank, LOG_ENERGY_FLOOR};

use crate::audio::AudioClip;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MfccConfig {
    pub pre_emphasis_alpha: f64,
    pub frame_length_ms: f64,
    pub frame_shift_ms: f64,
    /// `None` picks the next power of two at or above the frame length.
    pub dft_size: Option<usize>,
    pub num_mel_filters: usize,
    pub num_cepstra: usize,
    pub apply_cmvn: bool,
}

impl Default for MfccConfig {
    fn default() -> Self {
        Self {
            pre_emphasis_alpha: 0.97,
            frame_length_ms: 25.0,
            frame_shift_ms: 10.0,
            dft_size: None,
            num_mel_filters: 26,
            num_cepstra: 13,
            apply_cmvn: true,
        }
    }
}

impl MfccConfig {
    pub fn frame_length_samples(&self, rate: u32) -> usize {
        (self.frame_length_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn frame_shift_samples(&self, rate: u32) -> usize {
        (self.frame_shift_ms * rate as f64 / 1000.0).round() as usize
    }

    pub fn dft_size_for(&self, rate: u32) -> usize {
        self.dft_size.unwrap_or_else(|| self.frame_length_samples(rate).next_power_of_two())
    }

    /// Rate-independent checks.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.pre_emphasis_alpha) {
            return Err(Error::InvalidConfig(format!("pre_emphasis_alpha {} outside [0, 1)", self.pre_emphasis_alpha)));
        }
        if !(self.frame_length_ms > 0.0 && self.frame_shift_ms > 0.0) {
            return Err(Error::InvalidConfig("frame length and shift must be positive".into()));
        }
        if self.frame_shift_ms > self.frame_length_ms {
            return Err(Error::InvalidConfig("frame_shift_ms exceeds frame_length_ms".into()));
        }
        if let Some(n) = self.dft_size {
            if !n.is_power_of_two() {
                return Err(Error::InvalidDftSize(format!("{n} is not a power of two")));
            }
        }
        if self.num_cepstra == 0 || self.num_cepstra > self.num_mel_filters {
            return Err(Error::InvalidConfig(format!(
                "num_cepstra {} must lie in 1..={}",
                self.num_cepstra, self.num_mel_filters
            )));
        }
        Ok(())
    }

    /// Full validation against a concrete sample rate.
    pub fn validate_for_rate(&self, rate: u32) -> Result<()> {
        self.validate()?;
        let frame = self.frame_length_samples(rate);
        if frame < 2 {
            return Err(Error::FrameTooShort(frame));
        }
        if self.frame_shift_samples(rate) == 0 {
            return Err(Error::InvalidConfig("frame shift rounds to zero samples".into()));
        }
        let dft = self.dft_size_for(rate);
        if dft < frame {
            return Err(Error::InvalidDftSize(format!("DFT size {dft} below frame length {frame}")));
        }
        Ok(())
    }
}

/// `y[0] = x[0]`, `y[n] = x[n] - alpha·x[n-1]`.
pub fn pre_emphasize(signal: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(signal.len());
    if let Some(&first) = signal.first() {
        out.push(first);
    }
    out.extend(signal.windows(2).map(|w| w[1] - alpha * w[0]));
    out
}

/// Splits a signal into overlapping frames; the trailing partial frame is
/// dropped.
pub fn frame_signal<'a>(signal: &'a [f64], config: &MfccConfig, rate: u32) -> Result<Vec<&'a [f64]>> {
    let len = config.frame_length_samples(rate);
    let shift = config.frame_shift_samples(rate);
    if len == 0 || shift == 0 {
        return Err(Error::InvalidConfig("frame length or shift rounds to zero samples".into()));
    }
    if signal.len() < len {
        return Err(Error::SignalTooShort { len: signal.len(), needed: len });
    }
    let count = (signal.len() - len) / shift + 1;
    Ok((0..count).map(|i| &signal[i * shift..i * shift + len]).collect())
}

pub fn hamming_window(frame: &[f64]) -> Result<Vec<f64>> {
    let n = frame.len();
    if n < 2 {
        return Err(Error::FrameTooShort(n));
    }
    let denom = (n - 1) as f64;
    Ok(frame.iter().enumerate().map(|(i, &x)| x * (0.54 - 0.46 * (2.0 * PI * i as f64 / denom).cos())).collect())
}

/// Orthonormal DCT-II, truncated to the first `num_cepstra` coefficients.
pub fn dct_cepstra(log_energies: &[f64], num_cepstra: usize) -> Result<Vec<f64>> {
    let j = log_energies.len();
    if num_cepstra > j {
        return Err(Error::DimensionMismatch { expected: j, got: num_cepstra });
    }
    let jf = j as f64;
    Ok((0..num_cepstra)
        .map(|q| {
            let s = if q == 0 { (1.0 / jf).sqrt() } else { (2.0 / jf).sqrt() };
            let sum: f64 =
                log_energies.iter().enumerate().map(|(i, &v)| v * (PI * q as f64 * (i as f64 + 0.5) / jf).cos()).sum();
            s * sum
        })
        .collect())
}

/// Shifts and scales each coordinate to zero mean and unit (population)
/// variance across frames. Coordinates with zero variance are only centered.
pub fn cmvn(features: &FeatureMatrix) -> FeatureMatrix {
    let dim = features.dim();
    let n = features.len();
    if n == 0 {
        return features.clone();
    }
    let mut mean = vec![0.0; dim];
    for f in features.frames() {
        for (m, v) in mean.iter_mut().zip(f) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; dim];
    for f in features.frames() {
        for d in 0..dim {
            var[d] += (f[d] - mean[d]).powi(2);
        }
    }
    let scale: Vec<f64> = var
        .iter()
        .map(|v| {
            let sd = (v / n as f64).sqrt();
            if sd > 0.0 {
                1.0 / sd
            } else {
                1.0
            }
        })
        .collect();
    let data =
        features.frames().flat_map(|f| (0..dim).map(|d| (f[d] - mean[d]) * scale[d]).collect::<Vec<_>>()).collect();
    FeatureMatrix::from_flat(dim, data).expect("CMVN preserves shape and finiteness")
}

/// Stateless extractor holding the filter bank for one sample rate.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: MfccConfig,
    bank: MelFilterBank,
    rate: u32,
}

impl MfccExtractor {
    pub fn new(config: MfccConfig, rate: u32) -> Result<Self> {
        config.validate_for_rate(rate)?;
        let bank = MelFilterBank::new(config.num_mel_filters, config.dft_size_for(rate), rate)?;
        Ok(Self { config, bank, rate })
    }

    pub fn filter_bank(&self) -> &MelFilterBank {
        &self.bank
    }

    /// Cepstra of one raw (already pre-emphasized) frame.
    pub fn frame_cepstra(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let windowed = hamming_window(frame)?;
        let mags = magnitude_spectrum(&windowed, self.bank.dft_size())?;
        let log_energies = self.bank.apply(&mags)?;
        dct_cepstra(&log_energies, self.config.num_cepstra)
    }

    pub fn extract(&self, clip: &AudioClip) -> Result<FeatureMatrix> {
        if clip.sample_rate_hz() != self.rate {
            return Err(Error::UnsupportedSampleRate(clip.sample_rate_hz()));
        }
        let emphasized = pre_emphasize(clip.samples(), self.config.pre_emphasis_alpha);
        let frames = frame_signal(&emphasized, &self.config, self.rate)?;
        let mut data = Vec::with_capacity(frames.len() * self.config.num_cepstra);
        for frame in frames {
            data.extend(self.frame_cepstra(frame)?);
        }
        let raw = FeatureMatrix::from_flat(self.config.num_cepstra, data)?;
        Ok(if self.config.apply_cmvn { cmvn(&raw) } else { raw })
    }
}

/// Runs the whole front end on one clip.
pub fn extract_mfcc(clip: &AudioClip, config: &MfccConfig) -> Result<FeatureMatrix> {
    MfccExtractor::new(config.clone(), clip.sample_rate_hz())?.extract(clip)
}
