//! Triangular mel filter bank.

use crate::error::{Error, Result};

/// Energies below this are clamped before the log so silent frames stay finite.
pub const LOG_ENERGY_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangles whose peaks are equally spaced on the mel scale between 0 Hz and
/// the Nyquist frequency. Weights are dense rows over the `dft_size/2 + 1`
/// one-sided bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterBank {
    sample_rate_hz: u32,
    dft_size: usize,
    centers_hz: Vec<f64>,
    weights: Vec<Vec<f64>>,
}

impl MelFilterBank {
    pub fn new(num_filters: usize, dft_size: usize, sample_rate_hz: u32) -> Result<Self> {
        if num_filters == 0 {
            return Err(Error::InvalidConfig("filter bank needs at least one filter".into()));
        }
        if dft_size < 2 || !dft_size.is_power_of_two() {
            return Err(Error::InvalidDftSize(format!("{dft_size} is not a power of two ≥ 2")));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> =
            (0..num_filters + 2).map(|i| mel_to_hz(top * i as f64 / (num_filters + 1) as f64)).collect();
        let bins = dft_size / 2 + 1;
        let bin_hz = sample_rate_hz as f64 / dft_size as f64;

        let mut weights = Vec::with_capacity(num_filters);
        for j in 0..num_filters {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            let row: Vec<f64> = (0..bins)
                .map(|m| {
                    let f = m as f64 * bin_hz;
                    if f > lo && f < mid {
                        (f - lo) / (mid - lo)
                    } else if f >= mid && f < hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    }
                })
                .collect();
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "mel filter {j} covers no DFT bin; use fewer filters or a larger DFT"
                )));
            }
            weights.push(row);
        }

        Ok(Self { sample_rate_hz, dft_size, centers_hz: edges[1..=num_filters].to_vec(), weights })
    }

    pub fn num_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn dft_size(&self) -> usize {
        self.dft_size
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// Log filter energies of a one-sided magnitude spectrum. Each bin's
    /// magnitude is squared before weighting.
    pub fn apply(&self, magnitudes: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.dft_size / 2 + 1, magnitudes.len())?;
        Ok(self
            .weights
            .iter()
            .map(|row| {
                let energy: f64 = row.iter().zip(magnitudes).map(|(w, m)| w * m * m).sum();
                energy.max(LOG_ENERGY_FLOOR).ln()
            })
            .collect())
    }
}
