//! Iterative radix-2 decimation-in-time FFT.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// In-place forward DFT, `X[m] = Σ x[n]·e^{-i2πmn/N}`. `buf.len()` must be a
/// power of two.
pub fn fft_in_place(buf: &mut [Complex64]) -> Result<()> {
    let n = buf.len();
    if !n.is_power_of_two() {
        return Err(Error::InvalidDftSize(format!("{n} is not a power of two")));
    }
    if n == 1 {
        return Ok(());
    }

    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if i < j {
            buf.swap(i, j);
        }
    }

    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = -2.0 * PI / len as f64;
        for start in (0..n).step_by(len) {
            for k in 0..half {
                // direct twiddles; recurrences drift at large N
                let w = Complex64::from_polar(1.0, step * k as f64);
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
    Ok(())
}

fn padded(frame: &[f64], dft_size: usize) -> Result<Vec<Complex64>> {
    if dft_size == 0 || !dft_size.is_power_of_two() {
        return Err(Error::InvalidDftSize(format!("{dft_size} is not a power of two")));
    }
    if frame.len() > dft_size {
        return Err(Error::InvalidDftSize(format!("frame of {} samples exceeds DFT size {dft_size}", frame.len())));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); dft_size];
    for (b, &x) in buf.iter_mut().zip(frame) {
        b.re = x;
    }
    Ok(buf)
}

/// Full two-sided spectrum of a zero-padded real frame.
pub fn spectrum(frame: &[f64], dft_size: usize) -> Result<Vec<Complex64>> {
    let mut buf = padded(frame, dft_size)?;
    fft_in_place(&mut buf)?;
    Ok(buf)
}

/// Magnitudes of bins `0..=dft_size/2`.
pub fn magnitude_spectrum(frame: &[f64], dft_size: usize) -> Result<Vec<f64>> {
    let full = spectrum(frame, dft_size)?;
    Ok(full[..=dft_size / 2].iter().map(|c| c.norm()).collect())
}

/// Squared magnitudes of bins `0..=dft_size/2`.
pub fn power_spectrum(frame: &[f64], dft_size: usize) -> Result<Vec<f64>> {
    let full = spectrum(frame, dft_size)?;
    Ok(full[..=dft_size / 2].iter().map(|c| c.norm_sqr()).collect())
}
