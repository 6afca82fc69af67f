//! Writes a tone to a PCM-16 WAV file, reads it back and reports the
//! worst quantization error.

use std::f64::consts::TAU;

use voxid::{read_wav, write_wav, AudioClip};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rate = 8000;
    let samples: Vec<f64> = (0..rate).map(|i| 0.5 * (TAU * 440.0 * i as f64 / rate as f64).sin()).collect();
    let clip = AudioClip::new(samples, rate)?;

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("tone.wav");
    write_wav(&clip, &path)?;
    let back = read_wav(&path)?;

    let worst = clip.samples().iter().zip(back.samples()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{} samples at {} Hz, {:.3} s", back.samples().len(), back.sample_rate_hz(), back.duration_secs());
    println!("max round-trip error {worst:.2e} (step {:.2e})", 1.0 / 32768.0);
    Ok(())
}
