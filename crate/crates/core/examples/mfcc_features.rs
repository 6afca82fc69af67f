//! Extracts MFCCs from a synthetic vowel at each supported sample rate.

use std::f64::consts::TAU;

use voxid::dsp::MfccExtractor;
use voxid::{AudioClip, MfccConfig};

fn vowel(rate: u32, seconds: f64) -> Vec<f64> {
    let n = (rate as f64 * seconds) as usize;
    (0..n)
        .map(|i| {
            let t = i as f64 / rate as f64;
            (1..12).map(|h| (TAU * 120.0 * h as f64 * t).sin() / h as f64).sum::<f64>() * 0.2
        })
        .collect()
}

fn main() -> voxid::Result<()> {
    let config = MfccConfig::default();
    for rate in [4000, 8000, 16000] {
        let extractor = MfccExtractor::new(config.clone(), rate)?;
        let clip = AudioClip::new(vowel(rate, 1.0), rate)?;
        let features = extractor.extract(&clip)?;
        let centers = extractor.filter_bank().centers_hz();
        println!(
            "{rate:>5} Hz: {} frames x {} coefficients, DFT {}, mel centers {:.0}..{:.0} Hz",
            features.len(),
            features.dim(),
            config.dft_size_for(rate),
            centers[0],
            centers[centers.len() - 1],
        );
    }

    // without CMVN the first coefficient tracks frame energy
    let raw = MfccConfig { apply_cmvn: false, ..config };
    let features = voxid::extract_mfcc(&AudioClip::new(vowel(8000, 0.5), 8000)?, &raw)?;
    let c0: Vec<String> = features.frames().take(5).map(|f| format!("{:.2}", f[0])).collect();
    println!("c0 of the first frames: {}", c0.join(" "));
    Ok(())
}
