//! PCM WAV ingestion.
//!
//! Only RIFF/WAVE files carrying 16-bit little-endian PCM are accepted. Any
//! number of channels is allowed; channels are averaged to mono before the
//! integer samples are scaled by `1/32768`. Chunks other than `fmt ` and
//! `data` are skipped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Sample rates the front end accepts. Nothing is resampled.
pub const SUPPORTED_RATES: [u32; 3] = [4000, 8000, 16000];

const PCM_SCALE: f64 = 32768.0;
const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Mono signal with amplitudes in `[-1, 1]` at one of [`SUPPORTED_RATES`].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if !SUPPORTED_RATES.contains(&sample_rate_hz) {
            return Err(Error::UnsupportedSampleRate(sample_rate_hz));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if let Some(bad) = samples.iter().find(|s| !(-1.0..=1.0).contains(*s)) {
            return Err(Error::InvalidConfig(format!("amplitude {bad} outside [-1, 1]")));
        }
        Ok(Self { samples, sample_rate_hz })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Reads a PCM-16 WAV file into an [`AudioClip`].
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes)
}

struct Format {
    channels: u16,
    sample_rate: u32,
}

/// Parses an in-memory RIFF/WAVE image.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::MalformedContainer("missing RIFF/WAVE header".into()));
    }

    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).filter(|&end| end <= bytes.len()).ok_or_else(|| {
            Error::MalformedContainer(format!(
                "chunk {:?} declares {size} bytes past end of file",
                String::from_utf8_lossy(id)
            ))
        })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => format = Some(parse_fmt(body)?),
            b"data" => data = Some(body),
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let format = format.ok_or_else(|| Error::MalformedContainer("no fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedContainer("no data chunk".into()))?;

    if !SUPPORTED_RATES.contains(&format.sample_rate) {
        return Err(Error::UnsupportedSampleRate(format.sample_rate));
    }
    let block_align = 2 * format.channels as usize;
    if data.len() % block_align != 0 {
        return Err(Error::MalformedContainer(format!(
            "data chunk of {} bytes is not a whole number of {}-byte frames",
            data.len(),
            block_align
        )));
    }
    let frame_count = data.len() / block_align;
    if frame_count == 0 {
        return Err(Error::EmptyAudio);
    }

    let channels = format.channels as usize;
    let samples: Vec<f64> = data
        .chunks_exact(block_align)
        .map(|frame| {
            let sum: f64 = frame.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]]) as f64).sum();
            sum / channels as f64 / PCM_SCALE
        })
        .collect();
    debug_assert_eq!(samples.len(), frame_count);

    AudioClip::new(samples, format.sample_rate)
}

fn parse_fmt(body: &[u8]) -> Result<Format> {
    if body.len() < 16 {
        return Err(Error::MalformedContainer("fmt chunk shorter than 16 bytes".into()));
    }
    let u16_at = |i: usize| u16::from_le_bytes([body[i], body[i + 1]]);
    let mut tag = u16_at(0);
    let channels = u16_at(2);
    let sample_rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
    let bits = u16_at(14);

    if tag == FORMAT_EXTENSIBLE && body.len() >= 26 {
        // first two bytes of the subformat GUID carry the real tag
        tag = u16_at(24);
    }
    if tag != FORMAT_PCM {
        return Err(Error::UnsupportedEncoding(format!("format tag {tag:#06x}, expected PCM")));
    }
    if bits != 16 {
        return Err(Error::UnsupportedEncoding(format!("{bits}-bit samples, expected 16-bit")));
    }
    if channels == 0 {
        return Err(Error::MalformedContainer("zero channels".into()));
    }
    Ok(Format { channels, sample_rate })
}

/// Serializes a clip as mono PCM-16. Amplitudes are rounded to the nearest
/// step and clamped to `[-32768, 32767]`.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate_hz * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let q = (s * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip)).map_err(|e| Error::io(path, e))
}
