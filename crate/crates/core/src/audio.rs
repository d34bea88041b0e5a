//! Audio I/O and preprocessing.
//!
//! Everything here is a pure function of its inputs. Waveforms are mono `f32`
//! sample buffers tagged with their sample rate.

use std::fs::File;
use std::io::{BufReader, Cursor, Read, Seek, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Canonical training sample rate.
pub const SAMPLE_RATE: u32 = 16_000;
/// Canonical training length: one second at [`SAMPLE_RATE`].
pub const CLIP_LENGTH: usize = 16_000;
/// Default silence threshold for [`trim_silence`].
pub const DEFAULT_TRIM_DB: f64 = -60.0;

const TRIM_WINDOW: usize = 64;
const RESAMPLE_TAPS: usize = 64;
const KAISER_BETA: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
        }
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> f32 {
        self.samples.iter().fold(0.0f32, |m, s| m.max(s.abs()))
    }

    pub fn scaled(&self, gain: f32) -> Self {
        Self::new(
            self.samples.iter().map(|s| s * gain).collect(),
            self.sample_rate,
        )
    }

    /// Round every sample onto the 16-bit PCM grid, as a write/load cycle would.
    pub fn quantized(&self) -> Self {
        Self::new(
            self.samples
                .iter()
                .map(|&s| f32::from(to_i16(s)) / 32768.0)
                .collect(),
            self.sample_rate,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudioFileMeta {
    pub path: String,
    pub original_rate: u32,
    pub original_length: usize,
    pub channels: u16,
}

/// Result of [`pad_to_length`]; `truncated` counts samples dropped from the tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Padded {
    pub waveform: Waveform,
    pub truncated: usize,
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<(Waveform, AudioFileMeta)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    decode_wav(BufReader::new(file), &path.display().to_string())
}

/// Decode a RIFF/WAVE stream (16-bit PCM or 32-bit float), mixing down to mono.
pub fn decode_wav<R: Read>(reader: R, name: &str) -> Result<(Waveform, AudioFileMeta)> {
    let mut wav = hound::WavReader::new(reader).map_err(|e| map_hound(e, name))?;
    let spec = wav.spec();
    if spec.channels == 0 {
        return Err(Error::CorruptFile(format!("{name}: zero channels")));
    }
    let interleaved: Vec<f32> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => wav
            .samples::<i16>()
            .map(|s| s.map(|v| f32::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(e, name))?,
        (hound::SampleFormat::Float, 32) => wav
            .samples::<f32>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| map_hound(e, name))?,
        (fmt, bits) => {
            return Err(Error::UnsupportedFormat(format!(
                "{name}: {bits}-bit {fmt:?} samples"
            )))
        }
    };
    let channels = usize::from(spec.channels);
    if interleaved.len() % channels != 0 {
        return Err(Error::CorruptFile(format!("{name}: partial frame")));
    }
    let samples: Vec<f32> = if channels == 1 {
        interleaved
    } else {
        interleaved
            .chunks_exact(channels)
            .map(|frame| frame.iter().sum::<f32>() / channels as f32)
            .collect()
    };
    let meta = AudioFileMeta {
        path: name.to_string(),
        original_rate: spec.sample_rate,
        original_length: samples.len(),
        channels: spec.channels,
    };
    Ok((Waveform::new(samples, spec.sample_rate), meta))
}

fn map_hound(e: hound::Error, name: &str) -> Error {
    match e {
        hound::Error::Unsupported => Error::UnsupportedFormat(name.to_string()),
        hound::Error::TooWide => Error::UnsupportedFormat(format!("{name}: sample width")),
        hound::Error::FormatError(msg) => Error::CorruptFile(format!("{name}: {msg}")),
        hound::Error::IoError(io) => Error::CorruptFile(format!("{name}: {io}")),
        other => Error::CorruptFile(format!("{name}: {other}")),
    }
}

fn to_i16(s: f32) -> i16 {
    (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Write 16-bit PCM mono. Returns the number of samples that had to be clipped.
pub fn write_wav(w: &Waveform, path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    let (bytes, clipped) = encode_wav(w);
    file.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    Ok(clipped)
}

/// Encode to an in-memory 16-bit PCM mono WAV.
pub fn encode_wav(w: &Waveform) -> (Vec<u8>, usize) {
    let mut cursor = Cursor::new(Vec::with_capacity(44 + 2 * w.len()));
    let clipped = write_pcm16(w, &mut cursor).expect("in-memory wav write cannot fail");
    (cursor.into_inner(), clipped)
}

fn write_pcm16<W: Write + Seek>(w: &Waveform, sink: W) -> hound::Result<usize> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: w.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::new(sink, spec)?;
    let mut clipped = 0;
    for &s in &w.samples {
        if !(-1.0..=1.0).contains(&s) {
            clipped += 1;
        }
        writer.write_sample(to_i16(s))?;
    }
    writer.finalize()?;
    if clipped > 0 {
        warn!("clipped {clipped} samples outside [-1, 1]");
    }
    Ok(clipped)
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Band-limited resampling with a Kaiser-windowed sinc kernel.
///
/// The kernel spans `RESAMPLE_TAPS` zero crossings of the (possibly
/// narrowed) sinc, so the filter stays 64 taps wide at the lower of the two
/// rates.
pub fn resample(w: &Waveform, target_rate: u32) -> Waveform {
    assert!(target_rate > 0, "target rate must be positive");
    if w.sample_rate == target_rate || w.is_empty() {
        return Waveform::new(w.samples.clone(), target_rate);
    }
    let ratio = target_rate as f64 / w.sample_rate as f64;
    let out_len = (w.len() as f64 * ratio).round() as usize;
    let cutoff = ratio.min(1.0);
    let half_width = (RESAMPLE_TAPS / 2) as f64 / cutoff;
    let i0_beta = bessel_i0(KAISER_BETA);
    let x: Vec<f64> = w.samples.iter().map(|&s| f64::from(s)).collect();

    let samples = (0..out_len)
        .map(|m| {
            let t = m as f64 / ratio;
            let lo = (t - half_width).ceil().max(0.0) as usize;
            let hi = ((t + half_width).floor() as usize).min(x.len() - 1);
            let mut acc = 0.0;
            for (k, &xk) in x.iter().enumerate().take(hi + 1).skip(lo) {
                let tau = t - k as f64;
                let r = tau / half_width;
                let window = bessel_i0(KAISER_BETA * (1.0 - r * r).max(0.0).sqrt()) / i0_beta;
                let arg = cutoff * tau;
                let sinc = if arg.abs() < 1e-12 {
                    1.0
                } else {
                    (std::f64::consts::PI * arg).sin() / (std::f64::consts::PI * arg)
                };
                acc += xk * cutoff * sinc * window;
            }
            acc as f32
        })
        .collect();
    Waveform::new(samples, target_rate)
}

/// Strip leading and trailing silence.
///
/// A sliding RMS window of 64 samples (clamped to the signal length) marks
/// the first and last loud window; the cut lands on the first/last sample in
/// those windows whose magnitude reaches the threshold. Interior silence is
/// kept.
pub fn trim_silence(w: &Waveform, threshold_db: f64) -> Result<Waveform> {
    if w.is_empty() {
        return Err(Error::NoSignal);
    }
    let threshold = 10f64.powf(threshold_db / 20.0);
    let win = TRIM_WINDOW.min(w.len());
    let sq: Vec<f64> = w.samples.iter().map(|&s| f64::from(s).powi(2)).collect();

    let mut prefix = Vec::with_capacity(sq.len() + 1);
    prefix.push(0.0);
    for v in &sq {
        prefix.push(prefix.last().unwrap() + v);
    }
    let loud = |start: usize| {
        let energy = (prefix[start + win] - prefix[start]).max(0.0);
        (energy / win as f64).sqrt() >= threshold
    };
    let positions = w.len() - win + 1;
    let first = (0..positions).find(|&i| loud(i)).ok_or(Error::NoSignal)?;
    let last = (0..positions).rev().find(|&i| loud(i)).unwrap();

    let above = |i: usize| f64::from(w.samples[i].abs()) >= threshold;
    let start = (first..first + win).find(|&i| above(i)).unwrap_or(first);
    let end = (last..last + win)
        .rev()
        .find(|&i| above(i))
        .unwrap_or(last + win - 1);
    if end < start {
        return Err(Error::NoSignal);
    }
    Ok(Waveform::new(w.samples[start..=end].to_vec(), w.sample_rate))
}

/// Zero-pad the tail up to `n`, or truncate the tail down to `n`.
pub fn pad_to_length(w: &Waveform, n: usize) -> Padded {
    assert!(n > 0, "target length must be positive");
    let mut samples = w.samples.clone();
    let truncated = samples.len().saturating_sub(n);
    if truncated > 0 {
        warn!("truncating {truncated} trailing samples to fit {n}");
    }
    samples.resize(n, 0.0);
    Padded {
        waveform: Waveform::new(samples, w.sample_rate),
        truncated,
    }
}
