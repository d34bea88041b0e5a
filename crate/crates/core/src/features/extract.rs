//! Monotone DSP proxies for the seven timbral descriptors.
//!
//! Each proxy is a deterministic function of the waveform that moves in the
//! same direction as the perceptual attribute it stands in for. Absolute
//! scale is irrelevant downstream because every value passes through the
//! dataset min-max normalizer.

use super::envelope::{envelope_follow, DEFAULT_ATTACK_MS, DEFAULT_RELEASE_MS};
use super::TimbralVector;
use crate::audio::Waveform;
use crate::dsp::{centroid, Frames};
use crate::error::{Error, Result};

/// Peak level below which a waveform counts as silent (-60 dBFS).
pub const SILENCE_PEAK: f32 = 1e-3;

const BRIGHTNESS_KNEE_HZ: f64 = 1500.0;
const ONSET_MS: f64 = 20.0;
const SUSTAIN_DB: f64 = -30.0;
const ROUGHNESS_PEAKS: usize = 20;
const ROUGHNESS_FLOOR_DB: f64 = -30.0;
/// Longer frames for roughness so partials 8 Hz apart resolve.
const ROUGHNESS_FRAME: usize = 4096;

/// Critical-band edges in Hz (24 bands).
const BARK_EDGES: [f64; 25] = [
    0.0, 100.0, 200.0, 300.0, 400.0, 510.0, 630.0, 770.0, 920.0, 1080.0, 1270.0, 1480.0, 1720.0,
    2000.0, 2320.0, 2700.0, 3150.0, 3700.0, 4400.0, 5300.0, 6400.0, 7700.0, 9500.0, 12000.0,
    15500.0,
];

fn as_f64(w: &Waveform) -> Vec<f64> {
    w.samples.iter().map(|&s| f64::from(s)).collect()
}

/// Mean-magnitude spectral centroid in Hz (1024-sample Hann frames, hop 512).
pub fn spectral_centroid(w: &Waveform) -> f64 {
    let frames = Frames::analyze(&as_f64(w), f64::from(w.sample_rate));
    centroid(&frames.mean_magnitude(), frames.bin_hz(1))
}

fn knee(c: f64) -> f64 {
    c / (c + BRIGHTNESS_KNEE_HZ)
}

fn band_ratio(power: &[f64], num: std::ops::Range<usize>, den: std::ops::Range<usize>) -> f64 {
    let total: f64 = power[den].iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    power[num].iter().sum::<f64>() / total
}

/// Raw (unnormalized) descriptor vector.
pub fn extract_timbral(w: &Waveform) -> Result<TimbralVector> {
    if w.is_empty() || w.peak() < SILENCE_PEAK {
        return Err(Error::SilentInput);
    }
    let x = as_f64(w);
    let sr = f64::from(w.sample_rate);
    let frames = Frames::analyze(&x, sr);
    let magnitude = frames.mean_magnitude();
    let power = frames.mean_power();
    let all = 0..frames.bins();

    let brightness = knee(centroid(&magnitude, frames.bin_hz(1)));
    let depth = band_ratio(&power, frames.band(20.0, 200.0), all.clone());
    let warmth = band_ratio(&power, frames.band(100.0, 350.0), frames.band(50.0, 2000.0));

    let boom_band = frames.band(20.0, 120.0);
    let sustained = (0..frames.power.len())
        .filter(|&f| frames.band_level_db(f, boom_band.clone()) > SUSTAIN_DB)
        .count();
    let boominess = band_ratio(&power, boom_band, all) * sustained as f64 / frames.power.len() as f64;

    Ok(TimbralVector {
        hardness: hardness(w, &x, sr),
        depth,
        brightness,
        roughness: {
            let long = Frames::with_window(&x, sr, ROUGHNESS_FRAME, ROUGHNESS_FRAME / 4, 2 * ROUGHNESS_FRAME);
            roughness(&long, &long.mean_magnitude())
        },
        boominess,
        warmth,
        sharpness: sharpness(&frames, &power),
        normalized: false,
    })
}

/// Steepest envelope rise in the onset window (per second) scaled by the
/// knee-mapped centroid of the same window.
fn hardness(w: &Waveform, x: &[f64], sr: f64) -> f64 {
    let onset = ((ONSET_MS * 1e-3 * sr).round() as usize).min(x.len()).max(1);
    let env = envelope_follow(w, DEFAULT_ATTACK_MS, DEFAULT_RELEASE_MS);
    let mut prev = 0.0;
    let mut slope = 0.0f64;
    for &e in &env.values[..onset] {
        slope = slope.max((e - prev) * sr);
        prev = e;
    }
    let frames = Frames::with_window(&x[..onset], sr, onset, onset, 1024.max(onset.next_power_of_two()));
    slope * knee(centroid(&frames.mean_magnitude(), frames.bin_hz(1)))
}

/// Weighted critical-band centroid of compressed band loudness, with the
/// usual upward weighting above band 14.
fn sharpness(frames: &Frames, power: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for z in 1..BARK_EDGES.len() {
        let band = frames.band(BARK_EDGES[z - 1], BARK_EDGES[z]);
        let energy: f64 = power[band].iter().sum();
        if energy <= 0.0 {
            continue;
        }
        let loudness = energy.powf(0.23);
        let zf = z as f64;
        let weight = if z <= 14 { 1.0 } else { (0.17 * (zf - 14.0)).exp() };
        num += zf * weight * loudness;
        den += loudness;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Pairwise Vassilakis roughness over the strongest spectral peaks.
fn roughness(frames: &Frames, magnitude: &[f64]) -> f64 {
    let max = magnitude.iter().cloned().fold(0.0, f64::max);
    if max <= 0.0 {
        return 0.0;
    }
    let floor = max * 10f64.powf(ROUGHNESS_FLOOR_DB / 20.0);
    let mut peaks: Vec<(f64, f64)> = (1..magnitude.len() - 1)
        .filter(|&k| {
            magnitude[k] >= floor && magnitude[k] > magnitude[k - 1] && magnitude[k] >= magnitude[k + 1]
        })
        .map(|k| {
            let (a, b, c) = (magnitude[k - 1], magnitude[k], magnitude[k + 1]);
            let denom = a - 2.0 * b + c;
            let offset = if denom.abs() > 1e-30 { 0.5 * (a - c) / denom } else { 0.0 };
            (frames.bin_hz(1) * (k as f64 + offset.clamp(-0.5, 0.5)), b)
        })
        .collect();
    peaks.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.total_cmp(&q.0)));
    peaks.truncate(ROUGHNESS_PEAKS);

    let scale = 2.0 / (frames.fft_len as f64 / 2.0);
    let mut total = 0.0;
    for (i, &(fi, ai)) in peaks.iter().enumerate() {
        for &(fj, aj) in &peaks[i + 1..] {
            let (ai, aj) = (ai * scale, aj * scale);
            let (f_lo, f_hi) = if fi < fj { (fi, fj) } else { (fj, fi) };
            let a_min = ai.min(aj);
            let s = 0.24 / (0.0207 * f_lo + 18.96);
            let d = f_hi - f_lo;
            total += (ai * aj).powf(0.1)
                * 0.5
                * (2.0 * a_min / (ai + aj)).powf(3.11)
                * ((-3.5 * s * d).exp() - (-5.75 * s * d).exp());
        }
    }
    total
}
