//! Shared spectral analysis helpers used by the feature extractors.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const FRAME: usize = 1024;
pub const HOP: usize = 512;

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Short-time analysis of a signal: per-frame one-sided power spectra.
///
/// Signals shorter than one frame are zero-padded to a single frame.
pub struct Frames {
    pub power: Vec<Vec<f64>>,
    pub fft_len: usize,
    pub sample_rate: f64,
    window_energy: f64,
}

impl Frames {
    pub fn analyze(x: &[f64], sample_rate: f64) -> Self {
        Self::with_window(x, sample_rate, FRAME, HOP, FRAME)
    }

    /// `win` samples per frame, Hann-windowed, zero-padded to `fft_len`.
    pub fn with_window(x: &[f64], sample_rate: f64, win: usize, hop: usize, fft_len: usize) -> Self {
        let window = hann(win);
        let fft = FftPlanner::new().plan_fft_forward(fft_len);
        let count = if x.len() <= win {
            1
        } else {
            (x.len() - win) / hop + 1
        };
        let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
        let power = (0..count)
            .map(|f| {
                let start = f * hop;
                buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                for (i, w) in window.iter().enumerate() {
                    if let Some(&v) = x.get(start + i) {
                        buf[i] = Complex::new(v * w, 0.0);
                    }
                }
                fft.process(&mut buf);
                buf[..=fft_len / 2].iter().map(|c| c.norm_sqr()).collect()
            })
            .collect();
        Self {
            power,
            fft_len,
            sample_rate,
            window_energy: window.iter().map(|w| w * w).sum(),
        }
    }

    pub fn bins(&self) -> usize {
        self.fft_len / 2 + 1
    }

    pub fn bin_hz(&self, k: usize) -> f64 {
        k as f64 * self.sample_rate / self.fft_len as f64
    }

    /// Mean over frames of the magnitude spectrum.
    pub fn mean_magnitude(&self) -> Vec<f64> {
        self.mean_of(|p| p.sqrt())
    }

    /// Mean over frames of the power spectrum.
    pub fn mean_power(&self) -> Vec<f64> {
        self.mean_of(|p| p)
    }

    fn mean_of(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.bins()];
        for frame in &self.power {
            for (a, &p) in acc.iter_mut().zip(frame) {
                *a += f(p);
            }
        }
        let n = self.power.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Bins whose centre frequency lies in `[lo, hi)` Hz.
    pub fn band(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let first = (0..self.bins()).find(|&k| self.bin_hz(k) >= lo).unwrap_or(self.bins());
        let end = (0..self.bins()).find(|&k| self.bin_hz(k) >= hi).unwrap_or(self.bins());
        first..end.max(first)
    }

    /// Mean-square level (dBFS, full-scale sine = -3 dB) of one frame's
    /// content inside a bin range.
    pub fn band_level_db(&self, frame: usize, bins: std::ops::Range<usize>) -> f64 {
        let energy: f64 = self.power[frame][bins].iter().sum();
        let mean_square = 2.0 * energy / (self.fft_len as f64 * self.window_energy);
        10.0 * mean_square.max(1e-30).log10()
    }
}

/// Centroid (Hz) of a one-sided magnitude spectrum; 0 when the spectrum is empty.
pub fn centroid(magnitude: &[f64], bin_hz: f64) -> f64 {
    let total: f64 = magnitude.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    magnitude
        .iter()
        .enumerate()
        .map(|(k, m)| k as f64 * bin_hz * m)
        .sum::<f64>()
        / total
}
