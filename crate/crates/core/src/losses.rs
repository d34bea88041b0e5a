//! Training objectives: L1 waveform reconstruction, STFT magnitude L1, and
//! their weighted sum (optionally band-limited to the high bins).
//!
//! Every loss comes with its gradient with respect to the prediction so the
//! network can be trained without an autodiff framework.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossMode {
    /// L1 on samples only.
    Wave,
    /// L1 plus STFT magnitude loss restricted to bins at or above the cut.
    High,
    /// L1 plus full-band STFT magnitude loss.
    Full,
}

impl fmt::Display for LossMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossMode::Wave => "wave",
            LossMode::High => "high",
            LossMode::Full => "full",
        })
    }
}

impl FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wave" => Ok(LossMode::Wave),
            "high" => Ok(LossMode::High),
            "full" => Ok(LossMode::Full),
            other => Err(format!("unknown loss mode `{other}` (expected wave, high or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub mode: LossMode,
    pub lambda: f64,
    pub stft_frame: usize,
    pub stft_hop: usize,
    /// First bin included by the band-limited variant (40 bins = 625 Hz at 16 kHz).
    pub high_cut_bin: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self::new(LossMode::Full)
    }
}

impl LossConfig {
    pub fn new(mode: LossMode) -> Self {
        Self {
            mode,
            lambda: 0.5,
            stft_frame: 1024,
            stft_hop: 512,
            high_cut_bin: 40,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidConfig(format!("lambda {} must be >= 0", self.lambda)));
        }
        if self.stft_frame == 0 || self.stft_hop == 0 {
            return Err(Error::InvalidConfig("stft frame and hop must be positive".into()));
        }
        if self.high_cut_bin > self.stft_frame / 2 {
            return Err(Error::InvalidConfig(format!(
                "high_cut_bin {} beyond Nyquist bin {}",
                self.high_cut_bin,
                self.stft_frame / 2
            )));
        }
        Ok(())
    }

    /// First STFT bin that enters the spectral term.
    pub fn first_bin(&self) -> usize {
        match self.mode {
            LossMode::High => self.high_cut_bin,
            _ => 0,
        }
    }
}

/// Magnitude spectrogram, `frames x (frame / 2 + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub magnitudes: Vec<Vec<T>>,
    pub frame: usize,
    pub hop: usize,
}

impl<T> Spectrogram<T> {
    pub fn frames(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn bins(&self) -> usize {
        self.frame / 2 + 1
    }
}

fn hann<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| T::lit(0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()))
        .collect()
}

fn frame_count(len: usize, frame: usize, hop: usize) -> Result<usize> {
    if len < frame {
        return Err(Error::TooShort { needed: frame, got: len });
    }
    Ok((len - frame) / hop + 1)
}

/// Complex one-sided spectra of Hann-windowed frames (no centring, no padding).
fn stft_complex<T: Real>(x: &[T], frame: usize, hop: usize) -> Result<Vec<Vec<Complex<T>>>> {
    let count = frame_count(x.len(), frame, hop)?;
    let window = hann::<T>(frame);
    let fft = FftPlanner::<T>::new().plan_fft_forward(frame);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); frame];
    Ok((0..count)
        .map(|f| {
            let start = f * hop;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = Complex::new(x[start + i] * window[i], T::zero());
            }
            fft.process(&mut buf);
            buf[..=frame / 2].to_vec()
        })
        .collect())
}

pub fn stft_mag<T: Real>(x: &[T], frame: usize, hop: usize) -> Result<Spectrogram<T>> {
    let spectra = stft_complex(x, frame, hop)?;
    Ok(Spectrogram {
        magnitudes: spectra
            .iter()
            .map(|s| s.iter().map(|c| c.norm()).collect())
            .collect(),
        frame,
        hop,
    })
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("prediction {a} vs target {b} samples")));
    }
    Ok(())
}

fn sign<T: Real>(v: T) -> T {
    if v > T::zero() {
        T::one()
    } else if v < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Mean absolute sample error.
pub fn l1_recon<T: Real>(pred: &[T], target: &[T]) -> Result<T> {
    check_lengths(pred.len(), target.len())?;
    if pred.is_empty() {
        return Ok(T::zero());
    }
    let sum: T = pred.iter().zip(target).map(|(a, b)| (*a - *b).abs()).sum();
    Ok(sum / T::from(pred.len()).unwrap())
}

/// Mean absolute difference of magnitude spectrograms over bins
/// `first_bin..`; the band is fixed by `cfg.mode`.
pub fn stft_loss<T: Real>(pred: &[T], target: &[T], cfg: &LossConfig) -> Result<T> {
    Ok(stft_loss_grad(pred, target, cfg, false)?.0)
}

fn stft_loss_grad<T: Real>(
    pred: &[T],
    target: &[T],
    cfg: &LossConfig,
    want_grad: bool,
) -> Result<(T, Vec<T>)> {
    check_lengths(pred.len(), target.len())?;
    let (frame, hop) = (cfg.stft_frame, cfg.stft_hop);
    let p = stft_complex(pred, frame, hop)?;
    let t = stft_complex(target, frame, hop)?;
    let first = cfg.first_bin();
    let bins = frame / 2 + 1;
    let count = T::from(p.len() * (bins - first)).unwrap();

    let mut total = T::zero();
    for (ps, ts) in p.iter().zip(&t) {
        for k in first..bins {
            total = total + (ps[k].norm() - ts[k].norm()).abs();
        }
    }
    let loss = total / count;
    if !want_grad {
        return Ok((loss, Vec::new()));
    }

    // d|X_k|/dx_n = w_n Re(X_k^* e^{-2 pi i k n / N}) / |X_k|, summed through an
    // inverse FFT of the scaled one-sided spectrum.
    let window = hann::<T>(frame);
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(frame);
    let mut grad = vec![T::zero(); pred.len()];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); frame];
    for (f, (ps, ts)) in p.iter().zip(&t).enumerate() {
        buf.iter_mut().for_each(|b| *b = Complex::new(T::zero(), T::zero()));
        for k in first..bins {
            let mag = ps[k].norm();
            if mag > T::zero() {
                let g = sign(mag - ts[k].norm()) / count;
                buf[k] = ps[k] * (g / mag);
            }
        }
        ifft.process(&mut buf);
        let start = f * hop;
        for n in 0..frame {
            grad[start + n] = grad[start + n] + window[n] * buf[n].re;
        }
    }
    Ok((loss, grad))
}

/// Loss value with its two parts, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts<T> {
    pub total: T,
    pub wave: T,
    pub stft: T,
}

pub fn total_loss<T: Real>(pred: &[T], target: &[T], cfg: &LossConfig) -> Result<T> {
    Ok(loss_parts(pred, target, cfg)?.total)
}

pub fn loss_parts<T: Real>(pred: &[T], target: &[T], cfg: &LossConfig) -> Result<LossParts<T>> {
    let wave = l1_recon(pred, target)?;
    let stft = match cfg.mode {
        LossMode::Wave => T::zero(),
        _ => stft_loss(pred, target, cfg)?,
    };
    Ok(LossParts {
        total: wave + T::lit(cfg.lambda) * stft,
        wave,
        stft,
    })
}

/// Loss parts and `dL/d pred`.
pub fn total_loss_grad<T: Real>(
    pred: &[T],
    target: &[T],
    cfg: &LossConfig,
) -> Result<(LossParts<T>, Vec<T>)> {
    let wave = l1_recon(pred, target)?;
    let n = T::from(pred.len().max(1)).unwrap();
    let mut grad: Vec<T> = pred.iter().zip(target).map(|(a, b)| sign(*a - *b) / n).collect();
    let stft = match cfg.mode {
        LossMode::Wave => T::zero(),
        _ => {
            let (value, g) = stft_loss_grad(pred, target, cfg, true)?;
            let lambda = T::lit(cfg.lambda);
            for (a, b) in grad.iter_mut().zip(g) {
                *a = *a + lambda * b;
            }
            value
        }
    };
    Ok((
        LossParts {
            total: wave + T::lit(cfg.lambda) * stft,
            wave,
            stft,
        },
        grad,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn sine(freq: f64, len: usize, amp: f64) -> Vec<f64> {
        (0..len).map(|n| amp * (2.0 * PI * freq * n as f64 / 16_000.0).sin()).collect()
    }

    fn random(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn zero_signal_shape() {
        let s = stft_mag(&vec![0.0f64; 16_000], 1024, 512).unwrap();
        assert_eq!(s.frames(), 30);
        assert_eq!(s.bins(), 513);
        assert!(s.magnitudes.iter().flatten().all(|&m| m == 0.0));
    }

    #[test]
    fn too_short() {
        assert!(matches!(
            stft_mag(&[0.0f64; 1000], 1024, 512),
            Err(Error::TooShort { needed: 1024, got: 1000 })
        ));
    }

    #[test]
    fn bin_64_peak() {
        let s = stft_mag(&sine(1000.0, 4096, 0.8), 1024, 512).unwrap();
        for frame in &s.magnitudes {
            let peak = (0..frame.len()).max_by(|&a, &b| frame[a].total_cmp(&frame[b])).unwrap();
            assert_eq!(peak, 64);
        }
    }

    #[test]
    fn l1_examples() {
        let x = random(1, 500);
        assert_eq!(l1_recon(&x, &x).unwrap(), 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
        assert!((l1_recon(&shifted, &x).unwrap() - 0.1).abs() < 1e-12);
        let y = random(2, 500);
        let mut oracle = 0.0;
        for i in 0..500 {
            oracle += (x[i] - y[i]).abs();
        }
        assert!((l1_recon(&x, &y).unwrap() - oracle / 500.0).abs() < 1e-9);
        assert!(matches!(l1_recon(&x, &y[..10]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn high_band_ignores_low_sine() {
        let x = sine(100.0, 16_000, 0.9);
        let silence = vec![0.0; 16_000];
        let full = stft_loss(&silence, &x, &LossConfig::new(LossMode::Full)).unwrap();
        let high = stft_loss(&silence, &x, &LossConfig::new(LossMode::High)).unwrap();
        assert!(full > 0.0);
        assert!(high < 0.05 * full, "high {high} full {full}");

        let x = sine(2000.0, 16_000, 0.9);
        assert!(stft_loss(&silence, &x, &LossConfig::new(LossMode::High)).unwrap() > 0.0);
    }

    #[test]
    fn total_loss_reductions() {
        let x = random(3, 4096);
        let y = random(4, 4096);
        let wave = LossConfig::new(LossMode::Wave);
        assert_eq!(total_loss(&x, &y, &wave).unwrap(), l1_recon(&x, &y).unwrap());

        let full = LossConfig::new(LossMode::Full);
        let expect = l1_recon(&x, &y).unwrap() + 0.5 * stft_loss(&x, &y, &full).unwrap();
        assert!((total_loss(&x, &y, &full).unwrap() - expect).abs() < 1e-12);

        let zero = LossConfig { lambda: 0.0, ..full };
        assert_eq!(total_loss(&x, &y, &zero).unwrap(), total_loss(&x, &y, &wave).unwrap());

        for mode in [LossMode::Wave, LossMode::High, LossMode::Full] {
            assert_eq!(total_loss(&x, &x, &LossConfig::new(mode)).unwrap(), 0.0);
        }
    }

    #[test]
    fn config_validation_and_parse() {
        assert!(LossConfig::default().validate().is_ok());
        assert!(LossConfig { lambda: -1.0, ..LossConfig::default() }.validate().is_err());
        assert!(LossConfig { high_cut_bin: 600, ..LossConfig::default() }.validate().is_err());
        assert_eq!("FULL".parse::<LossMode>().unwrap(), LossMode::Full);
        assert!("spectral".parse::<LossMode>().is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let target = random(5, 2048);
        let pred = random(6, 2048);
        for mode in [LossMode::Wave, LossMode::High, LossMode::Full] {
            let cfg = LossConfig::new(mode);
            let (_, grad) = total_loss_grad(&pred, &target, &cfg).unwrap();
            let eps = 1e-6;
            for idx in (0..2048).step_by(97) {
                let mut p = pred.clone();
                p[idx] += eps;
                let up = total_loss(&p, &target, &cfg).unwrap();
                p[idx] -= 2.0 * eps;
                let down = total_loss(&p, &target, &cfg).unwrap();
                let fd = (up - down) / (2.0 * eps);
                assert!((fd - grad[idx]).abs() <= 1e-4 * grad[idx].abs().max(1e-6), "{mode} {idx}: {fd} vs {}", grad[idx]);
            }
        }
    }
}
