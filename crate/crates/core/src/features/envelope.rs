use serde::{Deserialize, Serialize};

use crate::audio::Waveform;

pub const DEFAULT_ATTACK_MS: f64 = 5.0;
pub const DEFAULT_RELEASE_MS: f64 = 50.0;

/// Per-sample energy curve in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub values: Vec<f64>,
    pub sample_rate: u32,
}

impl Envelope {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero-pad or truncate the tail to `n` values.
    pub fn resized(&self, n: usize) -> Self {
        let mut values = self.values.clone();
        values.resize(n, 0.0);
        Self {
            values,
            sample_rate: self.sample_rate,
        }
    }

    /// `points` block maxima, for previews.
    pub fn preview(&self, points: usize) -> Vec<f64> {
        if self.values.is_empty() || points == 0 {
            return Vec::new();
        }
        (0..points)
            .map(|p| {
                let lo = p * self.values.len() / points;
                let hi = ((p + 1) * self.values.len() / points).max(lo + 1).min(self.values.len());
                self.values[lo..hi].iter().cloned().fold(0.0, f64::max)
            })
            .collect()
    }
}

fn coefficient(time_ms: f64, sample_rate: f64) -> f64 {
    (-1.0 / (time_ms * 1e-3 * sample_rate)).exp()
}

/// Attack/release one-pole follower on `|x[n]|`, starting from rest.
pub fn envelope_follow(w: &Waveform, attack_ms: f64, release_ms: f64) -> Envelope {
    assert!(attack_ms > 0.0 && release_ms > 0.0, "time constants must be positive");
    let sr = f64::from(w.sample_rate);
    let attack = coefficient(attack_ms, sr);
    let release = coefficient(release_ms, sr);
    let mut state = 0.0f64;
    let values = w
        .samples
        .iter()
        .map(|&s| {
            let level = f64::from(s).abs();
            let a = if level >= state { attack } else { release };
            state = (1.0 - a) * level + a * state;
            state.clamp(0.0, 1.0)
        })
        .collect();
    Envelope {
        values,
        sample_rate: w.sample_rate,
    }
}

/// Attack/decay envelope: linear rise to `amplitude` over the attack, then
/// exponential decay with time constant `decay_ms`.
pub fn parametric_envelope(
    attack_ms: f64,
    decay_ms: f64,
    amplitude: f64,
    n: usize,
    sample_rate: u32,
) -> Envelope {
    assert!(attack_ms >= 0.0 && decay_ms > 0.0, "invalid attack/decay");
    assert!(amplitude > 0.0 && amplitude <= 1.0, "amplitude must be in (0, 1]");
    let sr = f64::from(sample_rate);
    let ramp = (attack_ms * 1e-3 * sr).round() as usize;
    let tau = decay_ms * 1e-3 * sr;
    let values = (0..n)
        .map(|i| {
            if i < ramp {
                amplitude * i as f64 / ramp as f64
            } else {
                amplitude * (-((i - ramp) as f64) / tau).exp()
            }
        })
        .collect();
    Envelope {
        values,
        sample_rate,
    }
}
