#![allow(dead_code)]

use std::f64::consts::PI;

use psynth::audio::Waveform;
use psynth::features::{extract_timbral, TimbralVector};

pub const SR: u32 = 16_000;
pub const N: usize = 16_000;

pub fn decayed_sine(freq: f64, decay_ms: f64) -> Vec<f64> {
    let tau = decay_ms * 1e-3 * f64::from(SR);
    (0..N)
        .map(|n| (-(n as f64) / tau).exp() * (2.0 * PI * freq * n as f64 / f64::from(SR)).sin())
        .collect()
}

pub fn mix(parts: &[(&[f64], f64)]) -> Vec<f64> {
    (0..N).map(|i| parts.iter().map(|(x, g)| x[i] * g).sum()).collect()
}

/// Linear fade-in over `ms` milliseconds.
pub fn fade_in(x: &[f64], ms: f64) -> Vec<f64> {
    let ramp = (ms * 1e-3 * f64::from(SR)).max(1.0);
    x.iter().enumerate().map(|(n, v)| v * (n as f64 / ramp).min(1.0)).collect()
}

pub fn wave(x: &[f64]) -> Waveform {
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Waveform::new(x.iter().map(|&v| (0.9 * v / peak) as f32).collect(), SR)
}

pub fn extract(x: &[f64]) -> TimbralVector {
    extract_timbral(&wave(x)).expect("test signals are audible")
}

/// Check that `values` strictly increase.
pub fn increasing(name: &str, values: &[f64]) -> Result<String, String> {
    let ok = values.windows(2).all(|w| w[1] > w[0]);
    let shown: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    let line = format!("{name}: {}", shown.join(" < "));
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

/// Brightness rises with the frequency of a single decayed sine.
pub fn brightness_property() -> Result<String, String> {
    let values: Vec<f64> = [100.0, 200.0, 400.0, 700.0, 1000.0, 1500.0, 2000.0, 3000.0, 4000.0]
        .iter()
        .map(|&f| extract(&decayed_sine(f, 300.0)).brightness)
        .collect();
    increasing("brightness vs frequency", &values)
}

/// Depth rises with the share of energy below 200 Hz.
pub fn depth_property() -> Result<String, String> {
    let (low, high) = (decayed_sine(80.0, 300.0), decayed_sine(1000.0, 300.0));
    let values: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&g| extract(&mix(&[(&low, g), (&high, 1.0 - g)])).depth)
        .collect();
    increasing("depth vs low share", &values)
}

/// Boominess rises with the share of energy below 120 Hz.
pub fn boominess_property() -> Result<String, String> {
    let (low, high) = (decayed_sine(60.0, 400.0), decayed_sine(800.0, 400.0));
    let values: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&g| extract(&mix(&[(&low, g), (&high, 1.0 - g)])).boominess)
        .collect();
    increasing("boominess vs low share", &values)
}

/// Sharpness rises as energy is added in the upper critical bands.
pub fn sharpness_property() -> Result<String, String> {
    let body = decayed_sine(150.0, 300.0);
    let air = mix(&[(&decayed_sine(5000.0, 300.0), 1.0), (&decayed_sine(7000.0, 300.0), 1.0)]);
    let values: Vec<f64> = [0.0, 0.05, 0.2, 0.5]
        .iter()
        .map(|&g| extract(&mix(&[(&body, 1.0), (&air, g)])).sharpness)
        .collect();
    increasing("sharpness vs added high-band energy", &values)
}

/// Warmth rises with the 100-350 Hz level relative to the rest of 50-2000 Hz.
pub fn warmth_property() -> Result<String, String> {
    let (warm, rest) = (decayed_sine(200.0, 300.0), decayed_sine(1200.0, 300.0));
    let values: Vec<f64> = [0.1, 0.3, 0.5, 0.7, 0.9]
        .iter()
        .map(|&g| extract(&mix(&[(&warm, g), (&rest, 1.0 - g)])).warmth)
        .collect();
    increasing("warmth vs 100-350 Hz level", &values)
}

/// Hardness rises as the onset gets steeper.
pub fn hardness_property() -> Result<String, String> {
    let tone = decayed_sine(300.0, 300.0);
    let values: Vec<f64> = [15.0, 8.0, 4.0, 2.0, 0.5]
        .iter()
        .map(|&ms| extract(&fade_in(&tone, ms)).hardness)
        .collect();
    increasing("hardness vs onset steepness", &values)
}

/// Roughness rises when a partial at 1.02 times the frequency is added.
pub fn roughness_property() -> Result<String, String> {
    let mut lines = Vec::new();
    let mut ok = true;
    for f in [400.0, 1000.0, 2000.0, 4000.0] {
        let base = decayed_sine(f, 300.0);
        let beating = mix(&[(&base, 1.0), (&decayed_sine(1.02 * f, 300.0), 1.0)]);
        let (a, b) = (extract(&base).roughness, extract(&beating).roughness);
        ok &= b > a;
        lines.push(format!("{f} Hz {a:.4} -> {b:.4}"));
    }
    let line = format!("roughness with 1.02x partial: {}", lines.join(", "));
    if ok {
        Ok(line)
    } else {
        Err(line)
    }
}

pub fn monotonicity_properties() -> Vec<(&'static str, Result<String, String>)> {
    vec![
        ("brightness", brightness_property()),
        ("depth", depth_property()),
        ("boominess", boominess_property()),
        ("sharpness", sharpness_property()),
        ("warmth", warmth_property()),
        ("hardness", hardness_property()),
        ("roughness", roughness_property()),
    ]
}
