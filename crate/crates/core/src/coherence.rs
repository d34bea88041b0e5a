//! Feature-coherence evaluation: sweep one normalized feature through
//! low/mid/high, resynthesize, re-extract and check the ordering.
//!
//! E1: high > low. E2: high > mid. E3: mid > low. Ties fail.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::{Waveform, CLIP_LENGTH, SAMPLE_RATE};
use crate::dataset::{synth_oracle, OracleParams, TrainingRecord};
use crate::error::{Error, Result};
use crate::features::{extract_timbral, Envelope, Feature, FeatureNormalizer, TimbralVector};
use crate::model::{forward, Checkpoint, ConditioningInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepLevels {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl Default for SweepLevels {
    fn default() -> Self {
        Self {
            low: 0.2,
            mid: 0.5,
            high: 0.8,
        }
    }
}

impl SweepLevels {
    pub fn new(low: f64, mid: f64, high: f64) -> Result<Self> {
        let levels = Self { low, mid, high };
        levels.validate()?;
        Ok(levels)
    }

    pub fn validate(&self) -> Result<()> {
        if 0.0 <= self.low && self.low < self.mid && self.mid < self.high && self.high <= 1.0 {
            Ok(())
        } else {
            Err(Error::field(
                "levels",
                format!("need 0 <= low < mid < high <= 1, got {} {} {}", self.low, self.mid, self.high),
            ))
        }
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.low, self.mid, self.high]
    }
}

impl std::str::FromStr for SweepLevels {
    type Err = String;

    /// Parse `low,mid,high`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let v: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
            .collect::<std::result::Result<_, _>>()?;
        match v[..] {
            [low, mid, high] => Self::new(low, mid, high).map_err(|e| e.to_string()),
            _ => Err(format!("expected three comma-separated levels, got {}", v.len())),
        }
    }
}

/// Anything that turns an envelope and normalized features into audio.
pub trait SynthBackend {
    fn name(&self) -> String;

    fn synthesize(&self, envelope: &Envelope, features: &TimbralVector) -> Result<Waveform>;

    /// Features the backend responds to by construction.
    fn controlled(&self) -> Vec<Feature> {
        Feature::ALL.to_vec()
    }
}

/// The trained network.
pub struct ModelBackend {
    pub checkpoint: Checkpoint,
}

impl SynthBackend for ModelBackend {
    fn name(&self) -> String {
        format!("model:{}", &self.checkpoint.hash()[..12])
    }

    fn synthesize(&self, envelope: &Envelope, features: &TimbralVector) -> Result<Waveform> {
        let config = &self.checkpoint.config;
        let cond = ConditioningInput::new(envelope.resized(config.output_length), *features);
        forward(&self.checkpoint.params, config, &cond)
    }
}

/// Kick generator driven directly by the normalized features: brightness
/// sets the pitch (40 Hz to 2 kHz, log scale) and sharpness the noise
/// layer. Everything else is fixed.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl OracleBackend {
    pub fn params(features: &TimbralVector) -> OracleParams {
        OracleParams {
            f0: 40.0 * 50f64.powf(features.brightness.clamp(0.0, 1.0)),
            noise_mix: features.sharpness.clamp(0.0, 1.0),
            ..OracleParams::default()
        }
    }
}

impl SynthBackend for OracleBackend {
    fn name(&self) -> String {
        "oracle".into()
    }

    fn synthesize(&self, _envelope: &Envelope, features: &TimbralVector) -> Result<Waveform> {
        synth_oracle(&Self::params(features), CLIP_LENGTH, SAMPLE_RATE)
    }

    fn controlled(&self) -> Vec<Feature> {
        vec![Feature::Brightness, Feature::Sharpness]
    }
}

/// Returns the same sound whatever it is asked for.
#[derive(Debug, Clone)]
pub struct ConstantBackend {
    pub sound: Waveform,
}

impl Default for ConstantBackend {
    fn default() -> Self {
        Self {
            sound: synth_oracle(&OracleParams::default(), CLIP_LENGTH, SAMPLE_RATE).expect("default params are valid"),
        }
    }
}

impl SynthBackend for ConstantBackend {
    fn name(&self) -> String {
        "constant".into()
    }

    fn synthesize(&self, _envelope: &Envelope, _features: &TimbralVector) -> Result<Waveform> {
        Ok(self.sound.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

/// Ordering tests with strict inequalities.
pub fn score(low: f64, mid: f64, high: f64) -> (bool, bool, bool) {
    (high > low, high > mid, mid > low)
}

/// Re-extracted feature on the normalizer's affine scale, without clamping
/// so that values outside the fitted range keep their order.
fn rescale(normalizer: &FeatureNormalizer, feature: Feature, raw: f64) -> f64 {
    let r = normalizer.range(feature);
    if r.degenerate {
        raw - r.min
    } else {
        (raw - r.min) / (r.max - r.min)
    }
}

/// Set `feature` of the record's normalized features to each level, keep
/// the rest, synthesize and measure the same feature again.
pub fn sweep_one(
    backend: &dyn SynthBackend,
    record: &TrainingRecord,
    feature: Feature,
    levels: &SweepLevels,
    normalizer: &FeatureNormalizer,
) -> Result<Sweep> {
    let [low, mid, high] = levels.to_array().map(|v| -> Result<f64> {
        let fs = record.fs.with(feature, v);
        let w = backend.synthesize(&record.e, &fs)?;
        let raw = extract_timbral(&w).map_err(|e| match e {
            Error::SilentInput => Error::SilentOutput,
            other => other,
        })?;
        Ok(rescale(normalizer, feature, raw.get(feature)))
    });
    Ok(Sweep {
        low: low?,
        mid: mid?,
        high: high?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: Feature,
    pub controlled: bool,
    pub pairs: usize,
    pub e1_pass: usize,
    pub e2_pass: usize,
    pub e3_pass: usize,
    /// Pairs whose synthesized output was silent or failed; counted as failures.
    pub failed: usize,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub pairs: usize,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub backend: String,
    pub levels: SweepLevels,
    pub records: usize,
    pub features: Vec<FeatureScore>,
    pub aggregate: Aggregate,
}

fn ratio(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        n as f64 / d as f64
    }
}

/// Score every (record, feature) pair, records in the given order and
/// features in canonical order.
pub fn evaluate(
    backend: &dyn SynthBackend,
    records: &[&TrainingRecord],
    normalizer: &FeatureNormalizer,
    levels: &SweepLevels,
) -> Result<CoherenceReport> {
    levels.validate()?;
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to evaluate".into()));
    }
    let controlled = backend.controlled();
    let mut features = Vec::with_capacity(Feature::COUNT);
    for feature in Feature::ALL {
        let (mut e1, mut e2, mut e3, mut failed) = (0, 0, 0, 0);
        for record in records {
            match sweep_one(backend, record, feature, levels, normalizer) {
                Ok(s) => {
                    let (a, b, c) = score(s.low, s.mid, s.high);
                    assert!(!(b && c) || a, "ordering tests must be transitive");
                    e1 += a as usize;
                    e2 += b as usize;
                    e3 += c as usize;
                }
                Err(e) => {
                    log::warn!("{} / {feature}: {e}", record.id);
                    failed += 1;
                }
            }
        }
        let n = records.len();
        features.push(FeatureScore {
            feature,
            controlled: controlled.contains(&feature),
            pairs: n,
            e1_pass: e1,
            e2_pass: e2,
            e3_pass: e3,
            failed,
            e1: ratio(e1, n),
            e2: ratio(e2, n),
            e3: ratio(e3, n),
        });
    }
    let pairs: usize = features.iter().map(|f| f.pairs).sum();
    let sum = |f: fn(&FeatureScore) -> usize| features.iter().map(f).sum::<usize>();
    let aggregate = Aggregate {
        pairs,
        e1: ratio(sum(|f| f.e1_pass), pairs),
        e2: ratio(sum(|f| f.e2_pass), pairs),
        e3: ratio(sum(|f| f.e3_pass), pairs),
    };
    Ok(CoherenceReport {
        backend: backend.name(),
        levels: *levels,
        records: records.len(),
        features,
        aggregate,
    })
}

impl CoherenceReport {
    pub fn feature(&self, feature: Feature) -> &FeatureScore {
        &self.features[feature.index()]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// Aligned table: one row per feature plus the aggregate.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "backend {}  levels {}/{}/{}  records {}",
            self.backend, self.levels.low, self.levels.mid, self.levels.high, self.records
        );
        let _ = writeln!(out, "{:<12} {:>6} {:>6} {:>6} {:>6}", "feature", "E1", "E2", "E3", "failed");
        for f in &self.features {
            let mark = if f.controlled { "" } else { " *" };
            let _ = writeln!(
                out,
                "{:<12} {:>6.3} {:>6.3} {:>6.3} {:>6}{mark}",
                f.feature.name(),
                f.e1,
                f.e2,
                f.e3,
                f.failed
            );
        }
        let a = &self.aggregate;
        let _ = writeln!(out, "{:<12} {:>6.3} {:>6.3} {:>6.3}", "all", a.e1, a.e2, a.e3);
        if self.features.iter().any(|f| !f.controlled) {
            let _ = writeln!(out, "* not controlled by this backend");
        }
        out
    }
}
