use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Feature, TimbralVector};
use crate::error::{Error, Result};

pub const NORMALIZER_VERSION: &str = "normalizer-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

impl FeatureRange {
    fn normalize(&self, v: f64) -> f64 {
        if self.degenerate {
            0.5
        } else {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }

    fn denormalize(&self, v: f64) -> f64 {
        if self.degenerate {
            self.min
        } else {
            self.min + v * (self.max - self.min)
        }
    }
}

/// Per-feature min-max ranges fitted over a dataset. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNormalizer {
    pub version: String,
    pub features: Ranges,
}

/// One range per feature; field order is the canonical feature order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ranges {
    pub hardness: FeatureRange,
    pub depth: FeatureRange,
    pub brightness: FeatureRange,
    pub roughness: FeatureRange,
    pub boominess: FeatureRange,
    pub warmth: FeatureRange,
    pub sharpness: FeatureRange,
}

impl Ranges {
    fn from_array(r: [FeatureRange; 7]) -> Self {
        let [hardness, depth, brightness, roughness, boominess, warmth, sharpness] = r;
        Self {
            hardness,
            depth,
            brightness,
            roughness,
            boominess,
            warmth,
            sharpness,
        }
    }

    pub fn to_array(&self) -> [FeatureRange; 7] {
        [
            self.hardness,
            self.depth,
            self.brightness,
            self.roughness,
            self.boominess,
            self.warmth,
            self.sharpness,
        ]
    }
}

impl FeatureNormalizer {
    pub fn fit(vectors: &[TimbralVector]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "normalizer needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let ranges = Feature::ALL.map(|f| {
            let (min, max) = vectors.iter().map(|v| v.get(f)).fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), v| (lo.min(v), hi.max(v)),
            );
            FeatureRange {
                min,
                max,
                degenerate: max <= min,
            }
        });
        Ok(Self {
            version: NORMALIZER_VERSION.to_string(),
            features: Ranges::from_array(ranges),
        })
    }

    pub fn range(&self, feature: Feature) -> FeatureRange {
        self.features.to_array()[feature.index()]
    }

    pub fn normalize(&self, v: &TimbralVector) -> TimbralVector {
        let ranges = self.features.to_array();
        let raw = v.to_array();
        TimbralVector::from_array(std::array::from_fn(|i| ranges[i].normalize(raw[i])), true)
    }

    pub fn denormalize(&self, v: &TimbralVector) -> TimbralVector {
        let ranges = self.features.to_array();
        let norm = v.to_array();
        TimbralVector::from_array(std::array::from_fn(|i| ranges[i].denormalize(norm[i])), false)
    }

    pub fn normalize_value(&self, feature: Feature, raw: f64) -> f64 {
        self.range(feature).normalize(raw)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("normalizer serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let n: Self = serde_json::from_str(s)?;
        if n.version != NORMALIZER_VERSION {
            return Err(Error::VersionMismatch {
                expected: NORMALIZER_VERSION.into(),
                found: n.version,
            });
        }
        if n.features.to_array().iter().any(|r| r.min > r.max) {
            return Err(Error::InvalidConfig("normalizer range with min > max".into()));
        }
        Ok(n)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
