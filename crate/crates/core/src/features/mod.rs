//! Conditioning signals: the seven timbral descriptors, the energy envelope,
//! and the dataset-level min-max normalizer.

mod envelope;
mod extract;
mod normalizer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use envelope::{envelope_follow, parametric_envelope, Envelope, DEFAULT_ATTACK_MS, DEFAULT_RELEASE_MS};
pub use extract::{extract_timbral, spectral_centroid};
pub use normalizer::{FeatureNormalizer, FeatureRange, NORMALIZER_VERSION};

/// The seven descriptors, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    Hardness,
    Depth,
    Brightness,
    Roughness,
    Boominess,
    Warmth,
    Sharpness,
}

impl Feature {
    pub const COUNT: usize = 7;

    pub const ALL: [Feature; 7] = [
        Feature::Hardness,
        Feature::Depth,
        Feature::Brightness,
        Feature::Roughness,
        Feature::Boominess,
        Feature::Warmth,
        Feature::Sharpness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Hardness => "hardness",
            Feature::Depth => "depth",
            Feature::Brightness => "brightness",
            Feature::Roughness => "roughness",
            Feature::Boominess => "boominess",
            Feature::Warmth => "warmth",
            Feature::Sharpness => "sharpness",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown feature `{s}`"))
    }
}

/// Seven timbral descriptor values, raw or normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimbralVector {
    pub hardness: f64,
    pub depth: f64,
    pub brightness: f64,
    pub roughness: f64,
    pub boominess: f64,
    pub warmth: f64,
    pub sharpness: f64,
    pub normalized: bool,
}

impl TimbralVector {
    pub fn from_array(values: [f64; 7], normalized: bool) -> Self {
        let [hardness, depth, brightness, roughness, boominess, warmth, sharpness] = values;
        Self {
            hardness,
            depth,
            brightness,
            roughness,
            boominess,
            warmth,
            sharpness,
            normalized,
        }
    }

    /// Normalized vector with every component set to `v`.
    pub fn uniform(v: f64) -> Self {
        Self::from_array([v; 7], true)
    }

    pub fn to_array(&self) -> [f64; 7] {
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

    pub fn get(&self, feature: Feature) -> f64 {
        self.to_array()[feature.index()]
    }

    pub fn set(&mut self, feature: Feature, value: f64) {
        let mut values = self.to_array();
        values[feature.index()] = value;
        *self = Self::from_array(values, self.normalized);
    }

    pub fn with(mut self, feature: Feature, value: f64) -> Self {
        self.set(feature, value);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// Check the normalized invariant, naming the first offending feature.
    pub fn validate_normalized(&self) -> crate::Result<()> {
        for f in Feature::ALL {
            let v = self.get(f);
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(crate::Error::field(f.name(), format!("{v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}
