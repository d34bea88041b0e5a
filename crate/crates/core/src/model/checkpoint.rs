//! Checkpoint container.
//!
//! ```text
//! offset 0   8 bytes   magic "PSYNCKPT"
//! offset 8   u64 LE    header length H
//! offset 16  H bytes   UTF-8 JSON header
//! offset 16+H          parameter blob: little-endian f32, layout order
//! ```
//!
//! The header carries the format version, model config, feature normalizer,
//! optional loss config, parameter count and a SHA-256 content hash over the
//! config, normalizer and blob.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::ModelConfig;
use super::network::{Layout, Parameters};
use crate::error::{Error, Result};
use crate::features::FeatureNormalizer;
use crate::losses::LossConfig;

pub const CHECKPOINT_VERSION: &str = "ckpt-v1";
const MAGIC: &[u8; 8] = b"PSYNCKPT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    version: String,
    config: ModelConfig,
    normalizer: FeatureNormalizer,
    #[serde(default)]
    loss: Option<LossConfig>,
    parameter_count: usize,
    content_hash: String,
}

/// Trained parameters together with everything needed to use them.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub normalizer: FeatureNormalizer,
    pub loss: Option<LossConfig>,
    pub params: Parameters<f32>,
}

pub(crate) fn f32_blob(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

pub(crate) fn f32_from_blob(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect()
}

/// Write `magic | len | header | blob`.
pub(crate) fn write_container(path: &Path, magic: &[u8; 8], header: &[u8], blob: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + header.len() + blob.len());
    bytes.extend_from_slice(magic);
    bytes.extend_from_slice(&(header.len() as u64).to_le_bytes());
    bytes.extend_from_slice(header);
    bytes.extend_from_slice(blob);
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Split a container into (header, blob). A file cut short anywhere past
/// the magic reports `HashMismatch`, since its content cannot be verified.
pub(crate) fn read_container<'a>(bytes: &'a [u8], magic: &[u8; 8]) -> Result<(&'a [u8], &'a [u8])> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(Error::CorruptFile("not a psynth container (bad magic)".into()));
    }
    if bytes.len() < 16 {
        return Err(Error::HashMismatch);
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let end = 16usize.checked_add(len).ok_or(Error::HashMismatch)?;
    if bytes.len() < end {
        return Err(Error::HashMismatch);
    }
    Ok((&bytes[16..end], &bytes[end..]))
}

fn content_hash(config: &ModelConfig, normalizer: &FeatureNormalizer, blob: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(serde_json::to_vec(normalizer).expect("normalizer serializes"));
    h.update(blob);
    hex::encode(h.finalize())
}

impl Checkpoint {
    pub fn new(config: ModelConfig, normalizer: FeatureNormalizer, params: Parameters<f32>) -> Self {
        Self {
            config,
            normalizer,
            loss: None,
            params,
        }
    }

    pub fn with_loss(mut self, loss: LossConfig) -> Self {
        self.loss = Some(loss);
        self
    }

    /// SHA-256 content hash (hex) of config, normalizer and parameters.
    pub fn hash(&self) -> String {
        content_hash(&self.config, &self.normalizer, &f32_blob(&self.params.values))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        if !self.params.is_finite() {
            return Err(Error::NonFiniteParameters);
        }
        let blob = f32_blob(&self.params.values);
        let header = Header {
            version: CHECKPOINT_VERSION.into(),
            config: self.config.clone(),
            normalizer: self.normalizer.clone(),
            loss: self.loss,
            parameter_count: self.params.len(),
            content_hash: content_hash(&self.config, &self.normalizer, &blob),
        };
        let header = serde_json::to_vec_pretty(&header)?;
        write_container(path.as_ref(), MAGIC, &header, &blob)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, blob) = read_container(bytes, MAGIC)?;
        let value: serde_json::Value = serde_json::from_slice(header).map_err(|_| Error::HashMismatch)?;
        let version = value.get("version").and_then(|v| v.as_str()).unwrap_or("");
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                expected: CHECKPOINT_VERSION.into(),
                found: version.into(),
            });
        }
        let header: Header = serde_json::from_value(value)?;
        if content_hash(&header.config, &header.normalizer, blob) != header.content_hash {
            return Err(Error::HashMismatch);
        }
        let expected = Layout::new(&header.config).total;
        if blob.len() != 4 * header.parameter_count || header.parameter_count != expected {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint holds {} parameters, config implies {expected}",
                blob.len() / 4
            )));
        }
        Ok(Self {
            config: header.config,
            normalizer: header.normalizer,
            loss: header.loss,
            params: Parameters {
                values: f32_from_blob(blob),
            },
        })
    }

    /// Load and require the stored architecture to match `expected`.
    pub fn load_for(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Self> {
        let ckpt = Self::load(path)?;
        ckpt.ensure_config(expected)?;
        Ok(ckpt)
    }

    pub fn ensure_config(&self, expected: &ModelConfig) -> Result<()> {
        let a = &self.config;
        let same_shape = a.encoder_layers == expected.encoder_layers
            && a.base_filters == expected.base_filters
            && a.filter_length == expected.filter_length
            && a.filters_double_every == expected.filters_double_every
            && a.feature_count == expected.feature_count
            && a.internal_length == expected.internal_length
            && a.output_length == expected.output_length;
        if !same_shape {
            return Err(Error::ShapeMismatch(format!(
                "checkpoint has K={} base={} length={}, requested K={} base={} length={}",
                a.encoder_layers,
                a.base_filters,
                a.internal_length,
                expected.encoder_layers,
                expected.base_filters,
                expected.internal_length
            )));
        }
        Ok(())
    }
}
