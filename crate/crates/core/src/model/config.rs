use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Feature;

/// Architecture hyperparameters of the conditional Wave-U-Net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder_layers: usize,
    pub base_filters: usize,
    pub filter_length: usize,
    pub filters_double_every: usize,
    pub feature_count: usize,
    /// Padded working length; a multiple of `2^encoder_layers`.
    pub internal_length: usize,
    pub output_length: usize,
    pub leaky_slope: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::large()
    }
}

impl ModelConfig {
    /// Full-size network: 15 stride-2 layers down to a 512 x 1 bottleneck.
    pub fn large() -> Self {
        Self {
            encoder_layers: 15,
            base_filters: 32,
            filter_length: 5,
            filters_double_every: 3,
            feature_count: Feature::COUNT,
            internal_length: 1 << 15,
            output_length: 16_000,
            leaky_slope: 0.2,
            seed: 0,
        }
    }

    /// Reduced CPU-trainable network (bottleneck 64 x 32).
    pub fn desk() -> Self {
        Self {
            encoder_layers: 9,
            base_filters: 16,
            internal_length: 1 << 14,
            ..Self::large()
        }
    }

    /// Small network on full one-second clips, for smoke training runs.
    pub fn tiny() -> Self {
        Self {
            encoder_layers: 3,
            base_filters: 4,
            internal_length: 1 << 14,
            ..Self::large()
        }
    }

    pub fn with_lengths(mut self, internal_length: usize, output_length: usize) -> Self {
        self.internal_length = internal_length;
        self.output_length = output_length;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "large" => Some(Self::large()),
            "desk" => Some(Self::desk()),
            "tiny" => Some(Self::tiny()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.encoder_layers == 0 || self.encoder_layers > 24 {
            return bad(format!("encoder_layers {} not in 1..=24", self.encoder_layers));
        }
        if self.base_filters == 0 || self.filters_double_every == 0 {
            return bad("base_filters and filters_double_every must be positive".into());
        }
        if self.filter_length == 0 || self.filter_length % 2 == 0 {
            return bad(format!("filter_length {} must be odd", self.filter_length));
        }
        if self.feature_count != Feature::COUNT {
            return bad(format!("feature_count must be {}", Feature::COUNT));
        }
        let step = 1usize << self.encoder_layers;
        if self.internal_length == 0 || self.internal_length % step != 0 {
            return bad(format!(
                "internal_length {} is not a multiple of 2^{}",
                self.internal_length, self.encoder_layers
            ));
        }
        if self.output_length == 0 || self.output_length > self.internal_length {
            return bad(format!(
                "output_length {} must be in 1..={}",
                self.output_length, self.internal_length
            ));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return bad(format!("leaky_slope {} not in (0, 1)", self.leaky_slope));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        1 + self.feature_count
    }

    /// Channels of encoder activation `layer` (0 is the conditioning input).
    pub fn channels(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_channels()
        } else {
            self.base_filters << ((layer - 1) / self.filters_double_every)
        }
    }

    /// Output channels of decoder stage `stage` (K down to 1); stage `j`
    /// restores the resolution of encoder activation `j - 1`.
    pub fn decoder_channels(&self, stage: usize) -> usize {
        if stage >= 2 {
            self.channels(stage - 1)
        } else {
            self.base_filters
        }
    }

    /// Time length of encoder activation `layer`.
    pub fn length_at(&self, layer: usize) -> usize {
        self.internal_length >> layer
    }

    pub fn bottleneck(&self) -> (usize, usize) {
        (self.channels(self.encoder_layers), self.length_at(self.encoder_layers))
    }

    /// Closed-form parameter count.
    pub fn parameter_count(&self) -> usize {
        let k = self.filter_length;
        let encoder: usize = (1..=self.encoder_layers)
            .map(|l| self.channels(l - 1) * self.channels(l) * k + self.channels(l))
            .sum();
        let decoder: usize = (1..=self.encoder_layers)
            .map(|j| {
                let out = self.decoder_channels(j);
                (self.channels(j) + self.channels(j - 1)) * out * k + out
            })
            .sum();
        encoder + decoder + self.decoder_channels(1) * k + 1
    }
}
