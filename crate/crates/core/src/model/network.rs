//! Parameter layout, forward pass and hand-written backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::tensor::{
    conv1d, conv1d_backward, leaky_relu, leaky_relu_backward, upsample2, upsample2_backward,
    ConvWeights, Real, Tensor,
};
use crate::audio::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};
use crate::features::{Envelope, TimbralVector};

/// Location of one convolution's kernel and bias inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSlot {
    pub name: String,
    pub out_channels: usize,
    pub in_channels: usize,
    pub width: usize,
    pub kernel_offset: usize,
    pub bias_offset: usize,
}

impl ConvSlot {
    pub fn kernel_len(&self) -> usize {
        self.out_channels * self.in_channels * self.width
    }

    pub fn end(&self) -> usize {
        self.bias_offset + self.out_channels
    }

    fn weights<'a, T>(&self, values: &'a [T]) -> ConvWeights<'a, T> {
        ConvWeights {
            kernel: &values[self.kernel_offset..self.kernel_offset + self.kernel_len()],
            bias: &values[self.bias_offset..self.bias_offset + self.out_channels],
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            width: self.width,
        }
    }

    fn grads_mut<'a, T>(&self, grads: &'a mut [T]) -> (&'a mut [T], &'a mut [T]) {
        let (head, tail) = grads.split_at_mut(self.bias_offset);
        (
            &mut head[self.kernel_offset..self.kernel_offset + self.kernel_len()],
            &mut tail[..self.out_channels],
        )
    }
}

/// Ordered convolution slots: encoder 1..=K, decoder K..=1, output projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub encoder: Vec<ConvSlot>,
    /// `decoder[j - 1]` is stage `j`.
    pub decoder: Vec<ConvSlot>,
    pub output: ConvSlot,
    pub total: usize,
}

impl Layout {
    pub fn new(config: &ModelConfig) -> Self {
        let k = config.filter_length;
        let mut offset = 0;
        let mut slot = |name: String, in_channels: usize, out_channels: usize| {
            let s = ConvSlot {
                name,
                out_channels,
                in_channels,
                width: k,
                kernel_offset: offset,
                bias_offset: offset + out_channels * in_channels * k,
            };
            offset = s.end();
            s
        };
        let encoder: Vec<_> = (1..=config.encoder_layers)
            .map(|l| slot(format!("enc.{l}"), config.channels(l - 1), config.channels(l)))
            .collect();
        let mut decoder: Vec<_> = (1..=config.encoder_layers)
            .rev()
            .map(|j| {
                slot(
                    format!("dec.{j}"),
                    config.channels(j) + config.channels(j - 1),
                    config.decoder_channels(j),
                )
            })
            .collect();
        decoder.reverse();
        let output = slot("out".into(), config.decoder_channels(1), 1);
        Self {
            encoder,
            decoder,
            output,
            total: offset,
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = &ConvSlot> {
        self.encoder
            .iter()
            .chain(self.decoder.iter().rev())
            .chain(std::iter::once(&self.output))
    }
}

/// Flat trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters<T> {
    pub values: Vec<T>,
}

impl<T: Real> Parameters<T> {
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            values: vec![T::zero(); Layout::new(config).total],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn cast<U: Real>(&self) -> Parameters<U> {
        Parameters {
            values: self
                .values
                .iter()
                .map(|v| U::from(*v).expect("finite parameter"))
                .collect(),
        }
    }
}

/// Allocate parameters for `config`: Glorot-uniform kernels from the config
/// seed, zero biases.
pub fn build(config: &ModelConfig) -> Result<Parameters<f32>> {
    config.validate()?;
    let layout = Layout::new(config);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut values = vec![0.0f32; layout.total];
    for slot in layout.slots() {
        let fan_in = slot.in_channels * slot.width;
        let fan_out = slot.out_channels * slot.width;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        for v in &mut values[slot.kernel_offset..slot.kernel_offset + slot.kernel_len()] {
            *v = rng.random_range(-limit..limit) as f32;
        }
    }
    Ok(Parameters { values })
}

/// Envelope plus normalized features: what the network is conditioned on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningInput {
    pub envelope: Envelope,
    pub features: TimbralVector,
}

impl ConditioningInput {
    pub fn new(envelope: Envelope, features: TimbralVector) -> Self {
        Self { envelope, features }
    }

    /// Envelope channel zero-padded to `internal_length`, followed by one
    /// constant channel per feature.
    pub fn to_tensor<T: Real>(&self, config: &ModelConfig) -> Result<Tensor<T>> {
        let len = config.internal_length;
        if self.envelope.len() > len {
            return Err(Error::ShapeMismatch(format!(
                "envelope of {} samples exceeds internal length {len}",
                self.envelope.len()
            )));
        }
        let mut input = Tensor::zeros(config.input_channels(), len);
        for (dst, &v) in input.row_mut(0).iter_mut().zip(&self.envelope.values) {
            *dst = T::lit(v);
        }
        for (i, v) in self.features.to_array().iter().enumerate() {
            let v = T::lit(*v);
            input.row_mut(i + 1).iter_mut().for_each(|d| *d = v);
        }
        Ok(input)
    }
}

/// Activations retained for the backward pass.
pub struct Trace<T> {
    /// Encoder activations `a_0` (input) to `a_K`.
    encoder: Vec<Tensor<T>>,
    /// Per decoder stage `j`: (concatenated input, activated output).
    decoder: Vec<(Tensor<T>, Tensor<T>)>,
    /// `tanh` output over the full internal length.
    output: Tensor<T>,
}

impl<T: Real> Trace<T> {
    /// Cropped network output.
    pub fn output(&self, len: usize) -> &[T] {
        &self.output.data[..len]
    }

    /// Sign of every hidden activation, which equals the sign of its
    /// pre-activation under LeakyReLU.
    pub(crate) fn activation_signs(&self) -> Vec<bool> {
        self.encoder[1..]
            .iter()
            .chain(self.decoder.iter().map(|(_, out)| out))
            .flat_map(|t| t.data.iter().map(|v| *v >= T::zero()))
            .collect()
    }
}

/// Borrowed view of a parameter vector interpreted through a config.
pub struct Network<'a, T> {
    pub config: &'a ModelConfig,
    pub layout: Layout,
    pub params: &'a [T],
}

impl<'a, T: Real> Network<'a, T> {
    pub fn new(config: &'a ModelConfig, params: &'a Parameters<T>) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(config);
        if layout.total != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "config expects {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            config,
            layout,
            params: &params.values,
        })
    }

    fn slope(&self) -> T {
        T::lit(self.config.leaky_slope)
    }

    pub fn forward_trace(&self, input: Tensor<T>) -> Result<Trace<T>> {
        if self.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameters);
        }
        if input.channels != self.config.input_channels() || input.len != self.config.internal_length {
            return Err(Error::ShapeMismatch(format!(
                "input {}x{}, expected {}x{}",
                input.channels,
                input.len,
                self.config.input_channels(),
                self.config.internal_length
            )));
        }
        let slope = self.slope();
        let mut encoder = Vec::with_capacity(self.config.encoder_layers + 1);
        encoder.push(input);
        for slot in &self.layout.encoder {
            let mut a = conv1d(encoder.last().unwrap(), slot.weights(self.params), 2)?;
            leaky_relu(&mut a, slope);
            encoder.push(a);
        }

        let mut decoder = Vec::with_capacity(self.config.encoder_layers);
        let mut current = encoder.last().unwrap().clone();
        for j in (1..=self.config.encoder_layers).rev() {
            let joined = upsample2(&current).concat(&encoder[j - 1])?;
            let mut d = conv1d(&joined, self.layout.decoder[j - 1].weights(self.params), 1)?;
            leaky_relu(&mut d, slope);
            current = d.clone();
            decoder.push((joined, d));
        }
        decoder.reverse();

        let mut output = conv1d(&current, self.layout.output.weights(self.params), 1)?;
        output.data.iter_mut().for_each(|v| *v = v.tanh());
        Ok(Trace {
            encoder,
            decoder,
            output,
        })
    }

    pub fn forward(&self, cond: &ConditioningInput) -> Result<Vec<T>> {
        let trace = self.forward_trace(cond.to_tensor(self.config)?)?;
        Ok(trace.output(self.config.output_length).to_vec())
    }

    /// Parameter gradient given `dL/d output` over the cropped output.
    pub fn backward(&self, trace: &Trace<T>, grad_output: &[T]) -> Vec<T> {
        let slope = self.slope();
        let k = self.config.encoder_layers;
        let mut grads = vec![T::zero(); self.layout.total];

        let mut g = Tensor::zeros(1, self.config.internal_length);
        for ((dst, &go), &y) in g.data.iter_mut().zip(grad_output).zip(&trace.output.data) {
            *dst = go * (T::one() - y * y);
        }
        let top = trace.decoder.first().map(|(_, d)| d).unwrap_or(&trace.encoder[k]);
        let (gk, gb) = self.layout.output.grads_mut(&mut grads);
        let mut g_current = conv1d_backward(top, self.layout.output.weights(self.params), 1, &g, gk, gb);

        // Skip-connection gradients collected per encoder activation.
        let mut g_skip: Vec<Option<Tensor<T>>> = vec![None; k + 1];
        for j in 1..=k {
            let (joined, activated) = &trace.decoder[j - 1];
            leaky_relu_backward(activated, &mut g_current, slope);
            let slot = &self.layout.decoder[j - 1];
            let (gk, gb) = slot.grads_mut(&mut grads);
            let g_joined = conv1d_backward(joined, slot.weights(self.params), 1, &g_current, gk, gb);
            let up_channels = joined.channels - trace.encoder[j - 1].channels;
            let split = up_channels * joined.len;
            let g_up = Tensor::from_vec(up_channels, joined.len, g_joined.data[..split].to_vec())
                .expect("split shape");
            let g_enc = Tensor::from_vec(joined.channels - up_channels, joined.len, g_joined.data[split..].to_vec())
                .expect("split shape");
            g_skip[j - 1] = Some(g_enc);
            g_current = upsample2_backward(&g_up);
        }

        // g_current is now dL/d a_K through the decoder path.
        for l in (1..=k).rev() {
            if let Some(extra) = g_skip[l].take() {
                g_current.add_assign(&extra);
            }
            leaky_relu_backward(&trace.encoder[l], &mut g_current, slope);
            let slot = &self.layout.encoder[l - 1];
            let (gk, gb) = slot.grads_mut(&mut grads);
            g_current = conv1d_backward(&trace.encoder[l - 1], slot.weights(self.params), 2, &g_current, gk, gb);
        }
        grads
    }
}

/// Run the network on one conditioning input.
pub fn forward(params: &Parameters<f32>, config: &ModelConfig, cond: &ConditioningInput) -> Result<Waveform> {
    let net = Network::new(config, params)?;
    Ok(Waveform::new(net.forward(cond)?, SAMPLE_RATE))
}
