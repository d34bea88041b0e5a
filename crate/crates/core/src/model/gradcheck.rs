//! Central finite-difference verification of the analytic parameter gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::ModelConfig;
use super::network::{build, ConditioningInput, Network, Parameters};
use crate::audio::SAMPLE_RATE;
use crate::error::{Error, Result};
use crate::features::{Envelope, TimbralVector};
use crate::losses::{stft_mag, total_loss, total_loss_grad, LossConfig, LossMode};

/// Largest network the checker accepts.
pub const MAX_CHECK_PARAMETERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckSize {
    Tiny,
    Small,
}

impl CheckSize {
    pub fn config(self) -> ModelConfig {
        match self {
            CheckSize::Tiny => ModelConfig::tiny().with_lengths(2048, 2048),
            CheckSize::Small => ModelConfig {
                encoder_layers: 6,
                base_filters: 8,
                ..ModelConfig::tiny()
            }
            .with_lengths(4096, 4096),
        }
    }
}

impl std::str::FromStr for CheckSize {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tiny" => Ok(CheckSize::Tiny),
            "small" => Ok(CheckSize::Small),
            other => Err(format!("unknown size `{other}` (expected tiny or small)")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub checks: Vec<ParamCheck>,
    /// Parameters whose ±eps probes crossed a kink and were redrawn.
    pub skipped_kinks: usize,
}

/// Conditioning and target for one check.
#[derive(Debug, Clone)]
pub struct CheckCase {
    pub cond: ConditioningInput,
    pub target: Vec<f64>,
    /// Replace the zero initial biases with small random values.
    pub jitter_biases: bool,
}

impl CheckCase {
    /// Smooth random envelope, random features, random target.
    pub fn random(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
        let n = config.output_length;
        let decay = rng.random_range(50.0..400.0);
        let envelope = Envelope {
            values: (0..n)
                .map(|i| (-(i as f64) / decay).exp() * rng.random_range(0.5..1.0))
                .collect(),
            sample_rate: SAMPLE_RATE,
        };
        let features = TimbralVector::from_array(std::array::from_fn(|_| rng.random_range(0.0..1.0)), true);
        let target = (0..n).map(|_| rng.random_range(-0.8..0.8)).collect();
        Self {
            cond: ConditioningInput::new(envelope, features),
            target,
            jitter_biases: true,
        }
    }

    /// Silent conditioning and silent target.
    pub fn zeros(config: &ModelConfig) -> Self {
        Self {
            cond: ConditioningInput::new(
                Envelope {
                    values: vec![0.0; config.output_length],
                    sample_rate: SAMPLE_RATE,
                },
                TimbralVector::uniform(0.0),
            ),
            target: vec![0.0; config.output_length],
            jitter_biases: false,
        }
    }
}

/// Compare analytic and central-difference gradients on `n_params` randomly
/// chosen parameters of a freshly built network. Relative error uses the
/// denominator `max(|analytic|, 1e-8)`.
///
/// A central difference is only meaningful where the loss is smooth on
/// `[θ - eps, θ + eps]`. A parameter whose probes flip the sign of any hidden
/// activation, any output residual or any real-valued spectral bin is
/// redrawn and counted in `skipped_kinks`.
pub fn gradient_check(
    config: &ModelConfig,
    loss: &LossConfig,
    eps: f64,
    n_params: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    gradient_check_case(config, loss, eps, n_params, seed, &CheckCase::random(config, seed))
}

pub fn gradient_check_case(
    config: &ModelConfig,
    loss: &LossConfig,
    eps: f64,
    n_params: usize,
    seed: u64,
    case: &CheckCase,
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidConfig(format!("eps {eps} must be positive")));
    }
    loss.validate()?;
    let config = config.clone().with_seed(seed);
    if config.parameter_count() > MAX_CHECK_PARAMETERS {
        return Err(Error::InvalidConfig(format!(
            "{} parameters is too many for finite differences",
            config.parameter_count()
        )));
    }
    let mut params: Parameters<f64> = build(&config)?.cast();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let layout = super::network::Layout::new(&config);
    if case.jitter_biases {
        for slot in layout.slots() {
            for b in &mut params.values[slot.bias_offset..slot.end()] {
                *b = rng.random_range(-0.1..0.1);
            }
        }
    }

    let input = case.cond.to_tensor::<f64>(&config)?;
    let n = config.output_length;
    let target_mag = match loss.mode {
        LossMode::Wave => None,
        _ => Some(stft_mag(&case.target, loss.stft_frame, loss.stft_hop)?),
    };
    let frame = loss.stft_frame;
    let window: Vec<f64> = (0..frame)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / frame as f64).cos())
        .collect();
    // Signs of every |a - b| term in the loss, and of the real-valued DC and
    // Nyquist bins whose magnitudes are |x|.
    let residual_signs = |y: &[f64]| -> Result<Vec<bool>> {
        let mut signs: Vec<bool> = y.iter().zip(&case.target).map(|(y, t)| y >= t).collect();
        if let Some(tm) = &target_mag {
            let ym = stft_mag(y, frame, loss.stft_hop)?;
            for (f, (yf, tf)) in ym.magnitudes.iter().zip(&tm.magnitudes).enumerate() {
                signs.extend(yf.iter().zip(tf).skip(loss.first_bin()).map(|(a, b)| a >= b));
                let seg = &y[f * loss.stft_hop..f * loss.stft_hop + frame];
                let dc: f64 = seg.iter().zip(&window).map(|(v, w)| v * w).sum();
                let nyquist: f64 = seg.iter().zip(&window).enumerate().map(|(i, (v, w))| if i % 2 == 0 { v * w } else { -v * w }).sum();
                if loss.first_bin() == 0 {
                    signs.push(dc >= 0.0);
                }
                signs.push(nyquist >= 0.0);
            }
        }
        Ok(signs)
    };
    let loss_at = |p: &Parameters<f64>| -> Result<(f64, Vec<bool>, Vec<bool>)> {
        let net = Network::new(&config, p)?;
        let trace = net.forward_trace(input.clone())?;
        let y = trace.output(n);
        Ok((total_loss(y, &case.target, loss)?, trace.activation_signs(), residual_signs(y)?))
    };

    let net = Network::new(&config, &params)?;
    let trace = net.forward_trace(input.clone())?;
    let (_, grad_out) = total_loss_grad(trace.output(n), &case.target, loss)?;
    let analytic = net.backward(&trace, &grad_out);
    let base_acts = trace.activation_signs();
    let base_res = residual_signs(trace.output(n))?;

    let order = rand::seq::index::sample(&mut rng, params.len(), params.len());
    let mut checks = Vec::with_capacity(n_params);
    let mut skipped_kinks = 0;
    let mut probe = params.clone();
    for index in order.into_iter() {
        if checks.len() == n_params {
            break;
        }
        let orig = probe.values[index];
        probe.values[index] = orig + eps;
        let (up, up_acts, up_res) = loss_at(&probe)?;
        probe.values[index] = orig - eps;
        let (down, down_acts, down_res) = loss_at(&probe)?;
        probe.values[index] = orig;
        if up_acts != base_acts || down_acts != base_acts || up_res != base_res || down_res != base_res {
            skipped_kinks += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic[index];
        checks.push(ParamCheck {
            index,
            analytic: a,
            numeric,
            rel_err: (a - numeric).abs() / a.abs().max(1e-8),
        });
    }
    checks.sort_by_key(|c| c.index);
    Ok(GradCheckReport {
        max_rel_err: checks.iter().map(|c| c.rel_err).fold(0.0, f64::max),
        checks,
        skipped_kinks,
    })
}
