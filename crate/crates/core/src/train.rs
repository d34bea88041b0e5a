//! Mini-batch Adam training with checkpoint and optimizer-state files.
//!
//! Optimizer state lives next to the checkpoint as `<checkpoint>.adam`:
//!
//! ```text
//! offset 0   8 bytes   magic "PSYNADAM"
//! offset 8   u64 LE    header length H
//! offset 16  H bytes   JSON header {version, step, epochs_done, parameter_count, content_hash}
//! offset 16+H          f32 LE first moments, then f32 LE second moments
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{split, Dataset, TrainingRecord};
use crate::error::{Error, Result};
use crate::losses::{loss_parts, total_loss_grad, LossConfig};
use crate::model::{
    build, f32_blob, f32_from_blob, read_container, write_container, Checkpoint, ConditioningInput, ModelConfig,
    Network, Parameters, Tensor,
};

const ADAM_MAGIC: &[u8; 8] = b"PSYNADAM";
pub const ADAM_STATE_VERSION: &str = "adam-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f32>,
    pub v: Vec<f32>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(params: &mut [f32], grads: &[f32], state: &mut AdamState, lr: f64, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() || params.len() != state.v.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if grads.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient);
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        let g = g as f64;
        let m1 = cfg.beta1 * *m as f64 + (1.0 - cfg.beta1) * g;
        let v1 = cfg.beta2 * *v as f64 + (1.0 - cfg.beta2) * g * g;
        *m = m1 as f32;
        *v = v1 as f32;
        let update = lr * (m1 / c1) / ((v1 / c2).sqrt() + cfg.eps);
        *p = (*p as f64 - update) as f32;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    /// Seeds mini-batch order.
    pub seed: u64,
    pub split_seed: u64,
    pub train_fraction: f64,
    /// Save every this many epochs; 0 saves only at the end.
    pub checkpoint_every: usize,
    /// Global gradient-norm ceiling; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 2500,
            batch_size: 16,
            learning_rate: 1e-4,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            seed: 0,
            split_seed: 0,
            train_fraction: 0.9,
            checkpoint_every: 0,
            clip_norm: Some(10.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::field("epochs", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::field("batch_size", "must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::field("learning_rate", "must be positive"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::field("clip_norm", "must be positive"));
            }
        }
        self.loss.validate()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    /// `None` when the evaluation split is empty.
    pub eval_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochLoss>,
    /// Total-loss value of every optimizer step, in order.
    pub step_losses: Vec<f64>,
    pub wall_time_s: f64,
    pub checkpoint: PathBuf,
    pub checkpoint_hash: String,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,eval_loss\n");
        for e in &self.epochs {
            let eval = e.eval_loss.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, eval));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Path of the optimizer state stored beside `checkpoint`.
pub fn adam_state_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.as_os_str().to_owned();
    name.push(".adam");
    PathBuf::from(name)
}

#[derive(Debug, Serialize, Deserialize)]
struct AdamHeader {
    version: String,
    step: u64,
    epochs_done: usize,
    parameter_count: usize,
    content_hash: String,
}

fn save_adam(path: &Path, state: &AdamState, epochs_done: usize) -> Result<()> {
    let mut blob = f32_blob(&state.m);
    blob.extend(f32_blob(&state.v));
    let header = AdamHeader {
        version: ADAM_STATE_VERSION.into(),
        step: state.step,
        epochs_done,
        parameter_count: state.m.len(),
        content_hash: hex::encode(Sha256::digest(&blob)),
    };
    write_container(path, ADAM_MAGIC, &serde_json::to_vec_pretty(&header)?, &blob)
}

fn load_adam(path: &Path) -> Result<(AdamState, usize)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, blob) = read_container(&bytes, ADAM_MAGIC)?;
    let header: AdamHeader = serde_json::from_slice(header).map_err(|_| Error::HashMismatch)?;
    if header.version != ADAM_STATE_VERSION {
        return Err(Error::VersionMismatch {
            expected: ADAM_STATE_VERSION.into(),
            found: header.version,
        });
    }
    if hex::encode(Sha256::digest(blob)) != header.content_hash {
        return Err(Error::HashMismatch);
    }
    if blob.len() != 8 * header.parameter_count {
        return Err(Error::ShapeMismatch("optimizer state size disagrees with header".into()));
    }
    let values = f32_from_blob(blob);
    let (m, v) = values.split_at(header.parameter_count);
    Ok((
        AdamState {
            step: header.step,
            m: m.to_vec(),
            v: v.to_vec(),
        },
        header.epochs_done,
    ))
}

struct Example<'a> {
    input: Tensor<f32>,
    target: &'a [f32],
}

/// Records cropped to the model's output length.
fn examples<'a>(records: &[&'a TrainingRecord], config: &ModelConfig) -> Result<Vec<Example<'a>>> {
    records
        .iter()
        .map(|r| {
            if r.x.len() < config.output_length {
                return Err(Error::ShapeMismatch(format!(
                    "record {} has {} samples, model outputs {}",
                    r.id,
                    r.x.len(),
                    config.output_length
                )));
            }
            Ok(Example {
                input: ConditioningInput::new(r.e.resized(config.output_length), r.fs).to_tensor(config)?,
                target: &r.x.samples[..config.output_length],
            })
        })
        .collect()
}

/// Batch order for one epoch; depends only on `(seed, epoch)`.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn mean_eval_loss(net: &Network<f32>, set: &[Example], loss: &LossConfig) -> Result<Option<f64>> {
    if set.is_empty() {
        return Ok(None);
    }
    let mut sum = 0.0;
    for ex in set {
        let out = net.forward_trace(ex.input.clone())?;
        sum += loss_parts(out.output(ex.target.len()), ex.target, loss)?.total as f64;
    }
    Ok(Some(sum / set.len() as f64))
}

struct Run<'a> {
    model: &'a ModelConfig,
    dataset: &'a Dataset,
    cfg: &'a TrainConfig,
    out: &'a Path,
}

impl Run<'_> {
    fn execute(
        &self,
        mut params: Parameters<f32>,
        mut state: AdamState,
        first_epoch: usize,
        epochs: usize,
    ) -> Result<(Checkpoint, TrainReport)> {
        let started = Instant::now();
        let (train_ids, eval_ids) = split(&self.dataset.manifest, self.cfg.train_fraction, self.cfg.split_seed)?;
        if train_ids.len() < self.cfg.batch_size {
            return Err(Error::InsufficientData(format!(
                "{} training records for batch size {}",
                train_ids.len(),
                self.cfg.batch_size
            )));
        }
        let train_set = examples(&self.dataset.select(&train_ids)?, self.model)?;
        let eval_set = examples(&self.dataset.select(&eval_ids)?, self.model)?;
        let normalizer = self.dataset.manifest.normalizer.clone();
        let save = |params: &Parameters<f32>, state: &AdamState, done: usize| -> Result<Checkpoint> {
            let ckpt = Checkpoint::new(self.model.clone(), normalizer.clone(), params.clone()).with_loss(self.cfg.loss);
            ckpt.save(self.out)?;
            save_adam(&adam_state_path(self.out), state, done)?;
            Ok(ckpt)
        };

        let mut report = TrainReport {
            epochs: Vec::with_capacity(epochs),
            step_losses: Vec::new(),
            wall_time_s: 0.0,
            checkpoint: self.out.to_path_buf(),
            checkpoint_hash: String::new(),
        };
        let n_params = params.len();
        let mut grad = vec![0.0f32; n_params];
        for epoch in first_epoch..first_epoch + epochs {
            let order = epoch_order(train_set.len(), self.cfg.seed, epoch);
            let mut epoch_sum = 0.0;
            let mut batches = 0;
            for (batch, idx) in order.chunks(self.cfg.batch_size).enumerate() {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / idx.len() as f32;
                let mut batch_loss = 0.0;
                {
                    let net = Network::new(self.model, &params)?;
                    for &i in idx {
                        let ex = &train_set[i];
                        let trace = net.forward_trace(ex.input.clone())?;
                        let (parts, g_out) = total_loss_grad(trace.output(ex.target.len()), ex.target, &self.cfg.loss)?;
                        if !(parts.total.is_finite()) {
                            return Err(Error::NonFiniteLoss {
                                epoch,
                                batch,
                                wave: parts.wave as f64,
                                stft: parts.stft as f64,
                            });
                        }
                        batch_loss += parts.total as f64;
                        for (a, g) in grad.iter_mut().zip(net.backward(&trace, &g_out)) {
                            *a += g * scale;
                        }
                    }
                }
                if let Some(limit) = self.cfg.clip_norm {
                    let norm = grad.iter().map(|&g| (g as f64) * (g as f64)).sum::<f64>().sqrt();
                    if norm > limit {
                        let s = (limit / norm) as f32;
                        grad.iter_mut().for_each(|g| *g *= s);
                    }
                }
                adam_step(&mut params.values, &grad, &mut state, self.cfg.learning_rate, &self.cfg.adam)?;
                if !params.is_finite() {
                    return Err(Error::NonFiniteParameters);
                }
                let mean = batch_loss / idx.len() as f64;
                report.step_losses.push(mean);
                epoch_sum += mean;
                batches += 1;
            }
            let net = Network::new(self.model, &params)?;
            let entry = EpochLoss {
                epoch,
                train_loss: epoch_sum / batches as f64,
                eval_loss: mean_eval_loss(&net, &eval_set, &self.cfg.loss)?,
            };
            log::info!(
                "epoch {epoch}: train {:.6} eval {}",
                entry.train_loss,
                entry.eval_loss.map_or("-".into(), |v| format!("{v:.6}"))
            );
            report.epochs.push(entry);
            let done = epoch + 1;
            if self.cfg.checkpoint_every > 0 && done % self.cfg.checkpoint_every == 0 && done < first_epoch + epochs {
                save(&params, &state, done)?;
            }
        }
        let ckpt = save(&params, &state, first_epoch + epochs)?;
        report.wall_time_s = started.elapsed().as_secs_f64();
        report.checkpoint_hash = ckpt.hash();
        Ok((ckpt, report))
    }
}

/// Train a fresh network on `dataset`, writing the checkpoint to `out` and
/// the optimizer state beside it.
pub fn train(model: &ModelConfig, dataset: &Dataset, cfg: &TrainConfig, out: impl AsRef<Path>) -> Result<(Checkpoint, TrainReport)> {
    cfg.validate()?;
    let params = build(model)?;
    let state = AdamState::new(params.len());
    Run {
        model,
        dataset,
        cfg,
        out: out.as_ref(),
    }
    .execute(params, state, 0, cfg.epochs)
}

/// Continue training from `checkpoint` (and its optimizer state) for
/// `cfg.epochs` further epochs. Zero further epochs returns the checkpoint
/// unchanged.
pub fn resume(
    checkpoint: impl AsRef<Path>,
    model: &ModelConfig,
    dataset: &Dataset,
    cfg: &TrainConfig,
    out: impl AsRef<Path>,
) -> Result<(Checkpoint, TrainReport)> {
    let checkpoint = checkpoint.as_ref();
    let ckpt = Checkpoint::load_for(checkpoint, model)?;
    if cfg.epochs == 0 {
        return Ok((
            ckpt.clone(),
            TrainReport {
                epochs: Vec::new(),
                step_losses: Vec::new(),
                wall_time_s: 0.0,
                checkpoint: checkpoint.to_path_buf(),
                checkpoint_hash: ckpt.hash(),
            },
        ));
    }
    cfg.validate()?;
    let (state, epochs_done) = load_adam(&adam_state_path(checkpoint))?;
    if state.m.len() != ckpt.params.len() {
        return Err(Error::ShapeMismatch(format!(
            "optimizer state for {} parameters, checkpoint has {}",
            state.m.len(),
            ckpt.params.len()
        )));
    }
    Run {
        model: &ckpt.config,
        dataset,
        cfg,
        out: out.as_ref(),
    }
    .execute(ckpt.params.clone(), state, epochs_done, cfg.epochs)
}
