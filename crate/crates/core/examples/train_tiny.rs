//! Train a small network on synthetic kicks, then resume it.
//!
//! `cargo run --release --example train_tiny -- [OUT_DIR]`
//!
//! Writes the checkpoint, its optimizer state and a per-epoch loss CSV.

use std::path::PathBuf;

use psynth::dataset::{build_oracle_dataset, Dataset};
use psynth::losses::{LossConfig, LossMode};
use psynth::model::ModelConfig;
use psynth::train::{resume, train, TrainConfig};

fn main() -> psynth::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "tiny-run".into()));
    let data = out.join("data");
    build_oracle_dataset(16, 1, &data)?;
    let dataset = Dataset::load(&data)?;

    let model = ModelConfig::tiny();
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 4,
        learning_rate: 1e-3,
        loss: LossConfig::new(LossMode::Full),
        ..TrainConfig::default()
    };
    let ckpt_path = out.join("tiny.ckpt");
    let (_, first) = train(&model, &dataset, &cfg, &ckpt_path)?;
    let (ckpt, more) = resume(&ckpt_path, &model, &dataset, &TrainConfig { epochs: 10, ..cfg }, &ckpt_path)?;

    let mut report = first;
    report.epochs.extend(more.epochs);
    report.write_csv(out.join("loss.csv"))?;
    for e in report.epochs.iter().step_by(5) {
        println!("epoch {:3}  train {:.4}  eval {:.4}", e.epoch, e.train_loss, e.eval_loss.unwrap_or(f64::NAN));
    }
    println!("checkpoint {} ({} parameters)", ckpt.hash(), ckpt.params.len());
    Ok(())
}
