//! End-to-end run at desk scale: synthesize a dataset, train the reduced
//! network, reload the checkpoint and score coherence on held-out records.
//!
//! `cargo run --release --example desk_pipeline -- [OUT_DIR] [RECORDS] [EPOCHS]`
//!
//! The defaults (200 records, 200 epochs) take roughly half an hour on one core.

use std::path::PathBuf;

use psynth::coherence::{evaluate, ModelBackend, SweepLevels};
use psynth::dataset::{build_oracle_dataset, split, Dataset};
use psynth::model::{Checkpoint, ModelConfig};
use psynth::train::{train, TrainConfig};

fn main() -> psynth::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "desk-run".into()));
    let records = args.next().map_or(200, |s| s.parse().expect("RECORDS is a number"));
    let epochs = args.next().map_or(200, |s| s.parse().expect("EPOCHS is a number"));

    let data = out.join("data");
    build_oracle_dataset(records, 42, &data)?;
    let dataset = Dataset::load(&data)?;
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let ckpt_path = out.join("desk.ckpt");
    let (trained, report) = train(&ModelConfig::desk(), &dataset, &cfg, &ckpt_path)?;
    report.write_csv(out.join("loss.csv"))?;

    let reloaded = Checkpoint::load(&ckpt_path)?;
    assert_eq!(reloaded.hash(), trained.hash());
    println!("checkpoint {} reloads bit-exact", &trained.hash()[..16]);

    let (_, eval_ids) = split(&dataset.manifest, cfg.train_fraction, cfg.split_seed)?;
    let eval = dataset.select(&eval_ids)?;
    let normalizer = reloaded.normalizer.clone();
    let coherence = evaluate(&ModelBackend { checkpoint: reloaded }, &eval, &normalizer, &SweepLevels::default())?;
    coherence.save(out.join("coherence.json"))?;
    print!("{}", coherence.to_table());
    Ok(())
}
