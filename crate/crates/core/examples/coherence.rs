//! Run the feature-coherence harness against the reference backends, or
//! against a trained checkpoint.
//!
//! `cargo run --release --example coherence -- [CHECKPOINT]`

use psynth::coherence::{evaluate, ConstantBackend, ModelBackend, OracleBackend, SweepLevels, SynthBackend};
use psynth::dataset::{build_oracle_dataset, Dataset};
use psynth::model::Checkpoint;

fn main() -> psynth::Result<()> {
    let dir = std::env::temp_dir().join("psynth-coherence-example");
    build_oracle_dataset(50, 3, &dir)?;
    let dataset = Dataset::load(&dir)?;
    let records: Vec<_> = dataset.records.iter().collect();
    let levels = SweepLevels::default();

    let mut backends: Vec<(Box<dyn SynthBackend>, _)> = vec![
        (Box::new(OracleBackend), dataset.manifest.normalizer.clone()),
        (Box::new(ConstantBackend::default()), dataset.manifest.normalizer.clone()),
    ];
    if let Some(path) = std::env::args().nth(1) {
        let checkpoint = Checkpoint::load(path)?;
        let normalizer = checkpoint.normalizer.clone();
        backends.push((Box::new(ModelBackend { checkpoint }), normalizer));
    }
    for (backend, normalizer) in &backends {
        let report = evaluate(backend.as_ref(), &records, normalizer, &levels)?;
        println!("== {}", report.backend);
        print!("{}", report.to_table());
    }
    Ok(())
}
