//! Render a sound from a checkpoint for a requested timbre and envelope.
//!
//! `cargo run --release --example generate -- [CHECKPOINT] [OUT.wav]`
//!
//! Without a checkpoint an untrained tiny network is used, which shows the
//! plumbing but not the sound quality.

use psynth::audio::{write_wav, Waveform};
use psynth::features::{extract_timbral, parametric_envelope, FeatureNormalizer, TimbralVector};
use psynth::model::{build, forward, Checkpoint, ConditioningInput, ModelConfig};

fn main() -> psynth::Result<()> {
    let mut args = std::env::args().skip(1);
    let checkpoint = match args.next() {
        Some(path) => Checkpoint::load(path)?,
        None => {
            let config = ModelConfig::tiny().with_seed(7);
            let normalizer = FeatureNormalizer::fit(&[
                TimbralVector::from_array([0.0; 7], false),
                TimbralVector::from_array([100.0, 1.0, 2000.0, 1.0, 1.0, 1.0, 5.0], false),
            ])?;
            Checkpoint::new(config.clone(), normalizer, build(&config)?)
        }
    };
    let out = args.next().unwrap_or_else(|| "generated.wav".into());

    let features = TimbralVector::from_array([0.7, 0.3, 0.8, 0.2, 0.4, 0.5, 0.6], true);
    let envelope = parametric_envelope(2.0, 250.0, 1.0, checkpoint.config.output_length, 16_000);
    let cond = ConditioningInput::new(envelope, features);
    let sound: Waveform = forward(&checkpoint.params, &checkpoint.config, &cond)?;
    write_wav(&sound, &out)?;
    println!("wrote {out}: {} samples, peak {:.3}", sound.len(), sound.peak());

    match extract_timbral(&sound.quantized()) {
        Ok(raw) => {
            let measured = checkpoint.normalizer.normalize(&raw);
            println!("requested  {:?}", features.to_array());
            println!("measured   {:?}", measured.to_array().map(|v| (v * 1000.0).round() / 1000.0));
        }
        Err(e) => println!("output could not be analysed: {e}"),
    }
    Ok(())
}
