//! Measure the seven timbral descriptors and the energy envelope of a sound.
//!
//! `cargo run --release --example extract_features [file.wav]`
//!
//! Without an argument a synthetic kick is analysed.

use psynth::audio::load_wav;
use psynth::dataset::{synth_oracle, OracleParams, Preprocessing};
use psynth::features::{extract_timbral, Feature};

fn main() -> psynth::Result<()> {
    let raw = match std::env::args().nth(1) {
        Some(path) => load_wav(path)?.0,
        None => synth_oracle(&OracleParams::default(), 16_000, 16_000)?,
    };
    let pre = Preprocessing::default();
    let (clip, truncated) = pre.prepare(&raw)?;
    let features = extract_timbral(&clip)?;
    println!("clip: {} samples at {} Hz ({truncated} truncated)", clip.len(), clip.sample_rate);
    for (f, v) in Feature::ALL.iter().zip(features.to_array()) {
        println!("{:>10}  {v:10.4}", f.name());
    }
    let env = pre.envelope(&clip);
    let peak = env.values.iter().copied().fold(0.0, f64::max);
    let peak_at = env.values.iter().position(|&v| v == peak).unwrap_or(0);
    println!("envelope peak {peak:.3} at sample {peak_at}");
    let preview: Vec<String> = env.preview(16).iter().map(|v| format!("{v:.2}")).collect();
    println!("envelope preview {}", preview.join(" "));
    Ok(())
}
