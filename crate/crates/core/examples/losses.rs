//! Compare the three training losses on a pair of kicks.
//!
//! `cargo run --release --example losses`

use psynth::dataset::{synth_oracle, OracleParams};
use psynth::losses::{loss_parts, LossConfig, LossMode};

fn main() -> psynth::Result<()> {
    let target = synth_oracle(&OracleParams::default(), 16_000, 16_000)?;
    let candidates = [
        ("identical", OracleParams::default()),
        ("higher pitch", OracleParams { f0: 90.0, ..OracleParams::default() }),
        ("noisier", OracleParams { noise_mix: 0.8, ..OracleParams::default() }),
        ("other noise seed", OracleParams { noise_seed: 9, ..OracleParams::default() }),
    ];
    println!("{:<18} {:>8} {:>8} {:>8}", "candidate", "wave", "high", "full");
    for (name, p) in candidates {
        let pred = synth_oracle(&p, 16_000, 16_000)?;
        let row: Vec<String> = [LossMode::Wave, LossMode::High, LossMode::Full]
            .into_iter()
            .map(|m| loss_parts(&pred.samples, &target.samples, &LossConfig::new(m)).map(|l| format!("{:8.4}", l.total)))
            .collect::<psynth::Result<_>>()?;
        println!("{name:<18} {}", row.join(" "));
    }
    Ok(())
}
