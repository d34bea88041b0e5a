//! Build a synthetic kick dataset with known generator parameters.
//!
//! `cargo run --release --example oracle_dataset -- OUT_DIR [COUNT] [SEED]`

use psynth::dataset::{build_oracle_dataset, oracle_params, Dataset};
use psynth::features::Feature;

fn main() -> psynth::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "oracle-data".into());
    let count = args.next().map_or(32, |s| s.parse().expect("COUNT is a number"));
    let seed = args.next().map_or(42, |s| s.parse().expect("SEED is a number"));

    let manifest = build_oracle_dataset(count, seed, &out)?;
    println!("{} records in {out}", manifest.records.len());
    for f in Feature::ALL {
        let r = manifest.normalizer.range(f);
        println!("{:>10}  [{:9.4}, {:9.4}]{}", f.name(), r.min, r.max, if r.degenerate { " degenerate" } else { "" });
    }

    let dataset = Dataset::load(&out)?;
    let first = &dataset.records[0];
    let params = oracle_params(&out, &first.id)?.expect("oracle records carry their parameters");
    println!(
        "{}: f0 {:.1} Hz, noise {:.2}, normalized brightness {:.3}",
        first.id, params.f0, params.noise_mix, first.fs.brightness
    );
    Ok(())
}
