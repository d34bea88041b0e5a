//! Turn a folder of WAV files into a training dataset.
//!
//! `cargo run --release --example ingest_folder -- IN_DIR OUT_DIR`
//!
//! Files are resampled to 16 kHz, trimmed of leading silence and padded or
//! truncated to one second. Unreadable files are logged and skipped.

use psynth::dataset::{ingest, Preprocessing};

fn main() -> psynth::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let (Some(input), Some(out)) = (args.next(), args.next()) else {
        eprintln!("usage: ingest_folder IN_DIR OUT_DIR");
        std::process::exit(1);
    };
    let manifest = ingest(&input, &out, "folder", &Preprocessing::default())?;
    for r in &manifest.records {
        println!("{:<24} {:<32} truncated {}", r.id, r.source, r.truncated);
    }
    Ok(())
}
