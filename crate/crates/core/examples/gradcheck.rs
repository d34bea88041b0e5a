//! Check backpropagation against central finite differences.
//!
//! `cargo run --release --example gradcheck [tiny|small]`

use psynth::losses::{LossConfig, LossMode};
use psynth::model::{gradient_check, CheckSize};

fn main() -> psynth::Result<()> {
    let size: CheckSize = std::env::args().nth(1).as_deref().unwrap_or("tiny").parse().expect("size is tiny or small");
    let config = size.config();
    println!("{size:?}: {} parameters", config.parameter_count());
    for mode in [LossMode::Wave, LossMode::High, LossMode::Full] {
        let report = gradient_check(&config, &LossConfig::new(mode), 1e-4, 100, 0)?;
        let worst = report
            .checks
            .iter()
            .max_by(|a, b| a.rel_err.total_cmp(&b.rel_err))
            .expect("at least one check");
        println!(
            "{mode:>5}: max rel err {:.2e} over {} params (param {}: analytic {:.4e}, numeric {:.4e}), {} kinks redrawn",
            report.max_rel_err,
            report.checks.len(),
            worst.index,
            worst.analytic,
            worst.numeric,
            report.skipped_kinks
        );
    }
    Ok(())
}
