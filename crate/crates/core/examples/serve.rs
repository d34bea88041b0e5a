//! Start the HTTP inference service.
//!
//! `cargo run --release --example serve -- [CHECKPOINT] [PORT]`
//!
//! Try it with
//!
//! ```text
//! curl localhost:8080/healthz
//! curl localhost:8080/api/v1/model
//! curl -X POST localhost:8080/api/v1/synthesize -H 'content-type: application/json' \
//!   -d '{"features": {"hardness": 0.5, "depth": 0.5, "brightness": 0.8, "roughness": 0.2,
//!        "boominess": 0.5, "warmth": 0.5, "sharpness": 0.3},
//!        "envelope": {"kind": "ad", "attack_ms": 2, "decay_ms": 250, "amplitude": 1}}' -o out.wav
//! curl -X POST localhost:8080/api/v1/analyze --data-binary @out.wav
//! ```

use psynth::service::{serve, ServiceConfig, DEFAULT_PORT};

#[tokio::main]
async fn main() -> psynth::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let checkpoint = args.next().map(Into::into);
    let port = args.next().map_or(DEFAULT_PORT, |p| p.parse().expect("PORT is a number"));
    serve(ServiceConfig {
        checkpoint,
        port,
        ..ServiceConfig::default()
    })
    .await
}
