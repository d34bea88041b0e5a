use std::io::{Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

fn psynth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psynth"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const FEATURES: &str = r#"{"hardness": 0.5, "depth": 0.5, "brightness": 0.7, "roughness": 0.2, "boominess": 0.5, "warmth": 0.5, "sharpness": 0.3}"#;
const ENVELOPE: &str = r#"{"kind": "ad", "attack_ms": 2, "decay_ms": 200, "amplitude": 1}"#;

#[test]
fn synth_data_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        assert_eq!(code(&psynth(&["synth-data", "--n", "10", "--seed", "42", "--out", s(out)])), 0);
    }
    for name in ["manifest.json", "oracle-0000.wav", "oracle-0009.features.json"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let out = psynth(&["synth-data", "--n", "4", "--out", s(&dir.path().join("c"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn ingest_rerun_gives_identical_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&psynth(&["synth-data", "--n", "8", "--seed", "1", "--out", s(&data)])), 0);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = psynth(&["ingest", "--in", s(&data), "--out", s(out), "--name", "kicks"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = std::fs::read(a.join("manifest.json")).unwrap();
    assert_eq!(manifest, std::fs::read(b.join("manifest.json")).unwrap());
    let v: Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!(v["records"].as_array().unwrap().len(), 8);
}

#[test]
fn train_generate_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let ckpt = dir.path().join("tiny.ckpt");
    let csv = dir.path().join("loss.csv");
    assert_eq!(code(&psynth(&["synth-data", "--n", "10", "--seed", "3", "--out", s(&data)])), 0);

    let out = psynth(&[
        "train", "--data", s(&data), "--mode", "full", "--epochs", "6", "--batch", "3", "--lr", "1e-3",
        "--seed", "2", "--config", "tiny", "--out", s(&ckpt), "--csv", s(&csv),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<Vec<String>> = std::fs::read_to_string(&csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    let loss = |r: &Vec<String>| r[1].parse::<f64>().unwrap();
    assert!(loss(&rows[5]) < loss(&rows[0]), "{rows:?}");

    let (wav_a, wav_b) = (dir.path().join("a.wav"), dir.path().join("b.wav"));
    for wav in [&wav_a, &wav_b] {
        let out = psynth(&["generate", "--ckpt", s(&ckpt), "--features", FEATURES, "--envelope", ENVELOPE, "--out", s(wav)]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let bytes = std::fs::read(&wav_a).unwrap();
    assert_eq!(bytes, std::fs::read(&wav_b).unwrap());
    assert_eq!(bytes.len(), 44 + 2 * 16_000);

    let features_file = dir.path().join("f.json");
    std::fs::write(&features_file, FEATURES.replace("0.7", "1.7")).unwrap();
    let out = psynth(&["generate", "--ckpt", s(&ckpt), "--features", s(&features_file), "--envelope", ENVELOPE, "--out", s(&wav_a)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("brightness"));

    let report = dir.path().join("coherence.json");
    let out = psynth(&["eval-coherence", "--ckpt", s(&ckpt), "--data", s(&data), "--report", s(&report), "--all-records"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["records"], 10);
    assert_eq!(v["levels"]["low"], 0.2);
    assert_eq!(v["features"].as_array().unwrap().len(), 7);
}

#[test]
fn resume_continues_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(code(&psynth(&["synth-data", "--n", "8", "--seed", "4", "--out", s(&data)])), 0);
    let common = ["--data", s(&data), "--batch", "4", "--config", "tiny", "--output-length", "2048", "--internal-length", "2048"];
    let straight = dir.path().join("straight.ckpt");
    let first = dir.path().join("first.ckpt");
    let resumed = dir.path().join("resumed.ckpt");
    let run = |extra: &[&str]| {
        let args: Vec<&str> = ["train"].iter().chain(&common).chain(extra).copied().collect();
        let out = psynth(&args);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["--epochs", "4", "--out", s(&straight)]);
    run(&["--epochs", "2", "--out", s(&first)]);
    let resume_args = ["--epochs", "2", "--resume", s(&first), "--out", s(&resumed)];
    let args: Vec<&str> = ["train", "--data", s(&data), "--batch", "4"].iter().chain(&resume_args).copied().collect();
    let out = psynth(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&straight).unwrap(), std::fs::read(&resumed).unwrap());
}

#[test]
fn gradcheck_exit_codes() {
    let out = psynth(&["gradcheck", "--size", "tiny", "--mode", "full", "--eps", "1e-4", "--n-params", "30"]);
    assert_eq!(code(&out), 0);
    let line = String::from_utf8_lossy(&out.stdout);
    let err: f64 = line.trim().rsplit('=').next().unwrap().parse().unwrap();
    assert!(err < 1e-3, "{line}");
    assert_eq!(code(&psynth(&["gradcheck", "--eps", "0"])), 1);
    assert_eq!(code(&psynth(&["gradcheck", "--n-params", "10", "--threshold", "1e-30"])), 2);
}

#[test]
fn eval_with_oracle_backend() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let report = dir.path().join("r.json");
    assert_eq!(code(&psynth(&["synth-data", "--n", "20", "--seed", "5", "--out", s(&data)])), 0);
    let out = psynth(&["eval-coherence", "--oracle-backend", "--data", s(&data), "--report", s(&report), "--all-records"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    for f in v["features"].as_array().unwrap() {
        if f["controlled"] == true {
            assert_eq!((f["e1"].as_f64(), f["e2"].as_f64(), f["e3"].as_f64()), (Some(1.0), Some(1.0), Some(1.0)), "{f}");
        }
    }
}

#[test]
fn serve_answers_healthz_and_stops_on_sigint() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_psynth"))
        .args(["serve", "--port", &port.to_string()])
        .env_remove("PSYNTH_CKPT")
        .env_remove("PSYNTH_PORT")
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let started = Instant::now();
    let response = loop {
        if let Ok(mut stream) = TcpStream::connect(("127.0.0.1", port)) {
            stream.write_all(b"GET /healthz HTTP/1.1\r\nhost: localhost\r\nconnection: close\r\n\r\n").unwrap();
            let mut buf = String::new();
            stream.read_to_string(&mut buf).unwrap();
            break buf;
        }
        assert!(started.elapsed() < Duration::from_secs(20), "server did not start");
        std::thread::sleep(Duration::from_millis(50));
    };
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let status = Command::new("kill").args(["-INT", &child.id().to_string()]).status().unwrap();
    assert!(status.success());
    assert!(child.wait().unwrap().success());

    let out = psynth(&["serve", "--ckpt", "/nonexistent/model.ckpt", "--port", "0"]);
    assert_eq!(code(&out), 2);
}
