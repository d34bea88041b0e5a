//! Training records: folder ingestion, the synthetic oracle generator,
//! on-disk manifests and train/eval splitting.
//!
//! On disk a dataset is a directory holding `manifest.json`, one
//! `<id>.wav` per record and one `<id>.features.json` sidecar per record.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{
    load_wav, pad_to_length, resample, trim_silence, write_wav, Waveform, CLIP_LENGTH, DEFAULT_TRIM_DB, SAMPLE_RATE,
};
use crate::error::{Error, Result};
use crate::features::{
    envelope_follow, extract_timbral, Envelope, FeatureNormalizer, TimbralVector, DEFAULT_ATTACK_MS,
    DEFAULT_RELEASE_MS,
};

pub const DATASET_VERSION: &str = "dataset-v1";
pub const MANIFEST_FILE: &str = "manifest.json";
/// Smallest oracle dataset accepted.
pub const MIN_ORACLE_COUNT: usize = 8;

/// One preprocessed sound with its conditioning.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRecord {
    pub id: String,
    pub x: Waveform,
    pub e: Envelope,
    pub fs_raw: TimbralVector,
    pub fs: TimbralVector,
}

impl TrainingRecord {
    pub fn validate(&self, length: usize) -> Result<()> {
        if self.x.len() != length || self.e.len() != length {
            return Err(Error::ShapeMismatch(format!(
                "record {}: waveform {} and envelope {} samples, expected {length}",
                self.id,
                self.x.len(),
                self.e.len()
            )));
        }
        self.fs.validate_normalized()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessing {
    pub sample_rate: u32,
    pub length: usize,
    pub trim_db: f64,
    pub attack_ms: f64,
    pub release_ms: f64,
}

impl Default for Preprocessing {
    fn default() -> Self {
        Self {
            sample_rate: SAMPLE_RATE,
            length: CLIP_LENGTH,
            trim_db: DEFAULT_TRIM_DB,
            attack_ms: DEFAULT_ATTACK_MS,
            release_ms: DEFAULT_RELEASE_MS,
        }
    }
}

impl Preprocessing {
    /// Resample, trim, pad or truncate and quantize to 16 bits, so the
    /// result is exactly what the stored WAV decodes to.
    pub fn prepare(&self, w: &Waveform) -> Result<(Waveform, usize)> {
        let trimmed = trim_silence(&resample(w, self.sample_rate), self.trim_db)?;
        let padded = pad_to_length(&trimmed, self.length);
        Ok((padded.waveform.quantized(), padded.truncated))
    }

    pub fn envelope(&self, clip: &Waveform) -> Envelope {
        envelope_follow(clip, self.attack_ms, self.release_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub source: String,
    pub features: TimbralVector,
    /// Samples dropped from the tail to fit the clip length.
    #[serde(default)]
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: String,
    pub name: String,
    pub preprocessing: Preprocessing,
    pub normalizer: FeatureNormalizer,
    pub records: Vec<ManifestRecord>,
}

impl DatasetManifest {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Self = serde_json::from_str(&text)?;
        if manifest.version != DATASET_VERSION {
            return Err(Error::VersionMismatch {
                expected: DATASET_VERSION.into(),
                found: manifest.version,
            });
        }
        let mut seen = BTreeSet::new();
        for r in &manifest.records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::field("records", format!("duplicate id {}", r.id)));
            }
        }
        Ok(manifest)
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    id: String,
    source: String,
    features_raw: TimbralVector,
    features: TimbralVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleParams>,
}

/// Parameters of the synthetic kick-style generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleParams {
    pub f0: f64,
    pub pitch_sweep_depth: f64,
    pub amp_decay_ms: f64,
    pub noise_mix: f64,
    pub noise_decay_ms: f64,
    pub click_level: f64,
    pub noise_seed: u64,
}

impl Default for OracleParams {
    fn default() -> Self {
        Self {
            f0: 60.0,
            pitch_sweep_depth: 0.5,
            amp_decay_ms: 200.0,
            noise_mix: 0.2,
            noise_decay_ms: 80.0,
            click_level: 0.2,
            noise_seed: 0,
        }
    }
}

impl OracleParams {
    pub fn validate(&self) -> Result<()> {
        if !(30.0..=4000.0).contains(&self.f0) {
            return Err(Error::field("f0", format!("{} Hz not in [30, 4000]", self.f0)));
        }
        if !(self.pitch_sweep_depth >= 0.0 && self.pitch_sweep_depth.is_finite()) {
            return Err(Error::field("pitch_sweep_depth", "must be finite and non-negative"));
        }
        for (name, v) in [("amp_decay_ms", self.amp_decay_ms), ("noise_decay_ms", self.noise_decay_ms)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::field(name, "must be positive"));
            }
        }
        for (name, v) in [("noise_mix", self.noise_mix), ("click_level", self.click_level)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::field(name, "must be in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Draw from the dataset ranges: f0 log-uniform in [40, 2000] Hz, decays
    /// uniform in [30, 500] ms, mixes and sweep depth uniform in [0, 1].
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self {
            f0: 40.0 * 50f64.powf(rng.random_range(0.0..=1.0)),
            pitch_sweep_depth: rng.random_range(0.0..=1.0),
            amp_decay_ms: rng.random_range(30.0..=500.0),
            noise_mix: rng.random_range(0.0..=1.0),
            noise_decay_ms: rng.random_range(30.0..=500.0),
            click_level: rng.random_range(0.0..=1.0),
            noise_seed: rng.random(),
        }
    }
}

/// Swept decaying sine plus decaying white noise plus a 32-sample click,
/// peak-normalized to 0.9.
pub fn synth_oracle(p: &OracleParams, n: usize, sample_rate: u32) -> Result<Waveform> {
    p.validate()?;
    let sr = sample_rate as f64;
    let amp_tau = sr * p.amp_decay_ms / 1000.0;
    let noise_tau = sr * p.noise_decay_ms / 1000.0;
    let sweep_tau = 0.01 * sr;
    let mut rng = ChaCha8Rng::seed_from_u64(p.noise_seed);
    let mut phase = 0.0f64;
    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64;
            let tone = (-t / amp_tau).exp() * (2.0 * PI * phase).sin();
            phase += p.f0 * (1.0 + p.pitch_sweep_depth * (-t / sweep_tau).exp()) / sr;
            let u: f64 = rng.random_range(-1.0..=1.0);
            let click = if i < 32 {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (1.0 - t / 32.0)
            } else {
                0.0
            };
            tone + p.noise_mix * (-t / noise_tau).exp() * u + p.click_level * click
        })
        .collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.9 / peak);
    }
    Ok(Waveform::new(x.into_iter().map(|v| v as f32).collect(), sample_rate))
}

/// A loaded dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub records: Vec<TrainingRecord>,
}

impl Dataset {
    /// Read the manifest and every record, recomputing envelopes from the
    /// stored audio and checking record invariants.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest = DatasetManifest::load(dir)?;
        let pre = &manifest.preprocessing;
        let records = manifest
            .records
            .iter()
            .map(|r| {
                let (x, _) = load_wav(dir.join(format!("{}.wav", r.id)))?;
                let side_path = dir.join(format!("{}.features.json", r.id));
                let text = std::fs::read_to_string(&side_path).map_err(|e| Error::io(&side_path, e))?;
                let side: Sidecar = serde_json::from_str(&text)?;
                let record = TrainingRecord {
                    id: r.id.clone(),
                    e: pre.envelope(&x),
                    x,
                    fs_raw: side.features_raw,
                    fs: side.features,
                };
                record.validate(pre.length)?;
                Ok(record)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { manifest, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records whose ids appear in `ids`, in `ids` order.
    pub fn select(&self, ids: &[String]) -> Result<Vec<&TrainingRecord>> {
        ids.iter()
            .map(|id| {
                self.records
                    .iter()
                    .find(|r| &r.id == id)
                    .ok_or_else(|| Error::field("id", format!("no record {id}")))
            })
            .collect()
    }
}

struct Prepared {
    id: String,
    source: String,
    clip: Waveform,
    truncated: usize,
    features: TimbralVector,
    oracle: Option<OracleParams>,
}

fn prepare_one(pre: &Preprocessing, id: String, source: String, w: &Waveform, oracle: Option<OracleParams>) -> Result<Prepared> {
    let (clip, truncated) = pre.prepare(w)?;
    if truncated > 0 {
        log::warn!("{source}: truncated {truncated} samples");
    }
    let features = extract_timbral(&clip)?;
    Ok(Prepared {
        id,
        source,
        clip,
        truncated,
        features,
        oracle,
    })
}

fn persist(out: &Path, name: &str, pre: &Preprocessing, items: Vec<Prepared>) -> Result<DatasetManifest> {
    if items.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} usable sounds, need at least 2",
            items.len()
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let raw: Vec<TimbralVector> = items.iter().map(|p| p.features).collect();
    let normalizer = FeatureNormalizer::fit(&raw)?;
    let mut records = Vec::with_capacity(items.len());
    for p in items {
        write_wav(&p.clip, out.join(format!("{}.wav", p.id)))?;
        let side = Sidecar {
            id: p.id.clone(),
            source: p.source.clone(),
            features_raw: p.features,
            features: normalizer.normalize(&p.features),
            oracle: p.oracle,
        };
        let side_path = out.join(format!("{}.features.json", p.id));
        let mut text = serde_json::to_string_pretty(&side)?;
        text.push('\n');
        std::fs::write(&side_path, text).map_err(|e| Error::io(&side_path, e))?;
        records.push(ManifestRecord {
            id: p.id,
            source: p.source,
            features: p.features,
            truncated: p.truncated,
        });
    }
    let manifest = DatasetManifest {
        version: DATASET_VERSION.into(),
        name: name.into(),
        preprocessing: pre.clone(),
        normalizer,
        records,
    };
    manifest.save(out)?;
    Ok(manifest)
}

fn sanitize_id(stem: &str) -> String {
    let id: String = stem
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if id.is_empty() {
        "sound".into()
    } else {
        id
    }
}

/// WAV files directly inside `dir`, sorted by file name.
fn wav_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Preprocess every WAV in `dir` into a dataset at `out`. Files that fail to
/// decode or hold no signal are logged and skipped.
pub fn ingest(dir: impl AsRef<Path>, out: impl AsRef<Path>, name: &str, pre: &Preprocessing) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let mut used = BTreeSet::new();
    let mut items = Vec::new();
    for path in wav_files(dir)? {
        let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let base = sanitize_id(stem);
        let mut id = base.clone();
        let mut k = 2;
        while used.contains(&id) {
            id = format!("{base}-{k}");
            k += 1;
        }
        let result = load_wav(&path).and_then(|(w, _)| prepare_one(pre, id.clone(), file_name.clone(), &w, None));
        match result {
            Ok(p) => {
                used.insert(id);
                items.push(p);
            }
            Err(e) => log::warn!("skipping {file_name}: {e}"),
        }
    }
    persist(out.as_ref(), name, pre, items)
}

/// Generate `count` oracle sounds with parameters drawn from `seed` and
/// pass them through the ingest transform.
pub fn build_oracle_dataset(count: usize, seed: u64, out: impl AsRef<Path>) -> Result<DatasetManifest> {
    if count < MIN_ORACLE_COUNT {
        return Err(Error::InsufficientData(format!(
            "oracle dataset needs at least {MIN_ORACLE_COUNT} sounds, got {count}"
        )));
    }
    let pre = Preprocessing::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(count);
    for i in 0..count {
        let params = OracleParams::sample(&mut rng);
        let w = synth_oracle(&params, pre.length, pre.sample_rate)?;
        let id = format!("oracle-{i:04}");
        items.push(prepare_one(&pre, id, "oracle".into(), &w, Some(params))?);
    }
    persist(out.as_ref(), "ORACLE", &pre, items)
}

/// Oracle parameters stored alongside a record, if it was synthesized.
pub fn oracle_params(dir: impl AsRef<Path>, id: &str) -> Result<Option<OracleParams>> {
    let path = dir.as_ref().join(format!("{id}.features.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str::<Sidecar>(&text)?.oracle)
}

/// Seeded shuffle of the manifest ids into `⌈fraction·N⌉` training ids and
/// the remainder for evaluation.
pub fn split(manifest: &DatasetManifest, train_fraction: f64, seed: u64) -> Result<(Vec<String>, Vec<String>)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::field("train_fraction", "must be in (0, 1]"));
    }
    let mut ids = manifest.ids();
    if ids.len() < 2 {
        return Err(Error::InsufficientData(format!("{} records, need at least 2", ids.len())));
    }
    ids.sort();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    // 0.9 * 10 is 9.000000000000002 in binary floating point.
    let n_train = ((train_fraction * ids.len() as f64) - 1e-9).ceil() as usize;
    let eval = ids.split_off(n_train.min(ids.len()));
    Ok((ids, eval))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::encode_wav;
    use crate::dsp::Frames;
    use crate::features::Feature;

    fn tone(f: f64, decay_s: f64, n: usize) -> Waveform {
        Waveform::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / 16_000.0;
                    (0.8 * (-t / decay_s).exp() * (2.0 * PI * f * t).sin()) as f32
                })
                .collect(),
            16_000,
        )
    }

    fn write_folder(dir: &Path, sounds: &[(&str, Waveform)]) {
        for (name, w) in sounds {
            write_wav(w, dir.join(name)).unwrap();
        }
    }

    #[test]
    fn pure_sine_peaks_at_f0() {
        let p = OracleParams {
            f0: 440.0,
            pitch_sweep_depth: 0.0,
            noise_mix: 0.0,
            click_level: 0.0,
            amp_decay_ms: 400.0,
            ..OracleParams::default()
        };
        let w = synth_oracle(&p, 16_000, 16_000).unwrap();
        assert!((w.peak() - 0.9).abs() < 1e-6);
        let x: Vec<f64> = w.samples.iter().map(|&v| v as f64).collect();
        let frames = Frames::analyze(&x, 16_000.0);
        let mag = frames.mean_magnitude();
        let peak = (0..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
        let expected = 440.0 / frames.bin_hz(1);
        assert!((peak as f64 - expected).abs() <= 1.0, "{peak} vs {expected}");
    }

    #[test]
    fn raising_f0_brightens_and_thins() {
        let at = |f0| {
            let p = OracleParams {
                f0,
                ..OracleParams::default()
            };
            extract_timbral(&synth_oracle(&p, 16_000, 16_000).unwrap()).unwrap()
        };
        let (lo, hi) = (at(50.0), at(200.0));
        assert!(hi.brightness > lo.brightness);
        assert!(hi.depth < lo.depth);
    }

    #[test]
    fn brightness_strictly_increases_over_f0_sweep() {
        let mut last = f64::NEG_INFINITY;
        for f0 in [40.0, 60.0, 90.0, 135.0, 200.0, 300.0, 450.0, 700.0, 1000.0, 1500.0, 2000.0] {
            let p = OracleParams {
                f0,
                noise_mix: 0.3,
                ..OracleParams::default()
            };
            let b = extract_timbral(&synth_oracle(&p, 16_000, 16_000).unwrap()).unwrap().brightness;
            assert!(b > last, "f0 {f0}: {b} after {last}");
            last = b;
        }
    }

    #[test]
    fn oracle_deterministic_and_validated() {
        let p = OracleParams::default();
        assert_eq!(synth_oracle(&p, 16_000, 16_000).unwrap(), synth_oracle(&p, 16_000, 16_000).unwrap());
        let other = OracleParams { noise_seed: 1, ..p };
        assert_ne!(synth_oracle(&p, 16_000, 16_000).unwrap(), synth_oracle(&other, 16_000, 16_000).unwrap());
        for bad in [
            OracleParams { f0: 20.0, ..p },
            OracleParams { f0: 5000.0, ..p },
            OracleParams { amp_decay_ms: 0.0, ..p },
            OracleParams { noise_decay_ms: -1.0, ..p },
            OracleParams { noise_mix: 1.5, ..p },
        ] {
            assert!(synth_oracle(&bad, 100, 16_000).is_err());
        }
    }

    #[test]
    fn ingest_three_one_shots() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_folder(
            src.path(),
            &[
                ("a.wav", tone(60.0, 0.2, 8000)),
                ("b.wav", tone(300.0, 0.1, 20_000)),
                ("c.wav", Waveform::new(tone(1000.0, 0.05, 4000).samples, 44_100)),
            ],
        );
        std::fs::write(src.path().join("notes.txt"), "ignored").unwrap();
        let m = ingest(src.path(), out.path(), "test", &Preprocessing::default()).unwrap();
        assert_eq!(m.records.len(), 3);
        assert_eq!(m.ids(), vec!["a", "b", "c"]);
        let ds = Dataset::load(out.path()).unwrap();
        for r in &ds.records {
            assert_eq!(r.x.len(), 16_000);
            assert_eq!(r.e.len(), 16_000);
            assert!(r.fs.normalized);
            r.fs.validate_normalized().unwrap();
            assert_eq!(extract_timbral(&r.x).unwrap(), r.fs_raw);
        }
    }

    #[test]
    fn corrupt_file_skipped() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_folder(
            src.path(),
            &[
                ("1.wav", tone(50.0, 0.3, 16_000)),
                ("2.wav", tone(100.0, 0.2, 16_000)),
                ("3.wav", tone(400.0, 0.1, 16_000)),
                ("4.wav", tone(900.0, 0.05, 16_000)),
            ],
        );
        let (bytes, _) = encode_wav(&tone(200.0, 0.1, 1000));
        std::fs::write(src.path().join("0-bad.wav"), &bytes[..30]).unwrap();
        let m = ingest(src.path(), out.path(), "test", &Preprocessing::default()).unwrap();
        assert_eq!(m.records.len(), 4);
        assert!(m.records.iter().all(|r| r.id != "0-bad"));
    }

    #[test]
    fn ingest_rerun_is_byte_identical() {
        let src = tempfile::tempdir().unwrap();
        write_folder(
            src.path(),
            &[("x.wav", tone(80.0, 0.2, 12_000)), ("y.wav", tone(700.0, 0.1, 12_000))],
        );
        let out1 = tempfile::tempdir().unwrap();
        let out2 = tempfile::tempdir().unwrap();
        ingest(src.path(), out1.path(), "t", &Preprocessing::default()).unwrap();
        ingest(src.path(), out2.path(), "t", &Preprocessing::default()).unwrap();
        let read = |d: &Path| std::fs::read(d.join(MANIFEST_FILE)).unwrap();
        assert_eq!(read(out1.path()), read(out2.path()));
    }

    #[test]
    fn too_few_usable_files() {
        let src = tempfile::tempdir().unwrap();
        let out = tempfile::tempdir().unwrap();
        write_folder(
            src.path(),
            &[("a.wav", tone(80.0, 0.2, 8000)), ("silent.wav", Waveform::zeros(8000, 16_000))],
        );
        assert!(matches!(
            ingest(src.path(), out.path(), "t", &Preprocessing::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn oracle_dataset_contract() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let m1 = build_oracle_dataset(12, 42, a.path()).unwrap();
        let m2 = build_oracle_dataset(12, 42, b.path()).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.records[0].id, "oracle-0000");
        assert!(oracle_params(a.path(), "oracle-0003").unwrap().is_some());
        let ds = Dataset::load(a.path()).unwrap();
        for f in Feature::ALL {
            let vals: Vec<f64> = ds.records.iter().map(|r| r.fs.get(f)).collect();
            let span = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(span >= 0.9, "{f} span {span}");
        }
        assert!(matches!(
            build_oracle_dataset(4, 0, tempfile::tempdir().unwrap().path()),
            Err(Error::InsufficientData(_))
        ));
    }

    fn manifest_with(n: usize) -> DatasetManifest {
        let v = [TimbralVector::from_array([0.0; 7], false), TimbralVector::from_array([1.0; 7], false)];
        DatasetManifest {
            version: DATASET_VERSION.into(),
            name: "t".into(),
            preprocessing: Preprocessing::default(),
            normalizer: FeatureNormalizer::fit(&v).unwrap(),
            records: (0..n)
                .map(|i| ManifestRecord {
                    id: format!("r{i:03}"),
                    source: String::new(),
                    features: v[0],
                    truncated: 0,
                })
                .collect(),
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (t, e) = split(&manifest_with(100), 0.9, 7).unwrap();
        assert_eq!((t.len(), e.len()), (90, 10));
        let (t, e) = split(&manifest_with(10), 0.9, 7).unwrap();
        assert_eq!((t.len(), e.len()), (9, 1));
        assert_eq!(split(&manifest_with(10), 0.9, 7).unwrap(), (t.clone(), e.clone()));
        let all: BTreeSet<_> = t.iter().chain(&e).collect();
        assert_eq!(all.len(), 10);
        assert_ne!(split(&manifest_with(10), 0.9, 8).unwrap().0, t);
        assert!(split(&manifest_with(1), 0.9, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn split_partitions(n in 2usize..300, frac in 0.05f64..=1.0, seed in 0u64..1000) {
            let (t, e) = split(&manifest_with(n), frac, seed).unwrap();
            proptest::prop_assert_eq!(t.len() + e.len(), n);
            proptest::prop_assert_eq!(t.len(), ((frac * n as f64) - 1e-9).ceil() as usize);
            let all: BTreeSet<_> = t.iter().chain(&e).collect();
            proptest::prop_assert_eq!(all.len(), n);
        }
    }
}
