//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
//! Logs go to standard error; machine-readable outputs go to files.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::coherence::{evaluate, ConstantBackend, ModelBackend, OracleBackend, SweepLevels, SynthBackend};
use crate::dataset::{build_oracle_dataset, ingest, split, Dataset, Preprocessing};
use crate::error::Error;
use crate::losses::{LossConfig, LossMode};
use crate::model::{gradient_check, CheckSize, Checkpoint, ModelConfig};
use crate::service::{render, serve, Loaded, ServiceConfig, SynthesisRequest};
use crate::train::{resume, train, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "psynth", version, about = "Timbre-conditioned percussive one-shot synthesizer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a dataset from a folder of WAV files.
    Ingest(IngestArgs),
    /// Generate a synthetic kick dataset with known parameters.
    SynthData(SynthDataArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Render one sound from a checkpoint.
    Generate(GenerateArgs),
    /// Score how well a synthesizer follows feature requests.
    EvalCoherence(EvalArgs),
    /// Compare analytic and numerical gradients.
    Gradcheck(GradcheckArgs),
    /// Run the HTTP inference service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Folder of WAV files.
    #[arg(long = "in", value_name = "DIR")]
    pub input: PathBuf,
    /// Output dataset folder.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Target sample rate in Hz.
    #[arg(long, default_value_t = 16_000)]
    pub sr: u32,
    /// Clip length in samples.
    #[arg(long, default_value_t = 16_000)]
    pub len: usize,
    /// Leading-silence threshold in dBFS.
    #[arg(long, default_value_t = -60.0, allow_hyphen_values = true)]
    pub trim_db: f64,
    /// Dataset name; defaults to the input folder name.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthDataArgs {
    /// Number of records (at least 8).
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output dataset folder.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset folder.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Loss: wave, high or full [default: full].
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<LossMode>,
    /// Epochs to run (further epochs when resuming) [default: 2500].
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 16].
    #[arg(long)]
    pub batch: Option<usize>,
    /// Adam learning rate [default: 1e-4].
    #[arg(long)]
    pub lr: Option<f64>,
    /// Seeds weight initialization and batch order [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seeds the train/eval split [default: 0].
    #[arg(long)]
    pub split_seed: Option<u64>,
    /// Weight of the spectral term [default: 0.5].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Disable gradient-norm clipping.
    #[arg(long)]
    pub no_clip: bool,
    /// Save every this many epochs; 0 saves only at the end.
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Network preset: large, desk or tiny [default: desk, or the resumed checkpoint's].
    #[arg(long = "config", value_name = "PRESET")]
    pub preset: Option<String>,
    /// Override the padded input length of the preset.
    #[arg(long)]
    pub internal_length: Option<usize>,
    /// Override the output length of the preset.
    #[arg(long)]
    pub output_length: Option<usize>,
    /// JSON training configuration; flags override its values.
    #[arg(long, value_name = "FILE")]
    pub train_config: Option<PathBuf>,
    /// Continue from this checkpoint and its optimizer state.
    #[arg(long, value_name = "CKPT")]
    pub resume: Option<PathBuf>,
    /// Per-epoch loss CSV [default: <out>.csv].
    #[arg(long, value_name = "FILE")]
    pub csv: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long, value_name = "CKPT")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_name = "FILE")]
    pub ckpt: PathBuf,
    /// Normalized features as inline JSON or a JSON file, e.g. {"brightness": 0.8, ...}.
    #[arg(long, value_name = "JSON")]
    pub features: String,
    /// Envelope as inline JSON or a JSON file, e.g. {"kind": "ad", "attack_ms": 5, "decay_ms": 300}.
    #[arg(long, value_name = "JSON")]
    pub envelope: String,
    /// Output WAV file.
    #[arg(long, value_name = "WAV")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint to evaluate; not needed with a reference backend.
    #[arg(long, value_name = "FILE", required_unless_present_any = ["oracle_backend", "constant_backend"])]
    pub ckpt: Option<PathBuf>,
    /// Dataset folder supplying envelopes and base features.
    #[arg(long, value_name = "DIR")]
    pub data: PathBuf,
    /// Sweep levels low,mid,high.
    #[arg(long, default_value = "0.2,0.5,0.8")]
    pub levels: SweepLevels,
    /// Output JSON report.
    #[arg(long, value_name = "FILE")]
    pub report: PathBuf,
    /// Also print a summary table.
    #[arg(long)]
    pub table: bool,
    /// Score the parametric oracle synthesizer instead of a checkpoint.
    #[arg(long, conflicts_with_all = ["ckpt", "constant_backend"])]
    pub oracle_backend: bool,
    /// Score a synthesizer that ignores its input.
    #[arg(long, conflicts_with = "ckpt")]
    pub constant_backend: bool,
    /// Use every record instead of the held-out split.
    #[arg(long)]
    pub all_records: bool,
    /// Seed of the train/eval split.
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Training fraction of the split.
    #[arg(long, default_value_t = 0.9)]
    pub train_fraction: f64,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Network size: tiny or small.
    #[arg(long, default_value = "tiny")]
    pub size: CheckSize,
    /// Loss: wave, high or full.
    #[arg(long, value_parser = parse_mode, default_value = "full")]
    pub mode: LossMode,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub eps: f64,
    /// Parameters to check.
    #[arg(long, default_value_t = 100)]
    pub n_params: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = 1e-3)]
    pub threshold: f64,
    /// Optional JSON report.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, value_name = "FILE")]
    pub ckpt: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    /// Allowed browser origin; any origin when unset.
    #[arg(long)]
    pub cors_origin: Option<String>,
    /// TOML service configuration; environment and flags override it.
    #[arg(long = "config", value_name = "FILE")]
    pub config: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<LossMode, String> {
    s.parse()
}

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
    /// The command ran but its check did not pass.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) | CliError::Failed(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Runtime(other),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parse `args` (program name first), run, and return the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            log::error!("{e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> CliResult {
    match command {
        Command::Ingest(a) => run_ingest(a),
        Command::SynthData(a) => {
            let manifest = build_oracle_dataset(a.n, a.seed, &a.out)?;
            log::info!("wrote {} records to {}", manifest.records.len(), a.out.display());
            Ok(())
        }
        Command::Train(a) => run_train(a),
        Command::Generate(a) => run_generate(a),
        Command::EvalCoherence(a) => run_eval(a),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::Serve(a) => run_serve(a),
    }
}

fn run_ingest(a: IngestArgs) -> CliResult {
    let name = a.name.clone().unwrap_or_else(|| {
        a.input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let pre = Preprocessing {
        sample_rate: a.sr,
        length: a.len,
        trim_db: a.trim_db,
        ..Preprocessing::default()
    };
    let manifest = ingest(&a.input, &a.out, &name, &pre)?;
    log::info!("ingested {} records into {}", manifest.records.len(), a.out.display());
    Ok(())
}

fn train_config(a: &TrainArgs) -> CliResult<TrainConfig> {
    let mut cfg = match &a.train_config {
        Some(path) => TrainConfig::load(path)?,
        None => TrainConfig::default(),
    };
    if let Some(mode) = a.mode {
        cfg.loss.mode = mode;
    }
    if let Some(v) = a.lambda {
        cfg.loss.lambda = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch {
        cfg.batch_size = v;
    }
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.split_seed {
        cfg.split_seed = v;
    }
    if let Some(v) = a.checkpoint_every {
        cfg.checkpoint_every = v;
    }
    if a.no_clip {
        cfg.clip_norm = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_config(a: &TrainArgs, seed: u64) -> CliResult<ModelConfig> {
    let base = match (&a.preset, &a.resume) {
        (Some(name), _) => ModelConfig::preset(name)
            .ok_or_else(|| CliError::Usage(format!("unknown preset `{name}` (expected large, desk or tiny)")))?,
        (None, Some(ckpt)) => Checkpoint::load(ckpt)?.config,
        (None, None) => ModelConfig::desk(),
    };
    let mut model = base.with_seed(seed);
    if let Some(n) = a.internal_length {
        model.internal_length = n;
    }
    if let Some(n) = a.output_length {
        model.output_length = n;
    }
    model.validate()?;
    Ok(model)
}

fn run_train(a: TrainArgs) -> CliResult {
    let cfg = train_config(&a)?;
    let mut model = model_config(&a, cfg.seed)?;
    let dataset = Dataset::load(&a.data)?;
    let (ckpt, report) = match &a.resume {
        Some(from) => {
            model.seed = Checkpoint::load(from)?.config.seed;
            resume(from, &model, &dataset, &cfg, &a.out)?
        }
        None => train(&model, &dataset, &cfg, &a.out)?,
    };
    let csv = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    report.write_csv(&csv)?;
    if let Some(last) = report.epochs.last() {
        log::info!("epoch {} train loss {:.5}", last.epoch, last.train_loss);
    }
    log::info!(
        "wrote {} ({}) and {} in {:.1} s",
        a.out.display(),
        &ckpt.hash()[..12],
        csv.display(),
        report.wall_time_s
    );
    Ok(())
}

/// Inline JSON, or the contents of the named file.
fn json_arg(arg: &str, what: &str) -> CliResult<Value> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(arg).map_err(|e| CliError::Runtime(Error::io(arg, e)))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("--{what}: invalid JSON: {e}")))
}

fn run_generate(a: GenerateArgs) -> CliResult {
    let features = json_arg(&a.features, "features")?;
    let envelope = json_arg(&a.envelope, "envelope")?;
    let body = serde_json::json!({ "features": features, "envelope": envelope });
    let req = SynthesisRequest::parse(body.to_string().as_bytes()).map_err(|e| {
        CliError::Usage(match e.field_name() {
            Some(field) => format!("invalid `{field}`: {}", e.message()),
            None => e.message().to_string(),
        })
    })?;
    let loaded = Loaded::new(Checkpoint::load(&a.ckpt)?);
    let (wav, _) = render(&loaded, &req)?;
    std::fs::write(&a.out, wav).map_err(|e| CliError::Runtime(Error::io(&a.out, e)))?;
    log::info!("wrote {}", a.out.display());
    Ok(())
}

fn run_eval(a: EvalArgs) -> CliResult {
    let dataset = Dataset::load(&a.data)?;
    let ids = if a.all_records {
        dataset.manifest.ids()
    } else {
        split(&dataset.manifest, a.train_fraction, a.split_seed)?.1
    };
    let records = dataset.select(&ids)?;
    let (backend, normalizer): (Box<dyn SynthBackend>, _) = if a.oracle_backend {
        (Box::new(OracleBackend), dataset.manifest.normalizer.clone())
    } else if a.constant_backend {
        (Box::new(ConstantBackend::default()), dataset.manifest.normalizer.clone())
    } else {
        let path = a.ckpt.as_ref().expect("clap requires --ckpt");
        let checkpoint = Checkpoint::load(path)?;
        let normalizer = checkpoint.normalizer.clone();
        (Box::new(ModelBackend { checkpoint }), normalizer)
    };
    log::info!("scoring {} on {} records", backend.name(), records.len());
    let report = evaluate(backend.as_ref(), &records, &normalizer, &a.levels)?;
    report.save(&a.report)?;
    if a.table {
        print!("{}", report.to_table());
    }
    log::info!(
        "E1 {:.3} E2 {:.3} E3 {:.3}; report in {}",
        report.aggregate.e1,
        report.aggregate.e2,
        report.aggregate.e3,
        a.report.display()
    );
    Ok(())
}

fn run_gradcheck(a: GradcheckArgs) -> CliResult {
    if !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(CliError::Usage(format!("--eps {} must be positive", a.eps)));
    }
    let config = a.size.config();
    let report = gradient_check(&config, &LossConfig::new(a.mode), a.eps, a.n_params, a.seed)?;
    println!(
        "size={:?} mode={} checks={} skipped_kinks={} max_rel_err={:.3e}",
        a.size,
        a.mode,
        report.checks.len(),
        report.skipped_kinks,
        report.max_rel_err
    );
    if let Some(path) = &a.report {
        write_json(path, &report)?;
    }
    if report.max_rel_err < a.threshold {
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "max_rel_err {:.3e} exceeds {:.1e}",
            report.max_rel_err, a.threshold
        )))
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.into()))?;
    std::fs::write(path, text).map_err(|e| CliError::Runtime(Error::io(path, e)))
}

fn run_serve(a: ServeArgs) -> CliResult {
    let base = match &a.config {
        Some(path) => ServiceConfig::from_toml_file(path)?,
        None => ServiceConfig::default(),
    };
    let mut config = base.with_env(|k| std::env::var(k).ok())?;
    if let Some(p) = a.ckpt {
        config.checkpoint = Some(p);
    }
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(h) = a.host {
        config.host = h;
    }
    if let Some(o) = a.cors_origin {
        config.cors_origin = Some(o);
    }
    if let Some(ckpt) = &config.checkpoint {
        if !ckpt.is_file() {
            return Err(CliError::Runtime(Error::io(
                ckpt,
                std::io::Error::new(std::io::ErrorKind::NotFound, "checkpoint not found"),
            )));
        }
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(Error::io("tokio runtime", e)))?;
    runtime.block_on(serve(config)).map_err(CliError::Runtime)
}
