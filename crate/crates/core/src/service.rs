//! HTTP inference service.
//!
//! | route                     | method | body                 | response        |
//! |---------------------------|--------|----------------------|-----------------|
//! | `/api/v1/synthesize`      | POST   | synthesis JSON       | `audio/wav`     |
//! | `/api/v1/analyze`         | POST   | WAV bytes            | analysis JSON   |
//! | `/api/v1/model`           | GET    |                      | model JSON      |
//! | `/healthz`                | GET    |                      | `ok`            |
//!
//! Errors are JSON `{"error": ..., "field": ...}`.

use std::io::Cursor;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::audio::{decode_wav, encode_wav, Waveform, CLIP_LENGTH, SAMPLE_RATE};
use crate::dataset::Preprocessing;
use crate::error::{Error, Result};
use crate::features::{extract_timbral, parametric_envelope, Envelope, Feature, TimbralVector};
use crate::model::{forward, Checkpoint, ConditioningInput};

pub const HASH_HEADER: &str = "x-checkpoint-hash";
/// Re-extracted normalized features of the synthesized sound, canonical order.
pub const FEATURES_HEADER: &str = "x-synth-features";
pub const JSON_LIMIT: usize = 1 << 20;
pub const UPLOAD_LIMIT: usize = 16 << 20;
pub const MAX_UPLOAD_SECONDS: f64 = 10.0;
pub const PREVIEW_POINTS: usize = 200;
pub const DEFAULT_PORT: u16 = 8080;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub checkpoint: Option<PathBuf>,
    /// Allowed browser origin; any origin when unset.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: DEFAULT_PORT,
            checkpoint: None,
            cors_origin: None,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Apply `PSYNTH_PORT` and `PSYNTH_CKPT` from `lookup`.
    pub fn with_env(mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<Self> {
        if let Some(port) = lookup("PSYNTH_PORT") {
            self.port = port
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("PSYNTH_PORT `{port}` is not a port")))?;
        }
        if let Some(ckpt) = lookup("PSYNTH_CKPT") {
            self.checkpoint = Some(ckpt.into());
        }
        Ok(self)
    }
}

/// A checkpoint ready to serve, with its metadata rendered once.
pub struct Loaded {
    pub checkpoint: Checkpoint,
    pub hash: String,
    model_body: Vec<u8>,
}

impl Loaded {
    pub fn new(checkpoint: Checkpoint) -> Self {
        let hash = checkpoint.hash();
        let ranges: serde_json::Map<String, Value> = Feature::ALL
            .iter()
            .map(|&f| {
                let r = checkpoint.normalizer.range(f);
                (f.name().to_string(), json!({"min": r.min, "max": r.max, "degenerate": r.degenerate}))
            })
            .collect();
        let body = json!({
            "config": checkpoint.config,
            "encoder_layers": checkpoint.config.encoder_layers,
            "parameter_count": checkpoint.params.len(),
            "checkpoint_hash": hash,
            "feature_names": Feature::ALL.iter().map(|f| f.name()).collect::<Vec<_>>(),
            "normalizer": ranges,
            "loss_mode": checkpoint.loss.map(|l| l.mode.to_string()),
        });
        Self {
            checkpoint,
            hash,
            model_body: serde_json::to_vec_pretty(&body).expect("metadata serializes"),
        }
    }
}

/// Shared service state. Requests take a snapshot; `swap` replaces it whole.
#[derive(Clone, Default)]
pub struct AppState {
    current: Arc<RwLock<Option<Arc<Loaded>>>>,
}

impl AppState {
    pub fn new(checkpoint: Option<Checkpoint>) -> Self {
        let state = Self::default();
        if let Some(c) = checkpoint {
            state.swap(c);
        }
        state
    }

    pub fn swap(&self, checkpoint: Checkpoint) {
        let loaded = Arc::new(Loaded::new(checkpoint));
        *self.current.write().unwrap_or_else(|e| e.into_inner()) = Some(loaded);
    }

    pub fn snapshot(&self) -> Option<Arc<Loaded>> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
            field: None,
        }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: message.into(),
            field: Some(field.into()),
        }
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }

    pub fn message(&self) -> &str {
        &self.message
    }

    /// Offending request field, for validation failures.
    pub fn field_name(&self) -> Option<&str> {
        self.field.as_deref()
    }

    fn unavailable() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no checkpoint loaded")
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"error": self.message, "field": self.field}))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

/// Parsed and validated body of a synthesize request.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRequest {
    pub features: TimbralVector,
    pub envelope: Envelope,
}

fn number(v: Option<&Value>, field: &str) -> ApiResult<f64> {
    match v {
        None | Some(Value::Null) => Err(ApiError::field(field, format!("`{field}` is required"))),
        Some(v) => v
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| ApiError::field(field, format!("`{field}` must be a number"))),
    }
}

fn unit(v: Option<&Value>, field: &str) -> ApiResult<f64> {
    let x = number(v, field)?;
    if (0.0..=1.0).contains(&x) {
        Ok(x)
    } else {
        Err(ApiError::field(field, format!("`{field}` = {x} is outside [0, 1]")))
    }
}

impl SynthesisRequest {
    pub fn parse(body: &[u8]) -> ApiResult<Self> {
        let v: Value = serde_json::from_slice(body)
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, format!("invalid JSON: {e}")))?;
        let features = v
            .get("features")
            .and_then(Value::as_object)
            .ok_or_else(|| ApiError::field("features", "`features` object is required"))?;
        let mut fs = TimbralVector::uniform(0.0);
        for f in Feature::ALL {
            fs.set(f, unit(features.get(f.name()), f.name())?);
        }
        if let Some(extra) = features.keys().find(|k| k.parse::<Feature>().is_err()) {
            return Err(ApiError::field(extra, format!("unknown feature `{extra}`")));
        }

        let env = v
            .get("envelope")
            .and_then(Value::as_object)
            .ok_or_else(|| ApiError::field("envelope", "`envelope` object is required"))?;
        let envelope = match env.get("kind").and_then(Value::as_str) {
            Some("ad") => {
                let attack = number(env.get("attack_ms"), "attack_ms")?;
                let decay = number(env.get("decay_ms"), "decay_ms")?;
                let amplitude = number(env.get("amplitude"), "amplitude")?;
                if !(amplitude > 0.0 && amplitude <= 1.0) {
                    return Err(ApiError::field("amplitude", "`amplitude` must be in (0, 1]"));
                }
                if !(0.0..=1000.0).contains(&attack) {
                    return Err(ApiError::field("attack_ms", "`attack_ms` must be in [0, 1000]"));
                }
                if !(decay > 0.0 && decay <= 10_000.0) {
                    return Err(ApiError::field("decay_ms", "`decay_ms` must be in (0, 10000]"));
                }
                parametric_envelope(attack, decay, amplitude, CLIP_LENGTH, SAMPLE_RATE)
            }
            Some("raw") => {
                let samples = env
                    .get("samples")
                    .and_then(Value::as_array)
                    .ok_or_else(|| ApiError::field("samples", "`samples` array is required"))?;
                if samples.len() != CLIP_LENGTH {
                    return Err(ApiError::field(
                        "samples",
                        format!("`samples` must hold exactly {CLIP_LENGTH} values, got {}", samples.len()),
                    ));
                }
                let values = samples
                    .iter()
                    .map(|s| unit(Some(s), "samples"))
                    .collect::<ApiResult<Vec<f64>>>()?;
                Envelope {
                    values,
                    sample_rate: SAMPLE_RATE,
                }
            }
            _ => return Err(ApiError::field("kind", "`envelope.kind` must be \"ad\" or \"raw\"")),
        };
        Ok(Self { features: fs, envelope })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResponse {
    pub features_raw: TimbralVector,
    pub features_normalized: TimbralVector,
    pub envelope_preview: Vec<f64>,
    pub duration_s: f64,
}

/// Preprocess like ingest, then extract and normalize.
pub fn analyze_wav(bytes: &[u8], loaded: &Loaded) -> ApiResult<AnalysisResponse> {
    let (w, _) = decode_wav(Cursor::new(bytes), "upload")
        .map_err(|e| ApiError::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, e.to_string()))?;
    let duration_s = w.duration_s();
    if duration_s > MAX_UPLOAD_SECONDS {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("upload is {duration_s:.2} s, limit is {MAX_UPLOAD_SECONDS} s"),
        ));
    }
    let silent = |_| ApiError::field("audio", "input is silent");
    let pre = Preprocessing::default();
    let (clip, _) = pre.prepare(&w).map_err(silent)?;
    let raw = extract_timbral(&clip).map_err(silent)?;
    Ok(AnalysisResponse {
        features_raw: raw,
        features_normalized: loaded.checkpoint.normalizer.normalize(&raw),
        envelope_preview: pre.envelope(&clip).preview(PREVIEW_POINTS),
        duration_s,
    })
}

/// Run the network and encode the result; also re-measure its features.
pub fn render(loaded: &Loaded, req: &SynthesisRequest) -> Result<(Vec<u8>, Option<TimbralVector>)> {
    let config = &loaded.checkpoint.config;
    let cond = ConditioningInput::new(req.envelope.resized(config.output_length), req.features);
    let w: Waveform = forward(&loaded.checkpoint.params, config, &cond)?;
    let (bytes, _) = encode_wav(&w);
    let measured = extract_timbral(&w.quantized())
        .ok()
        .map(|raw| loaded.checkpoint.normalizer.normalize(&raw));
    Ok((bytes, measured))
}

async fn synthesize(State(state): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req = SynthesisRequest::parse(&body)?;
    let loaded = state.snapshot().ok_or_else(ApiError::unavailable)?;
    let hash = loaded.hash.clone();
    let (wav, measured) = tokio::task::spawn_blocking(move || render(&loaded, &req))
        .await
        .map_err(ApiError::internal)?
        .map_err(ApiError::internal)?;
    let mut resp = (
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("audio/wav")),
            (header::HeaderName::from_static(HASH_HEADER), HeaderValue::from_str(&hash).map_err(ApiError::internal)?),
        ],
        wav,
    )
        .into_response();
    if let Some(m) = measured {
        let text = m.to_array().iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(",");
        if let Ok(v) = HeaderValue::from_str(&text) {
            resp.headers_mut().insert(header::HeaderName::from_static(FEATURES_HEADER), v);
        }
    }
    Ok(resp)
}

async fn analyze(State(state): State<AppState>, body: Bytes) -> ApiResult<Json<AnalysisResponse>> {
    let loaded = state.snapshot().ok_or_else(ApiError::unavailable)?;
    let resp = tokio::task::spawn_blocking(move || analyze_wav(&body, &loaded))
        .await
        .map_err(ApiError::internal)??;
    Ok(Json(resp))
}

async fn model(State(state): State<AppState>) -> ApiResult<Response> {
    let loaded = state.snapshot().ok_or_else(ApiError::unavailable)?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("application/json")),
            (header::HeaderName::from_static(HASH_HEADER), HeaderValue::from_str(&loaded.hash).map_err(ApiError::internal)?),
        ],
        loaded.model_body.clone(),
    )
        .into_response())
}

async fn healthz() -> &'static str {
    "ok"
}

fn cors(origin: Option<&str>) -> Result<CorsLayer> {
    let allow = match origin {
        None | Some("*") => AllowOrigin::any(),
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|_| Error::InvalidConfig(format!("bad CORS origin `{o}`")))?,
        ),
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers([header::CONTENT_TYPE])
        .expose_headers([
            header::HeaderName::from_static(HASH_HEADER),
            header::HeaderName::from_static(FEATURES_HEADER),
        ]))
}

pub fn router(state: AppState, cors_origin: Option<&str>) -> Result<Router> {
    Ok(Router::new()
        .route("/api/v1/synthesize", post(synthesize).layer(DefaultBodyLimit::max(JSON_LIMIT)))
        .route("/api/v1/analyze", post(analyze).layer(DefaultBodyLimit::max(UPLOAD_LIMIT)))
        .route("/api/v1/model", get(model))
        .route("/healthz", get(healthz))
        .layer(cors(cors_origin)?)
        .with_state(state))
}

/// Load the configured checkpoint, bind and serve until ctrl-c, then drain.
pub async fn serve(config: ServiceConfig) -> Result<()> {
    let checkpoint = config.checkpoint.as_ref().map(Checkpoint::load).transpose()?;
    if let Some(c) = &checkpoint {
        log::info!("loaded checkpoint {} (K={})", c.hash(), c.config.encoder_layers);
    } else {
        log::warn!("no checkpoint configured; synthesis returns 503");
    }
    let app = router(AppState::new(checkpoint), config.cors_origin.as_deref())?;
    let addr: SocketAddr = format!("{}:{}", config.host, config.port)
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad address {}:{}", config.host, config.port)))?;
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|e| Error::io(addr.to_string(), e))?;
    log::info!("listening on {}", listener.local_addr().map_err(|e| Error::io(addr.to_string(), e))?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            log::info!("shutting down");
        })
        .await
        .map_err(|e| Error::io(addr.to_string(), e))
}
