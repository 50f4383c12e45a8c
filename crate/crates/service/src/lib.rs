//! HTTP API over a fixed set of checkpoints.
//!
//! All routes live under `/api/v1`. Models are loaded once at startup and
//! shared read-only; every generate request owns its own state and RNG.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, CorsLayer};

use textlstm::chord::decode_progression;
use textlstm::drum::{decode_words, render_rows, write_smf};
use textlstm::nn::{Domain, LstmModel};
use textlstm::sampler::{generate_ids, AlphaRegion, AlphaSchedule, SampleError, MAX_ALPHA};
use textlstm::tokenizer::Mode;
use textlstm::trainer::{load_checkpoint, CheckpointError};

/// Upper bound on tokens per generate request.
pub const MAX_LENGTH: usize = 100_000;

pub struct LoadedModel {
    pub id: String,
    pub model: LstmModel<f32>,
}

#[derive(Default)]
pub struct AppState {
    models: BTreeMap<String, Arc<LoadedModel>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, model: LstmModel<f32>) {
        let id = id.into();
        self.models.insert(id.clone(), Arc::new(LoadedModel { id, model }));
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    /// Loads every `*.ckpt` in `dir`; the model id is the file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, LoadError> {
        let entries = std::fs::read_dir(dir).map_err(|source| LoadError::Dir {
            path: dir.display().to_string(),
            source,
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
            .collect();
        paths.sort();
        let mut state = Self::new();
        for path in paths {
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| LoadError::BadName(path.display().to_string()))?
                .to_string();
            let model = load_checkpoint(&path)?;
            log::info!("loaded model {id} from {}", path.display());
            state.insert(id, model);
        }
        Ok(state)
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read model directory {path}: {source}")]
    Dir {
        path: String,
        source: std::io::Error,
    },
    #[error("checkpoint file name is not valid UTF-8: {0}")]
    BadName(String),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ModelDescriptor {
    pub id: String,
    pub mode: Mode,
    pub domain: Domain,
    pub vocab_size: usize,
    pub hidden_size: usize,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequestMessage {
    pub model_id: String,
    pub seed_tokens: Vec<String>,
    pub length: usize,
    #[serde(default = "one")]
    pub default_alpha: f64,
    #[serde(default)]
    pub alpha_regions: Vec<AlphaRegion>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct GenerateResponseMessage {
    pub tokens: Vec<String>,
    pub rendered: String,
    pub elapsed_ms: f64,
    /// The PRNG seed used; echoes the request or reports the one drawn.
    pub seed: u64,
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RenderMidiRequest {
    pub tokens: Vec<String>,
    #[serde(default = "default_tempo")]
    pub tempo: f64,
}

fn default_tempo() -> f64 {
    120.0
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ErrorBody {
    pub error: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, field: Option<&str>, error: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                field: field.map(String::from),
            },
        }
    }

    fn invalid(field: &str, error: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, Some(field), error)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

/// Parses a JSON body, reporting every failure as 400.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, None, e.to_string()))
}

async fn health(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "models": state.len() }))
}

async fn list_models(State(state): State<Arc<AppState>>) -> Json<Vec<ModelDescriptor>> {
    Json(
        state
            .models
            .values()
            .map(|m| ModelDescriptor {
                id: m.id.clone(),
                mode: m.model.vocab().mode(),
                domain: m.model.domain(),
                vocab_size: m.model.vocab_size(),
                hidden_size: m.model.hyper().hidden_size,
            })
            .collect(),
    )
}

fn validate_schedule(req: &GenerateRequestMessage) -> Result<AlphaSchedule, ApiError> {
    let alpha_ok = |a: f64| a.is_finite() && a > 0.0 && a <= MAX_ALPHA;
    if !alpha_ok(req.default_alpha) {
        return Err(ApiError::invalid(
            "default_alpha",
            format!("must be in (0, {MAX_ALPHA}], got {}", req.default_alpha),
        ));
    }
    for (k, r) in req.alpha_regions.iter().enumerate() {
        let field = format!("alpha_regions[{k}]");
        if r.start >= r.end {
            return Err(ApiError::invalid(&field, format!("start {} must be below end {}", r.start, r.end)));
        }
        if !alpha_ok(r.alpha) {
            return Err(ApiError::invalid(&field, format!("alpha must be in (0, {MAX_ALPHA}], got {}", r.alpha)));
        }
        if k > 0 {
            let p = &req.alpha_regions[k - 1];
            if r.start < p.end {
                return Err(ApiError::invalid(
                    &field,
                    format!(
                        "region {}..{} overlaps or precedes region {}..{}",
                        r.start, r.end, p.start, p.end
                    ),
                ));
            }
        }
    }
    AlphaSchedule::new(req.default_alpha, req.alpha_regions.clone())
        .map_err(|e| ApiError::invalid("alpha_regions", e.to_string()))
}

fn render(model: &LstmModel<f32>, tokens: &[String]) -> String {
    let joined;
    let words: Vec<&str> = match model.vocab().mode() {
        Mode::Word => tokens.iter().map(String::as_str).collect(),
        Mode::Char => {
            joined = tokens.concat();
            joined.split_whitespace().collect()
        }
    };
    match model.domain() {
        Domain::Chord => decode_progression(&words),
        Domain::Drum => render_rows(&words),
    }
}

async fn generate(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<GenerateResponseMessage>, ApiError> {
    let req: GenerateRequestMessage = parse_body(&body)?;
    let entry = state
        .models
        .get(&req.model_id)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, Some("model_id"), format!("unknown model {:?}", req.model_id)))?;
    if req.length > MAX_LENGTH {
        return Err(ApiError::invalid("length", format!("must be at most {MAX_LENGTH}")));
    }
    if req.seed_tokens.is_empty() {
        return Err(ApiError::invalid("seed_tokens", "must contain at least one token"));
    }
    let schedule = validate_schedule(&req)?;
    let vocab = entry.model.vocab();
    let seed_ids = req
        .seed_tokens
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vocab.index_of(t).ok_or_else(|| {
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    Some(&format!("seed_tokens[{i}]")),
                    format!("token {t:?} is not in the vocabulary of model {:?}", entry.id),
                )
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rng_seed = req.seed.unwrap_or_else(rand::random);
    let length = req.length;

    let response = tokio::task::spawn_blocking(move || -> Result<GenerateResponseMessage, SampleError> {
        let start = Instant::now();
        let ids = generate_ids(&entry.model, &seed_ids, length, &schedule, rng_seed)?;
        let tokens: Vec<String> = ids
            .iter()
            .map(|&i| entry.model.vocab().token(i).expect("sampled in vocab").to_string())
            .collect();
        let rendered = render(&entry.model, &tokens);
        Ok(GenerateResponseMessage {
            tokens,
            rendered,
            elapsed_ms: start.elapsed().as_secs_f64() * 1000.0,
            seed: rng_seed,
        })
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, None, e.to_string()))?
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, None, e.to_string()))?;
    Ok(Json(response))
}

async fn render_midi(body: Bytes) -> Result<Response, ApiError> {
    let req: RenderMidiRequest = parse_body(&body)?;
    let decoded = decode_words(&req.tokens, req.tempo).map_err(|e| ApiError::invalid("tempo", e.to_string()))?;
    let bytes = write_smf(&decoded.events, req.tempo).map_err(|e| ApiError::invalid("tempo", e.to_string()))?;
    Ok((
        [
            (header::CONTENT_TYPE, HeaderValue::from_static("audio/midi")),
            (
                header::HeaderName::from_static("x-skipped-tokens"),
                HeaderValue::from(decoded.skipped),
            ),
        ],
        bytes,
    )
        .into_response())
}

/// Which browser origins may call the API.
#[derive(Clone, Debug)]
pub enum Cors {
    Disabled,
    Any,
    Origins(Vec<HeaderValue>),
}

pub fn router(state: Arc<AppState>, cors: Cors) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/models", get(list_models))
        .route("/generate", post(generate))
        .route("/render/midi", post(render_midi));
    let app = Router::new().nest("/api/v1", api).with_state(state);
    let layer = |origin: AllowOrigin| {
        CorsLayer::new()
            .allow_origin(origin)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE])
    };
    match cors {
        Cors::Disabled => app,
        Cors::Any => app.layer(layer(AllowOrigin::any())),
        Cors::Origins(list) => app.layer(layer(AllowOrigin::list(list))),
    }
}
