//! HTTP service for static embeddings.
//!
//! `POST /v1/embed` takes `{"texts": [...], "format": optional}` and answers
//! in JSON, binary or streamed JSONL. `GET /v1/health` and `GET /v1/metrics`
//! report status and counters.

pub mod config;
mod error;
mod metrics;
mod negotiate;

use std::future::{Future, IntoFuture};
use std::io;
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::serve::ListenerExt;
use axum::{Json, Router};
use bytes::Bytes;
use serde::{Deserialize, Serialize};
use staticembed_core::{
    wire, EmbedError, EmbeddingModel, Pipeline, PoolingConfig, PoolingStrategy, PreparedBatch, WireFormat,
    ZeroVectorPolicy,
};
use tokio::net::TcpListener;
use tokio::sync::{OwnedSemaphorePermit, Semaphore};

pub use config::{ConfigError, ConfigOverrides, ServiceConfig};
pub use error::ApiError;
pub use metrics::{Metrics, LATENCY_BUCKETS_MS};
pub use negotiate::negotiate_format;

/// Drain period granted to in-flight requests after a shutdown signal.
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(5);

/// Requests whose work (tokens × dim) exceeds this run on the blocking pool.
const BLOCKING_WORK_THRESHOLD: usize = 1 << 22;

/// Bytes buffered per JSONL body chunk before it is handed to the connection.
const JSONL_CHUNK_BYTES: usize = 16 * 1024;

#[derive(Debug)]
pub struct LoadedModel {
    pub model: EmbeddingModel,
    pub pooling: PoolingConfig,
}

impl LoadedModel {
    pub fn new(model: EmbeddingModel, pooling: PoolingConfig) -> Result<Self, EmbedError> {
        pooling.check_vocab(model.vocab_size())?;
        Ok(Self { model, pooling })
    }

    pub fn pipeline(&self, max_tokens_per_text: usize) -> Pipeline<'_> {
        Pipeline::new(&self.model, &self.pooling).with_max_tokens(max_tokens_per_text)
    }
}

/// Shared, read-only after the model is set.
#[derive(Debug)]
pub struct AppState {
    config: ServiceConfig,
    model: OnceLock<Arc<LoadedModel>>,
    admission: Arc<Semaphore>,
    metrics: Metrics,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Result<Arc<Self>, ConfigError> {
        config.validate()?;
        let permits = config.max_concurrent_requests.min(Semaphore::MAX_PERMITS);
        Ok(Arc::new(Self {
            config,
            model: OnceLock::new(),
            admission: Arc::new(Semaphore::new(permits)),
            metrics: Metrics::default(),
        }))
    }

    /// Installs the model. Only the first call has an effect.
    pub fn set_model(&self, model: LoadedModel) -> bool {
        self.model.set(Arc::new(model)).is_ok()
    }

    /// Uniform pooling with the configured zero-vector policy.
    pub fn default_pooling(&self) -> PoolingConfig {
        PoolingConfig::uniform(self.config.zero_vector_policy)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn model(&self) -> Option<&Arc<LoadedModel>> {
        self.model.get()
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.config.max_body_bytes;
    Router::new()
        .route("/v1/embed", post(handle_embed))
        .route("/v1/health", get(handle_health))
        .route("/v1/metrics", get(handle_metrics))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint") })
        .layer(DefaultBodyLimit::max(limit))
        .layer(middleware::from_fn_with_state(state.clone(), track))
        .with_state(state)
}

async fn track(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let start = Instant::now();
    let _inflight = state.metrics.start();
    let response = next.run(req).await;
    state.metrics.finish(response.status().as_u16(), start.elapsed());
    response
}

/// Serves until `shutdown` resolves, then drains for at most `grace`.
pub async fn run<F>(listener: TcpListener, state: Arc<AppState>, shutdown: F, grace: Duration) -> io::Result<()>
where
    F: Future<Output = ()> + Send + 'static,
{
    let (signalled_tx, signalled_rx) = tokio::sync::oneshot::channel::<()>();
    let listener = listener.tap_io(|tcp| {
        let _ = tcp.set_nodelay(true);
    });
    let server = axum::serve(listener, router(state)).with_graceful_shutdown(async move {
        shutdown.await;
        let _ = signalled_tx.send(());
    });
    let deadline = async move {
        if signalled_rx.await.is_ok() {
            tokio::time::sleep(grace).await;
        } else {
            std::future::pending::<()>().await;
        }
    };
    tokio::select! {
        result = server.into_future() => result,
        () = deadline => {
            tracing::warn!("shutdown grace period elapsed with requests still in flight");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub texts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<WireFormat>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthStatus {
    pub status: String,
    pub model: String,
    pub dim: u32,
    pub vocab_size: u32,
}

async fn handle_health(State(state): State<Arc<AppState>>) -> Result<Json<HealthStatus>, ApiError> {
    let loaded = state.model().ok_or_else(ApiError::not_loaded)?;
    let manifest = loaded.model.manifest();
    Ok(Json(HealthStatus {
        status: "ok".into(),
        model: manifest.name.clone(),
        dim: manifest.dim,
        vocab_size: manifest.vocab_size,
    }))
}

async fn handle_metrics(State(state): State<Arc<AppState>>) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], state.metrics.render())
}

async fn handle_embed(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Result<Response, ApiError> {
    let permit = state.admission.clone().try_acquire_owned().map_err(|_| ApiError::overloaded())?;
    let loaded = state.model().cloned().ok_or_else(ApiError::not_loaded)?;
    let body = body.map_err(|r| ApiError::new(r.status(), "bad_request", r.body_text()))?;
    let request: EmbedRequest =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(format!("malformed request body: {e}")))?;
    if request.texts.is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_batch", "texts must not be empty"));
    }
    let max_batch = state.config.max_batch_size;
    if request.texts.len() > max_batch {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "batch_too_large",
            format!("{} texts exceeds max_batch_size {max_batch}", request.texts.len()),
        ));
    }
    let accept = headers.get(header::ACCEPT).and_then(|v| v.to_str().ok());
    let format = negotiate_format(accept, request.format, state.config.default_format);
    if let Some(delay) = state.config.handler_delay {
        tokio::time::sleep(delay).await;
    }

    let max_tokens = state.config.max_tokens_per_text;
    let prepared = loaded.pipeline(max_tokens).prepare(&request.texts)?;
    if format == WireFormat::Jsonl {
        return stream_jsonl(loaded, prepared, max_tokens, permit);
    }
    let work = prepared.token_count().saturating_mul(loaded.model.dim());
    let body = if work > BLOCKING_WORK_THRESHOLD {
        tokio::task::spawn_blocking(move || render(&loaded, max_tokens, &prepared, format))
            .await
            .map_err(|e| ApiError::internal(e.to_string()))??
    } else {
        render(&loaded, max_tokens, &prepared, format)?
    };
    drop(permit);
    Ok(with_content_type(Body::from(body), format))
}

fn render(loaded: &LoadedModel, max_tokens: usize, prepared: &PreparedBatch, format: WireFormat) -> Result<Vec<u8>, ApiError> {
    let pipeline = loaded.pipeline(max_tokens);
    let embeddings = pipeline.embed(prepared)?;
    pipeline.encode(prepared, &embeddings, format).map_err(|e| ApiError::internal(e.to_string()))
}

fn with_content_type(body: Body, format: WireFormat) -> Response {
    let mut response = Response::new(body);
    response
        .headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static(format.content_type()));
    response
}

/// Streams one line per text. Inputs that would fail under the error policy
/// are rejected before the status line is sent; a zero-norm pooled vector
/// found mid-stream aborts the body.
fn stream_jsonl(
    loaded: Arc<LoadedModel>,
    prepared: PreparedBatch,
    max_tokens: usize,
    permit: OwnedSemaphorePermit,
) -> Result<Response, ApiError> {
    if loaded.pooling.zero_vector_policy == ZeroVectorPolicy::Error {
        for ids in prepared.batch.iter() {
            if ids.is_empty() {
                return Err(EmbedError::EmptyInput.into());
            }
            if let (PoolingStrategy::Weighted, Some(w)) = (loaded.pooling.strategy(), loaded.pooling.weights()) {
                if ids.iter().map(|&id| w[id as usize] as f64).sum::<f64>() == 0.0 {
                    return Err(EmbedError::DegenerateWeights.into());
                }
            }
        }
    }
    let chunks = JsonlChunks { loaded, prepared, max_tokens, next: 0, _permit: permit };
    Ok(with_content_type(Body::from_stream(futures::stream::iter(chunks)), WireFormat::Jsonl))
}

struct JsonlChunks {
    loaded: Arc<LoadedModel>,
    prepared: PreparedBatch,
    max_tokens: usize,
    next: usize,
    // admission is held until the last line is produced
    _permit: OwnedSemaphorePermit,
}

impl Iterator for JsonlChunks {
    type Item = Result<Bytes, EmbedError>;

    fn next(&mut self) -> Option<Self::Item> {
        let count = self.prepared.batch.len();
        if self.next >= count {
            return None;
        }
        let pipeline = self.loaded.pipeline(self.max_tokens);
        let mut buf = Vec::with_capacity(JSONL_CHUNK_BYTES + 1024);
        while self.next < count && buf.len() < JSONL_CHUNK_BYTES {
            match pipeline.embed_one(self.prepared.batch.slice(self.next)) {
                Ok(e) => wire::write_jsonl_line(&e.values, &mut buf),
                Err(e) => {
                    self.next = count;
                    tracing::warn!("aborting jsonl stream: {e}");
                    return Some(Err(e));
                }
            }
            self.next += 1;
        }
        Some(Ok(Bytes::from(buf)))
    }
}
