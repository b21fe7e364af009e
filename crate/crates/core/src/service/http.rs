//! JSON-over-HTTP API (`/v1/*`) backed by the shared pipeline.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::codec::config::{CodecConfig, ConfigId, LAMBDA_TABLE};
use crate::error::Error;
use crate::image::ImagePlane;
use crate::model::ModelOptions;
use crate::registry::{ModelKey, ModelRegistry};
use crate::service::pipeline::{self, Backends, MaskRequest};
use crate::tma::BackendKind;

const ENDPOINTS: [&str; 5] = ["similarity", "mask", "compress", "decompress", "models"];

/// Shared, read-only state of a running service.
pub struct Session {
    pub registry: ModelRegistry,
    pub backends: Backends,
    pub default_backend: BackendKind,
    pub default_config: ConfigId,
    requests: [AtomicU64; ENDPOINTS.len()],
}

impl Session {
    pub fn new(registry: ModelRegistry, backends: Backends, default_backend: BackendKind) -> Self {
        Self {
            registry,
            backends,
            default_backend,
            default_config: ConfigId::Desk,
            requests: Default::default(),
        }
    }

    fn count(&self, endpoint: usize) {
        self.requests[endpoint].fetch_add(1, Ordering::Relaxed);
    }

    pub fn request_counts(&self) -> BTreeMap<&'static str, u64> {
        ENDPOINTS
            .iter()
            .zip(&self.requests)
            .map(|(n, c)| (*n, c.load(Ordering::Relaxed)))
            .collect()
    }
}

/// Error body `{code, message}` with a matching status.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "invalid_payload",
            message: message.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let (status, code) = match &e {
            Error::ConfigMismatch(_) => (StatusCode::CONFLICT, "config_mismatch"),
            Error::BackendUnavailable(_) => (StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable"),
            Error::MissingModel(_) => (StatusCode::NOT_FOUND, "missing_model"),
            Error::CorruptStream(_) => (StatusCode::BAD_REQUEST, "corrupt_stream"),
            Error::MissingGroundTruth(_) => (StatusCode::BAD_REQUEST, "missing_ground_truth"),
            Error::Io(_) | Error::Checkpoint(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            _ => (StatusCode::BAD_REQUEST, "invalid_payload"),
        };
        Self {
            status,
            code,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

type ApiResult = Result<Json<Value>, ApiError>;

fn decode_b64(field: &str, s: &str) -> Result<Vec<u8>, ApiError> {
    B64.decode(s.trim()).map_err(|e| ApiError::bad_request(format!("{field}: invalid base64 ({e})")))
}

fn decode_image(s: &str) -> Result<ImagePlane, ApiError> {
    ImagePlane::decode(&decode_b64("image", s)?).map_err(|e| ApiError::bad_request(format!("image: {e}")))
}

/// Fields shared by `/similarity`, `/mask` and `/compress`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRequest {
    /// Base64 PNG or JPEG.
    pub image: String,
    pub text: Option<String>,
    pub eta: Option<f32>,
    pub sigma: Option<f32>,
    pub backend: Option<String>,
    pub lambda_index: Option<u8>,
    pub config: Option<String>,
}

impl ImageRequest {
    fn mask_request(&self, session: &Session) -> Result<MaskRequest, ApiError> {
        let d = MaskRequest::default();
        Ok(MaskRequest {
            text: self.text.clone().unwrap_or(d.text),
            eta: self.eta.unwrap_or(d.eta),
            sigma: self.sigma.unwrap_or(d.sigma),
            backend: match &self.backend {
                Some(b) => b.parse()?,
                None => session.default_backend,
            },
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompressRequest {
    pub container: String,
    /// Accepted and ignored: decoding never uses a mask.
    pub text: Option<String>,
}

#[derive(Serialize)]
struct ModelStamp {
    model: String,
    config_id: ConfigId,
    lambda_index: u8,
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        message: e.to_string(),
    })?
}

async fn similarity(State(s): State<Arc<Session>>, body: Result<Json<ImageRequest>, JsonRejection>) -> ApiResult {
    s.count(0);
    let Json(req) = body?;
    blocking(move || {
        let image = decode_image(&req.image)?;
        let m = req.mask_request(&s)?;
        let p = pipeline::similarity(&s.backends, &image, &m.text, m.backend)?;
        Ok(Json(json!({
            "backend": m.backend,
            "text": m.text,
            "height": p.height(),
            "width": p.width(),
            "values": p.data(),
            "png": B64.encode(p.to_png()?),
        })))
    })
    .await
}

async fn mask(State(s): State<Arc<Session>>, body: Result<Json<ImageRequest>, JsonRejection>) -> ApiResult {
    s.count(1);
    let Json(req) = body?;
    blocking(move || {
        let image = decode_image(&req.image)?;
        let m = req.mask_request(&s)?;
        let r = pipeline::make_mask(&s.backends, &image, &m)?;
        Ok(Json(json!({
            "backend": m.backend,
            "text": m.text,
            "eta": m.eta,
            "sigma": m.sigma,
            "height": r.mask.height(),
            "width": r.mask.width(),
            "roi_pixel_fraction": r.roi_pixel_fraction(),
            "mask_png": B64.encode(r.mask.to_png()?),
        })))
    })
    .await
}

fn model_key(session: &Session, config: Option<&str>, lambda_index: Option<u8>) -> Result<ModelKey, ApiError> {
    let config_id = match config {
        Some(c) => c.parse()?,
        None => session.default_config,
    };
    Ok(ModelKey::new(config_id, lambda_index.unwrap_or(1), ModelOptions::full()))
}

async fn compress(State(s): State<Arc<Session>>, body: Result<Json<ImageRequest>, JsonRejection>) -> ApiResult {
    s.count(2);
    let Json(req) = body?;
    blocking(move || {
        let image = decode_image(&req.image)?;
        let m = req.mask_request(&s)?;
        let key = model_key(&s, req.config.as_deref(), req.lambda_index)?;
        let model = s.registry.get(&key)?;
        let r = pipeline::compress(&s.backends, &model, &image, &m)?;
        let stamp = ModelStamp {
            model: key.file_name()?,
            config_id: key.config_id,
            lambda_index: key.lambda_index,
        };
        Ok(Json(json!({
            "container": B64.encode(&r.bytes),
            "bpp": r.metrics.bpp,
            "psnr": r.metrics.psnr,
            "roi_psnr": r.metrics.roi_psnr,
            "roi_pixel_fraction": r.mask.roi_pixel_fraction(),
            "reconstruction_png": B64.encode(r.reconstruction.encode_png()?),
            "model": stamp,
        })))
    })
    .await
}

async fn decompress(State(s): State<Arc<Session>>, body: Result<Json<DecompressRequest>, JsonRejection>) -> ApiResult {
    s.count(3);
    let Json(req) = body?;
    blocking(move || {
        let bytes = decode_b64("container", &req.container)?;
        let header = crate::codec::Bitstream::from_bytes(&bytes)?;
        let key = ModelKey::new(header.config_id, header.lambda_index, ModelOptions::full());
        let model = s.registry.get(&key)?;
        let (b, image) = pipeline::decompress(&model, &bytes)?;
        let warnings: Vec<&str> = req
            .text
            .iter()
            .map(|_| "text is ignored: decoding does not use a mask")
            .collect();
        Ok(Json(json!({
            "height": image.height(),
            "width": image.width(),
            "image_png": B64.encode(image.encode_png()?),
            "provenance": b.provenance,
            "warnings": warnings,
            "model": ModelStamp {
                model: key.file_name()?,
                config_id: key.config_id,
                lambda_index: key.lambda_index,
            },
        })))
    })
    .await
}

async fn models(State(s): State<Arc<Session>>) -> ApiResult {
    s.count(4);
    let configs: Vec<Value> = ConfigId::ALL
        .iter()
        .map(|&id| {
            let c = CodecConfig::new(id, 0).expect("index 0 is valid");
            json!({"id": id, "channels_n": c.channels_n, "channels_m": c.channels_m})
        })
        .collect();
    Ok(Json(json!({
        "configs": configs,
        "lambda_table": LAMBDA_TABLE,
        "models": s.registry.list(),
        "default_backend": s.default_backend,
        "requests": s.request_counts(),
    })))
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/v1/similarity", post(similarity))
        .route("/v1/mask", post(mask))
        .route("/v1/compress", post(compress))
        .route("/v1/decompress", post(decompress))
        .route("/v1/models", get(models))
        .with_state(session)
}

/// Serves `router(session)` on `0.0.0.0:port` until the process exits.
pub async fn serve(session: Arc<Session>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(session)).await
}
