//! Local HTTP service: one in-memory session per uploaded image.
//!
//! Coordinates on the wire are original-image pixels. `theta_d_px` and `hit_radius_px`
//! in the creation request are display pixels and are divided by `scale`.

use std::collections::HashMap;
use std::io::Cursor;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use image::{ImageFormat, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use swipecut_core::{Error as CoreError, Params, QueryProposal, SessionState, SwipeStroke};

const MAX_UPLOAD_BYTES: usize = 64 * 1024 * 1024;
const OVERLAY_ALPHA: f64 = 0.45;
const OVERLAY_COLOR: [f64; 3] = [0.0, 220.0, 0.0];

#[derive(Debug)]
pub enum ApiError {
    BadRequest(String),
    NotFound,
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ApiError::NotFound => (StatusCode::NOT_FOUND, "unknown session".to_string()),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(json!({ "error": msg }))).into_response()
    }
}

impl From<CoreError> for ApiError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::NoPendingProposal | CoreError::NoLabels => ApiError::Conflict(e.to_string()),
            CoreError::Io(_) | CoreError::Csv(_) => ApiError::Internal(e.to_string()),
            _ => ApiError::BadRequest(e.to_string()),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;

struct Entry {
    session: tokio::sync::Mutex<SessionState>,
    image: RgbImage,
    last_used: Mutex<Instant>,
}

impl Entry {
    fn touch(&self) {
        *self.last_used.lock().unwrap() = Instant::now();
    }
}

/// Shared service state: the session table.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Entry>>>>,
}

impl AppState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, token: &str) -> ApiResult<Arc<Entry>> {
        let entry = self.sessions.read().unwrap().get(token).cloned().ok_or(ApiError::NotFound)?;
        entry.touch();
        Ok(entry)
    }

    /// Drops sessions untouched for longer than `max_idle`; returns how many were removed.
    pub fn evict_idle(&self, max_idle: Duration) -> usize {
        let now = Instant::now();
        let mut sessions = self.sessions.write().unwrap();
        let before = sessions.len();
        sessions.retain(|_, e| now.duration_since(*e.last_used.lock().unwrap()) <= max_idle);
        before - sessions.len()
    }
}

/// Periodically evicts idle sessions until the runtime shuts down.
pub fn spawn_evictor(state: AppState, max_idle: Duration) -> tokio::task::JoinHandle<()> {
    let period = (max_idle / 4).max(Duration::from_secs(1));
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let n = state.evict_idle(max_idle);
            if n > 0 {
                log::info!("evicted {n} idle sessions");
            }
        }
    })
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{token}", axum::routing::delete(delete_session))
        .route("/sessions/{token}/proposal", get(get_proposal))
        .route("/sessions/{token}/swipe", post(swipe))
        .route("/sessions/{token}/mask", get(get_mask))
        .route("/sessions/{token}/overlay", get(get_overlay))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct SeedView {
    pub id: usize,
    pub x: f64,
    pub y: f64,
}

fn seed_views(p: Option<&QueryProposal>) -> Vec<SeedView> {
    p.map(|p| {
        p.seeds.iter().map(|s| SeedView { id: s.superpixel, x: s.centroid[0], y: s.centroid[1] }).collect()
    })
    .unwrap_or_default()
}

#[derive(Debug, Deserialize)]
struct CreateParams {
    #[serde(flatten)]
    params: Params,
    scale: Option<f64>,
}

/// Parses the optional `params` part. Distances are given in display pixels.
fn creation_params(raw: Option<&[u8]>) -> ApiResult<Params> {
    let Some(raw) = raw else { return Ok(Params::default()) };
    let req: CreateParams =
        serde_json::from_slice(raw).map_err(|e| ApiError::BadRequest(format!("params: {e}")))?;
    let scale = req.scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(ApiError::BadRequest("scale must be a positive number".into()));
    }
    let mut params = req.params;
    params.theta_d_px /= scale;
    params.hit_radius_px /= scale;
    params.validate()?;
    Ok(params)
}

async fn create_session(State(state): State<AppState>, mut multipart: Multipart) -> ApiResult<Response> {
    let mut image_bytes: Option<Bytes> = None;
    let mut params_bytes: Option<Bytes> = None;
    while let Some(field) = multipart.next_field().await.map_err(|e| ApiError::BadRequest(e.to_string()))? {
        let name = field.name().unwrap_or_default().to_string();
        let data = field.bytes().await.map_err(|e| ApiError::BadRequest(e.to_string()))?;
        match name.as_str() {
            "image" => image_bytes = Some(data),
            "params" => params_bytes = Some(data),
            _ => {}
        }
    }
    let image_bytes = image_bytes.ok_or_else(|| ApiError::BadRequest("missing image part".into()))?;
    let params = creation_params(params_bytes.as_deref())?;

    let (session, image) = tokio::task::spawn_blocking(move || -> ApiResult<_> {
        let image = image::load_from_memory(&image_bytes)
            .map_err(|e| ApiError::BadRequest(format!("image: {e}")))?
            .to_rgb8();
        let (session, _) = swipecut_core::start_session(&image, params)?;
        Ok((session, image))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;

    let token = uuid::Uuid::new_v4().simple().to_string();
    let body = json!({
        "token": token,
        "width": image.width(),
        "height": image.height(),
        "round": session.round,
        "proposal": seed_views(session.pending.as_ref()),
    });
    let entry = Entry { session: tokio::sync::Mutex::new(session), image, last_used: Mutex::new(Instant::now()) };
    state.sessions.write().unwrap().insert(token, Arc::new(entry));
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn get_proposal(State(state): State<AppState>, Path(token): Path<String>) -> ApiResult<Json<Vec<SeedView>>> {
    let entry = state.get(&token)?;
    let session = entry.session.lock().await;
    Ok(Json(seed_views(session.pending.as_ref())))
}

fn point(v: &Value) -> Option<[f64; 2]> {
    match v {
        Value::Array(xy) if xy.len() == 2 => Some([xy[0].as_f64()?, xy[1].as_f64()?]),
        Value::Object(m) => Some([m.get("x")?.as_f64()?, m.get("y")?.as_f64()?]),
        _ => None,
    }
}

/// Accepts `[[x, y], ...]`, `[{"x":..,"y":..}, ...]`, or either wrapped as `{"points": ...}`.
pub fn parse_polyline(body: &[u8]) -> Result<SwipeStroke, String> {
    let v: Value = serde_json::from_slice(body).map_err(|e| format!("invalid JSON: {e}"))?;
    let list = match &v {
        Value::Array(a) => a,
        Value::Object(m) => match m.get("points") {
            Some(Value::Array(a)) => a,
            _ => return Err("expected a `points` array".into()),
        },
        _ => return Err("expected a polyline".into()),
    };
    let points = list
        .iter()
        .enumerate()
        .map(|(i, p)| point(p).ok_or_else(|| format!("point {i} is not an (x, y) pair")))
        .collect::<Result<Vec<_>, _>>()?;
    SwipeStroke::new(points).map_err(|e| e.to_string())
}

async fn swipe(State(state): State<AppState>, Path(token): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let entry = state.get(&token)?;
    let stroke = parse_polyline(&body).map_err(ApiError::BadRequest)?;
    let mut session = entry.session.lock().await;
    let labels = session.apply_swipe(&stroke)?;
    let labels: Vec<Value> = labels.iter().map(|l| json!({ "id": l.superpixel, "label": l.label })).collect();
    Ok(Json(json!({
        "labels": labels,
        "round": session.round,
        "complete": session.is_complete(),
    })))
}

fn png_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

async fn get_mask(State(state): State<AppState>, Path(token): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&token)?;
    let mask = entry.session.lock().await.current_mask()?;
    Ok(png_response(mask.to_png()?))
}

/// The image with ROI pixels tinted.
pub fn overlay(image: &RgbImage, mask: &swipecut_core::SegmentationMask) -> RgbImage {
    RgbImage::from_fn(image.width(), image.height(), |x, y| {
        let p = image.get_pixel(x, y).0;
        if mask.get(x, y) == 1 {
            Rgb(std::array::from_fn(|i| {
                (p[i] as f64 * (1.0 - OVERLAY_ALPHA) + OVERLAY_COLOR[i] * OVERLAY_ALPHA).round() as u8
            }))
        } else {
            Rgb(p)
        }
    })
}

async fn get_overlay(State(state): State<AppState>, Path(token): Path<String>) -> ApiResult<Response> {
    let entry = state.get(&token)?;
    let mask = entry.session.lock().await.current_mask()?;
    let mut out = Cursor::new(Vec::new());
    overlay(&entry.image, &mask)
        .write_to(&mut out, ImageFormat::Png)
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(png_response(out.into_inner()))
}

async fn delete_session(State(state): State<AppState>, Path(token): Path<String>) -> ApiResult<StatusCode> {
    state.sessions.write().unwrap().remove(&token).ok_or(ApiError::NotFound)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Binds to loopback and serves until the process is stopped.
pub async fn serve(port: u16, max_idle: Duration) -> anyhow::Result<()> {
    let state = AppState::new();
    spawn_evictor(state.clone(), max_idle);
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyline_shapes() {
        assert_eq!(parse_polyline(b"[[1, 2], [3.5, 4]]").unwrap().points, vec![[1.0, 2.0], [3.5, 4.0]]);
        assert_eq!(parse_polyline(br#"{"points": [{"x": 1, "y": 2}]}"#).unwrap().points, vec![[1.0, 2.0]]);
        assert!(parse_polyline(b"[]").unwrap().points.is_empty());
        assert!(parse_polyline(b"[[1]]").is_err());
        assert!(parse_polyline(b"[[1, \"a\"]]").is_err());
        assert!(parse_polyline(b"{\"pts\": []}").is_err());
        assert!(parse_polyline(b"not json").is_err());
        assert!(parse_polyline(b"42").is_err());
    }

    #[test]
    fn scale_maps_display_distances() {
        let p = creation_params(Some(br#"{"scale": 0.5, "theta_k": 3}"#)).unwrap();
        assert_eq!(p.theta_k, 3);
        assert_eq!(p.theta_d_px, 114.0);
        assert_eq!(p.hit_radius_px, 56.0);
        assert_eq!(creation_params(None).unwrap(), Params::default());
        assert!(creation_params(Some(br#"{"scale": 0}"#)).is_err());
        assert!(creation_params(Some(br#"{"theta_k": 0}"#)).is_err());
        assert!(creation_params(Some(b"{")).is_err());
    }

    #[test]
    fn overlay_tints_only_roi() {
        let img = RgbImage::from_pixel(2, 1, Rgb([100, 100, 100]));
        let mask = swipecut_core::SegmentationMask::new(2, 1, vec![1, 0]).unwrap();
        let out = overlay(&img, &mask);
        assert_eq!(out.get_pixel(0, 0).0, [55, 154, 55]);
        assert_eq!(out.get_pixel(1, 0).0, [100, 100, 100]);
    }
}
