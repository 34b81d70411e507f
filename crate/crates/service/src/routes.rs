use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, FromRequestParts, Multipart, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_LENGTH, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::routing::{get, post};
use axum::{Json, Router};
use cardiodx_core::data::{
    check_feature, parse_inference_csv, FeatureIssue, InferenceRow, RowStatus, FEATURE_NAMES,
    N_FEATURES,
};
use cardiodx_core::{Matrix, ModelEnvelope};
use http_body_util::{BodyExt, LengthLimitError, Limited};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::ApiError;
use crate::state::AppState;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/login", post(login))
        .route("/api/predict", post(predict))
        .route("/api/upload", post(upload))
        .route("/api/model", get(model_info))
        .with_state(state)
}

/// A request carrying a live bearer token.
pub struct Authenticated {
    pub username: String,
}

impl FromRequestParts<AppState> for Authenticated {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or_else(ApiError::unauthorized)?;
        let session = state
            .sessions()
            .validate(token)
            .ok_or_else(|| ApiError::new(axum::http::StatusCode::UNAUTHORIZED, "invalid or expired token"))?;
        Ok(Self { username: session.username })
    }
}

async fn health() -> &'static str {
    "ok"
}

#[derive(Deserialize)]
struct LoginRequest {
    username: String,
    password: String,
}

#[derive(Serialize)]
struct LoginResponse {
    token: String,
    expires_at: String,
}

async fn login(
    State(state): State<AppState>,
    body: Result<Json<LoginRequest>, JsonRejection>,
) -> Result<Json<LoginResponse>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::unprocessable("malformed login request").with_details(json!(e.body_text())))?;
    let check = state.clone();
    let (user, pass) = (req.username.clone(), req.password);
    let ok = tokio::task::spawn_blocking(move || check.users().authenticate(&user, &pass))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    if !ok {
        log::info!("failed login attempt");
        return Err(ApiError::new(axum::http::StatusCode::UNAUTHORIZED, "invalid credentials"));
    }
    let (token, session) = state.sessions().issue(&req.username);
    log::info!("user {} logged in", req.username);
    Ok(Json(LoginResponse { token, expires_at: session.expires_at.to_rfc3339() }))
}

/// Outcome for one patient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub patient_id: String,
    pub label: Option<u8>,
    pub probability: Option<f64>,
    pub row_status: RowStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCounts {
    pub total: usize,
    pub ok: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub model_type: String,
    pub trained_at: String,
    pub dataset_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub results: Vec<PredictionResult>,
    pub counts: BatchCounts,
    pub model: ModelSnapshot,
}

fn snapshot(env: &ModelEnvelope) -> ModelSnapshot {
    ModelSnapshot {
        model_type: env.model_type().to_string(),
        trained_at: env.metadata.trained_at.clone(),
        dataset_fingerprint: env.metadata.dataset_fingerprint.clone(),
    }
}

/// Runs the model over the `Ok` rows in one batch and fills in every row's result.
pub fn score_rows(env: &ModelEnvelope, rows: &[InferenceRow]) -> Result<Vec<PredictionResult>, ApiError> {
    let ready: Vec<[f64; N_FEATURES]> = rows.iter().filter_map(|r| r.features).collect();
    let mut scored = if ready.is_empty() {
        Vec::new()
    } else {
        let x = Matrix::from_rows(&ready)?;
        let p = env.model.predict(&x)?;
        p.labels.into_iter().zip(p.scores).collect()
    }
    .into_iter();
    Ok(rows
        .iter()
        .map(|r| {
            let (label, probability) = match r.features {
                Some(_) => scored.next().map(|(l, s)| (Some(l), Some(s))).unwrap_or_default(),
                None => (None, None),
            };
            PredictionResult {
                patient_id: r.patient_id.clone(),
                label,
                probability,
                row_status: r.status,
                detail: r.detail.clone(),
            }
        })
        .collect())
}

fn parse_record(body: &Value) -> Result<InferenceRow, ApiError> {
    let Some(obj) = body.as_object() else {
        return Err(ApiError::unprocessable("request body must be an object of the 13 features"));
    };
    let mut missing = Vec::new();
    let mut invalid = Vec::new();
    let mut values = [0.0; N_FEATURES];
    for (f, name) in FEATURE_NAMES.iter().enumerate() {
        match obj.get(*name) {
            None | Some(Value::Null) => missing.push(*name),
            Some(v) => match v.as_f64() {
                None => invalid.push(json!({ "field": name, "message": "value must be a number" })),
                Some(x) => match check_feature(f, x) {
                    Ok(()) => values[f] = x,
                    Err(FeatureIssue::OutsideSet(set)) => invalid.push(json!({
                        "field": name,
                        "value": x,
                        "allowed": set,
                        "message": format!("{name} must be one of {set:?}"),
                    })),
                    Err(issue) => invalid.push(json!({ "field": name, "value": x, "message": issue.to_string() })),
                },
            },
        }
    }
    if !missing.is_empty() {
        return Err(ApiError::unprocessable(format!("missing field(s): {}", missing.join(", ")))
            .with_details(json!({ "missing": missing })));
    }
    if !invalid.is_empty() {
        let fields: Vec<&str> = invalid.iter().filter_map(|i| i["field"].as_str()).collect();
        return Err(ApiError::unprocessable(format!("invalid value for {}", fields.join(", ")))
            .with_details(json!({ "invalid": invalid })));
    }
    let patient_id = match obj.get("id") {
        None | Some(Value::Null) => "1".to_string(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => other.to_string(),
    };
    Ok(InferenceRow { patient_id, status: RowStatus::Ok, features: Some(values), detail: None })
}

async fn predict(
    State(state): State<AppState>,
    _auth: Authenticated,
    body: Result<Json<Value>, JsonRejection>,
) -> Result<Json<PredictionResult>, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::unprocessable("malformed request body").with_details(json!(e.body_text())))?;
    let row = parse_record(&body)?;
    let env = state.model().ok_or_else(ApiError::no_model)?;
    let mut results = score_rows(&env, std::slice::from_ref(&row))?;
    Ok(Json(results.remove(0)))
}

async fn read_limited(body: Body, limit: usize) -> Result<Bytes, ApiError> {
    match Limited::new(body, limit).collect().await {
        Ok(c) => Ok(c.to_bytes()),
        Err(e) if e.downcast_ref::<LengthLimitError>().is_some() => Err(ApiError::too_large(limit)),
        Err(e) => Err(ApiError::unprocessable(format!("cannot read request body: {e}"))),
    }
}

/// The CSV text of an upload, from either a multipart form or a raw body.
async fn upload_text(req: Request, limit: usize) -> Result<String, ApiError> {
    let declared = req
        .headers()
        .get(CONTENT_LENGTH)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok());
    if declared.is_some_and(|n| n > limit) {
        return Err(ApiError::too_large(limit));
    }
    let is_multipart = req
        .headers()
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let (parts, body) = req.into_parts();
    let bytes = read_limited(body, limit).await?;
    let bytes = if is_multipart {
        let req = Request::from_parts(parts, Body::from(bytes));
        let mut form = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::unprocessable(e.body_text()))?;
        let mut chosen = None;
        while let Some(field) = form.next_field().await.map_err(|e| ApiError::unprocessable(e.body_text()))? {
            let is_file = field.file_name().is_some() || field.name() == Some("file");
            let data = field.bytes().await.map_err(|e| ApiError::unprocessable(e.body_text()))?;
            if is_file || chosen.is_none() {
                chosen = Some(data);
                if is_file {
                    break;
                }
            }
        }
        chosen.ok_or_else(|| ApiError::unprocessable("multipart form contains no file"))?
    } else {
        bytes
    };
    String::from_utf8(bytes.to_vec()).map_err(|_| ApiError::unprocessable("upload is not valid UTF-8 text"))
}

async fn upload(
    State(state): State<AppState>,
    _auth: Authenticated,
    req: Request,
) -> Result<Json<BatchReport>, ApiError> {
    let text = upload_text(req, state.upload_limit()).await?;
    if text.trim().is_empty() {
        return Err(ApiError::unprocessable("upload is empty"));
    }
    let rows = parse_inference_csv(&text)?;
    let env = state.model().ok_or_else(ApiError::no_model)?;
    let results = score_rows(&env, &rows)?;
    let ok = results.iter().filter(|r| r.row_status == RowStatus::Ok).count();
    let counts = BatchCounts { total: results.len(), ok, skipped: results.len() - ok };
    log::info!("scored upload: {} rows, {} skipped", counts.total, counts.skipped);
    Ok(Json(BatchReport { results, counts, model: snapshot(&env) }))
}

async fn model_info(State(state): State<AppState>, _auth: Authenticated) -> Json<Value> {
    let uptime = state.uptime().as_secs_f64();
    let Some(env) = state.model() else {
        return Json(json!({ "loaded": false, "status": "no model", "uptime_seconds": uptime }));
    };
    let env: Arc<ModelEnvelope> = env;
    let mut out = Map::new();
    out.insert("loaded".into(), true.into());
    out.insert("model_type".into(), env.model_type().as_str().into());
    out.insert("trained_at".into(), env.metadata.trained_at.clone().into());
    out.insert("seed".into(), env.metadata.seed.into());
    out.insert("metrics".into(), json!(env.metadata.metrics));
    out.insert("dataset_fingerprint".into(), env.metadata.dataset_fingerprint.clone().into());
    out.insert("uptime_seconds".into(), uptime.into());
    Json(Value::Object(out))
}
