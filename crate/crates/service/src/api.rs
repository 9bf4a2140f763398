//! The `/v1` HTTP surface over a shared [`Platform`].
//!
//! All mutations go through one mutex, so requests for the same session are
//! serialized and event appends are totally ordered.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use kindred_core::analytics::preferences::{Dimension, Preference};
use kindred_core::analytics::report::{analyze, AnalysisConfig, AnalysisReport};
use kindred_core::platform::{ApiError, ErrorCode, FlagRequest, Platform};
use kindred_core::study::{Answers, EventLog, PhasePayload};

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Mutex<Platform>>,
    pub analysis: AnalysisConfig,
}

impl AppState {
    pub fn new(platform: Platform, analysis: AnalysisConfig) -> Self {
        Self {
            platform: Arc::new(Mutex::new(platform)),
            analysis,
        }
    }

    fn lock(&self) -> MutexGuard<'_, Platform> {
        // A panic inside a handler leaves the platform as it was before the
        // failed call, since every operation validates before appending.
        self.platform.lock().unwrap_or_else(|p| p.into_inner())
    }
}

/// An [`ApiError`] on the wire.
#[derive(Debug)]
pub struct HttpError(pub ApiError);

impl From<ApiError> for HttpError {
    fn from(e: ApiError) -> Self {
        Self(e)
    }
}

pub fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::PhaseViolation => StatusCode::CONFLICT,
        ErrorCode::NotFound => StatusCode::NOT_FOUND,
        ErrorCode::SafetyRejected => StatusCode::UNPROCESSABLE_ENTITY,
        ErrorCode::BackendUnavailable => StatusCode::SERVICE_UNAVAILABLE,
        ErrorCode::ContractViolation => StatusCode::INTERNAL_SERVER_ERROR,
        ErrorCode::Validation => StatusCode::BAD_REQUEST,
    }
}

impl IntoResponse for HttpError {
    fn into_response(self) -> Response {
        (status_for(self.0.code), Json(self.0)).into_response()
    }
}

fn validation(message: impl Into<String>) -> HttpError {
    HttpError(ApiError::new(ErrorCode::Validation, message, "request"))
}

/// JSON body whose parse failures come back as a Validation error.
pub struct Body<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = HttpError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(validation(rejection_message(e))),
        }
    }
}

fn rejection_message(e: JsonRejection) -> String {
    format!("malformed request body: {}", e.body_text())
}

type ApiResult<T> = Result<Json<T>, HttpError>;

#[derive(Debug, Deserialize)]
struct EnrollRequest {
    #[serde(default)]
    demographics: Answers,
}

#[derive(Debug, Deserialize)]
struct DraftRequest {
    draft: String,
}

#[derive(Debug, Deserialize)]
struct ActionsRequest {
    feedback_id: String,
    action_ids: Vec<usize>,
}

#[derive(Debug, Deserialize)]
struct ResponseRequest {
    text: String,
}

#[derive(Debug, Deserialize)]
struct EvalQuery {
    rater_id: String,
    #[serde(default = "default_dimension")]
    dimension: Dimension,
}

fn default_dimension() -> Dimension {
    Dimension::Empathy
}

#[derive(Debug, Deserialize)]
struct EvalSubmit {
    preference: Preference,
}

#[derive(Debug, Serialize)]
struct Health {
    status: &'static str,
    rules_version: String,
    events: usize,
}

pub fn router(state: AppState) -> Router {
    let v1 = Router::new()
        .route("/health", get(health))
        .route("/forms", get(forms))
        .route("/training", get(training))
        .route("/participants", post(enroll))
        .route("/participants/{id}", get(participant))
        .route("/participants/{id}/phase", post(advance_phase))
        .route("/sessions/{id}", get(session))
        .route("/sessions/{id}/post", get(current_post))
        .route("/sessions/{id}/feedback", post(feedback))
        .route("/sessions/{id}/feedback/reload", post(reload))
        .route("/sessions/{id}/actions", post(actions))
        .route("/sessions/{id}/response", post(response))
        .route("/sessions/{id}/scores", post(scores))
        .route("/flags", post(flag))
        .route("/eval/next", get(eval_next))
        .route("/eval/{id}", post(eval_submit))
        .route("/analytics", get(analytics_manifest))
        .route("/analytics/{file}", get(analytics_file))
        .with_state(state);
    Router::new()
        .nest("/v1", v1)
        .fallback(|| async { HttpError(ApiError::new(ErrorCode::NotFound, "no such endpoint", "route")) })
}

async fn health(State(s): State<AppState>) -> Json<Health> {
    let p = s.lock();
    Json(Health {
        status: "ok",
        rules_version: p.rules().version().to_string(),
        events: p.log().len(),
    })
}

async fn forms(State(s): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::to_value(s.lock().forms()).expect("forms serialize"))
}

async fn training(State(s): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::to_value(s.lock().training()).expect("training serializes"))
}

async fn enroll(State(s): State<AppState>, Body(req): Body<EnrollRequest>) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().enroll(req.demographics)?))
}

async fn participant(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().participant(&id)?.clone()))
}

async fn advance_phase(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Body(payload): Body<PhasePayload>,
) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().advance_phase(&id, payload)?))
}

async fn session(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().session(&id)?.clone()))
}

async fn current_post(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().current_post(&id)?))
}

async fn feedback(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<DraftRequest>,
) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().feedback(&id, &req.draft)?))
}

async fn reload(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().reload(&id)?))
}

async fn actions(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<ActionsRequest>,
) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().accept_actions(&id, &req.feedback_id, &req.action_ids)?))
}

async fn response(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<ResponseRequest>,
) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().submit_response(&id, &req.text)?))
}

async fn scores(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<DraftRequest>,
) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().scores(&id, &req.draft)?))
}

async fn flag(State(s): State<AppState>, Body(req): Body<FlagRequest>) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().flag(req)?))
}

async fn eval_next(State(s): State<AppState>, Query(q): Query<EvalQuery>) -> Result<Response, HttpError> {
    match s.lock().eval_next(&q.rater_id, q.dimension)? {
        Some(task) => Ok(Json(task).into_response()),
        None => Ok(StatusCode::NO_CONTENT.into_response()),
    }
}

async fn eval_submit(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Body(req): Body<EvalSubmit>,
) -> ApiResult<impl Serialize> {
    Ok(Json(s.lock().eval_submit(&id, req.preference)?))
}

/// Runs the analysis over a copy of the log taken under the lock, so the
/// result reflects one consistent point in time.
async fn snapshot_report(s: &AppState) -> Result<AnalysisReport, HttpError> {
    let text = s.lock().log().to_jsonl();
    let cfg = s.analysis.clone();
    let internal = |m: String| HttpError(ApiError::new(ErrorCode::ContractViolation, m, "analytics"));
    tokio::task::spawn_blocking(move || {
        let log = EventLog::from_jsonl(&text).map_err(|e| e.to_string())?;
        analyze(&log, &cfg).map_err(|e| e.to_string())
    })
    .await
    .map_err(|e| internal(e.to_string()))?
    .map_err(internal)
}

async fn analytics_manifest(State(s): State<AppState>) -> Result<Response, HttpError> {
    let report = snapshot_report(&s).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], report.manifest_json()).into_response())
}

async fn analytics_file(State(s): State<AppState>, Path(file): Path<String>) -> Result<Response, HttpError> {
    let report = snapshot_report(&s).await?;
    let body = report
        .files
        .get(&file)
        .cloned()
        .ok_or_else(|| HttpError(ApiError::new(ErrorCode::NotFound, format!("no analytics output {file}"), "analytics")))?;
    let ctype = if file.ends_with(".json") {
        "application/json"
    } else {
        "text/tab-separated-values; charset=utf-8"
    };
    Ok(([(header::CONTENT_TYPE, ctype)], body).into_response())
}
