use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{ClassifyRequest, RegisterRequest, Service, ServiceError};

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unauthorized(_) => StatusCode::UNAUTHORIZED,
            ServiceError::Upstream(body) => return (StatusCode::BAD_GATEWAY, Json(body)).into_response(),
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type AppState = Arc<Service>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload.map(|Json(v)| v).map_err(|e| ServiceError::BadRequest(e.body_text()))
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn classify(
    State(svc): State<AppState>,
    payload: Result<Json<ClassifyRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let req = body(payload)?;
    let resp = blocking(move || svc.classify(&req)).await?;
    Ok(Json(resp).into_response())
}

async fn list_models(State(svc): State<AppState>) -> Response {
    Json(svc.list_models()).into_response()
}

async fn register_model(
    State(svc): State<AppState>,
    payload: Result<Json<RegisterRequest>, JsonRejection>,
) -> Result<Response, ServiceError> {
    let req = body(payload)?;
    let entry = blocking(move || svc.register_model_version(req)).await?;
    Ok((StatusCode::CREATED, Json(entry)).into_response())
}

async fn list_runs(State(svc): State<AppState>) -> Result<Response, ServiceError> {
    let runs = blocking(move || svc.list_runs()).await?;
    Ok(Json(runs).into_response())
}

async fn get_run(State(svc): State<AppState>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let text = blocking(move || svc.get_run(&id)).await?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

#[derive(Deserialize)]
struct CompareQuery {
    base: String,
    variant: String,
}

async fn compare(State(svc): State<AppState>, Query(q): Query<CompareQuery>) -> Result<Response, ServiceError> {
    let cmp = blocking(move || svc.compare(&q.base, &q.variant)).await?;
    Ok(Json(cmp).into_response())
}

async fn healthz() -> &'static str {
    "ok"
}

async fn require_token(State(svc): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &svc.config().auth_token {
        let given = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok());
        if given != Some(format!("Bearer {token}").as_str()) {
            return ServiceError::Unauthorized("missing or wrong bearer token".into()).into_response();
        }
    }
    next.run(req).await
}

/// `/v1` API, `/healthz`, and the UI bundle at `/` when one is configured.
pub fn router(svc: Arc<Service>) -> Router {
    let api = Router::new()
        .route("/v1/classify", post(classify))
        .route("/v1/models", get(list_models).post(register_model))
        .route("/v1/runs", get(list_runs))
        .route("/v1/runs/{id}", get(get_run))
        .route("/v1/compare", get(compare))
        .route_layer(middleware::from_fn_with_state(svc.clone(), require_token));
    let mut app = api.route("/healthz", get(healthz));
    if let Some(dir) = &svc.config().ui_dir {
        app = app.fallback_service(tower_http::services::ServeDir::new(dir));
    }
    app.with_state(svc)
}

/// Serves until the process is stopped.
pub async fn serve(svc: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(svc)).await
}
