use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::model::AnnotationTask;
use crate::service::{ReviewRequest, ServiceError, SessionRequest, SubmitRequest};
use crate::Service;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::Auth(_) => StatusCode::UNAUTHORIZED,
            ServiceError::Forbidden(_) | ServiceError::QualificationRequired { .. } | ServiceError::NotAssigned { .. } => {
                StatusCode::FORBIDDEN
            }
            ServiceError::Validation { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::IncompleteQualification { .. } | ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let mut body = json!({ "code": self.code(), "message": self.to_string() });
        if let ServiceError::Validation { field, .. } = &self {
            body["field"] = json!(field);
        }
        (status, Json(json!({ "error": body }))).into_response()
    }
}

fn bearer(headers: &HeaderMap) -> Result<&str, ServiceError> {
    headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .ok_or_else(|| ServiceError::Auth("missing bearer token".into()))
}

/// Parses a JSON body, reporting the path of the first bad field.
fn body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() || path == "." {
            ServiceError::BadRequest(format!("invalid JSON body: {inner}"))
        } else {
            ServiceError::Validation { field: path, message: inner.to_string() }
        }
    })
}

async fn create_session(State(svc): State<Arc<Service>>, bytes: Bytes) -> Result<Response, ServiceError> {
    let req: SessionRequest = body(&bytes)?;
    Ok(Json(svc.create_session(&req)?).into_response())
}

async fn next_item(State(svc): State<Arc<Service>>, headers: HeaderMap) -> Result<Response, ServiceError> {
    Ok(Json(svc.next_item(bearer(&headers)?)?).into_response())
}

async fn submit(State(svc): State<Arc<Service>>, headers: HeaderMap, bytes: Bytes) -> Result<Response, ServiceError> {
    let token = bearer(&headers)?;
    let req: SubmitRequest = body(&bytes)?;
    let ack = svc.submit(token, &req)?;
    let status = if ack.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(ack)).into_response())
}

#[derive(Debug, Deserialize)]
struct ExportParams {
    task: AnnotationTask,
    #[serde(default)]
    history: bool,
}

async fn export(
    State(svc): State<Arc<Service>>,
    headers: HeaderMap,
    params: Result<Query<ExportParams>, QueryRejection>,
) -> Result<Response, ServiceError> {
    let token = bearer(&headers)?;
    let Query(p) = params.map_err(|e| ServiceError::BadRequest(e.body_text()))?;
    let text = svc.export(token, p.task, p.history)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn review(State(svc): State<Arc<Service>>, headers: HeaderMap, bytes: Bytes) -> Result<Response, ServiceError> {
    let token = bearer(&headers)?;
    let req: ReviewRequest = body(&bytes)?;
    Ok(Json(svc.qualification_review(token, &req)?).into_response())
}

async fn not_found() -> ServiceError {
    ServiceError::NotFound("no such endpoint".into())
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/next", get(next_item))
        .route("/submit", post(submit))
        .route("/export", get(export))
        .route("/qualification/review", post(review))
        .fallback(not_found)
        .with_state(service)
}

/// Serves until Ctrl-C.
pub async fn serve(service: Arc<Service>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
