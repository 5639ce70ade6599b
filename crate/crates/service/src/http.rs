//! HTTP API. Every body is JSON; ingest takes `multipart/form-data` with
//! the fields `name`, `dtd`, an optional `wrapRoot` and any number of
//! `document` files.

use std::sync::Arc;

use axum::extract::{Multipart, Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use equix_core::query::{parse_query, parse_request, Mode, QueryRequest};
use serde_json::json;

use crate::error::ServiceError;
use crate::service::{self, IngestRequest};
use crate::store::Store;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound { .. } => StatusCode::NOT_FOUND,
            ServiceError::Validation(_) | ServiceError::Duplicate(_) | ServiceError::BadRequest(_) => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ServiceError::Io(_) | ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = json!({ "error": self.to_string(), "diagnostics": self.diagnostics() });
        (status, Json(body)).into_response()
    }
}

type Shared = Arc<Store>;
type ApiResult<T> = Result<T, ServiceError>;

pub fn router(store: Shared) -> Router {
    Router::new()
        .route("/catalogs", get(list_catalogs).post(ingest))
        .route("/catalogs/{id}", get(get_catalog))
        .route("/catalogs/{id}/dtd", get(get_dtd))
        .route("/catalogs/{id}/query", post(query))
        .route("/runs/{id}", get(get_run))
        .with_state(store)
}

/// Runs blocking store work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> ApiResult<T> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn list_catalogs(State(store): State<Shared>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || service::list_catalogs(&store)).await?))
}

async fn get_catalog(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || service::get_catalog(&store, &id)).await?))
}

async fn get_dtd(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || service::get_dtd_tree(&store, &id)).await?))
}

async fn get_run(State(store): State<Shared>, Path(id): Path<String>) -> ApiResult<impl IntoResponse> {
    Ok(Json(blocking(move || service::get_run(&store, &id)).await?))
}

fn bad_field(e: impl std::fmt::Display) -> ServiceError {
    ServiceError::BadRequest(format!("multipart body: {e}"))
}

async fn ingest(State(store): State<Shared>, mut form: Multipart) -> ApiResult<impl IntoResponse> {
    let mut req = IngestRequest::default();
    let mut have_dtd = false;
    while let Some(field) = form.next_field().await.map_err(bad_field)? {
        let name = field.name().unwrap_or_default().to_owned();
        let file_name = field.file_name().unwrap_or_default().to_owned();
        let text = field.text().await.map_err(bad_field)?;
        match name.as_str() {
            "name" => req.name = text.trim().to_owned(),
            "dtd" => {
                req.dtd = text;
                have_dtd = true;
            }
            "wrapRoot" => {
                let t = text.trim();
                if !t.is_empty() {
                    req.wrap_root = Some(t.to_owned());
                }
            }
            "document" => req.documents.push((file_name, text)),
            other => return Err(ServiceError::BadRequest(format!("unexpected field {other:?}"))),
        }
    }
    if !have_dtd {
        return Err(ServiceError::validation("dtd", "missing field \"dtd\""));
    }
    let report = blocking(move || service::ingest_catalog(&store, req)).await?;
    Ok((StatusCode::CREATED, Json(report)))
}

/// Accepts a full request object or a bare query node (child mode).
pub fn parse_query_body(catalog: &str, body: &str) -> Result<QueryRequest, ServiceError> {
    let invalid = |e: &dyn std::fmt::Display| ServiceError::validation("query", e.to_string());
    let value: serde_json::Value = serde_json::from_str(body).map_err(|e| invalid(&e))?;
    if value.get("query").is_some() {
        return parse_request(body).map_err(|e| invalid(&e));
    }
    let query = parse_query(body).map_err(|e| invalid(&e))?;
    Ok(QueryRequest {
        catalog: catalog.to_owned(),
        mode: Mode::Child,
        ontology: None,
        query,
    })
}

async fn query(State(store): State<Shared>, Path(id): Path<String>, body: String) -> ApiResult<impl IntoResponse> {
    let req = parse_query_body(&id, &body)?;
    let run = blocking(move || service::run_query(&store, &id, req)).await?;
    Ok(Json(json!({
        "runId": run.run_id,
        "resultCount": run.result_count,
        "resultDtd": run.result_dtd,
        "derivedCatalogId": run.derived_catalog_id,
        "results": run.results,
    })))
}

pub async fn serve(store: Store, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store))).await
}
