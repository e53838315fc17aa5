use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Deserialize;
use serde_json::{json, Value as JsonValue};

use histif_core::dsl::{parse_history, parse_statement};
use histif_core::io::modifications_from_json;
use histif_core::{answer, Statement, VersionedStore, WhatIfParams};

use crate::error::ApiError;
use crate::state::{AppState, MAIN_HISTORY};

/// Server-side limit for one what-if request.
pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(60);
/// Solver wall-clock limit when the request sets none; below
/// [`REQUEST_TIMEOUT`] so a slow solver degrades instead of failing.
pub const DEFAULT_SOLVER_TIMEOUT: Duration = Duration::from_secs(50);
pub const DEFAULT_PAGE: usize = 1000;
pub const MAX_PAGE: usize = 10_000;

type Shared = State<Arc<AppState>>;

fn body<T>(r: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    r.map(|Json(v)| v).map_err(|e| ApiError::BadRequest(e.body_text()))
}

fn history_json(id: &str, store: &VersionedStore) -> JsonValue {
    let statements: Vec<JsonValue> = store
        .log()
        .iter()
        .enumerate()
        .map(|(k, u)| json!({ "pos": k + 1, "text": u.to_string(), "statement": u }))
        .collect();
    json!({ "id": id, "length": store.len(), "statements": statements })
}

/// A statement given as DSL text or as an AST object.
fn statement(v: JsonValue) -> Result<Statement, ApiError> {
    match v {
        JsonValue::String(s) => Ok(parse_statement(&s)?),
        v => serde_json::from_value(v).map_err(|e| ApiError::BadRequest(format!("statement: {e}"))),
    }
}

pub async fn health() -> Json<JsonValue> {
    Json(json!({ "status": "ok" }))
}

pub async fn list_histories(State(st): Shared) -> Json<JsonValue> {
    Json(json!({ "histories": st.history_ids() }))
}

pub async fn get_history(State(st): Shared, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let store = st.store(&id)?;
    Ok(Json(history_json(&id, &store)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewHistory {
    pub id: Option<String>,
    /// DSL strings or statement ASTs.
    #[serde(default)]
    pub statements: Vec<JsonValue>,
    /// Whole history as DSL text, one statement per line.
    pub text: Option<String>,
}

fn statements_of(req: NewHistory) -> Result<Vec<Statement>, ApiError> {
    let mut out = match req.text {
        Some(t) => parse_history(&t)?,
        None => vec![],
    };
    for v in req.statements {
        out.push(statement(v)?);
    }
    Ok(out)
}

pub async fn post_history(
    State(st): Shared,
    req: Result<Json<NewHistory>, JsonRejection>,
) -> Result<(StatusCode, Json<JsonValue>), ApiError> {
    let req = body(req)?;
    let id = match req.id.clone() {
        Some(id) if !id.is_empty() => id,
        Some(_) => return Err(ApiError::BadRequest("history id must not be empty".into())),
        None => format!("h{}", st.history_ids().len() + 1),
    };
    let statements = statements_of(req)?;
    let st2 = st.clone();
    let id2 = id.clone();
    let store = tokio::task::spawn_blocking(move || st2.insert_history(histif_core::History::new(id2, statements)))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(history_json(&id, &store))))
}

pub async fn append_history(
    State(st): Shared,
    Path(id): Path<String>,
    req: Result<Json<NewHistory>, JsonRejection>,
) -> Result<Json<JsonValue>, ApiError> {
    let req = body(req)?;
    if req.id.as_deref().is_some_and(|x| x != id) {
        return Err(ApiError::BadRequest("body id differs from the path".into()));
    }
    let statements = statements_of(req)?;
    let st2 = st.clone();
    let id2 = id.clone();
    let store = tokio::task::spawn_blocking(move || st2.append(&id2, statements))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(history_json(&id, &store)))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    #[serde(default = "main_history")]
    pub history_id: String,
    #[serde(default)]
    pub modifications: JsonValue,
    /// Overrides `params.method`.
    pub method: Option<String>,
    #[serde(default)]
    pub params: WhatIfParams,
}

fn main_history() -> String {
    MAIN_HISTORY.to_string()
}

/// 200 with `{request_id, delta, report}`; 422 with the same payload plus
/// `error` and `degraded` when a requested optimization could not be
/// applied.
pub async fn post_whatif(State(st): Shared, req: Result<Json<WhatIfRequest>, JsonRejection>) -> Result<Response, ApiError> {
    let req = body(req)?;
    let mut params = req.params;
    if let Some(m) = &req.method {
        params.method = m.parse()?;
    }
    if params.solver_timeout_ms.is_none() {
        params.solver_timeout_ms = Some(DEFAULT_SOLVER_TIMEOUT.as_millis() as u64);
    }
    let mods = match req.modifications {
        JsonValue::Null => vec![],
        v => modifications_from_json(v)?,
    };
    let store = st.store(&req.history_id)?;
    let opts = params.options(st.base())?;
    let job = tokio::task::spawn_blocking(move || answer(&store, &mods, &opts));
    let a = tokio::time::timeout(REQUEST_TIMEOUT, job)
        .await
        .map_err(|_| ApiError::Timeout(REQUEST_TIMEOUT.as_secs()))?
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let id = st.next_request_id();
    let report = serde_json::to_value(&a.report).map_err(|e| ApiError::Internal(e.to_string()))?;
    let mut out = json!({ "request_id": id, "delta": a.delta.to_json(), "report": report });
    let status = if a.report.degraded.is_empty() {
        StatusCode::OK
    } else {
        out["error"] = json!("not_applicable");
        out["degraded"] = out["report"]["degraded"].clone();
        StatusCode::UNPROCESSABLE_ENTITY
    };
    st.remember(id, a.report);
    Ok((status, Json(out)).into_response())
}

pub async fn get_report(State(st): Shared, Path(id): Path<String>) -> Result<Json<JsonValue>, ApiError> {
    let r = st
        .report(&id)
        .ok_or_else(|| ApiError::NotFound(format!("no report `{id}` (only the last {} are kept)", crate::state::REPORT_CAPACITY)))?;
    Ok(Json(serde_json::to_value(r).map_err(|e| ApiError::Internal(e.to_string()))?))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationQuery {
    pub at: Option<usize>,
    pub history: Option<String>,
    #[serde(default)]
    pub offset: usize,
    pub limit: Option<usize>,
}

pub async fn get_relation(
    State(st): Shared,
    Path(name): Path<String>,
    q: Result<Query<RelationQuery>, QueryRejection>,
) -> Result<Json<JsonValue>, ApiError> {
    let Query(q) = q.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let hid = q.history.unwrap_or_else(main_history);
    let store = st.store(&hid)?;
    let at = q.at.unwrap_or(store.len());
    if at > store.len() {
        return Err(ApiError::RangeNotSatisfiable(format!(
            "version {at} is beyond the {} statements of history `{hid}`",
            store.len()
        )));
    }
    if st.base().get(&name).is_err() {
        return Err(ApiError::NotFound(format!("no relation `{name}`")));
    }
    let limit = q.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
    let db = tokio::task::spawn_blocking(move || store.reconstruct(at))
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))??;
    let r = db.get(&name)?;
    let rows: Vec<JsonValue> = r
        .iter()
        .skip(q.offset)
        .take(limit)
        .map(|t| JsonValue::Array(t.iter().map(|v| v.to_json()).collect()))
        .collect();
    Ok(Json(json!({
        "relation": name,
        "history": hid,
        "version": at,
        "attributes": r.schema.attributes,
        "total": r.len(),
        "offset": q.offset,
        "limit": limit,
        "rows": rows,
    })))
}

pub async fn not_found() -> ApiError {
    ApiError::NotFound("no such endpoint".into())
}
