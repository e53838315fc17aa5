use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use histif_core::fixtures::{order_db, order_history, U1_PRIME};
use histif_core::History;
use histif_service::{router, AppState, MAIN_HISTORY};

fn app() -> Router {
    let st = AppState::new(order_db());
    st.insert_history(History::new(MAIN_HISTORY, order_history())).unwrap();
    router(Arc::new(st))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    let ct = res.headers().get(header::CONTENT_TYPE).cloned();
    let bytes = res.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(ct.as_ref().and_then(|c| c.to_str().ok()), Some("application/json"), "{uri}");
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn running_request(method: &str) -> Value {
    json!({
        "history_id": "main",
        "modifications": [{"op": "replace", "pos": 1, "statement": U1_PRIME}],
        "method": method,
    })
}

#[tokio::test]
async fn history_lists_the_three_statements() {
    let app = app();
    let (s, v) = call(&app, Method::GET, "/api/history/main", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["length"], 3);
    let pos: Vec<i64> = v["statements"].as_array().unwrap().iter().map(|x| x["pos"].as_i64().unwrap()).collect();
    assert_eq!(pos, [1, 2, 3]);
    assert!(v["statements"][0]["text"].as_str().unwrap().starts_with("UPDATE Order"));
    let (s, v) = call(&app, Method::GET, "/api/history/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "not_found");
}

#[tokio::test]
async fn posted_history_round_trips() {
    let app = app();
    let (_, main) = call(&app, Method::GET, "/api/history/main", None).await;
    let asts: Vec<Value> = main["statements"].as_array().unwrap().iter().map(|x| x["statement"].clone()).collect();
    let (s, v) = call(&app, Method::POST, "/api/history", Some(json!({"id": "copy", "statements": asts}))).await;
    assert_eq!(s, StatusCode::CREATED);
    let (_, got) = call(&app, Method::GET, "/api/history/copy", None).await;
    assert_eq!(got["statements"], main["statements"]);
    assert_eq!(v["statements"], main["statements"]);
    let (s, _) = call(&app, Method::POST, "/api/history", Some(json!({"id": "copy"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, v) = call(&app, Method::POST, "/api/history", Some(json!({"text": "UPDATE Order SET"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["message"].as_str().unwrap().contains("syntax"));
    let (s, v) = call(
        &app,
        Method::POST,
        "/api/history/copy/append",
        Some(json!({"statements": ["DELETE FROM Order WHERE Price > 1000"]})),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["length"], 4);
}

#[tokio::test]
async fn running_example_delta_for_every_method() {
    let app = app();
    let mut deltas = Vec::new();
    for m in ["naive", "r", "r+ds", "r+ps", "r+ps+ds"] {
        let (s, v) = call(&app, Method::POST, "/api/whatif", Some(running_request(m))).await;
        assert_eq!(s, StatusCode::OK, "{m}: {v}");
        assert_eq!(v["report"]["method"], m);
        deltas.push(v["delta"].clone());
    }
    assert_eq!(
        deltas[0],
        json!([
            {"relation": "Order", "sign": "-", "tuple": [12, "Alex", "UK", 50, 5]},
            {"relation": "Order", "sign": "+", "tuple": [12, "Alex", "UK", 50, 10]},
        ])
    );
    assert!(deltas.iter().all(|d| *d == deltas[0]));
}

#[tokio::test]
async fn repeated_requests_are_identical_and_reports_are_kept() {
    let app = app();
    let (_, a) = call(&app, Method::POST, "/api/whatif", Some(running_request("r+ps+ds"))).await;
    let (_, b) = call(&app, Method::POST, "/api/whatif", Some(running_request("r+ps+ds"))).await;
    assert_eq!(a["delta"], b["delta"]);
    assert_ne!(a["request_id"], b["request_id"]);
    let slice = &a["report"]["slice"];
    assert_eq!(slice["kept"], json!([1, 2]));
    assert_eq!(slice["removed"], json!([3]));
    let id = a["request_id"].as_str().unwrap();
    let (s, r) = call(&app, Method::GET, &format!("/api/report/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(r["delta_rows"], 2);
}

#[tokio::test]
async fn empty_and_invalid_modifications() {
    let app = app();
    let (s, v) = call(&app, Method::POST, "/api/whatif", Some(json!({"modifications": []}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["delta"], json!([]));
    let bad = json!({"modifications": [{"op": "replace", "pos": 9, "statement": U1_PRIME}]});
    let (s, v) = call(&app, Method::POST, "/api/whatif", Some(bad)).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{v}");
    let (s, _) = call(&app, Method::POST, "/api/whatif", Some(json!({"modifications": 3}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::POST, "/api/whatif", Some(json!({"method": "fast"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, Method::POST, "/api/whatif", Some(json!({"unknown": 1}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn degraded_slicing_is_unprocessable_but_answered() {
    let app = app();
    // an insert-query rules out program slicing
    let text = "UPDATE Order SET ShippingFee = 1 WHERE Price > 10\nINSERT INTO Order SELECT * FROM Order WHERE Price > 1000";
    call(&app, Method::POST, "/api/history", Some(json!({"id": "iq", "text": text}))).await;
    let req = json!({
        "history_id": "iq",
        "modifications": [{"op": "replace", "pos": 1, "statement": "UPDATE Order SET ShippingFee = 1 WHERE Price > 30"}],
    });
    let (s, v) = call(&app, Method::POST, "/api/whatif", Some(req)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
    assert_eq!(v["error"], "not_applicable");
    assert!(!v["degraded"].as_array().unwrap().is_empty());
    assert_eq!(v["delta"].as_array().unwrap().len(), 4);
}

#[tokio::test]
async fn relation_time_travel() {
    let app = app();
    let (s, v) = call(&app, Method::GET, "/api/relation/Order?at=0", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["total"], 4);
    let fees: Vec<i64> = v["rows"].as_array().unwrap().iter().map(|r| r[4].as_i64().unwrap()).collect();
    assert_eq!(fees, [5, 5, 3, 4]);
    let (_, v) = call(&app, Method::GET, "/api/relation/Order", None).await;
    assert_eq!(v["version"], 3);
    let mut fees: Vec<i64> = v["rows"].as_array().unwrap().iter().map(|r| r[4].as_i64().unwrap()).collect();
    fees.sort();
    assert_eq!(fees, [0, 4, 5, 8]);
    let (_, v) = call(&app, Method::GET, "/api/relation/Order?at=1&offset=1&limit=2", None).await;
    assert_eq!(v["rows"].as_array().unwrap().len(), 2);
    let (s, _) = call(&app, Method::GET, "/api/relation/Order?at=4", None).await;
    assert_eq!(s, StatusCode::RANGE_NOT_SATISFIABLE);
    let (s, _) = call(&app, Method::GET, "/api/relation/Nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, Method::GET, "/api/relation/Order?at=x", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn cors_preflight_is_allowed() {
    let res = app()
        .oneshot(
            Request::builder()
                .method(Method::OPTIONS)
                .uri("/api/whatif")
                .header(header::ORIGIN, "http://localhost:5173")
                .header(header::ACCESS_CONTROL_REQUEST_METHOD, "POST")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert!(res.headers().contains_key(header::ACCESS_CONTROL_ALLOW_ORIGIN));
}
