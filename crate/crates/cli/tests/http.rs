use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use multiprior::config::ExperimentConfig;
use multiprior::engine::{run_with_outcomes, Scripted};
use multiprior::rng::RunStreams;
use multiprior::session::SessionStore;
use multiprior_cli::http::router;

fn config(burn_in: u64, horizon: u64, nu0: f64) -> Value {
    json!({
        "seed": 7,
        "environment": { "theta": [1.0, 1.3], "sigma": [1.0, 1.0] },
        "sources": [
            { "zeta0": [1.0, 1.3], "nu0": [nu0, nu0] },
            { "zeta0": [1.5, 0.8], "nu0": [25.0, 25.0] }
        ],
        "policy": { "family": "epsilon-greedy", "epsilon": 0.25 },
        "stopping": { "burn_in": burn_in, "horizon": horizon, "beta": 0.01 }
    })
}

/// Only the point-mass source at the truth.
fn point_mass(burn_in: u64) -> Value {
    let mut c = config(burn_in, 100, 1e9);
    c["sources"].as_array_mut().unwrap().truncate(1);
    c
}

struct Api {
    app: Router,
    _dir: tempfile::TempDir,
    path: std::path::PathBuf,
}

impl Api {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().to_path_buf();
        let store = SessionStore::open(&path).unwrap();
        Self {
            app: router(Arc::new(store)),
            _dir: dir,
            path,
        }
    }

    fn reopen(&mut self) {
        self.app = router(Arc::new(SessionStore::open(&self.path).unwrap()));
    }

    async fn raw(&self, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, String) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        (status, String::from_utf8(bytes.to_vec()).unwrap())
    }

    async fn call(&self, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let text = body.map(|b| b.to_string());
        let (status, out) = self.raw(method, uri, text.as_deref()).await;
        (status, serde_json::from_str(&out).unwrap_or(Value::String(out)))
    }

    async fn create(&self, body: Value) -> String {
        let (status, reply) = self.call(Method::POST, "/sessions", Some(body)).await;
        assert_eq!(status, StatusCode::CREATED, "{reply}");
        reply["id"].as_str().unwrap().to_string()
    }
}

#[tokio::test]
async fn fresh_session_echoes_priors() {
    let api = Api::new();
    let (status, reply) = api
        .call(Method::POST, "/sessions", Some(json!({ "config": config(10, 100, 1.0), "id": "trial-1" })))
        .await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(reply["id"], "trial-1");
    let state = &reply["state"];
    assert_eq!(state["status"], "live");
    assert_eq!(state["t"], 0);
    assert_eq!(state["series"].as_array().unwrap().len(), 0);

    let (status, summary) = api.call(Method::GET, "/sessions/trial-1", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["aggregate"], json!([1.25, 1.05]));
    let (_, ids) = api.call(Method::GET, "/sessions", None).await;
    assert_eq!(ids["ids"], json!(["trial-1"]));
}

#[tokio::test]
async fn invalid_config_lists_fields() {
    let api = Api::new();
    let mut c = config(10, 100, 1.0);
    c["policy"]["epsilon"] = json!(0.6);
    c["sources"][1]["nu0"] = json!([1.0]);
    let (status, reply) = api.call(Method::POST, "/sessions", Some(json!({ "config": c }))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(reply["code"], "invalid_config");
    let fields: Vec<&str> = reply["issues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["field"].as_str().unwrap())
        .collect();
    assert!(fields.contains(&"policy.epsilon"), "{fields:?}");
    assert!(fields.contains(&"sources[1].nu0"), "{fields:?}");
}

#[tokio::test]
async fn protocol_errors_have_codes() {
    let api = Api::new();
    let id = api.create(json!({ "config": config(10, 100, 1.0) })).await;

    let (status, reply) = api
        .call(Method::POST, &format!("/sessions/{id}/outcome"), Some(json!({ "value": 1.0 })))
        .await;
    assert_eq!((status, reply["code"].as_str()), (StatusCode::CONFLICT, Some("no_pending_assignment")));

    let (status, reply) = api.call(Method::POST, &format!("/sessions/{id}/assignment"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(reply["arm"].is_u64());
    assert!(reply.get("stop_recommendation").is_none());

    let (status, reply) = api.call(Method::POST, &format!("/sessions/{id}/assignment"), None).await;
    assert_eq!((status, reply["code"].as_str()), (StatusCode::CONFLICT, Some("pending_assignment")));

    let (status, reply) = api.call(Method::GET, "/sessions/nope/state", None).await;
    assert_eq!((status, reply["code"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));

    let (status, reply) = api
        .call(Method::POST, "/sessions", Some(json!({ "config": config(10, 100, 1.0), "id": id })))
        .await;
    assert_eq!((status, reply["code"].as_str()), (StatusCode::CONFLICT, Some("duplicate_id")));

    let (status, reply) = api.raw(Method::POST, &format!("/sessions/{id}/outcome"), Some("{\"value\":")).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{reply}");

    let (status, reply) = api
        .call(Method::POST, "/sessions", Some(json!({ "config": config(10, 100, 1.0), "id": "../x" })))
        .await;
    assert_eq!((status, reply["code"].as_str()), (StatusCode::BAD_REQUEST, Some("invalid_id")));
}

#[tokio::test]
async fn manual_session_matches_engine_on_same_script() {
    let api = Api::new();
    let c = config(10, 60, 1.0);
    let id = api.create(json!({ "config": c.clone() })).await;
    let script: Vec<f64> = (0..60).map(|i| ((i * 37) % 17) as f64 / 8.0).collect();
    let mut state = Value::Null;
    for y in &script {
        let (status, reply) = api.call(Method::POST, &format!("/sessions/{id}/assignment"), None).await;
        assert_eq!(status, StatusCode::OK);
        if reply["arm"].is_null() {
            break;
        }
        let (status, s) = api
            .call(Method::POST, &format!("/sessions/{id}/outcome"), Some(json!({ "value": y })))
            .await;
        assert_eq!(status, StatusCode::OK, "{s}");
        state = s;
    }

    let config = ExperimentConfig::from_value(c).unwrap();
    let run = run_with_outcomes(&config, RunStreams::single(config.seed), &mut Scripted::new(script)).unwrap();
    let t = state["t"].as_u64().unwrap();
    assert_eq!(t, run.log.iter().filter(|r| r.outcome.is_some()).count() as u64);
    let assigned: Vec<u64> = state["series"].as_array().unwrap().iter().map(|p| p["arm"].as_u64().unwrap()).collect();
    let engine: Vec<u64> = run.log.iter().filter_map(|r| r.assignment.map(|a| a as u64)).collect();
    assert_eq!(assigned, engine);
    let agg: Vec<f64> = serde_json::from_value(state["beliefs"]["aggregate"].clone()).unwrap();
    assert_eq!(agg, run.final_beliefs.aggregate());
}

#[tokio::test]
async fn point_mass_prior_stops_at_burn_in() {
    let api = Api::new();
    let id = api.create(json!({ "config": point_mass(5) })).await;
    for _ in 0..5 {
        let (_, reply) = api.call(Method::POST, &format!("/sessions/{id}/assignment"), None).await;
        assert!(reply["arm"].is_u64(), "{reply}");
        api.call(Method::POST, &format!("/sessions/{id}/outcome"), Some(json!({ "value": 1.1 })))
            .await;
    }
    let (status, reply) = api.call(Method::POST, &format!("/sessions/{id}/assignment"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reply["status"], "stopped");
    assert!(reply.get("arm").is_none());
    assert_eq!(reply["decision"]["chosen_arm"], 1);
    assert_eq!(reply["decision"]["stop_time"], 5);

    let (status, reply) = api
        .call(Method::POST, &format!("/sessions/{id}/outcome"), Some(json!({ "value": 1.0 })))
        .await;
    assert_eq!((status, reply["code"].as_str()), (StatusCode::CONFLICT, Some("session_stopped")));
    let (_, state) = api.call(Method::GET, &format!("/sessions/{id}/state"), None).await;
    assert_eq!(state["decision"]["chosen_arm"], 1);
    assert_eq!(state["t"], 5);
}

#[tokio::test]
async fn override_keeps_session_live_and_is_logged() {
    let api = Api::new();
    let id = api.create(json!({ "config": point_mass(5), "simulated": true })).await;
    api.call(Method::POST, &format!("/sessions/{id}/simulate"), Some(json!({ "stages": 5 })))
        .await;
    let (status, reply) = api
        .call(Method::POST, &format!("/sessions/{id}/assignment"), Some(json!({ "override_stop": true })))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert!(reply["arm"].is_u64(), "{reply}");
    assert_eq!(reply["stop_recommendation"]["stop"], true);
    assert_eq!(reply["status"], "live");

    let (status, log) = api.raw(Method::GET, &format!("/sessions/{id}/log"), None).await;
    assert_eq!(status, StatusCode::OK);
    let kinds: Vec<String> = log
        .lines()
        .map(|l| serde_json::from_str::<Value>(l).unwrap()["event"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(kinds.iter().filter(|k| *k == "override").count(), 1);
    assert_eq!(kinds.last().map(String::as_str), Some("assignment"));
}

#[tokio::test]
async fn restart_replays_logs() {
    let mut api = Api::new();
    let id = api.create(json!({ "config": config(10, 200, 1.0), "simulated": true })).await;
    let (status, before) = api
        .call(Method::POST, &format!("/sessions/{id}/simulate"), Some(json!({ "stages": 80 })))
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before["t"], 80);
    api.call(Method::POST, &format!("/sessions/{id}/assignment"), None).await;
    let (_, before) = api.call(Method::GET, &format!("/sessions/{id}/state"), None).await;

    api.reopen();
    let (status, after) = api.call(Method::GET, &format!("/sessions/{id}/state"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(before, after);
    let (status, reply) = api
        .call(Method::POST, &format!("/sessions/{id}/outcome"), Some(json!({ "value": 0.5 })))
        .await;
    assert_eq!(status, StatusCode::OK, "{reply}");
    assert_eq!(reply["t"], 81);
}

#[tokio::test]
async fn live_session_cannot_simulate() {
    let api = Api::new();
    let mut c = config(10, 100, 1.0);
    c.as_object_mut().unwrap().remove("environment");
    let id = api.create(json!({ "config": c })).await;
    let (status, reply) = api
        .call(Method::POST, &format!("/sessions/{id}/simulate"), Some(json!({ "stages": 3 })))
        .await;
    assert_eq!((status, reply["code"].as_str()), (StatusCode::CONFLICT, Some("not_simulated")));
}
