//! Runs the client against a local stub endpoint.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

use forge_client::{run_inference, ClientError, EndpointConfig, RetryPolicy, RunPaths};
use forge_core::dataset::Split;
use forge_core::eval::{evaluate, read_predictions, EvalOptions};
use forge_core::sample::InstructionSample;
use forge_core::suite::{Suite, SuiteConfig};

#[derive(Default)]
struct Stub {
    answers: HashMap<String, String>,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    hits: AtomicUsize,
    /// Server errors to return per input before answering.
    flaky: Mutex<HashMap<String, usize>>,
    always_fail: Vec<String>,
    required_token: Option<String>,
    bodies: Mutex<Vec<Value>>,
}

async fn complete(State(stub): State<Arc<Stub>>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    stub.hits.fetch_add(1, Ordering::SeqCst);
    let now = stub.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    stub.max_in_flight.fetch_max(now, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(15)).await;
    stub.in_flight.fetch_sub(1, Ordering::SeqCst);
    stub.bodies.lock().unwrap().push(body.clone());
    if let Some(t) = &stub.required_token {
        let auth = headers.get("authorization").and_then(|v| v.to_str().ok());
        if auth != Some(&format!("Bearer {t}")) {
            return (StatusCode::UNAUTHORIZED, Json(json!({"error": "bad key"})));
        }
    }
    let input = body["messages"][0]["content"].as_str().unwrap_or_default().to_string();
    if stub.always_fail.contains(&input) {
        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "down"})));
    }
    if let Some(left) = stub.flaky.lock().unwrap().get_mut(&input) {
        if *left > 0 {
            *left -= 1;
            return (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "try again"})));
        }
    }
    let reply = stub.answers.get(&input).cloned().unwrap_or_default();
    (StatusCode::OK, Json(json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": reply}}]})))
}

async fn serve(stub: Arc<Stub>) -> String {
    let app = Router::new().route("/v1/chat/completions", post(complete)).with_state(stub);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}/v1")
}

fn samples() -> Vec<InstructionSample> {
    let config: SuiteConfig = serde_json::from_str(
        r#"{"seed": 5, "split": {"train": 10, "valid": 5, "test": 15},
            "augment": {"tae": false, "fmae": {"enabled": false}},
            "tasks": [{"kind": "DegreeCount", "count": 30}]}"#,
    )
    .unwrap();
    let corpus = Suite::new(config, ".").unwrap().build().unwrap();
    corpus.split(Split::Test).cloned().collect()
}

fn echo_stub(samples: &[InstructionSample]) -> Stub {
    Stub {
        answers: samples.iter().map(|s| (s.input.clone(), s.output.clone())).collect(),
        ..Stub::default()
    }
}

fn config(url: String, limit: usize) -> EndpointConfig {
    let mut c = EndpointConfig::new(url, "stub-model");
    c.max_concurrent = limit;
    c.retry = RetryPolicy {
        max_attempts: 3,
        backoff_base_ms: 5,
    };
    c
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn echo_run_scores_perfectly_within_the_concurrency_bound() {
    let samples = samples();
    let stub = Arc::new(echo_stub(&samples));
    let cfg = config(serve(stub.clone()).await, 3);
    let dir = tempfile::tempdir().unwrap();
    let paths = RunPaths::new(dir.path().join("preds.jsonl"));
    let summary = run_inference(&samples, "test", &cfg, &paths).await.unwrap();
    assert_eq!(summary.requested, samples.len());
    assert_eq!(summary.failed, 0);
    let max = stub.max_in_flight.load(Ordering::SeqCst);
    assert!(max <= 3 && max >= 2, "max in flight {max}");

    let preds = read_predictions(&paths.predictions).unwrap();
    let ids: Vec<&str> = preds.iter().map(|p| p.id.as_str()).collect();
    let want: Vec<&str> = samples.iter().map(|s| s.id.as_str()).collect();
    assert_eq!(ids, want, "file order follows the corpus");
    let report = evaluate("test", &samples, &preds, &EvalOptions::default()).unwrap();
    assert!(report.per_task.values().all(|m| m.value == 1.0));

    let header: Value = serde_json::from_str(std::fs::read_to_string(&paths.predictions).unwrap().lines().next().unwrap()).unwrap();
    assert_eq!(header["_header"]["temperature"], json!(0.0));
    let log = std::fs::read_to_string(&paths.log).unwrap();
    assert_eq!(log.lines().count(), samples.len());
    assert!(log.lines().all(|l| serde_json::from_str::<Value>(l).unwrap()["ts"].is_string()));
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn request_payload_is_deterministic() {
    let samples = samples();
    let stub = Arc::new(echo_stub(&samples));
    let cfg = config(serve(stub.clone()).await, 1);
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.jsonl", "b.jsonl"] {
        run_inference(&samples[..3], "test", &cfg, &RunPaths::new(dir.path().join(name)))
            .await
            .unwrap();
    }
    let bodies = stub.bodies.lock().unwrap();
    assert_eq!(bodies[..3], bodies[3..]);
    assert_eq!(
        bodies[0],
        json!({
            "model": "stub-model",
            "messages": [{"role": "user", "content": samples[0].input}],
            "temperature": 0.0,
            "max_tokens": 512
        })
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn empty_split_gives_empty_file() {
    let stub = Arc::new(Stub::default());
    let cfg = config(serve(stub.clone()).await, 2);
    let dir = tempfile::tempdir().unwrap();
    let paths = RunPaths::new(dir.path().join("p.jsonl"));
    let s = run_inference(&[], "test", &cfg, &paths).await.unwrap();
    assert_eq!(s.requested, 0);
    assert!(read_predictions(&paths.predictions).unwrap().is_empty());
    assert_eq!(stub.hits.load(Ordering::SeqCst), 0);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn resume_only_asks_for_missing_ids() {
    let samples = samples();
    let stub = Arc::new(echo_stub(&samples));
    let cfg = config(serve(stub.clone()).await, 4);
    let dir = tempfile::tempdir().unwrap();
    let paths = RunPaths::new(dir.path().join("p.jsonl"));
    run_inference(&samples, "test", &cfg, &paths).await.unwrap();

    // simulate an interruption: keep the header and a shuffled 2/3 of the answers
    let text = std::fs::read_to_string(&paths.predictions).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    let keep = samples.len() * 2 / 3;
    lines.truncate(keep);
    lines.reverse();
    std::fs::write(&paths.predictions, format!("{header}\n{}\n", lines.join("\n"))).unwrap();

    let before = stub.hits.load(Ordering::SeqCst);
    let s = run_inference(&samples, "test", &cfg, &paths).await.unwrap();
    assert_eq!(s.skipped, keep);
    assert_eq!(s.requested, samples.len() - keep);
    assert_eq!(stub.hits.load(Ordering::SeqCst) - before, samples.len() - keep);
    let preds = read_predictions(&paths.predictions).unwrap();
    assert_eq!(preds.len(), samples.len());
    let ids: Vec<&str> = preds.iter().map(|p| p.id.as_str()).collect();
    assert_eq!(ids, samples.iter().map(|s| s.id.as_str()).collect::<Vec<_>>());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn transient_errors_are_retried_and_hard_failures_recorded() {
    let samples = samples();
    let mut stub = echo_stub(&samples);
    stub.flaky = Mutex::new([(samples[0].input.clone(), 2)].into_iter().collect());
    stub.always_fail = vec![samples[1].input.clone()];
    let stub = Arc::new(stub);
    let cfg = config(serve(stub.clone()).await, 2);
    let dir = tempfile::tempdir().unwrap();
    let paths = RunPaths::new(dir.path().join("p.jsonl"));
    let s = run_inference(&samples, "test", &cfg, &paths).await.unwrap();
    assert_eq!(s.failed, 1);
    let preds = read_predictions(&paths.predictions).unwrap();
    assert_eq!(preds[0].prediction, samples[0].output);
    assert!(preds[0].error.is_none());
    assert!(preds[1].error.as_deref().unwrap().contains("HTTP 503"));
    assert_eq!(preds.len(), samples.len());
    // 2 failures + 1 success for the flaky sample, 3 attempts for the dead one
    assert_eq!(stub.hits.load(Ordering::SeqCst), samples.len() - 2 + 3 + 3);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn auth_failure_aborts_and_key_stays_out_of_logs() {
    let samples = samples();
    let secret = "sk-test-0123456789abcdef";
    let mut stub = echo_stub(&samples);
    stub.required_token = Some("a-different-key".into());
    let stub = Arc::new(stub);
    let mut cfg = config(serve(stub.clone()).await, 1);
    cfg.api_key_env = Some("FORGE_CLIENT_TEST_KEY_A".into());
    std::env::set_var("FORGE_CLIENT_TEST_KEY_A", secret);
    let dir = tempfile::tempdir().unwrap();
    let paths = RunPaths::new(dir.path().join("p.jsonl"));
    let err = run_inference(&samples, "test", &cfg, &paths).await.unwrap_err();
    assert!(matches!(err, ClientError::Auth { status: 401, .. }), "{err}");
    assert_eq!(stub.hits.load(Ordering::SeqCst), 1, "no retries after a 401");
    for p in [&paths.predictions, &paths.log] {
        let text = std::fs::read_to_string(p).unwrap();
        assert!(!text.contains(secret), "{} leaks the key", p.display());
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn key_is_sent_as_bearer_token() {
    let samples = samples();
    let mut stub = echo_stub(&samples);
    stub.required_token = Some("sk-right".into());
    let stub = Arc::new(stub);
    let mut cfg = config(serve(stub.clone()).await, 2);
    cfg.api_key_env = Some("FORGE_CLIENT_TEST_KEY_B".into());
    std::env::set_var("FORGE_CLIENT_TEST_KEY_B", "sk-right");
    let dir = tempfile::tempdir().unwrap();
    let paths = RunPaths::new(dir.path().join("p.jsonl"));
    let s = run_inference(&samples[..4], "test", &cfg, &paths).await.unwrap();
    assert_eq!((s.requested, s.failed), (4, 0));

    cfg.api_key_env = Some("FORGE_CLIENT_TEST_KEY_UNSET".into());
    let err = run_inference(&samples[..4], "test", &cfg, &paths).await.unwrap_err();
    assert!(matches!(err, ClientError::MissingKey(_)));
}

#[test]
fn shipped_example_config_names_its_key_by_variable() {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/endpoint.example.json");
    let cfg = EndpointConfig::load(&path).unwrap();
    assert_eq!(cfg.api_key_env.as_deref(), Some("FORGE_API_KEY"));
    assert_eq!(cfg.max_concurrent, 4);
    assert_eq!(cfg.sampling.temperature, 0.0);
}
