use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};
use tabdisc_core::embed::{build_encoder, EncoderKind, EncoderSpec, ExternalEncoderConfig};
use tabdisc_core::qgen::{external_translate, Provenance, TranslatorConfig};
use tabdisc_core::Error;

/// Serves `app` on an ephemeral port from a background runtime.
fn spawn(app: Router) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

#[derive(Clone, Default)]
struct Counter(Arc<AtomicUsize>);

async fn translate(State(calls): State<Counter>, Json(body): Json<Value>) -> Result<Json<Value>, StatusCode> {
    calls.0.fetch_add(1, Ordering::SeqCst);
    let sqls: Vec<String> = serde_json::from_value(body["sqls"].clone()).unwrap();
    if sqls.iter().any(|s| s.contains("FAIL")) {
        return Err(StatusCode::INTERNAL_SERVER_ERROR);
    }
    let questions: Vec<Value> = sqls
        .iter()
        .map(|s| if s.contains("BLANK") { Value::Null } else { json!(format!("question for {s}")) })
        .collect();
    Ok(Json(json!({ "questions": questions })))
}

fn translator() -> (TranslatorConfig, Counter) {
    let calls = Counter::default();
    let addr = spawn(Router::new().route("/translate", post(translate)).with_state(calls.clone()));
    let cfg = TranslatorConfig {
        backoff_ms: 1,
        ..TranslatorConfig::new(format!("http://{addr}/translate"))
    };
    (cfg, calls)
}

fn sqls(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[test]
fn healthy_endpoint_preserves_order() {
    let (cfg, _) = translator();
    let input = sqls(&["a", "b", "c"]);
    let out = external_translate(&input, &cfg, |i| format!("fallback {i}")).unwrap();
    let got: Vec<&str> = out.iter().map(|t| t.question.as_str()).collect();
    assert_eq!(got, vec!["question for a", "question for b", "question for c"]);
    assert!(out.iter().all(|t| t.provenance == Provenance::External));
}

#[test]
fn failing_item_falls_back_to_template() {
    let (cfg, calls) = translator();
    let input = sqls(&["a", "FAIL b", "c"]);
    let out = external_translate(&input, &cfg, |i| format!("fallback {i}")).unwrap();
    assert_eq!(out[0].question, "question for a");
    assert_eq!(out[1].question, "fallback 1");
    assert_eq!(out[1].provenance, Provenance::Template);
    assert_eq!(out[2].provenance, Provenance::External);
    // 4 attempts on the batch, 1 each for the healthy items, 4 for the bad one.
    assert_eq!(calls.0.load(Ordering::SeqCst), 4 + 1 + 1 + 4);
}

#[test]
fn blank_answer_falls_back() {
    let (cfg, _) = translator();
    let out = external_translate(&sqls(&["BLANK"]), &cfg, |_| "template".into()).unwrap();
    assert_eq!(out[0].question, "template");
    assert_eq!(out[0].provenance, Provenance::Template);
}

#[test]
fn many_chunks_in_parallel_keep_order() {
    let (cfg, _) = translator();
    let cfg = TranslatorConfig { max_batch: 2, parallelism: 3, ..cfg };
    let input: Vec<String> = (0..11).map(|i| format!("s{i}")).collect();
    let out = external_translate(&input, &cfg, |i| format!("fallback {i}")).unwrap();
    for (i, t) in out.iter().enumerate() {
        assert_eq!(t.question, format!("question for s{i}"));
    }
}

fn closed_port_url() -> String {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    format!("http://{addr}/translate")
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let cfg = TranslatorConfig {
        retries: 1,
        backoff_ms: 1,
        ..TranslatorConfig::new(closed_port_url())
    };
    let err = external_translate(&sqls(&["a"]), &cfg, |_| String::new()).unwrap_err();
    assert!(matches!(err, Error::Transport(_)), "{err:?}");
}

async fn encode(Json(body): Json<Value>) -> Json<Value> {
    let texts: Vec<String> = serde_json::from_value(body["texts"].clone()).unwrap();
    let dim = if body["model"] == "short" { 4 } else { 8 };
    let vectors: Vec<Vec<f32>> = texts
        .iter()
        .map(|t| {
            let mut v = vec![0.0f32; dim];
            v[0] = t.len() as f32;
            v
        })
        .collect();
    Json(json!({ "vectors": vectors }))
}

fn encoder_spec(model: &str) -> EncoderSpec {
    let addr = spawn(Router::new().route("/encode", post(encode)));
    EncoderSpec {
        dim: 8,
        kind: EncoderKind::External,
        external: Some(ExternalEncoderConfig {
            url: format!("http://{addr}/encode"),
            model: model.into(),
            timeout_ms: 5_000,
            max_batch: 2,
        }),
    }
}

#[test]
fn external_encoder_batches_and_validates_dimension() {
    let enc = build_encoder(&encoder_spec("passage")).unwrap();
    let texts: Vec<String> = ["a", "bb", "ccc", "dddd", "eeeee"].iter().map(|s| s.to_string()).collect();
    let vectors = enc.encode_passages(&texts).unwrap();
    let firsts: Vec<f32> = vectors.iter().map(|v| v.values[0]).collect();
    assert_eq!(firsts, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    assert_eq!(enc.encode_question("xyz").unwrap().dim(), 8);

    let short = build_encoder(&encoder_spec("short")).unwrap();
    assert!(matches!(short.encode_passage("a"), Err(Error::DimensionMismatch { .. })));
}
