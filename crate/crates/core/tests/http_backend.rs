use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use clarify_core::llm::{
    record_replay, request_digest, ChatMessage, CompletionBackend, Gateway, HttpBackend, LlmError,
    ReplayMode, RequestDefaults, TranscriptRecord,
};
use serde_json::{json, Value};

async fn chat(headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let auth = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_owned();
    if auth != "Bearer sk-test" {
        return (StatusCode::UNAUTHORIZED, Json(json!({"error": "bad key"})));
    }
    let last = body["messages"]
        .as_array()
        .and_then(|m| m.last())
        .and_then(|m| m["content"].as_str())
        .unwrap_or_default()
        .to_owned();
    match last.as_str() {
        "slow" => {
            tokio::time::sleep(Duration::from_millis(2_000)).await;
            (StatusCode::OK, Json(json!({"choices": [{"message": {"content": "late"}}]})))
        }
        "boom" => (StatusCode::INTERNAL_SERVER_ERROR, Json(json!({"error": "upstream"}))),
        "garbage" => (StatusCode::OK, Json(json!({"choices": []}))),
        _ => (
            StatusCode::OK,
            Json(json!({
                "choices": [{"message": {"role": "assistant",
                    "content": format!("echo {last} t={} model={}", body["temperature"], body["model"].as_str().unwrap_or(""))}}],
                "usage": {"prompt_tokens": 7, "completion_tokens": 3}
            })),
        ),
    }
}

async fn mock_server() -> String {
    let app = Router::new().route("/v1/chat/completions", post(chat));
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move {
        axum::serve(listener, app).await.unwrap();
    });
    format!("http://{addr}/v1")
}

fn defaults(timeout_ms: u64) -> RequestDefaults {
    RequestDefaults {
        timeout_ms,
        ..RequestDefaults::default()
    }
}

fn gateway(backend: Arc<dyn CompletionBackend>, timeout_ms: u64) -> Gateway {
    Gateway::new(backend, defaults(timeout_ms))
}

#[tokio::test]
async fn chat_completion_round_trip() {
    let base = mock_server().await;
    let backend = HttpBackend::with_key(&base, Some("sk-test".into())).unwrap();
    assert!(backend.endpoint().ends_with("/v1/chat/completions"));
    let gw = gateway(Arc::new(backend), 5_000);
    let out = gw
        .complete_messages(vec![ChatMessage::system("sys"), ChatMessage::user("hi")])
        .await
        .unwrap();
    assert_eq!(out.text, "echo hi t=0.0 model=gpt-3.5-turbo");
    assert_eq!(out.usage.prompt_tokens, 7);
    assert_eq!(gw.calls(), 1);
}

#[tokio::test]
async fn provider_errors_are_classified() {
    let base = mock_server().await;
    let gw = gateway(Arc::new(HttpBackend::with_key(&base, Some("sk-test".into())).unwrap()), 300);

    let err = gw.complete_messages(vec![ChatMessage::user("boom")]).await.unwrap_err();
    assert!(matches!(err, LlmError::Status { status: 500, .. }), "{err:?}");

    let err = gw.complete_messages(vec![ChatMessage::user("garbage")]).await.unwrap_err();
    assert!(matches!(err, LlmError::Decode(_)), "{err:?}");

    let started = Instant::now();
    let err = gw.complete_messages(vec![ChatMessage::user("slow")]).await.unwrap_err();
    assert!(matches!(err, LlmError::Deadline { timeout_ms: 300 }), "{err:?}");
    assert!(started.elapsed() < Duration::from_millis(1_500));

    let anon = gateway(Arc::new(HttpBackend::with_key(&base, None).unwrap()), 1_000);
    let err = anon.complete_messages(vec![ChatMessage::user("hi")]).await.unwrap_err();
    assert!(matches!(err, LlmError::Status { status: 401, .. }));
}

#[tokio::test]
async fn unreachable_provider_is_a_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let backend = HttpBackend::with_key(&format!("http://{addr}"), None).unwrap();
    let err = gateway(Arc::new(backend), 2_000)
        .complete_messages(vec![ChatMessage::user("hi")])
        .await
        .unwrap_err();
    assert!(matches!(err, LlmError::Transport(_)), "{err:?}");
}

#[tokio::test]
async fn record_then_replay_offline() {
    let base = mock_server().await;
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("calls.jsonl");
    let http: Arc<dyn CompletionBackend> =
        Arc::new(HttpBackend::with_key(&base, Some("sk-test".into())).unwrap());
    let recorder = gateway(record_replay(ReplayMode::Record, &transcript, Some(http)).unwrap(), 5_000);
    let prompts = ["what is a schema", "how do I create a segment"];
    let mut live = Vec::new();
    for p in prompts {
        live.push(recorder.complete_messages(vec![ChatMessage::user(p)]).await.unwrap().text);
    }

    let lines: Vec<TranscriptRecord> = std::fs::read_to_string(&transcript)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    let first = recorder.request(vec![ChatMessage::user(prompts[0])]);
    assert_eq!(lines[0].digest, request_digest(&first));
    assert_eq!(lines[0].digest.len(), 64);

    // The replayer never touches the network.
    let replayer = gateway(record_replay(ReplayMode::Replay, &transcript, None).unwrap(), 5_000);
    for (p, expected) in prompts.iter().zip(&live) {
        let got = replayer.complete_messages(vec![ChatMessage::user(*p)]).await.unwrap();
        assert_eq!(&got.text, expected);
    }
    let err = replayer
        .complete_messages(vec![ChatMessage::user("never recorded")])
        .await
        .unwrap_err();
    assert!(matches!(err, LlmError::ReplayMiss(_)));
}

#[test]
fn digest_covers_model_temperature_and_messages() {
    let gw_a = Gateway::new(
        Arc::new(clarify_core::llm::ScriptedBackend::builder().build()),
        RequestDefaults::default(),
    );
    let base = gw_a.request(vec![ChatMessage::user("x")]);
    let mut other_model = base.clone();
    other_model.model = "other".into();
    let mut other_temp = base.clone();
    other_temp.temperature = 0.5;
    let other_msg = gw_a.request(vec![ChatMessage::user("y")]);
    let d = request_digest(&base);
    assert_eq!(d, request_digest(&base.clone()));
    for r in [other_model, other_temp, other_msg] {
        assert_ne!(d, request_digest(&r));
    }
}

#[test]
fn record_mode_rejects_non_http_backends() {
    let dir = tempfile::tempdir().unwrap();
    let scripted: Arc<dyn CompletionBackend> =
        Arc::new(clarify_core::llm::ScriptedBackend::builder().build());
    let err = record_replay(ReplayMode::Record, dir.path().join("t.jsonl"), Some(scripted)).err();
    assert!(matches!(err, Some(LlmError::Config(_))));
    let err = record_replay(ReplayMode::Replay, dir.path().join("missing.jsonl"), None).err();
    assert!(matches!(err, Some(LlmError::Config(_))));
}
