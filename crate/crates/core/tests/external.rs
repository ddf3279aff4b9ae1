use std::sync::Arc;
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use leaftutor_core::domain::TutorSession;
use leaftutor_core::ingestion::{Embedder, ExternalEmbedder};
use leaftutor_core::tutor::{
    assemble_prompt, ExternalProvider, ExternalProviderConfig, LlmProvider, PedagogicalPolicy, PromptBudget,
    PromptBundle, PromptInputs, TutorEngine,
};
use leaftutor_core::Id;
use parking_lot::Mutex;
use serde_json::{json, Value};

#[derive(Clone, Default)]
struct Seen {
    bodies: Arc<Mutex<Vec<Value>>>,
    auth: Arc<Mutex<Vec<String>>>,
}

async fn chat(State(seen): State<Seen>, headers: HeaderMap, Json(body): Json<Value>) -> Json<Value> {
    seen.bodies.lock().push(body);
    if let Some(v) = headers.get("authorization") {
        seen.auth.lock().push(v.to_str().unwrap().to_owned());
    }
    Json(json!({"choices": [{"message": {"role": "assistant", "content": "Try tracing the loop."}}]}))
}

async fn slow_chat() -> Json<Value> {
    tokio::time::sleep(Duration::from_secs(5)).await;
    Json(json!({"choices": [{"message": {"content": "late"}}]}))
}

async fn broken() -> StatusCode {
    StatusCode::INTERNAL_SERVER_ERROR
}

async fn empty_choices() -> Json<Value> {
    Json(json!({"choices": []}))
}

async fn embeddings(State(seen): State<Seen>, Json(body): Json<Value>) -> Json<Value> {
    seen.bodies.lock().push(body);
    Json(json!({"data": [{"embedding": [3.0, 4.0, 0.0]}]}))
}

async fn mock() -> (String, Seen) {
    let seen = Seen::default();
    let app = Router::new()
        .route("/chat", post(chat))
        .route("/slow", post(slow_chat))
        .route("/broken", post(broken))
        .route("/empty", post(empty_choices))
        .route("/embeddings", post(embeddings))
        .with_state(seen.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}"), seen)
}

fn bundle() -> PromptBundle {
    let session = TutorSession::new(Id::new(), Id::new());
    assemble_prompt(&PromptInputs {
        session: &session,
        query: "why does my loop never end?",
        instructions: &[],
        retrieved: &[],
        policy: &PedagogicalPolicy::default(),
        budget: &PromptBudget::default(),
    })
    .unwrap()
}

fn provider(url: String, timeout: Duration) -> ExternalProvider {
    ExternalProvider::new(ExternalProviderConfig {
        endpoint: url,
        model: "m-test".into(),
        api_key: Some("k-123".into()),
        temperature: 0.0,
        timeout,
    })
    .unwrap()
}

#[tokio::test]
async fn chat_request_carries_system_and_user_messages() {
    let (base, seen) = mock().await;
    let p = provider(format!("{base}/chat"), Duration::from_secs(5));
    let b = bundle();
    assert_eq!(p.complete(&b).await.unwrap(), "Try tracing the loop.");
    let body = seen.bodies.lock()[0].clone();
    assert_eq!(body["model"], "m-test");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], b.system_text.as_str());
    assert_eq!(body["messages"][1]["role"], "user");
    assert!(body["messages"][1]["content"]
        .as_str()
        .unwrap()
        .contains("why does my loop never end?"));
    assert_eq!(seen.auth.lock()[0], "Bearer k-123");
}

#[tokio::test]
async fn failures_map_to_provider_errors() {
    let (base, _) = mock().await;
    let b = bundle();
    let slow = provider(format!("{base}/slow"), Duration::from_millis(200));
    assert_eq!(slow.complete(&b).await.unwrap_err().code(), "PROVIDER_TIMEOUT");
    let broken = provider(format!("{base}/broken"), Duration::from_secs(5));
    assert_eq!(broken.complete(&b).await.unwrap_err().code(), "PROVIDER_UNAVAILABLE");
    let empty = provider(format!("{base}/empty"), Duration::from_secs(5));
    assert_eq!(empty.complete(&b).await.unwrap_err().code(), "PROVIDER_UNAVAILABLE");
    let refused = provider("http://127.0.0.1:9/chat".into(), Duration::from_secs(5));
    assert_eq!(refused.complete(&b).await.unwrap_err().code(), "PROVIDER_UNAVAILABLE");
}

#[tokio::test]
async fn engine_deadline_applies_to_any_provider() {
    let (base, _) = mock().await;
    let p = Arc::new(provider(format!("{base}/slow"), Duration::from_secs(30)));
    let engine = TutorEngine::new(
        p,
        PedagogicalPolicy::default(),
        PromptBudget::default(),
        Duration::from_millis(150),
    )
    .unwrap();
    let started = std::time::Instant::now();
    assert_eq!(engine.respond(&bundle()).await.unwrap_err().code(), "PROVIDER_TIMEOUT");
    assert!(started.elapsed() < Duration::from_secs(2));
}

#[tokio::test]
async fn external_embeddings_are_normalized_and_checked() {
    let (base, seen) = mock().await;
    let e = ExternalEmbedder::new(format!("{base}/embeddings"), "emb", None, 3, Duration::from_secs(5)).unwrap();
    assert_eq!(e.embed("hello world").await.unwrap(), vec![0.6, 0.8, 0.0]);
    assert_eq!(seen.bodies.lock()[0], json!({"model": "emb", "input": "hello world"}));
    // Nothing to embed: no request, zero vector.
    assert_eq!(e.embed("  ,, ").await.unwrap(), vec![0.0; 3]);
    assert_eq!(seen.bodies.lock().len(), 1);

    let wrong_dim =
        ExternalEmbedder::new(format!("{base}/embeddings"), "emb", None, 4, Duration::from_secs(5)).unwrap();
    assert_eq!(
        wrong_dim.embed("hello").await.unwrap_err().code(),
        "PROVIDER_UNAVAILABLE"
    );
}
