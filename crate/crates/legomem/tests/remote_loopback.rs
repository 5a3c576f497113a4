//! Loopback integration tests for the remote wire protocols: a minimal
//! HTTP server on 127.0.0.1 answers canned JSON bodies, exercising the
//! chat client, its retry path, and the remote embedder end to end.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use legomem::embedding::{EmbeddingProvider, RemoteEmbedder, RemoteEmbedderConfig};
use legomem::gateway::{ChatMessage, GatewayError, ModelClient, RemoteClient, RemoteClientConfig};

/// Serves canned HTTP responses; returns (endpoint URL, request log).
fn spawn_server(
    responses: Vec<(u16, String)>,
) -> (String, Arc<AtomicUsize>, std::thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind loopback");
    let port = listener.local_addr().unwrap().port();
    let hits = Arc::new(AtomicUsize::new(0));
    let hits_clone = hits.clone();
    let handle = std::thread::spawn(move || {
        let mut bodies = Vec::new();
        for (status, body) in responses {
            let (mut stream, _) = listener.accept().expect("accept");
            hits_clone.fetch_add(1, Ordering::SeqCst);
            let mut buf = vec![0u8; 65536];
            let mut request = Vec::new();
            // Read until the full content-length body has arrived.
            loop {
                let n = stream.read(&mut buf).expect("read request");
                request.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&request);
                if let Some(header_end) = text.find("\r\n\r\n") {
                    let content_length = text
                        .lines()
                        .find_map(|l| l.to_lowercase().strip_prefix("content-length:").map(str::trim).map(String::from))
                        .and_then(|v| v.parse::<usize>().ok())
                        .unwrap_or(0);
                    if request.len() >= header_end + 4 + content_length {
                        bodies.push(text[header_end + 4..].to_string());
                        break;
                    }
                }
            }
            let response = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(response.as_bytes()).expect("write response");
        }
        bodies
    });
    (format!("http://127.0.0.1:{port}/v1"), hits, handle)
}

fn chat_config(endpoint: String) -> RemoteClientConfig {
    RemoteClientConfig {
        endpoint,
        model: "test-model".into(),
        auth_env: "LEGOMEM_TEST_TOKEN".into(),
        response_path: "choices.0.message.content".into(),
        max_attempts: 3,
        initial_backoff_ms: 1,
        max_in_flight: 4,
    }
}

#[test]
fn remote_chat_returns_canned_body_verbatim() {
    let body = r#"{"choices": [{"message": {"content": "canned reply text"}}]}"#.to_string();
    let (endpoint, hits, handle) = spawn_server(vec![(200, body)]);
    let client = RemoteClient::new(chat_config(endpoint));
    let reply = client
        .complete(&[ChatMessage::user("hello over the wire")])
        .unwrap();
    assert_eq!(reply, "canned reply text");
    assert_eq!(hits.load(Ordering::SeqCst), 1);

    // The request carried the pinned wire shape.
    let bodies = handle.join().unwrap();
    let request: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(request["model"], "test-model");
    assert_eq!(request["temperature"], 0.0);
    assert_eq!(request["messages"][0]["role"], "user");
    assert_eq!(request["messages"][0]["content"], "hello over the wire");
}

#[test]
fn remote_chat_retries_then_succeeds() {
    let ok = r#"{"choices": [{"message": {"content": "second try"}}]}"#.to_string();
    let (endpoint, hits, handle) = spawn_server(vec![
        (500, r#"{"error": "transient"}"#.to_string()),
        (200, ok),
    ]);
    let client = RemoteClient::new(chat_config(endpoint));
    let reply = client.complete(&[ChatMessage::user("retry me")]).unwrap();
    assert_eq!(reply, "second try");
    assert_eq!(hits.load(Ordering::SeqCst), 2);
    handle.join().unwrap();
}

#[test]
fn remote_chat_gives_up_after_bounded_retries() {
    let (endpoint, hits, handle) = spawn_server(vec![
        (500, "{}".to_string()),
        (500, "{}".to_string()),
        (500, "{}".to_string()),
    ]);
    let client = RemoteClient::new(chat_config(endpoint));
    let err = client.complete(&[ChatMessage::user("always failing")]).unwrap_err();
    assert!(matches!(err, GatewayError::ProviderUnavailable(_)));
    assert_eq!(hits.load(Ordering::SeqCst), 3);
    handle.join().unwrap();
}

#[test]
fn remote_embedder_parses_float_arrays_and_normalizes() {
    let body = "[[3.0, 0.0, 4.0, 0.0]]".to_string();
    let (endpoint, _, handle) = spawn_server(vec![(200, body)]);
    let embedder = RemoteEmbedder::new(RemoteEmbedderConfig {
        endpoint,
        model: "test-embed".into(),
        dim: 4,
        auth_env: "LEGOMEM_TEST_TOKEN".into(),
        max_attempts: 1,
        initial_backoff_ms: 1,
    });
    let vectors = embedder.embed_batch(&["some text"]).unwrap();
    assert_eq!(vectors.len(), 1);
    assert_eq!(vectors[0].0, vec![0.6, 0.0, 0.8, 0.0]);
    assert!((vectors[0].l2_norm() - 1.0).abs() < 1e-6);

    let bodies = handle.join().unwrap();
    let request: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(request["model"], "test-embed");
    assert_eq!(request["input"][0], "some text");
}

#[test]
fn remote_embedder_rejects_wrong_dim() {
    let body = "[[1.0, 0.0]]".to_string();
    let (endpoint, _, handle) = spawn_server(vec![(200, body)]);
    let embedder = RemoteEmbedder::new(RemoteEmbedderConfig {
        endpoint,
        model: "test-embed".into(),
        dim: 4,
        auth_env: "LEGOMEM_TEST_TOKEN".into(),
        max_attempts: 1,
        initial_backoff_ms: 1,
    });
    assert!(embedder.embed_batch(&["text"]).is_err());
    handle.join().unwrap();
}
