//! Wire-level tests against a minimal in-process HTTP server: embedding
//! dimension handling, generation request contents, and fallback on
//! server-side errors.

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use hopqa_core::generation::{GenConfig, Generator, HttpGenerator};
use hopqa_core::{ProviderChain, ProviderSpec, RemoteProviderSpec};

/// Serves `n_requests` HTTP/1.1 requests with a fixed JSON body, capturing
/// every request body it sees.
fn spawn_json_server(
    n_requests: usize,
    status_line: &'static str,
    response_body: String,
) -> (String, Arc<Mutex<Vec<String>>>, JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let captured = Arc::new(Mutex::new(Vec::new()));
    let captured_in = Arc::clone(&captured);
    let handle = std::thread::spawn(move || {
        for _ in 0..n_requests {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = Vec::new();
            let mut chunk = [0_u8; 4096];
            let (headers_end, content_length) = loop {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
                let text = String::from_utf8_lossy(&buf);
                if let Some(pos) = text.find("\r\n\r\n") {
                    let content_length = text[..pos]
                        .lines()
                        .find_map(|l| {
                            let (name, value) = l.split_once(':')?;
                            name.eq_ignore_ascii_case("content-length")
                                .then(|| value.trim().parse::<usize>().ok())?
                        })
                        .unwrap_or(0);
                    break (pos + 4, content_length);
                }
            };
            while buf.len() < headers_end + content_length {
                let n = stream.read(&mut chunk).unwrap();
                buf.extend_from_slice(&chunk[..n]);
            }
            let body = String::from_utf8_lossy(&buf[headers_end..]).to_string();
            captured_in.lock().unwrap().push(body);
            let response = format!(
                "{status_line}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{response_body}",
                response_body.len()
            );
            stream.write_all(response.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/"), captured, handle)
}

fn remote_spec(endpoint: String) -> ProviderSpec {
    ProviderSpec::Remote(RemoteProviderSpec {
        endpoint,
        model: "qwen2.5:7b".into(),
        timeout_ms: 5_000,
        expected_dim: None,
        max_in_flight: 1,
    })
}

#[test]
fn remote_provider_returns_configured_dimension() {
    let values: Vec<String> = (0..1536).map(|i| format!("{}.0", i % 7)).collect();
    let body = format!("{{\"embedding\": [{}]}}", values.join(","));
    let (url, _captured, handle) = spawn_json_server(3, "HTTP/1.1 200 OK", body);
    let chain = ProviderChain::new(vec![remote_spec(url)]).unwrap();
    let vectors = chain.embed_batch(&["q", "doc one", "doc two"]).unwrap();
    handle.join().unwrap();
    assert_eq!(vectors.len(), 3);
    for v in &vectors {
        assert_eq!(v.dim, 1536);
        assert_eq!(v.provider_id, "remote");
        assert_eq!(v.model_id, "qwen2.5:7b");
    }
}

#[test]
fn embedding_request_carries_model_and_text() {
    let (url, captured, handle) =
        spawn_json_server(1, "HTTP/1.1 200 OK", "{\"embedding\": [1.0, 2.0]}".into());
    let chain = ProviderChain::new(vec![remote_spec(url)]).unwrap();
    chain.embed_batch(&["the query text"]).unwrap();
    handle.join().unwrap();
    let bodies = captured.lock().unwrap();
    let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(body["model"], "qwen2.5:7b");
    assert_eq!(body["prompt"], "the query text");
    assert_eq!(body["input"], "the query text");
}

#[test]
fn server_error_triggers_fallback_to_next_provider() {
    let (url, _captured, handle) =
        spawn_json_server(1, "HTTP/1.1 500 Internal Server Error", "{}".into());
    let chain = ProviderChain::new(vec![
        remote_spec(url),
        ProviderSpec::Deterministic { dim: 64, seed: 4 },
    ])
    .unwrap();
    let vectors = chain.embed_batch(&["text"]).unwrap();
    handle.join().unwrap();
    assert_eq!(vectors[0].provider_id, "deterministic");
    let events = chain.fallback_events();
    assert_eq!(events.len(), 1);
    assert!(events[0].contains("500"));
}

#[test]
fn generation_request_carries_low_temperature() {
    let (url, captured, handle) =
        spawn_json_server(1, "HTTP/1.1 200 OK", "{\"response\": \"Yes.\"}".into());
    let generator = HttpGenerator::new().unwrap();
    let cfg = GenConfig {
        endpoint: url,
        ..GenConfig::default()
    };
    let raw = generator.generate("q1", "some prompt", &cfg).unwrap();
    handle.join().unwrap();
    assert_eq!(raw, "Yes.");
    let bodies = captured.lock().unwrap();
    let body: serde_json::Value = serde_json::from_str(&bodies[0]).unwrap();
    assert_eq!(body["options"]["temperature"].as_f64(), Some(0.1));
    assert_eq!(body["stream"], serde_json::Value::Bool(false));
    assert_eq!(body["prompt"], "some prompt");
}

#[test]
fn malformed_generation_body_is_not_retried() {
    let (url, _captured, handle) =
        spawn_json_server(1, "HTTP/1.1 200 OK", "{\"unexpected\": true}".into());
    let generator = HttpGenerator::new().unwrap();
    let cfg = GenConfig {
        endpoint: url,
        max_retries: 3,
        ..GenConfig::default()
    };
    let err = generator.generate("q1", "p", &cfg).unwrap_err();
    handle.join().unwrap();
    assert!(matches!(err, hopqa_core::Error::MalformedResponse { .. }));
    assert_eq!(generator.call_count(), 1);
}
