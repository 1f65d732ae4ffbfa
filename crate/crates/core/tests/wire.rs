//! HTTP transport against a local listener, checked with the JSON contract
//! fixtures in `tests/contract/` (shared with the Python shim).

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use adlforge_core::backends::{
    BackendClient, BackendError, Backends, ChatMessage, Endpoints, HttpTransport, ResponseCache, RetryPolicy,
};
use base64::Engine;
use serde_json::Value;

struct Recorded {
    path: String,
    body: Value,
}

/// Serves one scripted `(status, body)` per connection, in order, and
/// records every request it receives.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<Recorded>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, reply) in script {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or_default().to_string();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        len = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            log.lock().unwrap().push(Recorded {
                path,
                body: serde_json::from_slice(&body).unwrap_or(Value::Null),
            });
            let mut stream = stream;
            write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            )
            .unwrap();
        }
    });
    (base, seen)
}

fn backends(base: &str, retry: RetryPolicy) -> Backends {
    let t = HttpTransport::new(Endpoints::all(base), Duration::from_secs(5));
    Backends::new(BackendClient::new(Arc::new(t)).with_retry(retry))
}

fn fixture(name: &str) -> (Value, Value) {
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/contract").join(format!("{name}.json"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    (v["request"].clone(), v["response"].clone())
}

fn image(v: &Value) -> Vec<u8> {
    base64::engine::general_purpose::STANDARD.decode(v.as_str().unwrap()).unwrap()
}

fn one_call(name: &str) -> (Value, Value, Backends, Arc<Mutex<Vec<Recorded>>>) {
    let (req, resp) = fixture(name);
    let (base, seen) = serve(vec![(200, resp.to_string())]);
    (req, resp, backends(&base, RetryPolicy::no_delay(0)), seen)
}

fn only_request(seen: &Arc<Mutex<Vec<Recorded>>>) -> (String, Value) {
    let seen = seen.lock().unwrap();
    assert_eq!(seen.len(), 1);
    (seen[0].path.clone(), seen[0].body.clone())
}

#[test]
fn caption_contract() {
    let (req, resp, b, seen) = one_call("caption");
    let got = b.caption(image(&req["image"]), req["prompt"].as_str().unwrap()).unwrap();
    assert_eq!(got, resp["caption"]);
    assert_eq!(only_request(&seen), ("/caption".to_string(), req));
}

#[test]
fn detect_contract() {
    let (req, resp, b, seen) = one_call("detect");
    let images = req["images"].as_array().unwrap().iter().map(image).collect();
    let got = b.detect(images).unwrap();
    assert_eq!(serde_json::to_value(got).unwrap(), resp["objects"]);
    assert_eq!(only_request(&seen), ("/detect".to_string(), req));
}

#[test]
fn localize_contract() {
    let (req, resp, b, seen) = one_call("localize");
    let labels: Vec<String> = serde_json::from_value(req["labels"].clone()).unwrap();
    let got = b.localize(image(&req["image"]), &labels).unwrap();
    assert_eq!(got.labels, labels);
    assert_eq!(got.features[0].len(), 512);
    assert!(got.features.iter().flatten().all(|x| x.is_finite()));
    assert_eq!(serde_json::to_value(&got.boxes).unwrap(), resp["boxes"]);
    assert_eq!(serde_json::to_value(&got.scores).unwrap(), resp["scores"]);
    for (x, y) in got.features[0].iter().zip(resp["features"][0].as_array().unwrap()) {
        assert!((*x as f64 - y.as_f64().unwrap()).abs() < 1e-6);
    }
    assert_eq!(only_request(&seen), ("/localize".to_string(), req));
}

#[test]
fn chat_contract() {
    let (req, resp, mut b, seen) = one_call("chat");
    b.chat_params.max_tokens = req["max_tokens"].as_u64().unwrap() as u32;
    b.chat_params.temperature = req["temperature"].as_f64().unwrap();
    let msgs: Vec<ChatMessage> = serde_json::from_value(req["messages"].clone()).unwrap();
    assert_eq!(b.chat(&msgs).unwrap(), resp["content"]);
    assert_eq!(only_request(&seen), ("/chat".to_string(), req));
}

#[test]
fn server_errors_are_retried() {
    let (_, resp) = fixture("chat");
    let (base, seen) = serve(vec![(503, "busy".into()), (500, "oops".into()), (200, resp.to_string())]);
    let b = backends(&base, RetryPolicy::no_delay(3));
    assert_eq!(b.chat(&[ChatMessage::user("Say hi.")]).unwrap(), "Hi.");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (base, seen) = serve(vec![(404, "no such route".into()), (200, "{}".into())]);
    let b = backends(&base, RetryPolicy::no_delay(3));
    match b.chat(&[ChatMessage::user("x")]) {
        Err(BackendError::Status { status: 404, excerpt, .. }) => assert_eq!(excerpt, "no such route"),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn malformed_reply_is_a_decode_error() {
    let (base, _) = serve(vec![(200, r#"{"text": "wrong key"}"#.into())]);
    let b = backends(&base, RetryPolicy::no_delay(0));
    assert!(matches!(b.chat(&[ChatMessage::user("x")]), Err(BackendError::Decode { .. })));
}

#[test]
fn cached_reply_skips_the_network() {
    let (_, resp) = fixture("caption");
    let (base, seen) = serve(vec![(200, resp.to_string())]);
    let dir = tempfile::tempdir().unwrap();
    let t = HttpTransport::new(Endpoints::all(&base), Duration::from_secs(5));
    let client = BackendClient::new(Arc::new(t)).with_cache(ResponseCache::open(dir.path()).unwrap());
    let b = Backends::new(client);
    let first = b.caption(vec![1, 2, 3], "describe").unwrap();
    let second = b.caption(vec![1, 2, 3], "describe").unwrap();
    assert_eq!(first, second);
    assert_eq!(seen.lock().unwrap().len(), 1);
}
