//! Deterministic fixture-table transport.

use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use super::{BackendError, BackendRequest, Role, Transport};

type ReplyFn = dyn Fn(&BackendRequest) -> Result<Vec<u8>, BackendError> + Send + Sync;

/// Selects which requests a fixture answers.
#[derive(Debug, Clone)]
pub enum Matcher {
    Any,
    Role(Role),
    /// Substring of the request's string leaves (message text, prompts, labels).
    Contains(String),
    MediaHash(String),
    All(Vec<Matcher>),
}

impl Matcher {
    pub fn role_contains(role: Role, needle: impl Into<String>) -> Self {
        Matcher::All(vec![Matcher::Role(role), Matcher::Contains(needle.into())])
    }

    pub fn matches(&self, req: &BackendRequest, text: &str) -> bool {
        match self {
            Matcher::Any => true,
            Matcher::Role(r) => req.role == *r,
            Matcher::Contains(s) => text.contains(s.as_str()),
            Matcher::MediaHash(h) => req.media_hash.as_deref() == Some(h.as_str()),
            Matcher::All(ms) => ms.iter().all(|m| m.matches(req, text)),
        }
    }
}

#[derive(Clone)]
pub enum MockReply {
    Bytes(Vec<u8>),
    /// Responds with the sha256 of the canonical payload, wrapped in the
    /// role's text field for caption/chat.
    EchoDigest,
    /// Computed reply; must be a pure function of the request.
    Func(Arc<ReplyFn>),
}

impl fmt::Debug for MockReply {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockReply::Bytes(b) => write!(f, "Bytes({})", String::from_utf8_lossy(b)),
            MockReply::EchoDigest => f.write_str("EchoDigest"),
            MockReply::Func(_) => f.write_str("Func(..)"),
        }
    }
}

impl MockReply {
    pub fn json(v: Value) -> Self {
        MockReply::Bytes(serde_json::to_vec(&v).expect("serializable"))
    }

    pub fn chat(content: impl Into<String>) -> Self {
        Self::json(json!({ "content": content.into() }))
    }

    pub fn caption(text: impl Into<String>) -> Self {
        Self::json(json!({ "caption": text.into() }))
    }

    pub fn objects<S: AsRef<str>>(names: &[S]) -> Self {
        let v: Vec<&str> = names.iter().map(|s| s.as_ref()).collect();
        Self::json(json!({ "objects": v }))
    }

    pub fn func<F>(f: F) -> Self
    where
        F: Fn(&BackendRequest) -> Result<Vec<u8>, BackendError> + Send + Sync + 'static,
    {
        MockReply::Func(Arc::new(f))
    }

    fn produce(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
        match self {
            MockReply::Bytes(b) => Ok(b.clone()),
            MockReply::EchoDigest => {
                let d = req.payload_digest();
                let v = match req.role {
                    Role::Chat => json!({ "content": d }),
                    Role::Caption => json!({ "caption": d }),
                    Role::Detect => json!({ "objects": [d] }),
                    Role::Localize => {
                        json!({ "boxes": [], "features": [], "labels": [], "scores": [] })
                    }
                };
                Ok(serde_json::to_vec(&v).expect("serializable"))
            }
            MockReply::Func(f) => f(req),
        }
    }
}

/// Ordered (matcher, reply) rules; the first match answers.
#[derive(Debug, Clone, Default)]
pub struct FixtureTable {
    rules: Vec<(Matcher, MockReply)>,
}

impl FixtureTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rule(mut self, matcher: Matcher, reply: MockReply) -> Self {
        self.rules.push((matcher, reply));
        self
    }

    pub fn push(&mut self, matcher: Matcher, reply: MockReply) {
        self.rules.push((matcher, reply));
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn respond(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
        let text = req.search_text();
        self.rules
            .iter()
            .find(|(m, _)| m.matches(req, &text))
            .map(|(_, reply)| reply.produce(req))
            .unwrap_or_else(|| Err(BackendError::FixtureMiss(req.describe())))
    }
}

#[derive(Debug, Clone)]
pub struct MockTransport {
    table: Arc<FixtureTable>,
}

impl MockTransport {
    pub fn new(table: FixtureTable) -> Self {
        MockTransport {
            table: Arc::new(table),
        }
    }
}

impl Transport for MockTransport {
    fn send(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
        self.table.respond(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chat_req(text: &str) -> BackendRequest {
        BackendRequest::new(
            Role::Chat,
            "gpt",
            json!({"messages": [{"role": "user", "content": text}], "temperature": 0}),
        )
    }

    #[test]
    fn substring_matcher_on_unescaped_prompt() {
        let t = FixtureTable::new().rule(
            Matcher::role_contains(Role::Chat, "relevant to the action \"Drinking\""),
            MockReply::chat("bottle"),
        );
        let r = chat_req("I only want the objects that are relevant to the action \"Drinking\". ...");
        assert_eq!(t.respond(&r).unwrap(), br#"{"content":"bottle"}"#);
    }

    #[test]
    fn unmatched_request_is_a_named_miss() {
        let t = FixtureTable::new().rule(Matcher::Contains("zzz".into()), MockReply::chat("x"));
        match t.respond(&chat_req("hello there")) {
            Err(BackendError::FixtureMiss(msg)) => assert!(msg.contains("hello there")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn echo_returns_payload_digest() {
        let t = FixtureTable::new().rule(Matcher::Any, MockReply::EchoDigest);
        let r = chat_req("abc");
        let v: Value = serde_json::from_slice(&t.respond(&r).unwrap()).unwrap();
        assert_eq!(v["content"], r.payload_digest());
    }

    #[test]
    fn pure_across_calls() {
        let t = MockTransport::new(FixtureTable::new().rule(Matcher::Any, MockReply::EchoDigest));
        let r = chat_req("same");
        assert_eq!(t.send(&r).unwrap(), t.send(&r.clone()).unwrap());
    }
}
