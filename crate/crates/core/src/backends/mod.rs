//! Uniform client contract for the captioner, detector, localizer and chat
//! roles: a cached, retrying, rate-limited call path over pluggable
//! transports (HTTP, fixture mocks, sentinels).

mod cache;
mod canonical;
mod client;
mod http;
pub mod mock;
mod ratelimit;
mod roles;
mod transport;

use std::fmt;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::{CacheEntry, ResponseCache};
pub use canonical::canonical_json;
pub use client::{BackendClient, RetryPolicy};
pub use http::{Endpoints, HttpTransport};
pub use mock::{FixtureTable, Matcher, MockReply, MockTransport};
pub use ratelimit::RateLimiter;
pub use roles::{Backends, ChatMessage, ChatParams, LocalizeResponse, ModelIds};
pub use transport::{CountingTransport, SentinelTransport, Transport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Caption,
    Detect,
    Localize,
    Chat,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Caption => "caption",
            Role::Detect => "detect",
            Role::Localize => "localize",
            Role::Chat => "chat",
        }
    }

    pub fn route(self) -> &'static str {
        match self {
            Role::Caption => "/caption",
            Role::Detect => "/detect",
            Role::Localize => "/localize",
            Role::Chat => "/chat",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error)]
pub enum BackendError {
    #[error("{role} transport error: {message}")]
    Transport { role: Role, message: String },

    #[error("{role} returned HTTP {status}: {excerpt}")]
    Status {
        role: Role,
        status: u16,
        excerpt: String,
    },

    #[error("no fixture matches {0}")]
    FixtureMiss(String),

    #[error("network access attempted under a no-network sentinel: {0}")]
    NetworkForbidden(String),

    #[error("{role} response could not be decoded: {message}")]
    Decode { role: Role, message: String },

    #[error("no backend configured for role {0}")]
    NotConfigured(Role),

    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: usize,
        last: Box<BackendError>,
    },
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        match self {
            BackendError::Transport { .. } => true,
            BackendError::Status { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

/// A logical model call. Attached media travel beside the payload so that
/// cache keys hash them once via `media_hash`.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendRequest {
    pub role: Role,
    pub model_id: String,
    pub payload: Value,
    pub media: Vec<Vec<u8>>,
    pub media_hash: Option<String>,
}

impl BackendRequest {
    pub fn new(role: Role, model_id: impl Into<String>, payload: Value) -> Self {
        BackendRequest {
            role,
            model_id: model_id.into(),
            payload,
            media: Vec::new(),
            media_hash: None,
        }
    }

    pub fn with_media(mut self, media: Vec<Vec<u8>>) -> Self {
        self.media_hash = if media.is_empty() {
            None
        } else {
            Some(media_digest(&media))
        };
        self.media = media;
        self
    }

    pub fn check(&self) -> Result<(), String> {
        if self.media.is_empty() != self.media_hash.is_none() {
            return Err("media_hash must be present iff media is attached".into());
        }
        let obj = self
            .payload
            .as_object()
            .ok_or_else(|| "payload must be a JSON object".to_string())?;
        let need: &[&str] = match self.role {
            Role::Caption => &["prompt"],
            Role::Detect => &[],
            Role::Localize => &["labels"],
            Role::Chat => &["messages"],
        };
        for k in need {
            if !obj.contains_key(*k) {
                return Err(format!("{} payload missing {k:?}", self.role));
            }
        }
        let media_ok = match self.role {
            Role::Caption | Role::Localize => self.media.len() == 1,
            Role::Detect => !self.media.is_empty(),
            Role::Chat => self.media.is_empty(),
        };
        if !media_ok {
            return Err(format!(
                "{} request carries {} media items",
                self.role,
                self.media.len()
            ));
        }
        Ok(())
    }

    /// Deterministic key over (role, model_id, canonical payload, media_hash).
    pub fn cache_key(&self) -> String {
        let keyed = serde_json::json!({
            "role": self.role.as_str(),
            "model_id": self.model_id,
            "payload": self.payload,
            "media_hash": self.media_hash,
        });
        sha256_hex(canonical_json(&keyed).as_bytes())
    }

    pub fn payload_digest(&self) -> String {
        sha256_hex(canonical_json(&self.payload).as_bytes())
    }

    /// All string leaves of the payload, newline-joined; used by fixture matchers.
    pub fn search_text(&self) -> String {
        fn walk(v: &Value, out: &mut Vec<String>) {
            match v {
                Value::String(s) => out.push(s.clone()),
                Value::Array(a) => a.iter().for_each(|x| walk(x, out)),
                Value::Object(m) => m.values().for_each(|x| walk(x, out)),
                _ => {}
            }
        }
        let mut parts = Vec::new();
        walk(&self.payload, &mut parts);
        parts.join("\n")
    }

    /// JSON body sent on the wire for this role.
    pub fn wire_body(&self) -> Value {
        let b64 = |m: &Vec<u8>| Value::String(base64::engine::general_purpose::STANDARD.encode(m));
        let mut body = self.payload.clone();
        if let Some(obj) = body.as_object_mut() {
            match self.role {
                Role::Caption | Role::Localize => {
                    if let Some(m) = self.media.first() {
                        obj.insert("image".into(), b64(m));
                    }
                }
                Role::Detect => {
                    obj.insert("images".into(), Value::Array(self.media.iter().map(b64).collect()));
                }
                Role::Chat => {}
            }
        }
        body
    }

    pub fn describe(&self) -> String {
        let text = self.search_text();
        let excerpt: String = text.chars().take(120).collect();
        format!(
            "{} request (model {}, key {}): {:?}",
            self.role,
            self.model_id,
            &self.cache_key()[..12],
            excerpt
        )
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn media_digest(media: &[Vec<u8>]) -> String {
    let mut h = Sha256::new();
    for m in media {
        h.update((m.len() as u64).to_le_bytes());
        h.update(m);
    }
    hex::encode(h.finalize())
}
