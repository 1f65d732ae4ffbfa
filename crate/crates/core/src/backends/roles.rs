use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendClient, BackendError, BackendRequest, Role};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelIds {
    pub caption: String,
    pub detect: String,
    pub localize: String,
    pub chat: String,
}

impl Default for ModelIds {
    fn default() -> Self {
        ModelIds {
            caption: "cogvlm-17b-4bit".into(),
            detect: "blip2-flan-t5".into(),
            localize: "owlv2-large".into(),
            chat: "gpt-3.5-turbo".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatParams {
    fn default() -> Self {
        ChatParams {
            temperature: 0.0,
            max_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        ChatMessage {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizeResponse {
    pub boxes: Vec<[f64; 4]>,
    pub features: Vec<Vec<f32>>,
    pub labels: Vec<String>,
    pub scores: Vec<f64>,
}

#[derive(Deserialize)]
struct CaptionResponse {
    caption: String,
}

#[derive(Deserialize)]
struct DetectResponse {
    objects: Vec<String>,
}

#[derive(Deserialize)]
struct ChatResponse {
    content: String,
}

/// Typed role calls over one shared client.
#[derive(Clone)]
pub struct Backends {
    pub client: BackendClient,
    pub models: ModelIds,
    pub chat_params: ChatParams,
}

fn decode<T: for<'de> Deserialize<'de>>(role: Role, bytes: &[u8]) -> Result<T, BackendError> {
    serde_json::from_slice(bytes).map_err(|e| BackendError::Decode {
        role,
        message: format!("{e}: {}", String::from_utf8_lossy(&bytes[..bytes.len().min(200)])),
    })
}

impl Backends {
    pub fn new(client: BackendClient) -> Self {
        Backends {
            client,
            models: ModelIds::default(),
            chat_params: ChatParams::default(),
        }
    }

    pub fn caption_request(&self, image_png: Vec<u8>, prompt: &str) -> BackendRequest {
        BackendRequest::new(Role::Caption, &self.models.caption, json!({ "prompt": prompt }))
            .with_media(vec![image_png])
    }

    pub fn caption(&self, image_png: Vec<u8>, prompt: &str) -> Result<String, BackendError> {
        let bytes = self.client.call(&self.caption_request(image_png, prompt))?;
        Ok(decode::<CaptionResponse>(Role::Caption, &bytes)?.caption)
    }

    pub fn detect(&self, images: Vec<Vec<u8>>) -> Result<Vec<String>, BackendError> {
        let req = BackendRequest::new(Role::Detect, &self.models.detect, json!({})).with_media(images);
        let bytes = self.client.call(&req)?;
        Ok(decode::<DetectResponse>(Role::Detect, &bytes)?.objects)
    }

    pub fn localize(
        &self,
        image_png: Vec<u8>,
        labels: &[String],
    ) -> Result<LocalizeResponse, BackendError> {
        let req = BackendRequest::new(Role::Localize, &self.models.localize, json!({ "labels": labels }))
            .with_media(vec![image_png]);
        let bytes = self.client.call(&req)?;
        let resp: LocalizeResponse = decode(Role::Localize, &bytes)?;
        let n = resp.boxes.len();
        if resp.features.len() != n || resp.labels.len() != n || resp.scores.len() != n {
            return Err(BackendError::Decode {
                role: Role::Localize,
                message: format!(
                    "ragged response: {} boxes, {} features, {} labels, {} scores",
                    n,
                    resp.features.len(),
                    resp.labels.len(),
                    resp.scores.len()
                ),
            });
        }
        Ok(resp)
    }

    pub fn chat_request(&self, messages: &[ChatMessage]) -> BackendRequest {
        let payload: Value = json!({
            "messages": messages,
            "temperature": self.chat_params.temperature,
            "max_tokens": self.chat_params.max_tokens,
        });
        BackendRequest::new(Role::Chat, &self.models.chat, payload)
    }

    pub fn chat(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let bytes = self.client.call(&self.chat_request(messages))?;
        Ok(decode::<ChatResponse>(Role::Chat, &bytes)?.content)
    }
}
