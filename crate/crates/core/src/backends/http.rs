use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendRequest, Role, Transport};

/// Base URL per role; the role's route (`/caption`, ...) is appended.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    #[serde(default)]
    pub urls: BTreeMap<Role, String>,
}

impl Endpoints {
    pub fn all(base: &str) -> Self {
        let urls = [Role::Caption, Role::Detect, Role::Localize, Role::Chat]
            .into_iter()
            .map(|r| (r, base.to_string()))
            .collect();
        Endpoints { urls }
    }

    pub fn url_for(&self, role: Role) -> Option<String> {
        self.urls
            .get(&role)
            .map(|base| format!("{}{}", base.trim_end_matches('/'), role.route()))
    }
}

/// JSON-over-HTTP transport for the model wire protocol.
pub struct HttpTransport {
    agent: ureq::Agent,
    endpoints: Endpoints,
}

const EXCERPT_CHARS: usize = 200;
const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

impl HttpTransport {
    pub fn new(endpoints: Endpoints, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport { agent, endpoints }
    }
}

impl Transport for HttpTransport {
    fn send(&self, req: &BackendRequest) -> Result<Vec<u8>, BackendError> {
        let url = self
            .endpoints
            .url_for(req.role)
            .ok_or(BackendError::NotConfigured(req.role))?;
        let body = req.wire_body();
        let mut resp = self
            .agent
            .post(&url)
            .send_json(&body)
            .map_err(|e| BackendError::Transport {
                role: req.role,
                message: format!("{url}: {e}"),
            })?;
        let status = resp.status().as_u16();
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(MAX_BODY_BYTES)
            .read_to_vec()
            .map_err(|e| BackendError::Transport {
                role: req.role,
                message: format!("{url}: reading body: {e}"),
            })?;
        if status != 200 {
            let excerpt: String = String::from_utf8_lossy(&bytes)
                .chars()
                .take(EXCERPT_CHARS)
                .collect();
            return Err(BackendError::Status {
                role: req.role,
                status,
                excerpt,
            });
        }
        Ok(bytes)
    }
}
