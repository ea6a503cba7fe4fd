//! HTTP text-generation client: POST `{"prompt": ...}`, expect `{"text": ...}`.

use std::time::Duration;

use cfa_core::generation::TextGenerator;
use serde::{Deserialize, Serialize};

#[derive(Serialize)]
struct GenerateRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct GenerateResponse {
    text: String,
}

pub struct HttpGenerator {
    agent: ureq::Agent,
    endpoint: String,
    token: Option<String>,
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpGenerator {
            agent,
            endpoint: endpoint.into(),
            token,
        }
    }
}

impl TextGenerator for HttpGenerator {
    fn generate(&self, prompt: &str) -> Result<String, String> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(token) = &self.token {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let payload =
            serde_json::to_string(&GenerateRequest { prompt }).map_err(|e| e.to_string())?;
        let mut resp = req
            .header("Content-Type", "application/json")
            .send(payload.as_str())
            .map_err(|e| e.to_string())?;
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        let body: GenerateResponse =
            serde_json::from_str(&text).map_err(|e| format!("unexpected response body: {e}"))?;
        Ok(body.text)
    }
}
