use std::time::Duration;

use kidsask_core::cue_pipeline::{BackendError, GenerationConfig, LanguageModelBackend};
use serde::Deserialize;
use serde_json::json;

use crate::config::RemoteConfig;

/// Client for an OpenAI-style `/v1/completions` endpoint. Only used offline by
/// `gen-cues`; the child-facing service never calls a model.
pub struct RemoteBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: String,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    text: String,
}

impl RemoteBackend {
    pub fn new(cfg: &RemoteConfig, api_key: String) -> anyhow::Result<Self> {
        let client = reqwest::blocking::Client::builder().timeout(Duration::from_secs(cfg.timeout_secs)).build()?;
        Ok(Self { client, endpoint: cfg.endpoint.clone(), api_key })
    }

    pub fn from_env(cfg: &RemoteConfig) -> anyhow::Result<Self> {
        let key = std::env::var("LLM_API_KEY").map_err(|_| anyhow::anyhow!("LLM_API_KEY is not set"))?;
        Self::new(cfg, key)
    }
}

impl LanguageModelBackend for RemoteBackend {
    fn complete(&self, prompt: &str, config: &GenerationConfig) -> Result<String, BackendError> {
        let mut body = json!({
            "model": config.model_name,
            "prompt": prompt,
            "temperature": config.temperature,
            "max_tokens": config.max_output_tokens,
            "n": 1,
        });
        if let Some(seed) = config.seed {
            body["seed"] = json!(seed);
        }
        let resp = self
            .client
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 {
            return Err(BackendError::Quota(resp.text().unwrap_or_default()));
        }
        if !status.is_success() {
            return Err(BackendError::Transport(format!("HTTP {status}: {}", resp.text().unwrap_or_default())));
        }
        let parsed: Completion = resp.json().map_err(|e| BackendError::BadResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.text.trim().to_string())
            .ok_or_else(|| BackendError::BadResponse("no choices".into()))
    }

    fn name(&self) -> &str {
        "remote"
    }
}
