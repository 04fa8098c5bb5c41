//! Model profiles and the HTTP mapping for chat-completion providers.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    OpenaiCompatible,
    GeminiCompatible,
    /// Cache-only; never touches the network.
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_attempts: 3, initial_backoff_ms: 1000 }
    }
}

fn default_temperature() -> f64 {
    0.2
}

fn default_max_output_tokens() -> u32 {
    1024
}

fn default_token_budget() -> usize {
    128_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub model_id: String,
    pub provider_kind: ProviderKind,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_max_output_tokens")]
    pub max_output_tokens: u32,
    /// Prompt size cap in estimated tokens (ceil(bytes / 4)).
    #[serde(default = "default_token_budget")]
    pub token_budget: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credential_env_var: Option<String>,
    /// Model name sent to the provider; defaults to the part of `model_id` after the last `/`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_model: Option<String>,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Minimum spacing between network requests for this profile.
    #[serde(default)]
    pub min_request_interval_ms: u64,
}

impl ModelProfile {
    pub fn replay(model_id: &str) -> Self {
        ModelProfile {
            model_id: model_id.to_string(),
            provider_kind: ProviderKind::Replay,
            temperature: default_temperature(),
            max_output_tokens: default_max_output_tokens(),
            token_budget: default_token_budget(),
            endpoint_url: None,
            credential_env_var: None,
            api_model: None,
            retry: RetryPolicy::default(),
            min_request_interval_ms: 0,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |m: String| Err(GatewayError::InvalidProfile { model_id: self.model_id.clone(), message: m });
        if self.model_id.trim().is_empty() {
            return bad("empty model_id".into());
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.max_output_tokens == 0 || self.token_budget == 0 {
            return bad("max_output_tokens and token_budget must be positive".into());
        }
        if self.retry.max_attempts == 0 {
            return bad("retry.max_attempts must be at least 1".into());
        }
        if self.provider_kind != ProviderKind::Replay {
            match &self.endpoint_url {
                Some(u) if u.starts_with("http://") || u.starts_with("https://") => {}
                _ => return bad("network providers need an http(s) endpoint_url".into()),
            }
            if self.credential_env_var.as_deref().is_none_or(str::is_empty) {
                return bad("network providers need credential_env_var".into());
            }
        }
        Ok(())
    }

    pub fn api_model(&self) -> &str {
        self.api_model
            .as_deref()
            .unwrap_or_else(|| self.model_id.rsplit('/').next().unwrap_or(&self.model_id))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Transport-level failure (connection, TLS, timeout); retried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportError(pub String);

pub trait Transport: Send + Sync {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        (**self).post(request)
    }
}

/// Blocking HTTPS transport.
pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        UreqTransport { agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        UreqTransport::new(Duration::from_secs(120))
    }
}

impl Transport for UreqTransport {
    fn post(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut req = self.agent.post(&request.url);
        for (k, v) in &request.headers {
            req = req.set(k, v);
        }
        match req.send_string(&request.body) {
            Ok(resp) => {
                let status = resp.status();
                let body = resp.into_string().map_err(|e| TransportError(e.to_string()))?;
                Ok(HttpResponse { status, body })
            }
            Err(ureq::Error::Status(status, resp)) => Ok(HttpResponse {
                status,
                body: resp.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => Err(TransportError(t.to_string())),
        }
    }
}

/// Builds the provider request for a prompt.
pub fn build_request(profile: &ModelProfile, prompt: &str, credential: &str) -> HttpRequest {
    let url = profile.endpoint_url.clone().unwrap_or_default();
    match profile.provider_kind {
        ProviderKind::OpenaiCompatible => HttpRequest {
            url,
            headers: vec![
                ("Content-Type".into(), "application/json".into()),
                ("Authorization".into(), format!("Bearer {credential}")),
            ],
            body: json!({
                "model": profile.api_model(),
                "messages": [{"role": "user", "content": prompt}],
                "temperature": profile.temperature,
                "max_tokens": profile.max_output_tokens,
            })
            .to_string(),
        },
        ProviderKind::GeminiCompatible => HttpRequest {
            url,
            headers: vec![
                ("Content-Type".into(), "application/json".into()),
                ("x-goog-api-key".into(), credential.to_string()),
            ],
            body: json!({
                "contents": [{"role": "user", "parts": [{"text": prompt}]}],
                "generationConfig": {
                    "temperature": profile.temperature,
                    "maxOutputTokens": profile.max_output_tokens,
                },
            })
            .to_string(),
        },
        ProviderKind::Replay => unreachable!("replay profiles never build requests"),
    }
}

/// Extracts the reply text and a compact metadata string from a provider response body.
pub fn extract_reply(kind: ProviderKind, body: &str) -> Result<(String, String), GatewayError> {
    let v: Value = serde_json::from_str(body).map_err(|e| GatewayError::BadResponse(e.to_string()))?;
    match kind {
        ProviderKind::OpenaiCompatible => {
            let choice = &v["choices"][0];
            let text = choice["message"]["content"]
                .as_str()
                .ok_or_else(|| GatewayError::BadResponse("missing choices[0].message.content".into()))?;
            let meta = json!({
                "provider": "openai-compatible",
                "model": v["model"],
                "finish_reason": choice["finish_reason"],
                "usage": v["usage"],
            });
            Ok((text.to_string(), meta.to_string()))
        }
        ProviderKind::GeminiCompatible => {
            let cand = &v["candidates"][0];
            let parts = cand["content"]["parts"]
                .as_array()
                .ok_or_else(|| GatewayError::BadResponse("missing candidates[0].content.parts".into()))?;
            let text: String = parts.iter().filter_map(|p| p["text"].as_str()).collect();
            let meta = json!({
                "provider": "gemini-compatible",
                "model": v["modelVersion"],
                "finish_reason": cand["finishReason"],
                "usage": v["usageMetadata"],
            });
            Ok((text, meta.to_string()))
        }
        ProviderKind::Replay => unreachable!("replay profiles never parse responses"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn openai() -> ModelProfile {
        ModelProfile {
            provider_kind: ProviderKind::OpenaiCompatible,
            endpoint_url: Some("https://api.example.com/v1/chat/completions".into()),
            credential_env_var: Some("EXAMPLE_KEY".into()),
            ..ModelProfile::replay("openai/gpt-4.1-mini")
        }
    }

    #[test]
    fn profile_defaults_from_json() {
        let p: ModelProfile = serde_json::from_str(r#"{"model_id":"demo","provider_kind":"replay"}"#).unwrap();
        assert_eq!(p.temperature, 0.2);
        assert_eq!(p.retry, RetryPolicy { max_attempts: 3, initial_backoff_ms: 1000 });
        p.validate().unwrap();
    }

    #[test]
    fn profile_validation() {
        openai().validate().unwrap();
        let mut p = openai();
        p.temperature = 2.5;
        assert!(p.validate().is_err());
        let mut p = openai();
        p.credential_env_var = None;
        assert!(p.validate().is_err());
        let mut p = openai();
        p.endpoint_url = Some("ftp://x".into());
        assert!(p.validate().is_err());
    }

    #[test]
    fn openai_request_shape() {
        let req = build_request(&openai(), "hello", "sk-test");
        let body: Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(body["model"], "gpt-4.1-mini");
        assert_eq!(body["messages"][0]["content"], "hello");
        assert_eq!(body["temperature"], 0.2);
        assert!(req.headers.contains(&("Authorization".into(), "Bearer sk-test".into())));
    }

    #[test]
    fn gemini_request_and_reply() {
        let p = ModelProfile { provider_kind: ProviderKind::GeminiCompatible, ..openai() };
        let req = build_request(&p, "hi", "k");
        let body: Value = serde_json::from_str(&req.body).unwrap();
        assert_eq!(body["contents"][0]["parts"][0]["text"], "hi");
        assert_eq!(body["generationConfig"]["maxOutputTokens"], 1024);

        let reply = r#"{"candidates":[{"content":{"parts":[{"text":"Applicability: "},{"text":"No"}]},"finishReason":"STOP"}]}"#;
        let (text, meta) = extract_reply(ProviderKind::GeminiCompatible, reply).unwrap();
        assert_eq!(text, "Applicability: No");
        assert!(meta.contains("STOP"));
    }

    #[test]
    fn openai_reply() {
        let reply = r#"{"model":"gpt","choices":[{"message":{"role":"assistant","content":"SCORE: 0.5"},"finish_reason":"stop"}]}"#;
        assert_eq!(extract_reply(ProviderKind::OpenaiCompatible, reply).unwrap().0, "SCORE: 0.5");
        assert!(extract_reply(ProviderKind::OpenaiCompatible, r#"{"choices":[]}"#).is_err());
    }
}
