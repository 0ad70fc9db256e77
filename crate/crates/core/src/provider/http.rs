use std::path::PathBuf;

use base64::Engine;
use serde_json::json;

use super::{
    render_image_ref, CompletionProvider, CompletionRequest, ProviderConfig, ProviderError,
};

/// Provider for OpenAI-compatible `POST {endpoint}/chat/completions` APIs.
/// Images are rendered (crop + marks) and inlined as PNG data URLs.
pub struct HttpProvider {
    agent: ureq::Agent,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    image_root: PathBuf,
}

impl HttpProvider {
    pub fn new(
        cfg: &ProviderConfig,
        image_root: impl Into<PathBuf>,
    ) -> Result<Self, ProviderError> {
        cfg.validate()?;
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| ProviderError::Config("no endpoint configured".into()))?;
        let api_key = match &cfg.credential_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                ProviderError::Auth(format!("environment variable {var} is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout()))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            agent,
            endpoint: endpoint.trim_end_matches('/').to_string(),
            model: cfg.model.clone(),
            api_key,
            image_root: image_root.into(),
        })
    }

    fn body(&self, req: &CompletionRequest) -> Result<Vec<u8>, ProviderError> {
        let mut content = vec![json!({"type": "text", "text": req.prompt})];
        for img in &req.images {
            let png = render_image_ref(img, &self.image_root)?;
            let data = base64::engine::general_purpose::STANDARD.encode(png);
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{data}")}
            }));
        }
        let body = json!({
            "model": self.model,
            "messages": [{"role": "user", "content": content}],
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        });
        Ok(serde_json::to_vec(&body).expect("request body serializes"))
    }
}

fn classify(err: ureq::Error, cfg: &ProviderConfig) -> ProviderError {
    match err {
        ureq::Error::Timeout(_) => ProviderError::Timeout(cfg.timeout()),
        other => ProviderError::Transport(other.to_string()),
    }
}

impl CompletionProvider for HttpProvider {
    fn model(&self) -> &str {
        &self.model
    }

    fn send(&self, req: &CompletionRequest, cfg: &ProviderConfig) -> Result<String, ProviderError> {
        let body = self.body(req)?;
        if body.len() > cfg.max_payload_bytes {
            return Err(ProviderError::Oversized {
                bytes: body.len(),
                limit: cfg.max_payload_bytes,
            });
        }
        let mut request = self
            .agent
            .post(format!("{}/chat/completions", self.endpoint))
            .content_type("application/json");
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = request.send(&body[..]).map_err(|e| classify(e, cfg))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| classify(e, cfg))?;
        match status {
            200..=299 => {}
            401 | 403 => return Err(ProviderError::Auth(text)),
            413 => {
                return Err(ProviderError::Oversized {
                    bytes: body.len(),
                    limit: cfg.max_payload_bytes,
                })
            }
            _ => return Err(ProviderError::Status { status, body: text }),
        }
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| ProviderError::Transport(format!("bad JSON body: {e}")))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                ProviderError::Transport("response has no choices[0].message.content".into())
            })
    }
}
