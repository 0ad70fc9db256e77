use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CompletionProvider, CompletionRequest, ProviderConfig, ProviderError};

/// Script file for [`ScriptedMock`].
///
/// Keys are tried in order: the request content hash, `tag/id`, then `tag`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_strict")]
    pub strict: bool,
    pub responses: BTreeMap<String, String>,
}

fn default_model() -> String {
    "mock".into()
}

fn default_strict() -> bool {
    true
}

/// Deterministic provider answering from a [`MockScript`]. A strict mock
/// refuses requests it has no entry for; a lenient one answers `PASS`.
#[derive(Debug, Clone)]
pub struct ScriptedMock {
    script: MockScript,
}

impl ScriptedMock {
    pub fn new(script: MockScript) -> Self {
        Self { script }
    }

    pub fn strict(responses: impl IntoIterator<Item = (String, String)>) -> Self {
        Self::new(MockScript {
            model: default_model(),
            strict: true,
            responses: responses.into_iter().collect(),
        })
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        Ok(Self::new(serde_json::from_str(&text)?))
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    pub fn lookup(&self, req: &CompletionRequest) -> Option<&str> {
        let r = &self.script.responses;
        let hash = req.content_hash(&self.script.model);
        r.get(&hash)
            .or_else(|| {
                req.id
                    .as_ref()
                    .and_then(|id| r.get(&format!("{}/{id}", req.tag)))
            })
            .or_else(|| r.get(&req.tag))
            .map(String::as_str)
    }
}

impl CompletionProvider for ScriptedMock {
    fn model(&self) -> &str {
        &self.script.model
    }

    fn send(
        &self,
        req: &CompletionRequest,
        _cfg: &ProviderConfig,
    ) -> Result<String, ProviderError> {
        match self.lookup(req) {
            Some(text) => Ok(text.to_string()),
            None if !self.script.strict => Ok("PASS".into()),
            None => Err(ProviderError::Unscripted {
                tag: req.tag.clone(),
                id: req.id.clone(),
                hash: req.content_hash(&self.script.model),
            }),
        }
    }
}
