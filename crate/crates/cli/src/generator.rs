//! HTTP client for the external text-generation service.
//!
//! The contract is deliberately small: the prompt is POSTed as a plain-text
//! body and the response body is the generated text.

use std::sync::Arc;
use std::time::Duration;

use talechat_core::config::GenerationSettings;
use talechat_core::dialogue::generation::{DisabledGenerator, GenError, TextGenerator};

#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpGenerator {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self {
            endpoint: endpoint.to_string(),
            agent,
        }
    }
}

impl TextGenerator for HttpGenerator {
    fn is_enabled(&self) -> bool {
        true
    }

    fn generate(&self, prompt: &str) -> Result<String, GenError> {
        let fail = |e: ureq::Error| match e {
            ureq::Error::Timeout(_) => GenError::Timeout,
            other => GenError::Failed(other.to_string()),
        };
        let mut response = self
            .agent
            .post(&self.endpoint)
            .content_type("text/plain; charset=utf-8")
            .send(prompt)
            .map_err(fail)?;
        let text = response.body_mut().read_to_string().map_err(fail)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(GenError::Failed("empty response".into()));
        }
        Ok(text.to_string())
    }
}

/// The generator described by the configuration.
pub fn from_settings(settings: &GenerationSettings) -> Arc<dyn TextGenerator> {
    if settings.enabled {
        Arc::new(HttpGenerator::new(&settings.endpoint, Duration::from_millis(settings.timeout_ms)))
    } else {
        Arc::new(DisabledGenerator)
    }
}
