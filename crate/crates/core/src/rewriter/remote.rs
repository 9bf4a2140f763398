use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::RewriterError;

/// A source of free-text rewritings. The pipeline aligns, safety-checks and
/// score-checks whatever comes back.
pub trait RewriteBackend: Send + Sync {
    fn rewrite(&self, seeker_post: &str, response: &str, seed: u64) -> Result<String, RewriterError>;
}

#[derive(Debug, Serialize)]
struct RewriteRequest<'a> {
    seeker_post: &'a str,
    response: &'a str,
    seed: u64,
}

#[derive(Debug, Deserialize)]
struct RewriteResponse {
    rewriting: String,
}

/// HTTP client for an external rewriting model: POST
/// `{seeker_post, response, seed}`, receive `{rewriting}`.
#[derive(Debug, Clone)]
pub struct RemoteRewriter {
    agent: ureq::Agent,
    endpoint: String,
}

impl RemoteRewriter {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        Self {
            agent,
            endpoint: endpoint.into(),
        }
    }
}

impl RewriteBackend for RemoteRewriter {
    fn rewrite(&self, seeker_post: &str, response: &str, seed: u64) -> Result<String, RewriterError> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&RewriteRequest {
                seeker_post,
                response,
                seed,
            })
            .map_err(|e| RewriterError::BackendUnavailable(e.to_string()))?;
        let body: RewriteResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| RewriterError::BackendUnavailable(format!("malformed body: {e}")))?;
        Ok(body.rewriting)
    }
}
