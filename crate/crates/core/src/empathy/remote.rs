use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{EmpathyError, EmpathyScore, RuleScorer, Scorer, ScoringContext};

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    seeker_post: &'a str,
    response: &'a str,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    emotional_reactions: i64,
    interpretations: i64,
    explorations: i64,
}

/// HTTP client for an external mechanism classifier.
///
/// POSTs `{seeker_post, response}` as JSON to `endpoint` and expects
/// `{emotional_reactions, interpretations, explorations}` back.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    agent: ureq::Agent,
    endpoint: String,
}

impl RemoteScorer {
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

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

fn level(name: &str, v: i64) -> Result<u8, EmpathyError> {
    u8::try_from(v)
        .ok()
        .filter(|l| *l <= 2)
        .ok_or_else(|| EmpathyError::ContractViolation(format!("{name} = {v} outside 0..=2")))
}

impl Scorer for RemoteScorer {
    fn score(&self, ctx: &ScoringContext) -> Result<EmpathyScore, EmpathyError> {
        let request = ScoreRequest {
            seeker_post: &ctx.seeker_post,
            response: &ctx.response,
        };
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(&request)
            .map_err(|e| EmpathyError::BackendUnavailable(e.to_string()))?;
        let body: ScoreResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| EmpathyError::ContractViolation(format!("malformed body: {e}")))?;
        EmpathyScore::new(
            level("emotional_reactions", body.emotional_reactions)?,
            level("interpretations", body.interpretations)?,
            level("explorations", body.explorations)?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum ScoreSource {
    Rule,
    Remote,
    /// The primary backend failed and the rule scorer answered instead.
    Fallback { reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scored {
    pub score: EmpathyScore,
    pub source: ScoreSource,
}

/// Primary backend with the rule scorer behind it. Any primary failure is
/// answered by the rule scorer and reported through `ScoreSource::Fallback`
/// so the caller can log it.
pub struct FallbackScorer {
    primary: Option<Box<dyn Scorer>>,
    rules: RuleScorer,
}

impl FallbackScorer {
    pub fn rules_only(rules: RuleScorer) -> Self {
        Self {
            primary: None,
            rules,
        }
    }

    pub fn with_primary(primary: Box<dyn Scorer>, rules: RuleScorer) -> Self {
        Self {
            primary: Some(primary),
            rules,
        }
    }

    pub fn rules(&self) -> &RuleScorer {
        &self.rules
    }

    pub fn score(&self, ctx: &ScoringContext) -> Scored {
        let Some(primary) = &self.primary else {
            return Scored {
                score: self.rules.score_texts(&ctx.seeker_post, &ctx.response),
                source: ScoreSource::Rule,
            };
        };
        match primary.score(ctx) {
            Ok(score) => Scored {
                score,
                source: ScoreSource::Remote,
            },
            Err(err) => {
                tracing::warn!(%err, "primary scorer failed, using rule backend");
                Scored {
                    score: self.rules.score_texts(&ctx.seeker_post, &ctx.response),
                    source: ScoreSource::Fallback {
                        reason: err.to_string(),
                    },
                }
            }
        }
    }
}

impl std::fmt::Debug for FallbackScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FallbackScorer")
            .field("has_primary", &self.primary.is_some())
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::thread;

    /// Serves `body` as a JSON response to one request, or never answers when
    /// `body` is None.
    fn one_shot_server(body: Option<&'static str>) -> (String, thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/score", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = vec![0u8; 8192];
            let mut request = Vec::new();
            loop {
                let n = stream.read(&mut buf).unwrap();
                request.extend_from_slice(&buf[..n]);
                let text = String::from_utf8_lossy(&request);
                if let Some(split) = text.find("\r\n\r\n") {
                    let len = text[..split].lines().find_map(|l| {
                        l.to_lowercase()
                            .strip_prefix("content-length:")
                            .map(|v| v.trim().parse::<usize>().unwrap())
                    });
                    let complete = match len {
                        Some(len) => request.len() >= split + 4 + len,
                        None => text.ends_with("0\r\n\r\n"),
                    };
                    if complete || n == 0 {
                        break;
                    }
                }
            }
            match body {
                Some(body) => {
                    let resp = format!(
                        "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                        body.len(),
                        body
                    );
                    stream.write_all(resp.as_bytes()).unwrap();
                }
                None => thread::sleep(Duration::from_millis(800)),
            }
            String::from_utf8_lossy(&request).into_owned()
        });
        (url, handle)
    }

    fn ctx() -> ScoringContext {
        ScoringContext::new("I feel alone at school.", "That sounds hard.").unwrap()
    }

    #[test]
    fn accepts_bound_scores_and_sends_wire_fields() {
        let (url, server) = one_shot_server(Some(
            r#"{"emotional_reactions":2,"interpretations":2,"explorations":2}"#,
        ));
        let score = RemoteScorer::new(url, Duration::from_secs(5)).score(&ctx()).unwrap();
        assert_eq!(score.total(), 6);
        let request = server.join().unwrap();
        let body: serde_json::Value =
            serde_json::from_str(&request[request.find("\r\n\r\n").unwrap() + 4..]).unwrap();
        assert_eq!(
            body,
            serde_json::json!({"seeker_post": "I feel alone at school.", "response": "That sounds hard."})
        );
    }

    #[test]
    fn rejects_out_of_range_subscore() {
        let (url, server) = one_shot_server(Some(
            r#"{"emotional_reactions":3,"interpretations":0,"explorations":0}"#,
        ));
        let err = RemoteScorer::new(url, Duration::from_secs(5)).score(&ctx()).unwrap_err();
        assert!(matches!(err, EmpathyError::ContractViolation(_)));
        server.join().unwrap();
    }

    #[test]
    fn timeout_falls_back_to_rules() {
        let (url, server) = one_shot_server(None);
        let remote = RemoteScorer::new(url, Duration::from_millis(200));
        let scorer = FallbackScorer::with_primary(Box::new(remote), RuleScorer::default());
        let scored = scorer.score(&ctx());
        assert!(matches!(scored.source, ScoreSource::Fallback { .. }));
        assert_eq!(
            scored.score,
            RuleScorer::default().score_texts("I feel alone at school.", "That sounds hard.")
        );
        server.join().unwrap();
    }

    #[test]
    fn unreachable_backend_is_unavailable() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/score", listener.local_addr().unwrap());
        drop(listener);
        let err = RemoteScorer::new(url, Duration::from_secs(2)).score(&ctx()).unwrap_err();
        assert!(matches!(err, EmpathyError::BackendUnavailable(_)));
    }
}
