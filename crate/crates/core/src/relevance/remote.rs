//! Blocking client for the `/v1/score` protocol of a relevance model server.
//!
//! ```text
//! POST /v1/score  {"pairs": [{"query": "...", "answer": "..."}]}
//!          200 -> {"scores": [0.93, ...]}
//! ```

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tracing::warn;

use super::{check_scores, RelevanceScorer, ScorePair, ScorerError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteScorerConfig {
    /// Base URL of the model server, e.g. `http://127.0.0.1:8500`.
    pub url: String,
    pub timeout_ms: u64,
    /// Pairs per request; larger batches are split.
    pub max_batch: usize,
    /// Total attempts per request, including the first.
    pub max_attempts: u32,
    /// Delay before the first retry; doubled for each further retry.
    pub backoff_ms: u64,
    pub max_in_flight: usize,
}

impl Default for RemoteScorerConfig {
    fn default() -> Self {
        Self {
            url: "http://127.0.0.1:8500".into(),
            timeout_ms: 5_000,
            max_batch: 256,
            max_attempts: 3,
            backoff_ms: 100,
            max_in_flight: 4,
        }
    }
}

impl RemoteScorerConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.url.starts_with("http://") || self.url.starts_with("https://")) {
            return Err(format!("scorer url must be http(s), got {:?}", self.url));
        }
        if self.timeout_ms == 0 || self.max_batch == 0 || self.max_attempts == 0 || self.max_in_flight == 0 {
            return Err("scorer timeout_ms, max_batch, max_attempts and max_in_flight must be positive".into());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: &'a [ScorePair<'a>],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    active: Mutex<usize>,
    freed: Condvar,
    limit: usize,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

pub struct RemoteScorer {
    config: RemoteScorerConfig,
    client: reqwest::blocking::Client,
    score_url: String,
    health_url: String,
    in_flight: InFlight,
}

enum Attempt {
    Retry(ScorerError),
    Fail(ScorerError),
}

impl RemoteScorer {
    /// Builds the client. Must not be called from inside an async runtime.
    pub fn new(config: RemoteScorerConfig) -> Result<Self, ScorerError> {
        config.validate().map_err(ScorerError::Protocol)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| ScorerError::Transport(e.to_string()))?;
        let base = config.url.trim_end_matches('/');
        Ok(Self {
            score_url: format!("{base}/v1/score"),
            health_url: format!("{base}/health"),
            in_flight: InFlight {
                active: Mutex::new(0),
                freed: Condvar::new(),
                limit: config.max_in_flight,
            },
            client,
            config,
        })
    }

    pub fn config(&self) -> &RemoteScorerConfig {
        &self.config
    }

    fn attempt(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, Attempt> {
        let response = self
            .client
            .post(&self.score_url)
            .json(&ScoreRequest { pairs })
            .send()
            .map_err(|e| Attempt::Retry(ScorerError::Transport(e.to_string())))?;
        let status = response.status();
        if status.is_server_error() {
            return Err(Attempt::Retry(ScorerError::Transport(format!(
                "server returned {status}"
            ))));
        }
        if status != reqwest::StatusCode::OK {
            return Err(Attempt::Fail(ScorerError::Protocol(format!(
                "server returned {status}"
            ))));
        }
        let body: ScoreResponse = response
            .json()
            .map_err(|e| Attempt::Fail(ScorerError::Protocol(format!("bad response body: {e}"))))?;
        check_scores(pairs.len(), &body.scores).map_err(Attempt::Fail)?;
        Ok(body.scores)
    }

    fn score_chunk(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScorerError> {
        let _permit = self.in_flight.acquire();
        let mut delay = Duration::from_millis(self.config.backoff_ms);
        let mut attempt = 1;
        loop {
            match self.attempt(pairs) {
                Ok(scores) => return Ok(scores),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(e)) if attempt >= self.config.max_attempts => return Err(e),
                Err(Attempt::Retry(e)) => {
                    warn!(attempt, error = %e, "score request failed, retrying");
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                    attempt += 1;
                }
            }
        }
    }
}

impl RelevanceScorer for RemoteScorer {
    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScorerError> {
        let mut scores = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.config.max_batch) {
            scores.extend(self.score_chunk(chunk)?);
        }
        Ok(scores)
    }

    fn name(&self) -> &str {
        "remote"
    }

    fn is_reachable(&self) -> bool {
        self.client
            .get(&self.health_url)
            .send()
            .map(|r| r.status().is_success())
            .unwrap_or(false)
    }
}
