//! Query-answer relevance: the scorer interface, a deterministic overlap
//! baseline, a client for a remote model server, and training-pair
//! generation for that server.

mod remote;
mod training;

use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::analyzer::{AnalyzeError, Analyzer};
use crate::corpus::FaqCorpus;

pub use remote::{RemoteScorer, RemoteScorerConfig};
pub use training::{
    generate_sampled_pairs, generate_training_pairs, read_training_examples, split_paraphrase_triples,
    write_training_examples, NegativeScope, ParaphraseTriple, RelevanceExample, SampledExample, TrainingError,
    DEFAULT_NEG_RATIO,
};

#[derive(Debug, Error)]
pub enum ScorerError {
    /// The scorer could not be reached (connection refused, timeout, 5xx).
    #[error("transport error: {0}")]
    Transport(String),
    /// The scorer answered but the answer violates the protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
}

impl ScorerError {
    pub fn is_transport(&self) -> bool {
        matches!(self, ScorerError::Transport(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ScorePair<'a> {
    pub query: &'a str,
    pub answer: &'a str,
}

/// Produces `Relevance(q, A)` in `[0, 1]` for batches of pairs.
///
/// Output order matches input order. Implementations must tolerate
/// concurrent calls.
pub trait RelevanceScorer: Send + Sync {
    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScorerError>;

    fn name(&self) -> &str;

    fn is_reachable(&self) -> bool {
        true
    }
}

/// Checks the length and range contract of a scorer response.
pub fn check_scores(expected_len: usize, scores: &[f64]) -> Result<(), ScorerError> {
    if scores.len() != expected_len {
        return Err(ScorerError::Protocol(format!(
            "expected {expected_len} scores, got {}",
            scores.len()
        )));
    }
    if let Some((i, s)) = scores.iter().enumerate().find(|(_, s)| !(0.0..=1.0).contains(*s)) {
        return Err(ScorerError::Protocol(format!(
            "score {s} at position {i} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Fraction of the query's distinct content words that also occur in the
/// answer.
pub struct OverlapScorer {
    analyzer: Arc<dyn Analyzer>,
}

impl OverlapScorer {
    pub fn new(analyzer: Arc<dyn Analyzer>) -> Self {
        Self { analyzer }
    }

    pub fn score_pair(&self, query: &str, answer: &str) -> Result<f64, ScorerError> {
        let query_terms = self.analyzer.analyze(query)?.terms;
        let query_set: HashSet<&str> = query_terms.iter().map(String::as_str).collect();
        if query_set.is_empty() {
            return Ok(0.0);
        }
        let answer_terms = self.analyzer.analyze(answer)?.terms;
        let answer_set: HashSet<&str> = answer_terms.iter().map(String::as_str).collect();
        let shared = query_set.intersection(&answer_set).count();
        Ok((shared as f64 / query_set.len() as f64).clamp(0.0, 1.0))
    }
}

impl RelevanceScorer for OverlapScorer {
    fn score_batch(&self, pairs: &[ScorePair<'_>]) -> Result<Vec<f64>, ScorerError> {
        pairs.iter().map(|p| self.score_pair(p.query, p.answer)).collect()
    }

    fn name(&self) -> &str {
        "overlap"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelevanceHit {
    pub faq_id: String,
    pub relevance: f64,
}

/// Scores the query against every answer of `corpus` and keeps the top `k`,
/// ties broken by ascending id.
pub fn search_relevance(
    scorer: &dyn RelevanceScorer,
    query: &str,
    corpus: &FaqCorpus,
    k: usize,
) -> Result<Vec<RelevanceHit>, ScorerError> {
    let pairs: Vec<ScorePair<'_>> = corpus
        .entries()
        .iter()
        .map(|e| ScorePair {
            query,
            answer: &e.answer,
        })
        .collect();
    let scores = scorer.score_batch(&pairs)?;
    check_scores(pairs.len(), &scores)?;
    let mut hits: Vec<RelevanceHit> = corpus
        .entries()
        .iter()
        .zip(scores)
        .map(|(e, relevance)| RelevanceHit {
            faq_id: e.id.clone(),
            relevance,
        })
        .collect();
    hits.sort_by(|a, b| {
        b.relevance
            .total_cmp(&a.relevance)
            .then_with(|| a.faq_id.cmp(&b.faq_id))
    });
    hits.truncate(k);
    Ok(hits)
}
