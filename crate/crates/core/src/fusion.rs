//! Combines question similarity and answer relevance into one ranking.
//!
//! The candidate pool is the top `pool_size` of each leg. Candidates whose
//! normalized similarity exceeds `alpha` form the high-lexical group and are
//! ranked first, by similarity. Everything else is ranked after them by
//! `similarity * t + relevance`. Ties go to the smaller id.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::Analyzer;
use crate::corpus::FaqCorpus;
use crate::lexical::{LexicalError, LexicalIndex, NormalizationParams};
use crate::relevance::{search_relevance, RelevanceScorer, ScorerError};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("duplicate id {id:?} in {leg} results")]
    DuplicateId { id: String, leg: &'static str },
    #[error("invalid fusion parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolMode {
    /// Top `pool_size` of both legs.
    #[default]
    Union,
    /// Top `pool_size` of the relevance leg only.
    #[serde(alias = "bert-only")]
    RelevanceOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionParams {
    /// Similarity threshold for the high-lexical group.
    pub alpha: f64,
    /// Weight of similarity in the fused score.
    pub t: f64,
    pub pool_size: usize,
    #[serde(default)]
    pub pool_mode: PoolMode,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            t: 10.0,
            pool_size: 10,
            pool_mode: PoolMode::Union,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<(), FusionError> {
        if self.pool_size == 0 {
            return Err(FusionError::InvalidParams("pool_size must be at least 1".into()));
        }
        if !(self.t.is_finite() && self.t >= 0.0) {
            return Err(FusionError::InvalidParams(format!(
                "t must be finite and >= 0, got {}",
                self.t
            )));
        }
        if self.alpha.is_nan() {
            return Err(FusionError::InvalidParams("alpha is NaN".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Group {
    HighLexical,
    Fused,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedCandidate {
    pub faq_id: String,
    pub similarity: f64,
    pub relevance: f64,
    pub group: Group,
    pub fused_score: f64,
}

impl FusedCandidate {
    /// A score that is non-increasing along a fused ranking, for run files.
    ///
    /// High-lexical members get `similarity * t + 1`. Since their similarity
    /// exceeds every fused-group similarity and relevance is at most 1, this
    /// stays above every fused-group score while preserving similarity order.
    pub fn ranking_score(&self, t: f64) -> f64 {
        match self.group {
            Group::HighLexical => self.similarity * t + 1.0,
            Group::Fused => self.fused_score,
        }
    }
}

pub fn fused_score(similarity: f64, relevance: f64, t: f64) -> f64 {
    similarity * t + relevance
}

fn check_unique<S: AsRef<str>>(list: &[(S, f64)], leg: &'static str) -> Result<(), FusionError> {
    let mut seen = HashSet::with_capacity(list.len());
    for (id, _) in list {
        if !seen.insert(id.as_ref()) {
            return Err(FusionError::DuplicateId {
                id: id.as_ref().to_string(),
                leg,
            });
        }
    }
    Ok(())
}

fn order(a: &FusedCandidate, b: &FusedCandidate) -> Ordering {
    let group_rank = |g: Group| match g {
        Group::HighLexical => 0,
        Group::Fused => 1,
    };
    group_rank(a.group)
        .cmp(&group_rank(b.group))
        .then_with(|| match a.group {
            Group::HighLexical => b.similarity.total_cmp(&a.similarity),
            Group::Fused => b.fused_score.total_cmp(&a.fused_score),
        })
        .then_with(|| a.faq_id.cmp(&b.faq_id))
}

/// Fuses two descending result lists. Scores missing from a leg count as 0.
pub fn fuse<L, R>(
    lexical: &[(L, f64)],
    relevance: &[(R, f64)],
    params: &FusionParams,
) -> Result<Vec<FusedCandidate>, FusionError>
where
    L: AsRef<str>,
    R: AsRef<str>,
{
    params.validate()?;
    check_unique(lexical, "lexical")?;
    check_unique(relevance, "relevance")?;

    let sim: HashMap<&str, f64> = lexical.iter().map(|(id, s)| (id.as_ref(), *s)).collect();
    let rel: HashMap<&str, f64> = relevance.iter().map(|(id, s)| (id.as_ref(), *s)).collect();

    let mut pool: BTreeMap<&str, ()> = BTreeMap::new();
    for (id, _) in relevance.iter().take(params.pool_size) {
        pool.insert(id.as_ref(), ());
    }
    if params.pool_mode == PoolMode::Union {
        for (id, _) in lexical.iter().take(params.pool_size) {
            pool.insert(id.as_ref(), ());
        }
    }

    let mut out: Vec<FusedCandidate> = pool
        .into_keys()
        .map(|id| {
            let similarity = sim.get(id).copied().unwrap_or(0.0);
            let relevance = rel.get(id).copied().unwrap_or(0.0);
            FusedCandidate {
                faq_id: id.to_string(),
                similarity,
                relevance,
                group: if similarity > params.alpha {
                    Group::HighLexical
                } else {
                    Group::Fused
                },
                fused_score: fused_score(similarity, relevance, params.t),
            }
        })
        .collect();
    out.sort_by(order);
    Ok(out)
}

#[derive(Debug, Error)]
pub enum SearchError {
    #[error(transparent)]
    Lexical(#[from] LexicalError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedSearch {
    pub candidates: Vec<FusedCandidate>,
    /// Set when the relevance leg was unreachable and only lexical scores
    /// were used.
    pub degraded: bool,
}

/// Runs both legs concurrently and fuses them.
///
/// A transport failure of the relevance leg falls back to lexical-only
/// fusion and sets `degraded`; any other scorer error is returned.
pub fn search_fused(
    index: &LexicalIndex,
    analyzer: &dyn Analyzer,
    scorer: &dyn RelevanceScorer,
    query: &str,
    corpus: &FaqCorpus,
    params: &FusionParams,
    norm: NormalizationParams,
) -> Result<FusedSearch, SearchError> {
    params.validate()?;
    let lexical_k = match params.pool_mode {
        PoolMode::Union => params.pool_size,
        // the whole lexical list, so relevance-pool members get their real similarity
        PoolMode::RelevanceOnly => corpus.len(),
    };
    let (lexical, relevance) = std::thread::scope(|s| {
        let relevance = s.spawn(|| search_relevance(scorer, query, corpus, params.pool_size));
        let lexical = analyzer
            .analyze(query)
            .map_err(LexicalError::from)
            .map(|q| index.search(&q, lexical_k, norm));
        let relevance = relevance.join().expect("relevance leg panicked");
        (lexical, relevance)
    });
    let lexical: Vec<(String, f64)> = lexical?.into_iter().map(|h| (h.faq_id, h.similarity)).collect();
    let (relevance, degraded) = match relevance {
        Ok(hits) => (hits.into_iter().map(|h| (h.faq_id, h.relevance)).collect(), false),
        Err(e) if e.is_transport() => {
            tracing::warn!(error = %e, "relevance leg unavailable, serving lexical-only results");
            (Vec::new(), true)
        }
        Err(e) => return Err(e.into()),
    };
    let params = if degraded {
        // with no relevance results the pool must come from the lexical leg
        FusionParams {
            pool_mode: PoolMode::Union,
            ..*params
        }
    } else {
        *params
    };
    let candidates = fuse(&lexical, &relevance, &params)?;
    Ok(FusedSearch { candidates, degraded })
}
