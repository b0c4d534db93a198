//! Bundles a corpus, its index and a scorer behind one search surface.

use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analyzer::Analyzer;
use crate::corpus::{ranked_entries, FaqCorpus, FaqEntry, RunEntry};
use crate::fusion::{search_fused, FusedSearch, FusionParams, SearchError};
use crate::lexical::{Bm25Params, LexicalError, LexicalHit, LexicalIndex, NormalizationParams};
use crate::relevance::{search_relevance, RelevanceHit, RelevanceScorer, ScorerError};

/// Which ranking to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lexical,
    Relevance,
    Fused,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Lexical => "lexical",
            Method::Relevance => "relevance",
            Method::Fused => "fused",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lexical" => Ok(Method::Lexical),
            "relevance" => Ok(Method::Relevance),
            "fused" => Ok(Method::Fused),
            other => Err(format!("unknown method {other:?}")),
        }
    }
}

/// Run lines for one query, plus whether the relevance leg was skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRun {
    pub entries: Vec<RunEntry>,
    pub degraded: bool,
}

pub struct FaqEngine {
    corpus: Arc<FaqCorpus>,
    analyzer: Arc<dyn Analyzer>,
    index: LexicalIndex,
    scorer: Arc<dyn RelevanceScorer>,
    fusion: FusionParams,
    norm: NormalizationParams,
}

impl FaqEngine {
    pub fn build(
        corpus: Arc<FaqCorpus>,
        analyzer: Arc<dyn Analyzer>,
        scorer: Arc<dyn RelevanceScorer>,
        bm25: Bm25Params,
        norm: NormalizationParams,
        fusion: FusionParams,
    ) -> Result<Self, SearchError> {
        let index = LexicalIndex::build(&corpus, analyzer.as_ref(), bm25)?;
        Self::with_index(corpus, analyzer, scorer, index, norm, fusion)
    }

    pub fn with_index(
        corpus: Arc<FaqCorpus>,
        analyzer: Arc<dyn Analyzer>,
        scorer: Arc<dyn RelevanceScorer>,
        index: LexicalIndex,
        norm: NormalizationParams,
        fusion: FusionParams,
    ) -> Result<Self, SearchError> {
        norm.validate()?;
        fusion.validate()?;
        index.check_compatible(&corpus, analyzer.as_ref())?;
        Ok(Self {
            corpus,
            analyzer,
            index,
            scorer,
            fusion,
            norm,
        })
    }

    pub fn corpus(&self) -> &FaqCorpus {
        &self.corpus
    }

    pub fn index(&self) -> &LexicalIndex {
        &self.index
    }

    pub fn scorer(&self) -> &dyn RelevanceScorer {
        self.scorer.as_ref()
    }

    pub fn fusion_params(&self) -> &FusionParams {
        &self.fusion
    }

    pub fn entry(&self, id: &str) -> Option<&FaqEntry> {
        self.corpus.get(id)
    }

    pub fn lexical(&self, query: &str, k: usize) -> Result<Vec<LexicalHit>, LexicalError> {
        Ok(self.index.search(&self.analyzer.analyze(query)?, k, self.norm))
    }

    pub fn relevance(&self, query: &str, k: usize) -> Result<Vec<RelevanceHit>, ScorerError> {
        search_relevance(self.scorer.as_ref(), query, &self.corpus, k)
    }

    /// Fused ranking truncated to `top_k`.
    pub fn search(&self, query: &str, top_k: usize) -> Result<FusedSearch, SearchError> {
        let mut result = search_fused(
            &self.index,
            self.analyzer.as_ref(),
            self.scorer.as_ref(),
            query,
            &self.corpus,
            &self.fusion,
            self.norm,
        )?;
        result.candidates.truncate(top_k);
        Ok(result)
    }

    pub fn run_query(&self, method: Method, qid: &str, query: &str, depth: usize) -> Result<QueryRun, SearchError> {
        let tag = method.tag();
        Ok(match method {
            Method::Lexical => {
                let hits = self.lexical(query, depth)?;
                QueryRun {
                    entries: ranked_entries(qid, tag, hits.iter().map(|h| (h.faq_id.as_str(), h.similarity))),
                    degraded: false,
                }
            }
            Method::Relevance => {
                let hits = self.relevance(query, depth)?;
                QueryRun {
                    entries: ranked_entries(qid, tag, hits.iter().map(|h| (h.faq_id.as_str(), h.relevance))),
                    degraded: false,
                }
            }
            Method::Fused => {
                let found = self.search(query, depth)?;
                let t = self.fusion.t;
                QueryRun {
                    entries: ranked_entries(
                        qid,
                        tag,
                        found.candidates.iter().map(|c| (c.faq_id.as_str(), c.ranking_score(t))),
                    ),
                    degraded: found.degraded,
                }
            }
        })
    }
}
