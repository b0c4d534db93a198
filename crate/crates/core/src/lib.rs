//! Hybrid FAQ retrieval.
//!
//! A user query is matched against FAQ questions with BM25 (normalized by
//! query length) and against FAQ answers with a pluggable relevance scorer.
//! [`fusion::fuse`] merges the two: strong lexical matches first, the rest
//! by `similarity * t + relevance`.

pub mod analyzer;
pub mod corpus;
pub mod engine;
pub mod evalkit;
pub mod fusion;
pub mod lexical;
pub mod relevance;

pub use analyzer::{AnalyzedText, Analyzer, DefaultAnalyzer};
pub use corpus::{FaqCorpus, FaqEntry, Grade, Qrels, QueryRecord, RunEntry};
pub use engine::{FaqEngine, Method, QueryRun};
pub use evalkit::{EvalConfig, EvalReport};
pub use fusion::{FusedCandidate, FusedSearch, FusionParams, Group, PoolMode};
pub use lexical::{Bm25Params, LexicalHit, LexicalIndex, NormalizationParams};
pub use relevance::{OverlapScorer, RelevanceHit, RelevanceScorer, RemoteScorer, RemoteScorerConfig, ScorePair};
