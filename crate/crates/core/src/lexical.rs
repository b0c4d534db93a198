//! Okapi BM25 over FAQ questions and the query-length normalization that
//! turns a raw BM25 score into `Similarity(q, Q)`.
//!
//! ```text
//! idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
//! bm25(q, d)  = Σ_t idf(t) · tf·(k+1) / (tf + k·(1 - b + b·dl/avgdl))
//! similarity  = bm25 / (content_words·k1 + dependency_relations·k2)
//! ```
//!
//! Each distinct query term contributes once. Only questions are indexed.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analyzer::{AnalyzeError, AnalyzedText, Analyzer};
use crate::corpus::FaqCorpus;

pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LexicalError {
    #[error("cannot index an empty corpus")]
    EmptyCorpus,
    #[error("unknown document id {0:?}")]
    UnknownDoc(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Analyze(#[from] AnalyzeError),
    #[error("index snapshot: {0}")]
    Snapshot(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bm25Params {
    pub k: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), LexicalError> {
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(LexicalError::InvalidParams(format!(
                "bm25 k must be >= 0, got {}",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(LexicalError::InvalidParams(format!(
                "bm25 b must be in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

/// Coefficients of the query-length divisor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizationParams {
    /// Weight per content word.
    pub k1: f64,
    /// Weight per dependency relation.
    pub k2: f64,
}

impl Default for NormalizationParams {
    fn default() -> Self {
        Self { k1: 4.0, k2: 2.0 }
    }
}

impl NormalizationParams {
    pub fn validate(&self) -> Result<(), LexicalError> {
        if !(self.k1.is_finite() && self.k1 > 0.0) {
            return Err(LexicalError::InvalidParams(format!("k1 must be > 0, got {}", self.k1)));
        }
        if !(self.k2.is_finite() && self.k2 >= 0.0) {
            return Err(LexicalError::InvalidParams(format!("k2 must be >= 0, got {}", self.k2)));
        }
        Ok(())
    }

    pub fn divisor(&self, query: &AnalyzedText) -> f64 {
        query.content_word_count as f64 * self.k1 + query.dependency_relation_count as f64 * self.k2
    }

    /// Normalized similarity; zero when the divisor is not positive.
    pub fn normalize(&self, raw: f64, query: &AnalyzedText) -> f64 {
        let divisor = self.divisor(query);
        if divisor > 0.0 {
            raw / divisor
        } else {
            0.0
        }
    }
}

pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

pub fn term_weight(tf: f64, doc_len: f64, avg_doc_len: f64, params: Bm25Params) -> f64 {
    let len_ratio = if avg_doc_len > 0.0 { doc_len / avg_doc_len } else { 1.0 };
    tf * (params.k + 1.0) / (tf + params.k * (1.0 - params.b + params.b * len_ratio))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Immutable inverted index over FAQ questions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalIndex {
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    avg_doc_length: f64,
    params: Bm25Params,
    analyzer_fingerprint: String,
    #[serde(skip)]
    positions: HashMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexicalHit {
    pub faq_id: String,
    pub similarity: f64,
    pub raw_score: f64,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    format_version: u32,
    index: LexicalIndex,
}

impl LexicalIndex {
    pub fn build(corpus: &FaqCorpus, analyzer: &dyn Analyzer, params: Bm25Params) -> Result<Self, LexicalError> {
        params.validate()?;
        if corpus.is_empty() {
            return Err(LexicalError::EmptyCorpus);
        }
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (doc, entry) in corpus.entries().iter().enumerate() {
            let analyzed = analyzer.analyze(&entry.question)?;
            let mut tfs: BTreeMap<&str, u32> = BTreeMap::new();
            for term in &analyzed.terms {
                *tfs.entry(term.as_str()).or_default() += 1;
            }
            for (term, tf) in tfs {
                postings
                    .entry(term.to_string())
                    .or_default()
                    .push(Posting { doc: doc as u32, tf });
            }
            doc_ids.push(entry.id.clone());
            doc_lengths.push(analyzed.terms.len() as u32);
        }
        let total: u64 = doc_lengths.iter().map(|&l| u64::from(l)).sum();
        let avg_doc_length = total as f64 / doc_lengths.len() as f64;
        let mut index = Self {
            doc_ids,
            doc_lengths,
            postings,
            avg_doc_length,
            params,
            analyzer_fingerprint: analyzer.fingerprint(),
            positions: HashMap::new(),
        };
        index.rebuild_positions();
        Ok(index)
    }

    fn rebuild_positions(&mut self) {
        self.positions = self
            .doc_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i as u32))
            .collect();
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn analyzer_fingerprint(&self) -> &str {
        &self.analyzer_fingerprint
    }

    pub fn doc_length(&self, doc_id: &str) -> Option<u32> {
        self.positions.get(doc_id).map(|&d| self.doc_lengths[d as usize])
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    fn unique_terms(terms: &[String]) -> Vec<&str> {
        let mut seen = HashSet::new();
        terms.iter().map(String::as_str).filter(|t| seen.insert(*t)).collect()
    }

    fn contribution(&self, term_df: usize, posting: Posting) -> f64 {
        idf(self.doc_count(), term_df)
            * term_weight(
                f64::from(posting.tf),
                f64::from(self.doc_lengths[posting.doc as usize]),
                self.avg_doc_length,
                self.params,
            )
    }

    /// Unnormalized BM25 score of one document.
    pub fn raw_score(&self, query_terms: &[String], doc_id: &str) -> Result<f64, LexicalError> {
        let doc = *self
            .positions
            .get(doc_id)
            .ok_or_else(|| LexicalError::UnknownDoc(doc_id.to_string()))?;
        let mut score = 0.0;
        for term in Self::unique_terms(query_terms) {
            let list = self.postings(term);
            if let Ok(i) = list.binary_search_by_key(&doc, |p| p.doc) {
                score += self.contribution(list.len(), list[i]);
            }
        }
        Ok(score)
    }

    pub fn similarity(
        &self,
        query: &AnalyzedText,
        doc_id: &str,
        norm: NormalizationParams,
    ) -> Result<f64, LexicalError> {
        Ok(norm.normalize(self.raw_score(&query.terms, doc_id)?, query))
    }

    /// Top-`k` documents with a positive score, ordered by score descending
    /// then id ascending.
    pub fn search(&self, query: &AnalyzedText, k: usize, norm: NormalizationParams) -> Vec<LexicalHit> {
        let mut acc = vec![0.0_f64; self.doc_count()];
        let mut touched = Vec::new();
        for term in Self::unique_terms(&query.terms) {
            let list = self.postings(term);
            for &posting in list {
                let slot = &mut acc[posting.doc as usize];
                if *slot == 0.0 {
                    touched.push(posting.doc);
                }
                *slot += self.contribution(list.len(), posting);
            }
        }
        let mut hits: Vec<(u32, f64)> = touched
            .into_iter()
            .map(|d| (d, acc[d as usize]))
            .filter(|&(_, s)| s > 0.0)
            .collect();
        // ranking uses the raw score so normalization cannot reorder anything
        hits.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.doc_ids[a.0 as usize].cmp(&self.doc_ids[b.0 as usize]))
        });
        hits.truncate(k);
        hits.into_iter()
            .map(|(d, raw)| LexicalHit {
                faq_id: self.doc_ids[d as usize].clone(),
                similarity: norm.normalize(raw, query),
                raw_score: raw,
            })
            .collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexicalError> {
        let path = path.as_ref();
        let io = |source| LexicalError::Io {
            path: path.display().to_string(),
            source,
        };
        let file = BufWriter::new(File::create(path).map_err(io)?);
        let snapshot = Snapshot {
            format_version: SNAPSHOT_FORMAT_VERSION,
            index: self.clone(),
        };
        serde_json::to_writer(file, &snapshot).map_err(|e| LexicalError::Snapshot(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexicalError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| LexicalError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let value: serde_json::Value =
            serde_json::from_reader(BufReader::new(file)).map_err(|e| LexicalError::Snapshot(e.to_string()))?;
        let version = value.get("format_version").and_then(|v| v.as_u64());
        if version != Some(u64::from(SNAPSHOT_FORMAT_VERSION)) {
            return Err(LexicalError::Snapshot(format!(
                "unsupported format version {version:?}, expected {SNAPSHOT_FORMAT_VERSION}"
            )));
        }
        let snapshot: Snapshot = serde_json::from_value(value).map_err(|e| LexicalError::Snapshot(e.to_string()))?;
        let mut index = snapshot.index;
        index.rebuild_positions();
        if index.positions.len() != index.doc_ids.len() || index.doc_lengths.len() != index.doc_ids.len() {
            return Err(LexicalError::Snapshot("inconsistent document tables".into()));
        }
        Ok(index)
    }

    /// Checks that a loaded snapshot was built from `corpus` with `analyzer`.
    pub fn check_compatible(&self, corpus: &FaqCorpus, analyzer: &dyn Analyzer) -> Result<(), LexicalError> {
        if self.analyzer_fingerprint != analyzer.fingerprint() {
            return Err(LexicalError::Snapshot(format!(
                "analyzer fingerprint {} does not match {}",
                self.analyzer_fingerprint,
                analyzer.fingerprint()
            )));
        }
        let same_docs =
            corpus.len() == self.doc_count() && corpus.entries().iter().zip(&self.doc_ids).all(|(e, id)| &e.id == id);
        if !same_docs {
            return Err(LexicalError::Snapshot(
                "snapshot documents do not match the corpus".into(),
            ));
        }
        Ok(())
    }
}

pub fn build_index(
    corpus: &FaqCorpus,
    analyzer: &dyn Analyzer,
    params: Bm25Params,
) -> Result<LexicalIndex, LexicalError> {
    LexicalIndex::build(corpus, analyzer, params)
}

pub fn similarity(
    index: &LexicalIndex,
    analyzer: &dyn Analyzer,
    query: &str,
    doc_id: &str,
    norm: NormalizationParams,
) -> Result<f64, LexicalError> {
    index.similarity(&analyzer.analyze(query)?, doc_id, norm)
}

pub fn search_lexical(
    index: &LexicalIndex,
    analyzer: &dyn Analyzer,
    query: &str,
    k: usize,
    norm: NormalizationParams,
) -> Result<Vec<LexicalHit>, LexicalError> {
    Ok(index.search(&analyzer.analyze(query)?, k, norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analyzer::DefaultAnalyzer;
    use crate::corpus::FaqEntry;

    fn corpus(questions: &[&str]) -> FaqCorpus {
        FaqCorpus::from_entries(
            questions
                .iter()
                .enumerate()
                .map(|(i, q)| FaqEntry::new(format!("d{i}"), *q, "answer", "s"))
                .collect(),
        )
        .unwrap()
    }

    fn terms(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn shared_term_postings() {
        let an = DefaultAnalyzer::english();
        let idx = build_index(&corpus(&["garbage pickup", "garbage bins"]), &an, Bm25Params::default()).unwrap();
        assert_eq!(idx.postings("garbage").len(), 2);
        assert_eq!(idx.postings("bins").len(), 1);
        assert_eq!(idx.doc_count(), 2);
    }

    #[test]
    fn rebuild_is_identical() {
        let an = DefaultAnalyzer::english();
        let c = corpus(&["renew passport", "passport photo size", "tax office hours"]);
        let a = build_index(&c, &an, Bm25Params::default()).unwrap();
        let b = build_index(&c, &an, Bm25Params::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn hand_evaluated_score() {
        // N=2, df=1, tf=1, dl=avgdl: idf = ln(1 + 1.5/1.5) = ln 2 and the tf part
        // is 2.2 / (1 + 1.2) = 1, so the score is ln 2.
        let an = DefaultAnalyzer::english();
        let idx = build_index(&corpus(&["alpha", "beta"]), &an, Bm25Params::default()).unwrap();
        let s = idx.raw_score(&terms(&["alpha"]), "d0").unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-12, "{s}");

        // dl=1, avgdl=1.5: tf part = 2.2 / (1 + 1.2·(0.25 + 0.75/1.5)) = 2.2/1.9
        let idx = build_index(&corpus(&["alpha", "beta gamma"]), &an, Bm25Params::default()).unwrap();
        let s = idx.raw_score(&terms(&["alpha"]), "d0").unwrap();
        assert!((s - 2f64.ln() * (2.2 / 1.9)).abs() < 1e-12, "{s}");
    }

    #[test]
    fn no_overlap_and_unknown_doc() {
        let an = DefaultAnalyzer::english();
        let idx = build_index(&corpus(&["alpha", "beta"]), &an, Bm25Params::default()).unwrap();
        assert_eq!(idx.raw_score(&terms(&["zeta"]), "d1").unwrap(), 0.0);
        assert!(matches!(
            idx.raw_score(&terms(&["alpha"]), "nope"),
            Err(LexicalError::UnknownDoc(_))
        ));
    }

    #[test]
    fn tf_saturates() {
        let an = DefaultAnalyzer::english();
        let p = Bm25Params::default();
        // fixed doc length so only tf varies
        let once = term_weight(1.0, 4.0, 4.0, p);
        let twice = term_weight(2.0, 4.0, 4.0, p);
        let thrice = term_weight(3.0, 4.0, 4.0, p);
        assert!(twice > once && twice < 2.0 * once);
        assert!(thrice - twice < twice - once);
        let idx = build_index(&corpus(&["fee fee other", "fee other other", "x y z"]), &an, p).unwrap();
        let q = terms(&["fee"]);
        assert!(idx.raw_score(&q, "d0").unwrap() > idx.raw_score(&q, "d1").unwrap());
    }

    #[test]
    fn normalization_divisor() {
        let an = DefaultAnalyzer::english();
        let norm = NormalizationParams::default();
        let three = an.analyze_text("renew driver license");
        assert_eq!(norm.divisor(&three), 16.0);
        let one = an.analyze_text("license");
        assert_eq!(norm.divisor(&one), 4.0);
        let idx = build_index(&corpus(&["driver license renew", "tax"]), &an, Bm25Params::default()).unwrap();
        let raw = idx.raw_score(&three.terms, "d0").unwrap();
        assert_eq!(idx.similarity(&three, "d0", norm).unwrap(), raw / 16.0);
        let stop = an.analyze_text("where should i");
        assert_eq!(idx.similarity(&stop, "d0", norm).unwrap(), 0.0);
        assert!(idx.search(&stop, 5, norm).is_empty());
    }

    #[test]
    fn search_truncation_and_exclusion() {
        let an = DefaultAnalyzer::english();
        let norm = NormalizationParams::default();
        let idx = build_index(&corpus(&["alpha beta", "gamma", "delta"]), &an, Bm25Params::default()).unwrap();
        let hits = search_lexical(&idx, &an, "alpha", 1, norm).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].faq_id, "d0");
        assert!(search_lexical(&idx, &an, "omega", 3, norm).unwrap().is_empty());
        let hits = search_lexical(&idx, &an, "alpha gamma", 10, norm).unwrap();
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn ties_break_by_id() {
        let an = DefaultAnalyzer::english();
        let idx = build_index(
            &corpus(&["identical words", "identical words"]),
            &an,
            Bm25Params::default(),
        )
        .unwrap();
        let hits = search_lexical(&idx, &an, "identical", 2, NormalizationParams::default()).unwrap();
        assert_eq!(hits[0].faq_id, "d0");
        assert_eq!(hits[1].faq_id, "d1");
        assert_eq!(hits[0].similarity, hits[1].similarity);
    }

    #[test]
    fn snapshot_round_trip() {
        let an = DefaultAnalyzer::english();
        let c = corpus(&["renew passport", "passport photo size"]);
        let idx = build_index(&c, &an, Bm25Params::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.json");
        idx.save(&path).unwrap();
        let loaded = LexicalIndex::load(&path).unwrap();
        assert_eq!(loaded, idx);
        loaded.check_compatible(&c, &an).unwrap();
        let other = DefaultAnalyzer::from_stopwords(["x"]);
        assert!(loaded.check_compatible(&c, &other).is_err());

        std::fs::write(&path, r#"{"format_version": 99, "index": {}}"#).unwrap();
        assert!(matches!(LexicalIndex::load(&path), Err(LexicalError::Snapshot(_))));
    }

    #[test]
    fn param_validation() {
        assert!(Bm25Params { k: -1.0, b: 0.5 }.validate().is_err());
        assert!(Bm25Params { k: 1.0, b: 1.5 }.validate().is_err());
        assert!(NormalizationParams { k1: 0.0, k2: 2.0 }.validate().is_err());
        assert!(NormalizationParams { k1: 4.0, k2: -1.0 }.validate().is_err());
    }
}
