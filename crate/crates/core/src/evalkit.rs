//! Ranking metrics over graded judgments, run evaluation, cross-validation
//! splits and the top-1 score bucket report.
//!
//! Binary metrics (AP, RR, P@k, SR@k) count a document as relevant when its
//! grade is in [`EvalConfig::relevant_grades`]. nDCG uses per-grade gains with
//! a `log2(rank + 1)` discount and an ideal ordering over every judged item.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Grade, Qrels, QueryRecord, RunEntry};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("run contains qid {0:?} which is not in the query set")]
    UnknownQuery(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot split {queries} queries into {folds} folds")]
    TooFewQueries { queries: usize, folds: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainMode {
    /// gain = level
    #[default]
    Linear,
    /// gain = 2^level - 1
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub relevant_grades: BTreeSet<Grade>,
    pub gains: BTreeMap<Grade, f64>,
    #[serde(default)]
    pub gain_mode: GainMode,
    pub precision_k: usize,
    pub success_ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            relevant_grades: [Grade::A, Grade::B, Grade::C].into_iter().collect(),
            gains: [(Grade::A, 3.0), (Grade::B, 2.0), (Grade::C, 1.0), (Grade::D, 0.0)]
                .into_iter()
                .collect(),
            gain_mode: GainMode::Linear,
            precision_k: 5,
            success_ks: vec![1, 5],
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if let Some((g, v)) = self.gains.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(EvalError::InvalidConfig(format!(
                "gain for {g} must be finite and >= 0, got {v}"
            )));
        }
        if self.precision_k == 0 || self.success_ks.contains(&0) {
            return Err(EvalError::InvalidConfig("cutoffs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_relevant(&self, qrels: &Qrels, id: &str) -> bool {
        qrels.get(id).is_some_and(|g| self.relevant_grades.contains(g))
    }

    pub fn gain(&self, grade: Grade) -> f64 {
        let level = self.gains.get(&grade).copied().unwrap_or(0.0);
        match self.gain_mode {
            GainMode::Linear => level,
            GainMode::Exponential => level.exp2() - 1.0,
        }
    }

    fn relevant_total(&self, qrels: &Qrels) -> usize {
        qrels.values().filter(|g| self.relevant_grades.contains(g)).count()
    }
}

pub fn average_precision<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, config: &EvalConfig) -> f64 {
    let total = config.relevant_total(qrels);
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranking.iter().enumerate() {
        if config.is_relevant(qrels, id.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

pub fn reciprocal_rank<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, config: &EvalConfig) -> f64 {
    ranking
        .iter()
        .position(|id| config.is_relevant(qrels, id.as_ref()))
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Relevant documents in the top `k`, divided by `k` even for short rankings.
pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, config: &EvalConfig, k: usize) -> f64 {
    let hits = ranking
        .iter()
        .take(k)
        .filter(|id| config.is_relevant(qrels, id.as_ref()))
        .count();
    hits as f64 / k as f64
}

pub fn success_at_k<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, config: &EvalConfig, k: usize) -> f64 {
    let found = ranking.iter().take(k).any(|id| config.is_relevant(qrels, id.as_ref()));
    if found {
        1.0
    } else {
        0.0
    }
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

pub fn ndcg<S: AsRef<str>>(ranking: &[S], qrels: &Qrels, config: &EvalConfig) -> f64 {
    let mut ideal: Vec<f64> = qrels.values().map(|&g| config.gain(g)).filter(|&g| g > 0.0).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal.iter().enumerate().map(|(i, g)| g / discount(i + 1)).sum();
    if idcg <= 0.0 {
        return 0.0;
    }
    let dcg: f64 = ranking
        .iter()
        .enumerate()
        .map(|(i, id)| qrels.get(id.as_ref()).map_or(0.0, |&g| config.gain(g)) / discount(i + 1))
        .sum();
    dcg / idcg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub qid: String,
    pub ap: f64,
    pub rr: f64,
    pub precision: f64,
    pub success: BTreeMap<usize, f64>,
    pub ndcg: f64,
    pub retrieved: usize,
}

impl QueryMetrics {
    pub fn compute<S: AsRef<str>>(qid: &str, ranking: &[S], qrels: &Qrels, config: &EvalConfig) -> Self {
        Self {
            qid: qid.to_string(),
            ap: average_precision(ranking, qrels, config),
            rr: reciprocal_rank(ranking, qrels, config),
            precision: precision_at_k(ranking, qrels, config, config.precision_k),
            success: config
                .success_ks
                .iter()
                .map(|&k| (k, success_at_k(ranking, qrels, config, k)))
                .collect(),
            ndcg: ndcg(ranking, qrels, config),
            retrieved: ranking.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub queries: usize,
    pub map: f64,
    pub mrr: f64,
    pub precision_k: usize,
    pub precision: f64,
    pub success: BTreeMap<usize, f64>,
    pub ndcg: f64,
    pub per_query: Vec<QueryMetrics>,
}

impl EvalReport {
    fn aggregate(per_query: Vec<QueryMetrics>, config: &EvalConfig) -> Self {
        let n = per_query.len();
        let mean = |f: &dyn Fn(&QueryMetrics) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_query.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let success = config
            .success_ks
            .iter()
            .map(|&k| (k, mean(&|m: &QueryMetrics| m.success[&k])))
            .collect();
        Self {
            queries: n,
            map: mean(&|m| m.ap),
            mrr: mean(&|m| m.rr),
            precision_k: config.precision_k,
            precision: mean(&|m| m.precision),
            success,
            ndcg: mean(&|m| m.ndcg),
            per_query,
        }
    }

    /// Aligned two-column summary table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("queries".into(), self.queries.to_string()),
            ("MAP".into(), format!("{:.4}", self.map)),
            ("MRR".into(), format!("{:.4}", self.mrr)),
            (format!("P@{}", self.precision_k), format!("{:.4}", self.precision)),
        ];
        for (k, v) in &self.success {
            rows.push((format!("SR@{k}"), format!("{v:.4}")));
        }
        rows.push(("nDCG".into(), format!("{:.4}", self.ndcg)));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v:>8}");
        }
        out
    }
}

/// Groups a run by qid, each ranking ordered by rank.
pub fn rankings_by_query(run: &[RunEntry]) -> HashMap<&str, Vec<&str>> {
    let mut grouped: HashMap<&str, Vec<&RunEntry>> = HashMap::new();
    for e in run {
        grouped.entry(e.qid.as_str()).or_default().push(e);
    }
    grouped
        .into_iter()
        .map(|(qid, mut rows)| {
            rows.sort_by_key(|e| e.rank);
            (qid, rows.into_iter().map(|e| e.faq_id.as_str()).collect())
        })
        .collect()
}

fn check_run_queries(run: &[RunEntry], queries: &[QueryRecord]) -> Result<(), EvalError> {
    let known: HashSet<&str> = queries.iter().map(|q| q.qid.as_str()).collect();
    match run.iter().find(|e| !known.contains(e.qid.as_str())) {
        Some(e) => Err(EvalError::UnknownQuery(e.qid.clone())),
        None => Ok(()),
    }
}

/// Per-query metrics and their unweighted means over every query in
/// `queries`. Queries with no run entries score 0 everywhere.
pub fn evaluate_run(run: &[RunEntry], queries: &[QueryRecord], config: &EvalConfig) -> Result<EvalReport, EvalError> {
    config.validate()?;
    check_run_queries(run, queries)?;
    let rankings = rankings_by_query(run);
    let empty: Vec<&str> = Vec::new();
    let per_query = queries
        .iter()
        .map(|q| {
            let ranking = rankings.get(q.qid.as_str()).unwrap_or(&empty);
            QueryMetrics::compute(&q.qid, ranking, &q.judgments, config)
        })
        .collect();
    Ok(EvalReport::aggregate(per_query, config))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.6,
            dev: 0.2,
            test: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold: usize,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Seeded k-fold train/dev/test splits.
///
/// The ids are shuffled once and cut into `folds` near-equal blocks; fold `f`
/// tests on block `f`, takes the next `round(dev * n)` ids (cyclically) as
/// dev, and trains on the rest. The test ratio must equal `1 / folds`.
pub fn kfold_split(ids: &[String], folds: usize, ratios: SplitRatios, seed: u64) -> Result<Vec<FoldSplit>, EvalError> {
    let n = ids.len();
    if folds == 0 || n < folds {
        return Err(EvalError::TooFewQueries { queries: n, folds });
    }
    let sum = ratios.train + ratios.dev + ratios.test;
    if [ratios.train, ratios.dev, ratios.test]
        .iter()
        .any(|r| !(0.0..=1.0).contains(r))
        || (sum - 1.0).abs() > 1e-6
    {
        return Err(EvalError::InvalidConfig(format!(
            "split ratios must be in [0, 1] and sum to 1, got {ratios:?}"
        )));
    }
    if (ratios.test - 1.0 / folds as f64).abs() > 0.01 {
        return Err(EvalError::InvalidConfig(format!(
            "test ratio {} is inconsistent with {folds} folds",
            ratios.test
        )));
    }
    let mut unique = HashSet::with_capacity(n);
    if let Some(dup) = ids.iter().find(|id| !unique.insert(id.as_str())) {
        return Err(EvalError::InvalidConfig(format!("duplicate query id {dup:?}")));
    }

    let mut order: Vec<&String> = ids.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let bounds: Vec<usize> = (0..=folds).map(|f| f * n / folds).collect();
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let (start, end) = (bounds[f], bounds[f + 1]);
        let test_len = end - start;
        let dev_len = ((ratios.dev * n as f64).round() as usize).min(n - test_len);
        let at = |offset: usize| order[(start + offset) % n].clone();
        let test = (0..test_len).map(at).collect();
        let dev = (test_len..test_len + dev_len).map(at).collect();
        let train = (test_len + dev_len..n).map(at).collect();
        out.push(FoldSplit {
            fold: f,
            train,
            dev,
            test,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRow {
    /// Inclusive lower bound; `-inf` for the underflow bucket.
    pub lower: f64,
    /// Exclusive upper bound; `inf` for the last bucket.
    pub upper: f64,
    pub correct: usize,
    pub incorrect: usize,
}

/// Counts queries whose rank-1 result is correct or not, bucketed by the
/// rank-1 score. `edges` must be strictly increasing; the buckets are
/// `[-inf, e0), [e0, e1), ..., [e_last, inf)`.
pub fn score_bucket_report(
    run: &[RunEntry],
    queries: &[QueryRecord],
    config: &EvalConfig,
    edges: &[f64],
) -> Result<Vec<BucketRow>, EvalError> {
    if edges.is_empty() || edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EvalError::InvalidConfig(
            "bucket edges must be finite and strictly increasing".into(),
        ));
    }
    check_run_queries(run, queries)?;
    if run.is_empty() {
        return Ok(Vec::new());
    }
    let mut rows: Vec<BucketRow> = std::iter::once(f64::NEG_INFINITY)
        .chain(edges.iter().copied())
        .zip(edges.iter().copied().chain(std::iter::once(f64::INFINITY)))
        .map(|(lower, upper)| BucketRow {
            lower,
            upper,
            correct: 0,
            incorrect: 0,
        })
        .collect();
    let qrels: HashMap<&str, &Qrels> = queries.iter().map(|q| (q.qid.as_str(), &q.judgments)).collect();
    let mut seen = HashSet::new();
    for top in run.iter().filter(|e| e.rank == 1) {
        if !seen.insert(top.qid.as_str()) {
            continue;
        }
        // number of edges <= score picks the bucket
        let bucket = edges.partition_point(|&e| e <= top.score);
        let correct = config.is_relevant(qrels[top.qid.as_str()], &top.faq_id);
        if correct {
            rows[bucket].correct += 1;
        } else {
            rows[bucket].incorrect += 1;
        }
    }
    Ok(rows)
}

pub fn write_bucket_csv<W: Write>(rows: &[BucketRow], out: W) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["lower", "upper", "correct", "incorrect"])?;
    for row in rows {
        writer.write_record([
            row.lower.to_string(),
            row.upper.to_string(),
            row.correct.to_string(),
            row.incorrect.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
