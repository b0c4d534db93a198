//! Reference implementations written without looking at the library code
//! paths they check. Deliberately naive: nested loops, permutations, no
//! sharing of helpers with `faqrank_core`.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

/// Grades as plain letters so the oracle does not depend on the library's
/// grade type.
pub type Judgments = BTreeMap<String, char>;

fn relevant(j: &Judgments, id: &str) -> bool {
    matches!(j.get(id), Some('A' | 'B' | 'C'))
}

fn gain(j: &Judgments, id: &str) -> f64 {
    match j.get(id) {
        Some('A') => 3.0,
        Some('B') => 2.0,
        Some('C') => 1.0,
        _ => 0.0,
    }
}

pub fn ap(ranking: &[String], j: &Judgments) -> f64 {
    let total = j.keys().filter(|id| relevant(j, id)).count();
    if total == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..ranking.len() {
        if !relevant(j, &ranking[i]) {
            continue;
        }
        let mut hits = 0;
        for r in &ranking[..=i] {
            if relevant(j, r) {
                hits += 1;
            }
        }
        sum += hits as f64 / (i + 1) as f64;
    }
    sum / total as f64
}

pub fn rr(ranking: &[String], j: &Judgments) -> f64 {
    for (i, r) in ranking.iter().enumerate() {
        if relevant(j, r) {
            return 1.0 / (i + 1) as f64;
        }
    }
    0.0
}

pub fn p_at(ranking: &[String], j: &Judgments, k: usize) -> f64 {
    ranking.iter().take(k).filter(|r| relevant(j, r)).count() as f64 / k as f64
}

pub fn sr_at(ranking: &[String], j: &Judgments, k: usize) -> f64 {
    if ranking.iter().take(k).any(|r| relevant(j, r)) {
        1.0
    } else {
        0.0
    }
}

fn dcg(gains: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, g) in gains.iter().enumerate() {
        s += g / ((i + 2) as f64).log2();
    }
    s
}

fn permutations(items: &[f64]) -> Vec<Vec<f64>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// IDCG found by trying every ordering of the judged items.
pub fn ndcg(ranking: &[String], j: &Judgments) -> f64 {
    let judged: Vec<f64> = j.keys().map(|id| gain(j, id)).collect();
    let ideal = permutations(&judged).iter().map(|p| dcg(p)).fold(0.0, f64::max);
    if ideal == 0.0 {
        return 0.0;
    }
    let got: Vec<f64> = ranking.iter().map(|r| gain(j, r)).collect();
    dcg(&got) / ideal
}

/// Brute-force BM25 over whitespace-tokenized documents. Only valid for
/// texts without stopwords or punctuation.
pub fn bm25_scores(docs: &[(String, String)], query: &str, k: f64, b: f64) -> BTreeMap<String, f64> {
    let tokenized: Vec<(String, Vec<&str>)> = docs
        .iter()
        .map(|(id, text)| (id.clone(), text.split_whitespace().collect()))
        .collect();
    let n = docs.len() as f64;
    let avgdl = tokenized.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n;
    let terms: BTreeSet<&str> = query.split_whitespace().collect();
    let mut out = BTreeMap::new();
    for (id, words) in &tokenized {
        let dl = words.len() as f64;
        let mut score = 0.0;
        for term in &terms {
            let tf = words.iter().filter(|w| *w == term).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = tokenized.iter().filter(|(_, w)| w.contains(term)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            score += idf * tf * (k + 1.0) / (tf + k * (1.0 - b + b * dl / avgdl));
        }
        out.insert(id.clone(), score);
    }
    out
}

/// Length normalizer: content words weighted by `k1`, adjacent-word
/// relations (one fewer than the words) by `k2`.
pub fn normalizer(query: &str, k1: f64, k2: f64) -> f64 {
    let cw = query.split_whitespace().count() as f64;
    let dep = (cw - 1.0).max(0.0);
    cw * k1 + dep * k2
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleCandidate {
    pub id: String,
    pub sim: f64,
    pub rel: f64,
    pub high: bool,
    pub fused: f64,
}

/// Partition-then-sort reference for fusion. Each group is ordered by
/// repeatedly picking the best remaining candidate.
pub fn fuse_oracle(
    lexical: &[(String, f64)],
    relevance: &[(String, f64)],
    alpha: f64,
    t: f64,
    pool_size: usize,
    union: bool,
) -> Vec<OracleCandidate> {
    let mut pool: Vec<String> = Vec::new();
    let mut add = |id: &String| {
        if !pool.contains(id) {
            pool.push(id.clone());
        }
    };
    relevance.iter().take(pool_size).for_each(|(id, _)| add(id));
    if union {
        lexical.iter().take(pool_size).for_each(|(id, _)| add(id));
    }
    let lookup = |list: &[(String, f64)], id: &str| list.iter().find(|(x, _)| x == id).map_or(0.0, |p| p.1);
    let cands: Vec<OracleCandidate> = pool
        .iter()
        .map(|id| {
            let sim = lookup(lexical, id);
            let rel = lookup(relevance, id);
            OracleCandidate {
                id: id.clone(),
                sim,
                rel,
                high: sim > alpha,
                fused: sim * t + rel,
            }
        })
        .collect();
    let (mut high, mut low): (Vec<_>, Vec<_>) = cands.into_iter().partition(|c| c.high);
    let mut out = Vec::new();
    while !high.is_empty() {
        let mut best = 0;
        for i in 1..high.len() {
            let (a, b) = (&high[i], &high[best]);
            if a.sim > b.sim || (a.sim == b.sim && a.id < b.id) {
                best = i;
            }
        }
        out.push(high.remove(best));
    }
    while !low.is_empty() {
        let mut best = 0;
        for i in 1..low.len() {
            let (a, b) = (&low[i], &low[best]);
            if a.fused > b.fused || (a.fused == b.fused && a.id < b.id) {
                best = i;
            }
        }
        out.push(low.remove(best));
    }
    out
}
