use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FaqCorpus, FaqEntry};

/// Negatives generated per positive when nothing else is configured.
pub const DEFAULT_NEG_RATIO: usize = 24;

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("need at least 2 entries to draw negatives, pool {pool:?} has {size}")]
    PoolTooSmall { pool: String, size: usize },
    #[error("neg_ratio {neg_ratio} exceeds pool size - 1 = {max} for pool {pool:?}")]
    RatioTooLarge { neg_ratio: usize, max: usize, pool: String },
    #[error("neg_ratio must be at least 1")]
    ZeroRatio,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Labeled sentence pair; `left` is a question or query, `right` an answer.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevanceExample {
    pub left: String,
    pub right: String,
    pub label: u8,
}

/// Where negative answers are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NegativeScope {
    /// Any entry of any corpus.
    #[default]
    Pooled,
    /// Only entries of the same corpus as the positive.
    SameSource,
}

/// A generated example together with the ids of the entries it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampledExample {
    pub question_id: String,
    pub answer_id: String,
    pub example: RelevanceExample,
}

/// For every entry emit `(Q, A, 1)` followed by `neg_ratio` examples
/// `(Q, Ā, 0)`, with `Ā` drawn uniformly without replacement from the other
/// entries of the pool. Entry identity is positional, so two entries with the
/// same answer text are still distinct candidates.
pub fn generate_training_pairs(
    corpora: &[FaqCorpus],
    neg_ratio: usize,
    seed: u64,
    scope: NegativeScope,
) -> Result<Vec<RelevanceExample>, TrainingError> {
    Ok(generate_sampled_pairs(corpora, neg_ratio, seed, scope)?
        .into_iter()
        .map(|s| s.example)
        .collect())
}

pub fn generate_sampled_pairs(
    corpora: &[FaqCorpus],
    neg_ratio: usize,
    seed: u64,
    scope: NegativeScope,
) -> Result<Vec<SampledExample>, TrainingError> {
    if neg_ratio == 0 {
        return Err(TrainingError::ZeroRatio);
    }
    let pools: Vec<(String, Vec<&FaqEntry>)> = match scope {
        NegativeScope::Pooled => vec![("pooled".to_string(), corpora.iter().flat_map(|c| c.entries()).collect())],
        NegativeScope::SameSource => corpora
            .iter()
            .map(|c| (c.source().to_string(), c.entries().iter().collect()))
            .collect(),
    };
    for (name, pool) in &pools {
        if pool.len() < 2 {
            return Err(TrainingError::PoolTooSmall {
                pool: name.clone(),
                size: pool.len(),
            });
        }
        if neg_ratio > pool.len() - 1 {
            return Err(TrainingError::RatioTooLarge {
                neg_ratio,
                max: pool.len() - 1,
                pool: name.clone(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = pools.iter().map(|(_, p)| p.len()).sum();
    let mut out = Vec::with_capacity(total * (neg_ratio + 1));
    for (_, pool) in &pools {
        for (pos, entry) in pool.iter().enumerate() {
            out.push(SampledExample {
                question_id: entry.id.clone(),
                answer_id: entry.id.clone(),
                example: RelevanceExample {
                    left: entry.question.clone(),
                    right: entry.answer.clone(),
                    label: 1,
                },
            });
            // sample from the pool with the positive removed
            for j in index::sample(&mut rng, pool.len() - 1, neg_ratio) {
                let other = if j >= pos { j + 1 } else { j };
                out.push(SampledExample {
                    question_id: entry.id.clone(),
                    answer_id: pool[other].id.clone(),
                    example: RelevanceExample {
                        left: entry.question.clone(),
                        right: pool[other].answer.clone(),
                        label: 0,
                    },
                });
            }
        }
    }
    Ok(out)
}

/// A user query paired with the QA entry it paraphrases.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParaphraseTriple {
    pub query: String,
    pub question: String,
    pub answer: String,
}

/// Each triple `(q, Q, A)` yields positives `(q, A)` and `(Q, A)`; exact
/// duplicates are dropped, first occurrence kept.
pub fn split_paraphrase_triples(triples: &[ParaphraseTriple]) -> Vec<RelevanceExample> {
    let mut seen: HashSet<(&str, &str)> = HashSet::new();
    let mut out = Vec::new();
    for t in triples {
        for left in [&t.query, &t.question] {
            if seen.insert((left.as_str(), t.answer.as_str())) {
                out.push(RelevanceExample {
                    left: left.clone(),
                    right: t.answer.clone(),
                    label: 1,
                });
            }
        }
    }
    out
}

pub fn write_training_examples<W: Write>(examples: &[RelevanceExample], mut out: W) -> Result<(), TrainingError> {
    for ex in examples {
        serde_json::to_writer(&mut out, ex).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_training_examples<R: BufRead>(reader: R) -> Result<Vec<RelevanceExample>, TrainingError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: RelevanceExample = serde_json::from_str(&line).map_err(|e| TrainingError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if ex.label > 1 {
            return Err(TrainingError::Parse {
                line: i + 1,
                message: format!("label must be 0 or 1, got {}", ex.label),
            });
        }
        out.push(ex);
    }
    Ok(out)
}
