//! FAQ corpora, graded query sets and ranked-run files.
//!
//! Corpora and query sets are stored as JSON lines. Runs use the six-column
//! whitespace-separated layout understood by standard IR evaluation tools:
//!
//! ```text
//! <qid> Q0 <faq_id> <rank> <score> <tag>
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Source tag used when a loaded file mixes several FAQ sets.
pub const POOLED_SOURCE: &str = "pooled";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Validation { line: usize, message: String },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("invalid run: {0}")]
    InvalidRun(String),
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// One question/answer pair of an FAQ set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaqEntry {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub source: String,
}

impl FaqEntry {
    pub fn new(
        id: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
        source: impl Into<String>,
    ) -> Self {
        Self {
            id: id.into(),
            question: question.into(),
            answer: answer.into(),
            source: source.into(),
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.id.chars().any(char::is_whitespace) {
            return Err(format!("id {:?} contains whitespace", self.id));
        }
        if self.question.trim().is_empty() {
            return Err(format!("entry {}: empty question", self.id));
        }
        if self.answer.trim().is_empty() {
            return Err(format!("entry {}: empty answer", self.id));
        }
        Ok(())
    }
}

/// A validated, non-empty collection of FAQ entries with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaqCorpus {
    source: String,
    entries: Vec<FaqEntry>,
    by_id: HashMap<String, usize>,
}

impl FaqCorpus {
    pub fn new(source: impl Into<String>, entries: Vec<FaqEntry>) -> Result<Self, CorpusError> {
        if entries.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut by_id = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            entry
                .validate()
                .map_err(|message| CorpusError::Validation { line: i + 1, message })?;
            if by_id.insert(entry.id.clone(), i).is_some() {
                return Err(CorpusError::Validation {
                    line: i + 1,
                    message: format!("duplicate id {:?}", entry.id),
                });
            }
        }
        Ok(Self {
            source: source.into(),
            entries,
            by_id,
        })
    }

    /// Builds a corpus whose source tag is derived from its entries.
    pub fn from_entries(entries: Vec<FaqEntry>) -> Result<Self, CorpusError> {
        let source = common_source(&entries);
        Self::new(source, entries)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn entries(&self) -> &[FaqEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FaqEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// Splits a pooled corpus into one corpus per source tag, in order of
    /// first appearance.
    pub fn split_by_source(&self) -> Vec<FaqCorpus> {
        let mut order: Vec<&str> = Vec::new();
        let mut groups: HashMap<&str, Vec<FaqEntry>> = HashMap::new();
        for entry in &self.entries {
            let group = groups.entry(entry.source.as_str()).or_insert_with(|| {
                order.push(entry.source.as_str());
                Vec::new()
            });
            group.push(entry.clone());
        }
        order
            .into_iter()
            .map(|source| {
                let entries = groups.remove(source).unwrap_or_default();
                // ids were unique in the parent, so this cannot fail
                FaqCorpus::new(source, entries).expect("subset of a valid corpus")
            })
            .collect()
    }

    /// Restricts the corpus to one source tag.
    pub fn restrict_to_source(&self, source: &str) -> Result<FaqCorpus, CorpusError> {
        let entries: Vec<FaqEntry> = self.entries.iter().filter(|e| e.source == source).cloned().collect();
        FaqCorpus::new(source, entries)
    }
}

fn common_source(entries: &[FaqEntry]) -> String {
    match entries.first() {
        Some(first) if entries.iter().all(|e| e.source == first.source) => first.source.clone(),
        Some(_) => POOLED_SOURCE.to_string(),
        None => String::new(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CorpusError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CorpusError::io(path, e))
}

/// Iterates non-blank lines with their 1-based line numbers.
fn jsonl_lines<'a, R: BufRead + 'a>(
    reader: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String), CorpusError>> + 'a {
    reader.lines().enumerate().filter_map(move |(i, line)| match line {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(CorpusError::io(path, e))),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    id: String,
    question: String,
    answer: String,
    source: String,
}

pub fn load_faq_corpus(path: impl AsRef<Path>) -> Result<FaqCorpus, CorpusError> {
    let path = path.as_ref();
    parse_faq_corpus(open(path)?, path)
}

pub fn parse_faq_corpus<R: BufRead>(reader: R, path: &Path) -> Result<FaqCorpus, CorpusError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for item in jsonl_lines(reader, path) {
        let (line, text) = item?;
        let raw: RawEntry = serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        let entry = FaqEntry::new(raw.id, raw.question, raw.answer, raw.source);
        entry
            .validate()
            .map_err(|message| CorpusError::Validation { line, message })?;
        if !seen.insert(entry.id.clone()) {
            return Err(CorpusError::Validation {
                line,
                message: format!("duplicate id {:?}", entry.id),
            });
        }
        entries.push(entry);
    }
    FaqCorpus::from_entries(entries)
}

pub fn write_faq_corpus<W: Write>(corpus: &FaqCorpus, mut out: W) -> std::io::Result<()> {
    for entry in corpus.entries() {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Four-level judgment of a QA pair against a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    /// Contains correct information.
    A,
    /// Contains relevant information.
    B,
    /// Same topic, no relevant information.
    C,
    /// Only irrelevant information.
    D,
}

impl Grade {
    pub const ALL: [Grade; 4] = [Grade::A, Grade::B, Grade::C, Grade::D];

    pub fn letter(self) -> char {
        match self {
            Grade::A => 'A',
            Grade::B => 'B',
            Grade::C => 'C',
            Grade::D => 'D',
        }
    }
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Grade {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" => Ok(Grade::A),
            "B" => Ok(Grade::B),
            "C" => Ok(Grade::C),
            "D" => Ok(Grade::D),
            other => Err(format!("unknown grade {other:?}, expected one of A, B, C, D")),
        }
    }
}

pub type Qrels = BTreeMap<String, Grade>;

/// A user query with its graded judgments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub qid: String,
    pub text: String,
    pub judgments: Qrels,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawQuery {
    qid: String,
    text: String,
    #[serde(default)]
    judgments: BTreeMap<String, String>,
}

pub fn load_query_set(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>, CorpusError> {
    let path = path.as_ref();
    parse_query_set(open(path)?, path)
}

pub fn parse_query_set<R: BufRead>(reader: R, path: &Path) -> Result<Vec<QueryRecord>, CorpusError> {
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for item in jsonl_lines(reader, path) {
        let (line, text) = item?;
        let raw: RawQuery = serde_json::from_str(&text).map_err(|e| CorpusError::Parse {
            line,
            message: e.to_string(),
        })?;
        if raw.qid.trim().is_empty() || raw.qid.chars().any(char::is_whitespace) {
            return Err(CorpusError::Validation {
                line,
                message: format!("invalid qid {:?}", raw.qid),
            });
        }
        if !seen.insert(raw.qid.clone()) {
            return Err(CorpusError::Validation {
                line,
                message: format!("duplicate qid {:?}", raw.qid),
            });
        }
        let mut judgments = Qrels::new();
        for (faq_id, letter) in raw.judgments {
            let grade = letter.parse::<Grade>().map_err(|message| CorpusError::Validation {
                line,
                message: format!("qid {}: {message}", raw.qid),
            })?;
            judgments.insert(faq_id, grade);
        }
        records.push(QueryRecord {
            qid: raw.qid,
            text: raw.text,
            judgments,
        });
    }
    Ok(records)
}

pub fn write_query_set<W: Write>(queries: &[QueryRecord], mut out: W) -> std::io::Result<()> {
    for q in queries {
        let raw = RawQuery {
            qid: q.qid.clone(),
            text: q.text.clone(),
            judgments: q.judgments.iter().map(|(id, g)| (id.clone(), g.to_string())).collect(),
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Checks that every judged id resolves against the corpus.
pub fn validate_judgments(queries: &[QueryRecord], corpus: &FaqCorpus) -> Result<(), CorpusError> {
    for (i, q) in queries.iter().enumerate() {
        if let Some(missing) = q.judgments.keys().find(|id| !corpus.contains(id)) {
            return Err(CorpusError::Validation {
                line: i + 1,
                message: format!("qid {}: judged id {missing:?} not in corpus", q.qid),
            });
        }
    }
    Ok(())
}

/// One line of a ranked-run file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub qid: String,
    pub faq_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// Builds run entries for one query from an already ordered result list.
pub fn ranked_entries<'a, I>(qid: &str, tag: &str, ranked: I) -> Vec<RunEntry>
where
    I: IntoIterator<Item = (&'a str, f64)>,
{
    ranked
        .into_iter()
        .enumerate()
        .map(|(i, (faq_id, score))| RunEntry {
            qid: qid.to_string(),
            faq_id: faq_id.to_string(),
            rank: i + 1,
            score,
            tag: tag.to_string(),
        })
        .collect()
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

/// Checks per-query rank contiguity and score monotonicity.
pub fn validate_run(entries: &[RunEntry]) -> Result<(), CorpusError> {
    let mut per_query: HashMap<&str, Vec<&RunEntry>> = HashMap::new();
    for e in entries {
        for (field, value) in [("qid", &e.qid), ("faq_id", &e.faq_id), ("tag", &e.tag)] {
            if !is_token(value) {
                return Err(CorpusError::InvalidRun(format!(
                    "{field} {value:?} is empty or contains whitespace"
                )));
            }
        }
        if !e.score.is_finite() {
            return Err(CorpusError::InvalidRun(format!(
                "qid {} doc {}: non-finite score",
                e.qid, e.faq_id
            )));
        }
        per_query.entry(e.qid.as_str()).or_default().push(e);
    }
    for (qid, mut rows) in per_query {
        rows.sort_by_key(|e| e.rank);
        let mut docs = HashSet::new();
        for (i, row) in rows.iter().enumerate() {
            if row.rank != i + 1 {
                return Err(CorpusError::InvalidRun(format!(
                    "qid {qid}: expected rank {} but found {}",
                    i + 1,
                    row.rank
                )));
            }
            if !docs.insert(row.faq_id.as_str()) {
                return Err(CorpusError::InvalidRun(format!(
                    "qid {qid}: doc {} ranked twice",
                    row.faq_id
                )));
            }
            if i > 0 && row.score > rows[i - 1].score {
                return Err(CorpusError::InvalidRun(format!(
                    "qid {qid}: score increases at rank {}",
                    row.rank
                )));
            }
        }
    }
    Ok(())
}

pub fn write_run<W: Write>(entries: &[RunEntry], out: W) -> Result<(), CorpusError> {
    validate_run(entries)?;
    let mut out = BufWriter::new(out);
    let io = |e| CorpusError::Io {
        path: "<run>".into(),
        source: e,
    };
    for e in entries {
        // `{}` on f64 prints the shortest string that parses back to the same bits
        writeln!(out, "{} Q0 {} {} {} {}", e.qid, e.faq_id, e.rank, e.score, e.tag).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn write_run_file(entries: &[RunEntry], path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| CorpusError::io(path, e))?;
    write_run(entries, file)
}

pub fn read_run<R: BufRead>(reader: R) -> Result<Vec<RunEntry>, CorpusError> {
    let mut entries = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io {
            path: "<run>".into(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| CorpusError::Parse { line: i + 1, message };
        let cols: Vec<&str> = line.split_whitespace().collect();
        let [qid, q0, faq_id, rank, score, tag] = cols.as_slice() else {
            return Err(parse_err(format!("expected 6 columns, found {}", cols.len())));
        };
        if *q0 != "Q0" {
            return Err(parse_err(format!("second column must be Q0, found {q0:?}")));
        }
        let rank: usize = rank.parse().map_err(|_| parse_err(format!("bad rank {rank:?}")))?;
        let score: f64 = score.parse().map_err(|_| parse_err(format!("bad score {score:?}")))?;
        entries.push(RunEntry {
            qid: qid.to_string(),
            faq_id: faq_id.to_string(),
            rank,
            score,
            tag: tag.to_string(),
        });
    }
    validate_run(&entries)?;
    Ok(entries)
}

pub fn read_run_file(path: impl AsRef<Path>) -> Result<Vec<RunEntry>, CorpusError> {
    let path = path.as_ref();
    read_run(open(path)?)
}
