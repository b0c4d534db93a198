//! Tokenization and the query statistics used for score normalization.
//!
//! The default analyzer lowercases, splits on anything that is not
//! alphanumeric (apostrophes are dropped inside a word, so `driver's` becomes
//! `drivers`), and treats every token outside the stopword list as a content
//! word. Dependency relations are approximated as `content_words - 1`, the
//! number of edges in a chain over the content words. A real parser can be
//! plugged in through [`Analyzer`].

use std::collections::BTreeSet;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Stopword list shipped with the crate.
pub const ENGLISH_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

#[derive(Debug, Error)]
pub enum AnalyzeError {
    #[error("failed to read stopword list {path}: {source}")]
    Stopwords {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("analyzer failed: {0}")]
    Plugin(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AnalyzedText {
    /// Every normalized token, stopwords included.
    pub tokens: Vec<String>,
    /// Terms used for matching (content words, in text order).
    pub terms: Vec<String>,
    pub content_word_count: usize,
    pub dependency_relation_count: usize,
}

/// Anything that can turn raw text into [`AnalyzedText`].
pub trait Analyzer: Send + Sync {
    fn analyze(&self, text: &str) -> Result<AnalyzedText, AnalyzeError>;

    /// Identifies the configuration that produced an analysis, so indexes
    /// built with a different analyzer can be detected.
    fn fingerprint(&self) -> String;
}

#[derive(Debug, Clone)]
pub struct DefaultAnalyzer {
    stopwords: BTreeSet<String>,
    fingerprint: String,
}

impl Default for DefaultAnalyzer {
    fn default() -> Self {
        Self::english()
    }
}

impl DefaultAnalyzer {
    pub fn english() -> Self {
        Self::from_stopword_text(ENGLISH_STOPWORDS)
    }

    /// Parses a stopword list: one lowercase token per line, blank lines ignored.
    pub fn from_stopword_text(text: &str) -> Self {
        Self::from_stopwords(text.lines().map(str::trim).filter(|l| !l.is_empty()))
    }

    pub fn from_stopword_file(path: impl AsRef<Path>) -> Result<Self, AnalyzeError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| AnalyzeError::Stopwords {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_stopword_text(&text))
    }

    pub fn from_stopwords<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let stopwords: BTreeSet<String> = words.into_iter().map(|w| w.as_ref().to_lowercase()).collect();
        let mut hasher = Sha256::new();
        hasher.update(b"default-analyzer/v1\n");
        for w in &stopwords {
            hasher.update(w.as_bytes());
            hasher.update(b"\n");
        }
        let fingerprint = format!("default-v1:{}", &hex::encode(hasher.finalize())[..16]);
        Self { stopwords, fingerprint }
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn analyze_text(&self, text: &str) -> AnalyzedText {
        let tokens = tokenize(text);
        let terms: Vec<String> = tokens.iter().filter(|t| !self.is_stopword(t)).cloned().collect();
        let content_word_count = terms.len();
        AnalyzedText {
            tokens,
            terms,
            content_word_count,
            dependency_relation_count: content_word_count.saturating_sub(1),
        }
    }
}

impl Analyzer for DefaultAnalyzer {
    fn analyze(&self, text: &str) -> Result<AnalyzedText, AnalyzeError> {
        Ok(self.analyze_text(text))
    }

    fn fingerprint(&self) -> String {
        self.fingerprint.clone()
    }
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercased tokens with punctuation removed.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !(c.is_alphanumeric() || is_apostrophe(c)))
        .map(|chunk| {
            chunk
                .chars()
                .filter(|c| !is_apostrophe(*c))
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn renew_license_hand_count() {
        // where/should/i/my are on the shipped list; renew/license are not
        let a = DefaultAnalyzer::english().analyze_text("Where should I renew my license?");
        assert_eq!(a.tokens, ["where", "should", "i", "renew", "my", "license"]);
        assert_eq!(a.terms, ["renew", "license"]);
        assert_eq!(a.content_word_count, 2);
        assert_eq!(a.dependency_relation_count, 1);
    }

    #[test]
    fn empty_and_single_word() {
        let an = DefaultAnalyzer::english();
        assert_eq!(an.analyze_text(""), AnalyzedText::default());
        let one = an.analyze_text("Passport!");
        assert_eq!(one.content_word_count, 1);
        assert_eq!(one.dependency_relation_count, 0);
        let three = an.analyze_text("renew driver license");
        assert_eq!(three.dependency_relation_count, 2);
    }

    #[test]
    fn punctuation_and_apostrophes() {
        assert_eq!(
            tokenize("Driver's license (re-issued), OK?"),
            ["drivers", "license", "re", "issued", "ok"]
        );
        assert_eq!(tokenize("Don’t PANIC"), ["dont", "panic"]);
    }

    #[test]
    fn stopword_file_changes_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stop.txt");
        std::fs::write(&path, "the\na\n").unwrap();
        let custom = DefaultAnalyzer::from_stopword_file(&path).unwrap();
        assert_ne!(custom.fingerprint(), DefaultAnalyzer::english().fingerprint());
        assert_eq!(custom.analyze_text("the where").terms, ["where"]);
        assert!(DefaultAnalyzer::from_stopword_file(dir.path().join("missing")).is_err());
    }

    proptest! {
        #[test]
        fn analyze_is_pure(text in "\\PC{0,60}") {
            let an = DefaultAnalyzer::english();
            prop_assert_eq!(an.analyze_text(&text), an.analyze_text(&text));
        }

        #[test]
        fn concatenation(a in "[a-zA-Z0-9 ]{0,30}", b in "[a-zA-Z0-9 ]{0,30}") {
            let joined = format!("{a} {b}");
            let mut expected = tokenize(&a);
            expected.extend(tokenize(&b));
            prop_assert_eq!(tokenize(&joined), expected);
        }

        #[test]
        fn proxy_bound(text in "[a-z ,.?]{0,80}") {
            let a = DefaultAnalyzer::english().analyze_text(&text);
            prop_assert!(a.content_word_count <= a.tokens.len());
            prop_assert_eq!(a.dependency_relation_count, a.content_word_count.saturating_sub(1));
        }
    }
}
