//! Synthetic FAQ corpora for benchmarks.

use faqrank_core::{FaqCorpus, FaqEntry};

/// Deterministic corpus of `size` entries drawn from a vocabulary of
/// `vocab` pseudo-words.
pub fn synthetic_corpus(size: usize, vocab: usize) -> FaqCorpus {
    let mut state: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let mut words = |n: usize| -> String {
        (0..n)
            .map(|_| format!("w{}", next() % vocab as u64))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let entries = (0..size)
        .map(|i| FaqEntry::new(format!("faq-{i:05}"), words(8), words(40), "bench"))
        .collect();
    FaqCorpus::from_entries(entries).expect("synthetic corpus is valid")
}
