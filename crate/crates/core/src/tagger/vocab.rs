//! Character and tag vocabularies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::conllu::Sentence;

/// Start-of-word marker (private-use code point).
pub const WORD_START: char = '\u{E000}';
/// End-of-word marker (private-use code point).
pub const WORD_END: char = '\u{E001}';

pub const UNK_INDEX: usize = 0;
pub const START_INDEX: usize = 1;
pub const END_INDEX: usize = 2;

/// Lowercases a form and wraps it in start/end markers. Already wrapped
/// input is only lowercased, so the function is idempotent.
pub fn preprocess(form: &str) -> String {
    let lower = form.to_lowercase();
    if lower.len() >= 2 * WORD_START.len_utf8()
        && lower.starts_with(WORD_START)
        && lower.ends_with(WORD_END)
    {
        return lower;
    }
    let mut out = String::with_capacity(lower.len() + 6);
    out.push(WORD_START);
    out.push_str(&lower);
    out.push(WORD_END);
    out
}

/// Character vocabulary. Indices 0, 1 and 2 are reserved for the unknown
/// symbol and the start/end markers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharVocab {
    /// Symbol for each index; reserved slots hold the marker characters
    /// (`'\0'` for unknown).
    symbols: Vec<char>,
    #[serde(skip)]
    index: BTreeMap<char, usize>,
    /// Training-set frequency per index (0 for reserved symbols).
    counts: Vec<usize>,
}

impl CharVocab {
    pub fn from_sentences(sentences: &[Sentence]) -> Self {
        let mut freq: BTreeMap<char, usize> = BTreeMap::new();
        for s in sentences {
            for form in s.forms() {
                for ch in form.to_lowercase().chars() {
                    if ch != WORD_START && ch != WORD_END {
                        *freq.entry(ch).or_default() += 1;
                    }
                }
            }
        }
        let mut symbols = vec!['\0', WORD_START, WORD_END];
        let mut counts = vec![0, 0, 0];
        for (ch, n) in freq {
            symbols.push(ch);
            counts.push(n);
        }
        Self::from_parts(symbols, counts)
    }

    pub fn from_parts(symbols: Vec<char>, counts: Vec<usize>) -> Self {
        let index = symbols
            .iter()
            .enumerate()
            .skip(3)
            .map(|(i, &c)| (c, i))
            .collect();
        CharVocab {
            symbols,
            index,
            counts,
        }
    }

    /// Rebuilds the lookup table after deserialization.
    pub(crate) fn reindex(&mut self) {
        *self = Self::from_parts(std::mem::take(&mut self.symbols), std::mem::take(&mut self.counts));
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 3
    }

    pub fn lookup(&self, ch: char) -> usize {
        match ch {
            WORD_START => START_INDEX,
            WORD_END => END_INDEX,
            _ => self.index.get(&ch).copied().unwrap_or(UNK_INDEX),
        }
    }

    /// Indices for a form after [`preprocess`].
    pub fn encode(&self, form: &str) -> Vec<usize> {
        preprocess(form).chars().map(|c| self.lookup(c)).collect()
    }

    /// Whether the symbol occurred exactly once in training data.
    pub fn is_singleton(&self, index: usize) -> bool {
        self.counts.get(index) == Some(&1)
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// Tag inventory, sorted so indices do not depend on input order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagVocab {
    tags: Vec<String>,
}

impl TagVocab {
    pub fn from_sentences(sentences: &[Sentence]) -> Self {
        let mut tags: Vec<String> = sentences
            .iter()
            .flat_map(|s| s.tokens.iter().map(|t| t.upos.clone()))
            .collect();
        tags.sort();
        tags.dedup();
        TagVocab { tags }
    }

    pub fn new(mut tags: Vec<String>) -> Self {
        tags.sort();
        tags.dedup();
        TagVocab { tags }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.tags.binary_search_by(|t| t.as_str().cmp(tag)).ok()
    }

    pub fn tag(&self, index: usize) -> &str {
        &self.tags[index]
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }
}
