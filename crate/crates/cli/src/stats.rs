//! Treebank size and label statistics.

use std::collections::BTreeMap;
use std::fmt;

use treeaug::conllu::Sentence;
use treeaug::deptree::{DepTree, LabelConfig};

/// Treebanks below this many tokens are too small to use.
pub const MIN_TOKENS: usize = 5_000;
/// Treebanks at or above this many tokens are too large to count as
/// low-resource.
pub const MAX_TOKENS: usize = 120_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SizeClass {
    Ignored,
    Under20K,
    Under80K,
    Under120K,
    TooLarge,
}

impl SizeClass {
    pub fn of(tokens: usize) -> Self {
        match tokens {
            t if t < MIN_TOKENS => SizeClass::Ignored,
            t if t < 20_000 => SizeClass::Under20K,
            t if t < 80_000 => SizeClass::Under80K,
            t if t < MAX_TOKENS => SizeClass::Under120K,
            _ => SizeClass::TooLarge,
        }
    }

    pub fn is_eligible(self) -> bool {
        !matches!(self, SizeClass::Ignored | SizeClass::TooLarge)
    }

    pub fn bucket(self) -> Option<&'static str> {
        match self {
            SizeClass::Under20K => Some("<20K"),
            SizeClass::Under80K => Some("<80K"),
            SizeClass::Under120K => Some("<120K"),
            SizeClass::Ignored | SizeClass::TooLarge => None,
        }
    }

    pub fn verdict(self) -> &'static str {
        match self {
            SizeClass::Ignored => "ignored (<5K)",
            SizeClass::TooLarge => "excluded (>=120K)",
            _ => "eligible",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TreebankStats {
    pub sentences: usize,
    /// Syntactic words; multiword-token ranges and empty nodes are not
    /// counted.
    pub tokens: usize,
    /// Number of root dependents with a label of interest → sentences.
    pub loi_histogram: BTreeMap<usize, usize>,
    /// Sentences that are not well-formed trees.
    pub invalid: usize,
}

impl TreebankStats {
    pub fn compute(sentences: &[Sentence], labels: &LabelConfig) -> Self {
        let mut stats = TreebankStats {
            sentences: sentences.len(),
            ..Default::default()
        };
        for s in sentences {
            stats.tokens += s.len();
            match DepTree::build(s) {
                Ok(tree) => *stats.loi_histogram.entry(tree.loi_dependents(labels).len()).or_default() += 1,
                Err(_) => stats.invalid += 1,
            }
        }
        stats
    }

    pub fn size_class(&self) -> SizeClass {
        SizeClass::of(self.tokens)
    }
}

impl fmt::Display for TreebankStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let class = self.size_class();
        writeln!(f, "sentences: {}", self.sentences)?;
        writeln!(f, "tokens: {}", self.tokens)?;
        let histogram: Vec<String> = self.loi_histogram.iter().map(|(k, v)| format!("{k}: {v}")).collect();
        writeln!(f, "loi_histogram: {{{}}}", histogram.join(", "))?;
        if self.invalid > 0 {
            writeln!(f, "invalid_sentences: {}", self.invalid)?;
        }
        writeln!(f, "verdict: {}", class.verdict())?;
        if let Some(bucket) = class.bucket() {
            writeln!(f, "bucket: {bucket}")?;
        }
        Ok(())
    }
}
