//! Head-indexed tree view over a sentence, and the structural pieces both
//! augmentation operators are built from: root-attached dependents with a
//! label of interest, the root phrase, subtrees, and the chunk decomposition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::conllu::{Sentence, ValidationReport};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("sentence is not a well-formed tree: {0}")]
    Invalid(ValidationReport),
    #[error("unknown token id {0}")]
    UnknownToken(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LabelConfigError {
    #[error("label set `{0}` is empty")]
    EmptySet(&'static str),
    #[error("label `{0}` must be a base label without ':'")]
    Subtyped(String),
    #[error("label `{0}` is both a label of interest and a root-phrase label")]
    Overlap(String),
    #[error("config line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Which relations select flexible chunks and which glue the root phrase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelConfig {
    pub loi: BTreeSet<String>,
    pub root_phrase: BTreeSet<String>,
    /// Compare only the part of a relation before `:` (`nsubj:pass` → `nsubj`).
    pub match_subtypes: bool,
    /// Legacy relation names rewritten before matching (`dobj` → `obj`).
    pub aliases: BTreeMap<String, String>,
}

fn label_set(labels: &[&str]) -> BTreeSet<String> {
    labels.iter().map(|s| s.to_string()).collect()
}

impl Default for LabelConfig {
    fn default() -> Self {
        LabelConfig {
            loi: label_set(&["nsubj", "obj", "iobj", "obl"]),
            root_phrase: label_set(&["fixed", "flat", "cop", "compound"]),
            match_subtypes: true,
            aliases: [("dobj".to_owned(), "obj".to_owned())].into_iter().collect(),
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<(), LabelConfigError> {
        if self.loi.is_empty() {
            return Err(LabelConfigError::EmptySet("loi"));
        }
        if self.root_phrase.is_empty() {
            return Err(LabelConfigError::EmptySet("root_phrase"));
        }
        for label in self.loi.iter().chain(&self.root_phrase) {
            if label.contains(':') {
                return Err(LabelConfigError::Subtyped(label.clone()));
            }
        }
        if let Some(shared) = self.loi.intersection(&self.root_phrase).next() {
            return Err(LabelConfigError::Overlap(shared.clone()));
        }
        Ok(())
    }

    /// The label a relation is matched under.
    pub fn normalize<'a>(&'a self, deprel: &'a str) -> &'a str {
        let base = if self.match_subtypes {
            deprel.split(':').next().unwrap_or(deprel)
        } else {
            deprel
        };
        self.aliases.get(base).map(String::as_str).unwrap_or(base)
    }

    pub fn is_loi(&self, deprel: &str) -> bool {
        self.loi.contains(self.normalize(deprel))
    }

    pub fn is_root_phrase(&self, deprel: &str) -> bool {
        self.root_phrase.contains(self.normalize(deprel))
    }

    /// Reads `key = value` lines. Recognised keys: `loi`, `root_phrase`
    /// (comma lists), `match_subtypes` (bool) and `aliases` (comma list of
    /// `from:to`). Missing keys keep their defaults; `#` starts a comment.
    pub fn from_config_str(text: &str) -> Result<Self, LabelConfigError> {
        let mut cfg = LabelConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| LabelConfigError::Syntax {
                line: idx + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax("expected `key = value`".to_owned()))?;
            let value = value.trim();
            match key.trim() {
                "loi" => cfg.loi = parse_label_list(value),
                "root_phrase" => cfg.root_phrase = parse_label_list(value),
                "match_subtypes" => {
                    cfg.match_subtypes = value
                        .parse()
                        .map_err(|_| syntax(format!("`{value}` is not a boolean")))?
                }
                "aliases" => {
                    cfg.aliases = BTreeMap::new();
                    for pair in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                        let (from, to) = pair
                            .split_once(':')
                            .ok_or_else(|| syntax(format!("alias `{pair}` is not `from:to`")))?;
                        cfg.aliases.insert(from.trim().to_owned(), to.trim().to_owned());
                    }
                }
                other => return Err(syntax(format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl FromStr for LabelConfig {
    type Err = LabelConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_config_str(s)
    }
}

/// Splits a comma-separated label list.
pub fn parse_label_list(value: &str) -> BTreeSet<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Tree view of a validated sentence.
#[derive(Clone, Debug)]
pub struct DepTree<'a> {
    sentence: &'a Sentence,
    /// `children[id]` in surface order; index 0 is the virtual root.
    children: Vec<Vec<usize>>,
    root_id: usize,
}

impl<'a> DepTree<'a> {
    pub fn build(sentence: &'a Sentence) -> Result<Self, TreeError> {
        let report = sentence.validate();
        if !report.is_valid() {
            return Err(TreeError::Invalid(report));
        }
        let mut children = vec![Vec::new(); sentence.len() + 1];
        for token in &sentence.tokens {
            children[token.head].push(token.id);
        }
        let root_id = children[0][0];
        Ok(DepTree {
            sentence,
            children,
            root_id,
        })
    }

    pub fn sentence(&self) -> &'a Sentence {
        self.sentence
    }

    pub fn root_id(&self) -> usize {
        self.root_id
    }

    pub fn len(&self) -> usize {
        self.sentence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence.is_empty()
    }

    pub fn deprel(&self, id: usize) -> &'a str {
        &self.sentence.tokens[id - 1].deprel
    }

    pub fn children(&self, id: usize) -> Result<&[usize], TreeError> {
        self.check(id)?;
        Ok(&self.children[id])
    }

    fn check(&self, id: usize) -> Result<(), TreeError> {
        if id == 0 || id > self.len() {
            Err(TreeError::UnknownToken(id))
        } else {
            Ok(())
        }
    }

    /// `id` and all of its descendants, in surface order.
    pub fn subtree_tokens(&self, id: usize) -> Result<Vec<usize>, TreeError> {
        self.check(id)?;
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(cur) = stack.pop() {
            out.push(cur);
            stack.extend_from_slice(&self.children[cur]);
        }
        out.sort_unstable();
        Ok(out)
    }

    /// Direct dependents of the root whose relation is a label of interest,
    /// paired with their relation, in surface order.
    pub fn loi_dependents(&self, cfg: &LabelConfig) -> Vec<(usize, String)> {
        self.children[self.root_id]
            .iter()
            .filter(|&&c| cfg.is_loi(self.deprel(c)))
            .map(|&c| (c, self.deprel(c).to_owned()))
            .collect()
    }

    /// The root plus everything reachable from it through root-phrase edges.
    pub fn root_phrase(&self, cfg: &LabelConfig) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.root_id];
        while let Some(cur) = stack.pop() {
            out.push(cur);
            stack.extend(
                self.children[cur]
                    .iter()
                    .filter(|&&c| cfg.is_root_phrase(self.deprel(c))),
            );
        }
        out.sort_unstable();
        out
    }

    pub fn extract_chunks(&self, cfg: &LabelConfig) -> ChunkDecomposition {
        let mut in_flexible = vec![false; self.len() + 1];
        let mut flexible_chunks = Vec::new();
        for (id, relation) in self.loi_dependents(cfg) {
            let tokens = self
                .subtree_tokens(id)
                .expect("dependent ids come from the tree");
            for &t in &tokens {
                in_flexible[t] = true;
            }
            flexible_chunks.push(Chunk { relation, tokens });
        }
        let root_chunk = (1..=self.len()).filter(|&id| !in_flexible[id]).collect();
        ChunkDecomposition {
            root_chunk,
            flexible_chunks,
        }
    }
}

/// A flexible fragment: the whole subtree of one root dependent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chunk {
    pub relation: String,
    pub tokens: Vec<usize>,
}

/// Root chunk plus the flexible chunks rotation moves around it.
///
/// The root chunk holds the root phrase and every non-LOI dependent's
/// subtree. All chunks are disjoint, cover the sentence, and list ids in
/// ascending order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkDecomposition {
    pub root_chunk: Vec<usize>,
    pub flexible_chunks: Vec<Chunk>,
}

impl ChunkDecomposition {
    /// Number of flexible chunks.
    pub fn n(&self) -> usize {
        self.flexible_chunks.len()
    }

    /// Every chunk, root chunk included, ordered by first token position.
    /// This is the ordering rotation treats as the identity.
    pub fn chunks_in_surface_order(&self) -> Vec<&[usize]> {
        let mut chunks: Vec<&[usize]> = std::iter::once(self.root_chunk.as_slice())
            .chain(self.flexible_chunks.iter().map(|c| c.tokens.as_slice()))
            .filter(|c| !c.is_empty())
            .collect();
        chunks.sort_by_key(|c| c[0]);
        chunks
    }
}

impl fmt::Display for ChunkDecomposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "root {:?}", self.root_chunk)?;
        for chunk in &self.flexible_chunks {
            write!(f, " {} {:?}", chunk.relation, chunk.tokens)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conllu::{parse_conllu, Token};

    fn fig1a() -> Sentence {
        Sentence::new(vec![
            Token::new(1, "Babası", "NOUN", 5, "nsubj"),
            Token::new(2, "ona", "PRON", 5, "iobj"),
            Token::new(3, "bir", "DET", 4, "det"),
            Token::new(4, "mektup", "NOUN", 5, "obj"),
            Token::new(5, "yazdı", "VERB", 0, "root"),
        ])
    }

    fn build(rows: &[(&str, usize, &str)]) -> Sentence {
        Sentence::new(
            rows.iter()
                .enumerate()
                .map(|(i, &(form, head, rel))| Token::new(i + 1, form, "X", head, rel))
                .collect(),
        )
    }

    #[test]
    fn figure_tree() {
        let s = fig1a();
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.root_id(), 5);
        assert_eq!(t.children(5).unwrap(), &[1, 2, 4]);
        assert_eq!(t.children(4).unwrap(), &[3]);
        assert!(t.children(1).unwrap().is_empty());
    }

    #[test]
    fn single_token_tree() {
        let s = build(&[("yazdı", 0, "root")]);
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.root_id(), 1);
        assert!(t.children(1).unwrap().is_empty());
        assert_eq!(t.root_phrase(&LabelConfig::default()), vec![1]);
    }

    #[test]
    fn cyclic_input_rejected() {
        let s = build(&[("a", 2, "dep"), ("b", 1, "dep")]);
        assert!(matches!(DepTree::build(&s), Err(TreeError::Invalid(_))));
    }

    #[test]
    fn subtrees() {
        let s = fig1a();
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.subtree_tokens(4).unwrap(), vec![3, 4]);
        assert_eq!(t.subtree_tokens(1).unwrap(), vec![1]);
        assert_eq!(t.subtree_tokens(3).unwrap(), vec![3]);
        assert_eq!(t.subtree_tokens(5).unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(t.subtree_tokens(6), Err(TreeError::UnknownToken(6)));
        assert_eq!(t.subtree_tokens(0), Err(TreeError::UnknownToken(0)));
    }

    #[test]
    fn figure_loi_dependents() {
        let s = fig1a();
        let t = DepTree::build(&s).unwrap();
        assert_eq!(
            t.loi_dependents(&LabelConfig::default()),
            vec![
                (1, "nsubj".to_owned()),
                (2, "iobj".to_owned()),
                (4, "obj".to_owned())
            ]
        );
    }

    #[test]
    fn legacy_dobj_is_an_object() {
        let mut s = fig1a();
        s.tokens[3].deprel = "dobj".to_owned();
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.loi_dependents(&LabelConfig::default()).len(), 3);
    }

    #[test]
    fn subtype_matching() {
        let s = build(&[("it", 3, "nsubj:pass"), ("was", 3, "aux:pass"), ("written", 0, "root")]);
        let t = DepTree::build(&s).unwrap();
        let mut cfg = LabelConfig::default();
        // Oracle: base label is the prefix before ':'.
        let expected: Vec<usize> = s
            .tokens
            .iter()
            .filter(|tok| tok.head == 3 && cfg.loi.contains(tok.deprel.split(':').next().unwrap()))
            .map(|tok| tok.id)
            .collect();
        let got: Vec<usize> = t.loi_dependents(&cfg).into_iter().map(|(id, _)| id).collect();
        assert_eq!(got, expected);
        assert_eq!(got, vec![1]);

        cfg.match_subtypes = false;
        assert!(t.loi_dependents(&cfg).is_empty());
    }

    #[test]
    fn no_loi_children() {
        let s = build(&[("quickly", 2, "advmod"), ("ran", 0, "root"), (".", 2, "punct")]);
        let t = DepTree::build(&s).unwrap();
        let cfg = LabelConfig::default();
        assert!(t.loi_dependents(&cfg).is_empty());
        let d = t.extract_chunks(&cfg);
        assert_eq!(d.root_chunk, vec![1, 2, 3]);
        assert_eq!(d.n(), 0);
    }

    #[test]
    fn root_phrase_closure() {
        // Root "doctor" with copula "is", which has a fixed child.
        let s = build(&[("is", 3, "cop"), ("indeed", 1, "fixed"), ("doctor", 0, "root")]);
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.root_phrase(&LabelConfig::default()), vec![1, 2, 3]);

        let s = fig1a();
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.root_phrase(&LabelConfig::default()), vec![5]);
    }

    #[test]
    fn root_phrase_stops_at_other_relations() {
        // "New York" flat under root, but "big" amod under York is not part of it.
        let s = build(&[
            ("big", 3, "amod"),
            ("New", 0, "root"),
            ("York", 2, "flat"),
        ]);
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.root_phrase(&LabelConfig::default()), vec![2, 3]);
    }

    #[test]
    fn figure_chunks() {
        let s = fig1a();
        let t = DepTree::build(&s).unwrap();
        let d = t.extract_chunks(&LabelConfig::default());
        assert_eq!(d.root_chunk, vec![5]);
        let flex: Vec<(&str, &[usize])> = d
            .flexible_chunks
            .iter()
            .map(|c| (c.relation.as_str(), c.tokens.as_slice()))
            .collect();
        assert_eq!(
            flex,
            vec![("nsubj", &[1][..]), ("iobj", &[2][..]), ("obj", &[3, 4][..])]
        );
        assert_eq!(d.n(), 3);
    }

    #[test]
    fn punct_stays_with_root() {
        let s = build(&[("evde", 2, "obl"), ("kaldı", 0, "root"), (".", 2, "punct")]);
        let t = DepTree::build(&s).unwrap();
        let d = t.extract_chunks(&LabelConfig::default());
        assert_eq!(d.root_chunk, vec![2, 3]);
        assert_eq!(d.flexible_chunks.len(), 1);
        assert_eq!(d.flexible_chunks[0].tokens, vec![1]);
        assert_eq!(d.chunks_in_surface_order(), vec![&[1][..], &[2, 3][..]]);
    }

    #[test]
    fn nonprojective_chunks_are_id_sets() {
        // obj subtree {1,3} interleaves with the root chunk {2,4}.
        let s = build(&[("book", 2, "obj"), ("read", 0, "root"), ("old", 1, "amod"), (".", 2, "punct")]);
        let t = DepTree::build(&s).unwrap();
        let d = t.extract_chunks(&LabelConfig::default());
        assert_eq!(d.flexible_chunks[0].tokens, vec![1, 3]);
        assert_eq!(d.root_chunk, vec![2, 4]);
    }

    #[test]
    fn config_file() {
        let cfg: LabelConfig = "# labels\nloi = nsubj, obj\nroot_phrase = flat\nmatch_subtypes = false\naliases =\n"
            .parse()
            .unwrap();
        assert_eq!(cfg.loi, label_set(&["nsubj", "obj"]));
        assert_eq!(cfg.root_phrase, label_set(&["flat"]));
        assert!(!cfg.match_subtypes);
        assert!(cfg.aliases.is_empty());

        assert_eq!(
            "loi =".parse::<LabelConfig>(),
            Err(LabelConfigError::EmptySet("loi"))
        );
        assert_eq!(
            "loi = nsubj:pass".parse::<LabelConfig>(),
            Err(LabelConfigError::Subtyped("nsubj:pass".to_owned()))
        );
        assert!(matches!(
            "colour = blue".parse::<LabelConfig>(),
            Err(LabelConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            "loi = obj\nroot_phrase = obj".parse::<LabelConfig>(),
            Err(LabelConfigError::Overlap(_))
        ));
    }

    #[test]
    fn parsed_fixture_tree() {
        let text = "1\ta\t_\tX\t_\t_\t2\tnsubj\t_\t_\n2\tb\t_\tX\t_\t_\t0\troot\t_\t_\n";
        let s = parse_conllu(text).unwrap().remove(0);
        let t = DepTree::build(&s).unwrap();
        assert_eq!(t.loi_dependents(&LabelConfig::default()).len(), 1);
    }
}
