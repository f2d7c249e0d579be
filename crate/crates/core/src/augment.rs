//! Crop and rotate augmentation.
//!
//! *Crop* keeps one root dependent with a label of interest (and its whole
//! subtree) together with the root phrase, dropping everything else.
//! *Rotate* reorders whole chunks (see [`ChunkDecomposition`]) around the
//! root. With `n` flexible chunks there are `(n + 1)!` chunk orderings; rotation
//! draws `n` of the non-identity ones without replacement. Every candidate
//! output is then kept independently with probability `p`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use rand::Rng;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::conllu::{Sentence, Token};
use crate::deptree::{ChunkDecomposition, DepTree, LabelConfig, LabelConfigError, TreeError};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AugmentError {
    #[error("probability {0} is outside [0, 1]")]
    Probability(String),
    #[error("no augmentation operation selected")]
    NoOperations,
    #[error("token {0} is not a root dependent with a label of interest")]
    NotLoiDependent(usize),
    #[error("{0}! orderings do not fit in 64 bits")]
    OrderingOverflow(usize),
    #[error(transparent)]
    Labels(#[from] LabelConfigError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operation {
    Crop,
    Rotate,
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Operation::Crop => "crop",
            Operation::Rotate => "rotate",
        })
    }
}

impl FromStr for Operation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "crop" => Ok(Operation::Crop),
            "rotate" => Ok(Operation::Rotate),
            other => Err(format!("unknown operation `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub operations: BTreeSet<Operation>,
    /// Keep probability applied to every candidate crop or rotation.
    pub p: f64,
    pub seed: u64,
    /// Rotations sampled per sentence; `None` means `n`.
    pub max_rotations_per_sentence: Option<NonZeroUsize>,
    pub labels: LabelConfig,
    pub include_originals: bool,
    /// Keep root-attached `punct` subtrees in crops.
    pub keep_punct: bool,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            operations: [Operation::Crop, Operation::Rotate].into_iter().collect(),
            p: 1.0,
            seed: 0,
            max_rotations_per_sentence: None,
            labels: LabelConfig::default(),
            include_originals: true,
            keep_punct: false,
        }
    }
}

impl AugmentConfig {
    pub fn new(operation: Operation, p: f64, seed: u64) -> Self {
        AugmentConfig {
            operations: [operation].into_iter().collect(),
            p,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(AugmentError::Probability(self.p.to_string()));
        }
        if self.operations.is_empty() {
            return Err(AugmentError::NoOperations);
        }
        self.labels.validate()?;
        Ok(())
    }
}

/// Builds a new sentence from `ids` (old ids, in their new surface order),
/// renumbering tokens and remapping heads. Every kept token's head must be
/// kept too, or be the root attachment.
fn reassemble(tree: &DepTree<'_>, ids: &[usize]) -> Sentence {
    let source = tree.sentence();
    let mut new_id = vec![0usize; source.len() + 1];
    for (pos, &old) in ids.iter().enumerate() {
        new_id[old] = pos + 1;
    }
    let tokens: Vec<Token> = ids
        .iter()
        .map(|&old| {
            let mut token = source.tokens[old - 1].clone();
            token.id = new_id[old];
            if token.head != 0 {
                token.head = new_id[token.head];
                debug_assert!(token.head != 0, "head of kept token {old} was dropped");
            }
            token
        })
        .collect();
    let mut sentence = Sentence::new(tokens);
    sentence.comments.push(format!("# text = {}", sentence.text()));
    sentence
}

/// One cropped sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Crop {
    pub focus_id: usize,
    pub relation: String,
    pub sentence: Sentence,
}

/// Keeps the subtree of `focus_id` plus the root phrase, in surface order.
pub fn crop(
    tree: &DepTree<'_>,
    focus_id: usize,
    labels: &LabelConfig,
    keep_punct: bool,
) -> Result<Sentence, AugmentError> {
    let is_focus = tree
        .loi_dependents(labels)
        .iter()
        .any(|(id, _)| *id == focus_id);
    if !is_focus {
        return Err(AugmentError::NotLoiDependent(focus_id));
    }

    let mut kept = tree.subtree_tokens(focus_id)?;
    kept.extend(tree.root_phrase(labels));
    if keep_punct {
        for &child in tree.children(tree.root_id())? {
            if labels.normalize(tree.deprel(child)) == "punct" {
                kept.extend(tree.subtree_tokens(child)?);
            }
        }
    }
    kept.sort_unstable();
    kept.dedup();
    Ok(reassemble(tree, &kept))
}

/// One crop per root dependent with a label of interest, in surface order.
pub fn all_crops(tree: &DepTree<'_>, labels: &LabelConfig, keep_punct: bool) -> Vec<Crop> {
    tree.loi_dependents(labels)
        .into_iter()
        .map(|(focus_id, relation)| Crop {
            focus_id,
            sentence: crop(tree, focus_id, labels, keep_punct)
                .expect("foci come from loi_dependents"),
            relation,
        })
        .collect()
}

/// `(n + 1)!`: chunk orderings for `n` flexible chunks plus the root chunk.
pub fn count_orderings(decomposition: &ChunkDecomposition) -> Result<u64, AugmentError> {
    factorial(decomposition.n() + 1).ok_or(AugmentError::OrderingOverflow(decomposition.n() + 1))
}

fn factorial(k: usize) -> Option<u64> {
    (1..=k as u64).try_fold(1u64, |acc, i| acc.checked_mul(i))
}

/// The permutation of `0..len` at lexicographic position `rank`
/// (rank 0 is the identity).
pub fn unrank_permutation(mut rank: u64, len: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..len).collect();
    let mut out = Vec::with_capacity(len);
    for remaining in (1..=len).rev() {
        let block = factorial(remaining - 1).expect("caller bounds len");
        let pick = (rank / block) as usize;
        rank %= block;
        out.push(pool.remove(pick));
    }
    out
}

/// Lexicographic position of a permutation of `0..len`.
pub fn rank_permutation(perm: &[usize]) -> u64 {
    let mut pool: Vec<usize> = (0..perm.len()).collect();
    let mut rank = 0u64;
    for (i, &item) in perm.iter().enumerate() {
        let pos = pool.iter().position(|&x| x == item).expect("not a permutation");
        pool.remove(pos);
        rank += pos as u64 * factorial(perm.len() - 1 - i).expect("caller bounds len");
    }
    rank
}

/// Floyd's algorithm: `k` distinct values drawn uniformly from `lo..=hi`,
/// returned in ascending order.
pub fn sample_distinct<R: Rng + ?Sized>(rng: &mut R, lo: u64, hi: u64, k: usize) -> Vec<u64> {
    let size = hi - lo + 1;
    let k = (k as u64).min(size);
    let mut chosen = BTreeSet::new();
    for j in (size - k)..size {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(lo + t) {
            chosen.insert(lo + j);
        }
    }
    chosen.into_iter().collect()
}

/// One rotated sentence.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    /// Lexicographic rank of `ordering`; `None` when `(n + 1)!` overflows.
    pub permutation_index: Option<u64>,
    /// Positions into the surface-ordered chunk list.
    pub ordering: Vec<usize>,
    pub sentence: Sentence,
}

fn materialize(tree: &DepTree<'_>, chunks: &[&[usize]], ordering: &[usize]) -> Sentence {
    let ids: Vec<usize> = ordering.iter().flat_map(|&c| chunks[c].iter().copied()).collect();
    reassemble(tree, &ids)
}

/// Every non-identity rotation, in rank order. Intended for small `n`.
pub fn enumerate_rotations(tree: &DepTree<'_>, labels: &LabelConfig) -> Result<Vec<Rotation>, AugmentError> {
    let decomposition = tree.extract_chunks(labels);
    let chunks = decomposition.chunks_in_surface_order();
    let total = count_orderings(&decomposition)?;
    Ok((1..total)
        .map(|rank| {
            let ordering = unrank_permutation(rank, chunks.len());
            Rotation {
                permutation_index: Some(rank),
                sentence: materialize(tree, &chunks, &ordering),
                ordering,
            }
        })
        .collect())
}

/// Draws `min(limit, (n + 1)! - 1)` distinct non-identity chunk orderings,
/// where `limit` defaults to `n`, and materializes each one.
pub fn sample_rotations<R: Rng + ?Sized>(
    tree: &DepTree<'_>,
    cfg: &AugmentConfig,
    rng: &mut R,
) -> Vec<Rotation> {
    let decomposition = tree.extract_chunks(&cfg.labels);
    let n = decomposition.n();
    if n == 0 {
        return Vec::new();
    }
    let chunks = decomposition.chunks_in_surface_order();
    let limit = cfg.max_rotations_per_sentence.map_or(n, NonZeroUsize::get);

    match count_orderings(&decomposition) {
        Ok(total) => sample_distinct(rng, 1, total - 1, limit)
            .into_iter()
            .map(|rank| {
                let ordering = unrank_permutation(rank, chunks.len());
                Rotation {
                    permutation_index: Some(rank),
                    sentence: materialize(tree, &chunks, &ordering),
                    ordering,
                }
            })
            .collect(),
        Err(_) => {
            // More than 20 chunks: shuffle and reject repeats. Collisions are
            // astronomically unlikely at this size.
            let identity: Vec<usize> = (0..chunks.len()).collect();
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            while out.len() < limit {
                let mut ordering = identity.clone();
                ordering.shuffle(rng);
                if ordering != identity && seen.insert(ordering.clone()) {
                    out.push(Rotation {
                        permutation_index: None,
                        sentence: materialize(tree, &chunks, &ordering),
                        ordering,
                    });
                }
            }
            out
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Original,
    Crop { focus_id: usize, relation: String },
    Rotate { permutation_index: Option<u64>, ordering: Vec<usize> },
}

impl Origin {
    pub fn operation(&self) -> Option<Operation> {
        match self {
            Origin::Original => None,
            Origin::Crop { .. } => Some(Operation::Crop),
            Origin::Rotate { .. } => Some(Operation::Rotate),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Provenance {
    pub source_index: usize,
    pub origin: Origin,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AugmentedSentence {
    pub sentence: Sentence,
    pub provenance: Provenance,
}

fn with_provenance(mut sentence: Sentence, provenance: Provenance) -> AugmentedSentence {
    let mut comments = vec![format!("# source_index = {}", provenance.source_index)];
    match &provenance.origin {
        Origin::Original => unreachable!("originals are copied verbatim"),
        Origin::Crop { relation, .. } => {
            comments.push("# augmented = crop".to_owned());
            comments.push(format!("# focus = {relation}"));
        }
        Origin::Rotate {
            permutation_index,
            ordering,
        } => {
            comments.push("# augmented = rotate".to_owned());
            match permutation_index {
                Some(rank) => comments.push(format!("# permutation_index = {rank}")),
                None => comments.push(format!("# ordering = {ordering:?}")),
            }
        }
    }
    comments.append(&mut sentence.comments);
    sentence.comments = comments;
    AugmentedSentence {
        sentence,
        provenance,
    }
}

/// Synthetic sentences for the sentence at `index`, in emission order: kept
/// crops then kept rotations, exact duplicates removed.
pub fn augment_sentence(
    sentence: &Sentence,
    index: usize,
    cfg: &AugmentConfig,
) -> Vec<AugmentedSentence> {
    if !sentence.is_augmentation_eligible() {
        return Vec::new();
    }
    let tree = DepTree::build(sentence).expect("eligible sentences are valid trees");
    let mut out = Vec::new();

    if cfg.operations.contains(&Operation::Crop) {
        let mut gate = rng::substream(cfg.seed, index as u64, "crop");
        for c in all_crops(&tree, &cfg.labels, cfg.keep_punct) {
            if gate.gen_bool(cfg.p) {
                let origin = Origin::Crop {
                    focus_id: c.focus_id,
                    relation: c.relation,
                };
                out.push(with_provenance(c.sentence, Provenance { source_index: index, origin }));
            }
        }
    }

    if cfg.operations.contains(&Operation::Rotate) {
        let mut stream = rng::substream(cfg.seed, index as u64, "rotate");
        for r in sample_rotations(&tree, cfg, &mut stream) {
            if stream.gen_bool(cfg.p) {
                let origin = Origin::Rotate {
                    permutation_index: r.permutation_index,
                    ordering: r.ordering,
                };
                out.push(with_provenance(r.sentence, Provenance { source_index: index, origin }));
            }
        }
    }

    let mut seen = HashSet::new();
    out.retain(|a| {
        let key: Vec<(String, String)> = a
            .sentence
            .tokens
            .iter()
            .map(|t| (t.form.clone(), t.upos.clone()))
            .collect();
        seen.insert(key)
    });
    out
}

/// Augments a whole dataset. For each input sentence the original comes
/// first (when `include_originals`), followed by its synthetic sentences.
/// Ineligible sentences are copied unchanged. Output depends only on the
/// inputs and `cfg`, regardless of thread count.
pub fn augment_dataset(
    sentences: &[Sentence],
    cfg: &AugmentConfig,
) -> Result<Vec<AugmentedSentence>, AugmentError> {
    cfg.validate()?;
    let per_sentence: Vec<Vec<AugmentedSentence>> = sentences
        .par_iter()
        .enumerate()
        .map(|(index, sentence)| {
            let mut block = Vec::new();
            if cfg.include_originals || !sentence.is_augmentation_eligible() {
                block.push(AugmentedSentence {
                    sentence: sentence.clone(),
                    provenance: Provenance {
                        source_index: index,
                        origin: Origin::Original,
                    },
                });
            }
            block.extend(augment_sentence(sentence, index, cfg));
            block
        })
        .collect();
    Ok(per_sentence.into_iter().flatten().collect())
}

/// Counts over an augmentation result.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AugmentSummary {
    pub sentences_in: usize,
    pub ineligible: usize,
    pub originals: usize,
    pub crops: usize,
    pub rotations: usize,
}

impl AugmentSummary {
    pub fn new(input: &[Sentence], output: &[AugmentedSentence]) -> Self {
        let mut summary = AugmentSummary {
            sentences_in: input.len(),
            ineligible: input.iter().filter(|s| !s.is_augmentation_eligible()).count(),
            ..Default::default()
        };
        for a in output {
            match a.provenance.origin.operation() {
                None => summary.originals += 1,
                Some(Operation::Crop) => summary.crops += 1,
                Some(Operation::Rotate) => summary.rotations += 1,
            }
        }
        summary
    }
}

impl fmt::Display for AugmentSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "sentences_in={} ineligible={} originals={} crops={} rotations={}",
            self.sentences_in, self.ineligible, self.originals, self.crops, self.rotations
        )
    }
}
