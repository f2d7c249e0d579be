mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::num::NonZeroUsize;

use common::random_tree;
use proptest::prelude::*;
use treeaug::augment::{
    all_crops, augment_dataset, count_orderings, enumerate_rotations, rank_permutation, sample_distinct,
    sample_rotations, unrank_permutation, AugmentConfig, AugmentSummary, Operation, Origin,
};
use treeaug::conllu::Sentence;
use treeaug::deptree::{DepTree, LabelConfig};
use treeaug::fixtures::{figure_sentence, synthetic_treebank};
use treeaug::rng;

/// (form, deprel, head form) for every token: the tree up to word order.
fn arcs(s: &Sentence) -> Vec<(String, String, String)> {
    let mut out: Vec<_> = s
        .tokens
        .iter()
        .map(|t| {
            let head = if t.head == 0 { "ROOT".to_owned() } else { s.tokens[t.head - 1].form.clone() };
            (t.form.clone(), t.deprel.clone(), head)
        })
        .collect();
    out.sort();
    out
}

fn is_subsequence(small: &[&str], big: &[&str]) -> bool {
    let mut it = big.iter();
    small.iter().all(|w| it.any(|b| b == w))
}

fn trees() -> impl Strategy<Value = Sentence> {
    (1usize..14, any::<u64>()).prop_map(|(len, seed)| random_tree(len, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn chunks_partition_the_sentence(s in trees()) {
        let labels = LabelConfig::default();
        let tree = DepTree::build(&s).unwrap();
        let d = tree.extract_chunks(&labels);
        let mut all: Vec<usize> = d.chunks_in_surface_order().concat();
        all.sort_unstable();
        prop_assert_eq!(all, (1..=s.len()).collect::<Vec<_>>());
        prop_assert_eq!(d.n(), tree.loi_dependents(&labels).len());
        for (chunk, (id, _)) in d.flexible_chunks.iter().zip(tree.loi_dependents(&labels)) {
            prop_assert_eq!(&chunk.tokens, &tree.subtree_tokens(id).unwrap());
        }
        let root_phrase = tree.root_phrase(&labels);
        prop_assert!(root_phrase.iter().all(|t| d.root_chunk.contains(t)));
    }

    #[test]
    fn crops_are_valid_sub_sentences(s in trees(), keep_punct in any::<bool>()) {
        let labels = LabelConfig::default();
        let tree = DepTree::build(&s).unwrap();
        let source: Vec<&str> = s.forms().collect();
        let crops = all_crops(&tree, &labels, keep_punct);
        prop_assert_eq!(crops.len(), tree.loi_dependents(&labels).len());
        for c in crops {
            prop_assert!(c.sentence.validate().is_valid());
            let forms: Vec<&str> = c.sentence.forms().collect();
            prop_assert!(is_subsequence(&forms, &source));
            for id in tree.root_phrase(&labels).into_iter().chain(tree.subtree_tokens(c.focus_id).unwrap()) {
                prop_assert!(forms.contains(&s.tokens[id - 1].form.as_str()));
            }
            // Arcs between kept tokens survive unchanged.
            let kept: BTreeSet<_> = arcs(&c.sentence).into_iter().collect();
            let original: BTreeSet<_> = arcs(&s).into_iter().collect();
            prop_assert!(kept.is_subset(&original));
        }
    }

    #[test]
    fn rotations_preserve_the_tree(s in trees(), seed in any::<u64>()) {
        let cfg = AugmentConfig::new(Operation::Rotate, 1.0, seed);
        let tree = DepTree::build(&s).unwrap();
        let d = tree.extract_chunks(&cfg.labels);
        let rotations = sample_rotations(&tree, &cfg, &mut rng::seeded(seed));
        let expected = if d.n() == 0 { 0 } else { d.n().min(count_orderings(&d).unwrap() as usize - 1) };
        prop_assert_eq!(rotations.len(), expected);

        let identity: Vec<usize> = (0..d.chunks_in_surface_order().len()).collect();
        let mut seen = BTreeSet::new();
        for r in &rotations {
            prop_assert!(r.sentence.validate().is_valid());
            prop_assert_eq!(arcs(&r.sentence), arcs(&s));
            prop_assert_ne!(&r.ordering, &identity);
            prop_assert_eq!(r.permutation_index, Some(rank_permutation(&r.ordering)));
            prop_assert!(seen.insert(r.ordering.clone()));
        }
    }

    #[test]
    fn dataset_output_is_valid_and_deterministic(seed in any::<u64>(), p in 0.0f64..=1.0) {
        let bank: Vec<Sentence> = (0..8).map(|i| random_tree(3 + i, seed ^ i as u64)).collect();
        let cfg = AugmentConfig { p, seed, ..Default::default() };
        let out = augment_dataset(&bank, &cfg).unwrap();
        prop_assert_eq!(&out, &augment_dataset(&bank, &cfg).unwrap());
        prop_assert!(out.iter().all(|a| a.sentence.validate().is_valid()));
        let originals: Vec<&Sentence> = out
            .iter()
            .filter(|a| a.provenance.origin == Origin::Original)
            .map(|a| &a.sentence)
            .collect();
        prop_assert_eq!(originals, bank.iter().collect::<Vec<_>>());
        let summary = AugmentSummary::new(&bank, &out);
        prop_assert_eq!(summary.originals + summary.crops + summary.rotations, out.len());
    }

    #[test]
    fn ranking_inverts_unranking(len in 1usize..8, rank in any::<u64>()) {
        let total: u64 = (1..=len as u64).product();
        let rank = rank % total;
        let perm = unrank_permutation(rank, len);
        prop_assert_eq!(rank_permutation(&perm), rank);
    }

    #[test]
    fn floyd_sample_is_distinct_and_in_range(lo in 0u64..100, span in 0u64..50, k in 0usize..60, seed in any::<u64>()) {
        let hi = lo + span;
        let v = sample_distinct(&mut rng::seeded(seed), lo, hi, k);
        prop_assert_eq!(v.len(), k.min(span as usize + 1));
        prop_assert!(v.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(v.iter().all(|x| (lo..=hi).contains(x)));
    }
}

#[test]
fn unranking_is_lexicographic() {
    let all: Vec<Vec<usize>> = (0..6).map(|r| unrank_permutation(r, 3)).collect();
    assert_eq!(
        all,
        vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![1, 2, 0], vec![2, 0, 1], vec![2, 1, 0]]
    );
}

#[test]
fn floyd_is_uniform_over_subsets() {
    // Choosing 2 of {1..5}: 10 subsets, each with probability 0.1.
    let mut counts: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
    let mut r = rng::seeded(11);
    let trials = 20_000;
    for _ in 0..trials {
        *counts.entry(sample_distinct(&mut r, 1, 5, 2)).or_default() += 1;
    }
    assert_eq!(counts.len(), 10);
    let sd = (trials as f64 * 0.1 * 0.9).sqrt();
    for (subset, c) in counts {
        assert!((c as f64 - 2000.0).abs() < 4.0 * sd, "{subset:?}: {c}");
    }
}

#[test]
fn sampled_rotations_cover_the_enumeration() {
    let labels = LabelConfig::default();
    for (len, seed) in [(3, 1), (4, 2), (5, 3), (6, 7)] {
        let s = random_tree(len, seed);
        let tree = DepTree::build(&s).unwrap();
        if tree.extract_chunks(&labels).n() > 2 {
            continue;
        }
        let all: BTreeSet<Vec<usize>> = enumerate_rotations(&tree, &labels).unwrap().into_iter().map(|r| r.ordering).collect();
        let mut union = BTreeSet::new();
        for seed in 0..300 {
            let cfg = AugmentConfig::new(Operation::Rotate, 1.0, seed);
            union.extend(sample_rotations(&tree, &cfg, &mut rng::seeded(seed)).into_iter().map(|r| r.ordering));
        }
        assert_eq!(union, all);
    }
}

#[test]
fn rotation_cap_and_large_fallback() {
    // 22 flexible chunks: (n + 1)! overflows and the shuffle fallback is used.
    let mut tokens = Vec::new();
    for i in 1..=22 {
        tokens.push(treeaug::conllu::Token::new(i, &format!("a{i}"), "NOUN", 23, "obl"));
    }
    tokens.push(treeaug::conllu::Token::new(23, "v", "VERB", 0, "root"));
    let s = Sentence::new(tokens);
    let tree = DepTree::build(&s).unwrap();
    let mut cfg = AugmentConfig::new(Operation::Rotate, 1.0, 5);
    let r = sample_rotations(&tree, &cfg, &mut rng::seeded(5));
    assert_eq!(r.len(), 22);
    assert!(r.iter().all(|r| r.permutation_index.is_none() && r.sentence.validate().is_valid()));
    assert!(count_orderings(&tree.extract_chunks(&cfg.labels)).is_err());

    cfg.max_rotations_per_sentence = NonZeroUsize::new(3);
    assert_eq!(sample_rotations(&tree, &cfg, &mut rng::seeded(5)).len(), 3);

    let out = augment_dataset(&[s], &cfg).unwrap();
    assert!(out[1].sentence.comments.iter().any(|c| c.starts_with("# ordering = [")));
}

#[test]
fn provenance_comments() {
    let out = augment_dataset(&[figure_sentence()], &AugmentConfig::new(Operation::Rotate, 1.0, 3)).unwrap();
    assert_eq!(out.len(), 4);
    let c = &out[1].sentence.comments;
    assert_eq!(c[0], "# source_index = 0");
    assert_eq!(c[1], "# augmented = rotate");
    assert!(c[2].starts_with("# permutation_index = "));
    assert!(c[3].starts_with("# text = "));
}

#[test]
fn ineligible_sentences_pass_through() {
    let mut s = figure_sentence();
    s.nonstandard_lines.push(treeaug::conllu::NonstandardLine {
        position: 1,
        line: "1-2\tx\t_\t_\t_\t_\t_\t_\t_\t_".to_owned(),
    });
    let cfg = AugmentConfig {
        include_originals: false,
        ..Default::default()
    };
    let out = augment_dataset(&[s.clone()], &cfg).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].sentence, s);
}

#[test]
fn synthetic_treebank_crop_counts() {
    let bank = synthetic_treebank(200, 1, "train");
    let labels = LabelConfig::default();
    let expected: usize = bank
        .iter()
        .map(|s| DepTree::build(s).unwrap().loi_dependents(&labels).len())
        .sum();
    let out = augment_dataset(&bank, &AugmentConfig::new(Operation::Crop, 1.0, 0)).unwrap();
    assert_eq!(AugmentSummary::new(&bank, &out).crops, expected);
}
