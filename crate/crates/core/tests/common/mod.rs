#![allow(dead_code)]

use treeaug::conllu::{Sentence, Token};
use treeaug::tagger::vocab::{CharVocab, TagVocab, WORD_END, WORD_START};
use treeaug::tagger::{TaggerConfig, TaggerModel, UnkStrategy};

/// Config with small dimensions and no training noise.
pub fn toy_config(char_embed: usize, char_hidden: usize, word_embed: usize, word_hidden: usize) -> TaggerConfig {
    TaggerConfig {
        char_embed_dim: char_embed,
        char_hidden_dim: char_hidden,
        word_embed_dim: word_embed,
        word_hidden_dim: word_hidden,
        dropout_rate: 0.0,
        unk_strategy: UnkStrategy::None,
        ..TaggerConfig::default()
    }
}

/// Vocabulary {unk, start, end, a, b} and the given tags.
pub fn ab_model(cfg: &TaggerConfig, tags: &[&str]) -> TaggerModel {
    let chars = CharVocab::from_parts(vec!['\0', WORD_START, WORD_END, 'a', 'b'], vec![0, 0, 0, 1, 1]);
    let tags = TagVocab::new(tags.iter().map(|t| t.to_string()).collect());
    TaggerModel::with_vocab(chars, tags, cfg)
}

/// Element j of tensor k becomes `scale · sin(1 + 0.7 j + 1.3 k)`.
pub fn set_sinusoidal(model: &mut TaggerModel, scale: f64) {
    for (k, (_, tensor)) in model.params.tensors_mut().into_iter().enumerate() {
        for (j, v) in tensor.iter_mut().enumerate() {
            *v = scale * (1.0 + 0.7 * j as f64 + 1.3 * k as f64).sin();
        }
    }
}

pub fn sentence(words: &[(&str, &str)]) -> Sentence {
    Sentence::new(
        words
            .iter()
            .enumerate()
            .map(|(i, (form, tag))| Token::new(i + 1, form, tag, if i == 0 { 0 } else { 1 }, if i == 0 { "root" } else { "dep" }))
            .collect(),
    )
}

const RELATIONS: [&str; 14] = [
    "nsubj", "obj", "iobj", "obl", "nsubj:pass", "obl:tmod", "dobj", "det", "punct", "fixed", "flat", "cop", "amod",
    "case",
];

/// A random well-formed tree of `len` tokens. Heads are drawn so that every
/// token attaches to one placed earlier in a random order, which allows
/// non-projective structures.
pub fn random_tree(len: usize, seed: u64) -> Sentence {
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (1..=len).collect();
    order.shuffle(&mut rng);
    let mut heads = vec![0usize; len + 1];
    let mut rels = vec!["root"; len + 1];
    for i in 1..len {
        // Favour the root so it gets several dependents.
        let parent = if rng.gen_bool(0.5) { order[0] } else { order[rng.gen_range(0..i)] };
        heads[order[i]] = parent;
        rels[order[i]] = RELATIONS.choose(&mut rng).expect("non-empty");
    }
    Sentence::new(
        (1..=len)
            .map(|id| Token::new(id, &format!("w{id}"), if rels[id] == "punct" { "PUNCT" } else { "X" }, heads[id], rels[id]))
            .collect(),
    )
}
