//! Small built-in treebanks for tests, examples and smoke runs.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::conllu::{Sentence, Token};
use crate::rng;

/// "Babası ona bir mektup yazdı" (her father wrote her a letter): a verb
/// with a subject, an indirect object and a determiner-modified object.
pub fn figure_sentence() -> Sentence {
    let mut s = Sentence::new(vec![
        Token::new(1, "Babası", "NOUN", 5, "nsubj"),
        Token::new(2, "ona", "PRON", 5, "iobj"),
        Token::new(3, "bir", "DET", 4, "det"),
        Token::new(4, "mektup", "NOUN", 5, "obj"),
        Token::new(5, "yazdı", "VERB", 0, "root"),
    ]);
    s.comments.push("# text = Babası ona bir mektup yazdı".to_owned());
    s
}

/// Five three-word sentences over the tags DET, NOUN and VERB.
pub fn tiny_tagging_corpus() -> Vec<Sentence> {
    [
        ["the", "dog", "runs"],
        ["a", "cat", "sleeps"],
        ["the", "bird", "sings"],
        ["a", "dog", "eats"],
        ["the", "cat", "runs"],
    ]
    .iter()
    .map(|words| {
        Sentence::new(vec![
            Token::new(1, words[0], "DET", 2, "det"),
            Token::new(2, words[1], "NOUN", 3, "nsubj"),
            Token::new(3, words[2], "VERB", 0, "root"),
        ])
    })
    .collect()
}

const NOUN_STEMS: [&str; 16] = [
    "kal", "mer", "tos", "bim", "dur", "fen", "gol", "hap", "jim", "lup", "nor", "pes", "rak", "sul",
    "tev", "vom",
];
const VERB_STEMS: [&str; 8] = ["yaz", "gel", "ok", "ver", "al", "gor", "bil", "sat"];
const TENSES: [&str; 4] = ["di", "ti", "ar", "ecek"];
const DETERMINERS: [&str; 4] = ["bir", "bu", "şu", "o"];

#[derive(Clone, Copy)]
enum Role {
    Subject,
    Object,
    IndirectObject,
    Oblique,
}

impl Role {
    fn relation(self) -> &'static str {
        match self {
            Role::Subject => "nsubj",
            Role::Object => "obj",
            Role::IndirectObject => "iobj",
            Role::Oblique => "obl",
        }
    }

    fn noun_suffix(self) -> &'static str {
        match self {
            Role::Subject => "",
            Role::Object => "u",
            Role::IndirectObject => "a",
            Role::Oblique => "de",
        }
    }

    fn pronouns(self) -> &'static [&'static str] {
        match self {
            Role::Subject => &["ben", "sen", "o"],
            Role::Object => &["beni", "seni", "onu"],
            Role::IndirectObject => &["bana", "sana", "ona"],
            Role::Oblique => &["bende", "sende", "onda"],
        }
    }
}

/// A phrase before head attachment: (form, upos, relation, index of the
/// head word within the phrase or `None` for the phrase head).
type Phrase = Vec<(String, &'static str, &'static str, Option<usize>)>;

fn argument<R: Rng>(role: Role, rng: &mut R) -> Phrase {
    if rng.gen_bool(0.25) {
        let form = role.pronouns().choose(rng).expect("non-empty");
        return vec![(form.to_string(), "PRON", role.relation(), None)];
    }
    let stem = NOUN_STEMS.choose(rng).expect("non-empty");
    let noun = (format!("{stem}{}", role.noun_suffix()), "NOUN", role.relation(), None);
    if rng.gen_bool(0.4) {
        let det = DETERMINERS.choose(rng).expect("non-empty");
        vec![(det.to_string(), "DET", "det", Some(1)), noun]
    } else {
        vec![noun]
    }
}

/// Sentences from a small case-marking grammar with free argument order:
/// a verb with up to four arguments (nsubj, obj, iobj, obl), optional
/// determiners, and sentence-final punctuation. Tags: NOUN, PRON, VERB,
/// DET, PUNCT.
pub fn synthetic_treebank(len: usize, seed: u64, id_prefix: &str) -> Vec<Sentence> {
    let mut rng = rng::seeded(seed);
    (0..len)
        .map(|i| {
            let mut phrases: Vec<Phrase> = Vec::new();
            for (role, prob) in [
                (Role::Subject, 0.85),
                (Role::Object, 0.6),
                (Role::IndirectObject, 0.3),
                (Role::Oblique, 0.4),
            ] {
                if rng.gen_bool(prob) {
                    phrases.push(argument(role, &mut rng));
                }
            }
            if phrases.is_empty() {
                phrases.push(argument(Role::Subject, &mut rng));
            }
            phrases.shuffle(&mut rng);

            let verb = format!(
                "{}{}",
                VERB_STEMS.choose(&mut rng).expect("non-empty"),
                TENSES.choose(&mut rng).expect("non-empty")
            );
            let verb_phrase: Phrase = vec![(verb, "VERB", "root", None)];
            let verb_at = if rng.gen_bool(0.7) {
                phrases.len()
            } else {
                rng.gen_range(0..=phrases.len())
            };
            phrases.insert(verb_at, verb_phrase);

            // Assign ids, then heads.
            let mut starts = Vec::with_capacity(phrases.len());
            let mut next = 1;
            for p in &phrases {
                starts.push(next);
                next += p.len();
            }
            let root_id = starts[verb_at];
            let mut tokens = Vec::new();
            for (p, &start) in phrases.iter().zip(&starts) {
                for (form, upos, rel, head_in_phrase) in p {
                    let head = match (head_in_phrase, *rel) {
                        (_, "root") => 0,
                        (Some(h), _) => start + h,
                        (None, _) => root_id,
                    };
                    tokens.push(Token::new(tokens.len() + 1, form, upos, head, rel));
                }
            }
            tokens.push(Token::new(tokens.len() + 1, ".", "PUNCT", root_id, "punct"));

            let mut s = Sentence::new(tokens);
            s.comments.push(format!("# sent_id = {id_prefix}-{}", i + 1));
            s.comments.push(format!("# text = {}", s.text()));
            s
        })
        .collect()
}
