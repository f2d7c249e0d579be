//! Character-composed word vectors, a word-level bi-LSTM and a softmax
//! output layer, with exact gradients for every parameter.
//!
//! For a word with character symbols `c_0..c_m` (start and end markers
//! included):
//!
//! ```text
//! hw_f, hw_b = final states of the forward / backward char LSTMs
//! w          = W_f hw_f + W_b hw_b + b
//! h_f, h_b   = word-level bi-LSTM states over w_1..w_n
//! p(tag_t)   = softmax(W_l [h_f; h_b] + b_l)
//! ```

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::linalg::{argmax, axpy, softmax, uniform_vec, Matrix};
use super::lstm::{Lstm, Trace};
use super::vocab::{CharVocab, TagVocab, UNK_INDEX};
use super::{TaggerConfig, TaggerError};
use crate::conllu::Sentence;
use crate::rng::{self, Rng};

/// Every trainable tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub char_embeddings: Matrix,
    pub char_fwd: Lstm,
    pub char_bwd: Lstm,
    /// `W_f`, word_embed_dim × char_hidden_dim.
    pub compose_fwd: Matrix,
    /// `W_b`, word_embed_dim × char_hidden_dim.
    pub compose_bwd: Matrix,
    pub compose_bias: Vec<f64>,
    pub word_fwd: Lstm,
    pub word_bwd: Lstm,
    /// `W_l`, num_tags × 2·word_hidden_dim.
    pub output: Matrix,
    pub output_bias: Vec<f64>,
}

/// Names of the tensors, in the order [`Params::tensors`] yields them.
pub const TENSOR_NAMES: [&str; 16] = [
    "char_embeddings",
    "char_fwd.w",
    "char_fwd.u",
    "char_fwd.b",
    "char_bwd.w",
    "char_bwd.u",
    "char_bwd.b",
    "compose_fwd",
    "compose_bwd",
    "compose_bias",
    "word_fwd.w",
    "word_fwd.u",
    "word_fwd.b",
    "word_bwd.w",
    "word_bwd.u",
    "word_bwd.b",
];

/// The output layer's two tensors follow the ones in [`TENSOR_NAMES`].
pub const OUTPUT_TENSOR_NAMES: [&str; 2] = ["output", "output_bias"];

impl Params {
    /// Uniform initialisation in `±range`, drawn in a fixed tensor order.
    pub fn init(cfg: &TaggerConfig, num_chars: usize, num_tags: usize, rng: &mut Rng) -> Self {
        let r = cfg.init_range;
        Params {
            char_embeddings: Matrix::uniform(num_chars, cfg.char_embed_dim, r, rng),
            char_fwd: Lstm::uniform(cfg.char_embed_dim, cfg.char_hidden_dim, r, rng),
            char_bwd: Lstm::uniform(cfg.char_embed_dim, cfg.char_hidden_dim, r, rng),
            compose_fwd: Matrix::uniform(cfg.word_embed_dim, cfg.char_hidden_dim, r, rng),
            compose_bwd: Matrix::uniform(cfg.word_embed_dim, cfg.char_hidden_dim, r, rng),
            compose_bias: uniform_vec(cfg.word_embed_dim, r, rng),
            word_fwd: Lstm::uniform(cfg.word_embed_dim, cfg.word_hidden_dim, r, rng),
            word_bwd: Lstm::uniform(cfg.word_embed_dim, cfg.word_hidden_dim, r, rng),
            output: Matrix::uniform(num_tags, 2 * cfg.word_hidden_dim, r, rng),
            output_bias: uniform_vec(num_tags, r, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.fill(0.0);
        z
    }

    pub fn fill(&mut self, value: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = value);
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let p = self;
        let data = [
            p.char_embeddings.data.as_slice(),
            &p.char_fwd.w.data,
            &p.char_fwd.u.data,
            &p.char_fwd.b,
            &p.char_bwd.w.data,
            &p.char_bwd.u.data,
            &p.char_bwd.b,
            &p.compose_fwd.data,
            &p.compose_bwd.data,
            &p.compose_bias,
            &p.word_fwd.w.data,
            &p.word_fwd.u.data,
            &p.word_fwd.b,
            &p.word_bwd.w.data,
            &p.word_bwd.u.data,
            &p.word_bwd.b,
            &p.output.data,
            &p.output_bias,
        ];
        TENSOR_NAMES
            .iter()
            .chain(&OUTPUT_TENSOR_NAMES)
            .copied()
            .zip(data)
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let p = self;
        let data = [
            p.char_embeddings.data.as_mut_slice(),
            &mut p.char_fwd.w.data,
            &mut p.char_fwd.u.data,
            &mut p.char_fwd.b,
            &mut p.char_bwd.w.data,
            &mut p.char_bwd.u.data,
            &mut p.char_bwd.b,
            &mut p.compose_fwd.data,
            &mut p.compose_bwd.data,
            &mut p.compose_bias,
            &mut p.word_fwd.w.data,
            &mut p.word_fwd.u.data,
            &mut p.word_fwd.b,
            &mut p.word_bwd.w.data,
            &mut p.word_bwd.u.data,
            &mut p.word_bwd.b,
            &mut p.output.data,
            &mut p.output_bias,
        ];
        TENSOR_NAMES
            .iter()
            .chain(&OUTPUT_TENSOR_NAMES)
            .copied()
            .zip(data)
            .collect()
    }

    /// Shape of each tensor, matrices as `[rows, cols]` and vectors as `[len]`.
    pub fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let m = |x: &Matrix| vec![x.rows, x.cols];
        let l = |x: &Lstm| [m(&x.w), m(&x.u), vec![x.b.len()]];
        let p = self;
        let mut shapes = vec![m(&p.char_embeddings)];
        shapes.extend(l(&p.char_fwd));
        shapes.extend(l(&p.char_bwd));
        shapes.extend([m(&p.compose_fwd), m(&p.compose_bwd), vec![p.compose_bias.len()]]);
        shapes.extend(l(&p.word_fwd));
        shapes.extend(l(&p.word_bwd));
        shapes.extend([m(&p.output), vec![p.output_bias.len()]]);
        TENSOR_NAMES
            .iter()
            .chain(&OUTPUT_TENSOR_NAMES)
            .copied()
            .zip(shapes)
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Euclidean norm over all tensors together.
    pub fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Sources of randomness used only while training.
pub struct TrainingNoise<'a> {
    pub rng: &'a mut Rng,
    pub dropout: f64,
    /// Probability of replacing a training-set singleton character with the
    /// unknown symbol.
    pub unk_replace: f64,
}

impl TrainingNoise<'_> {
    fn mask(&mut self, len: usize) -> Option<Vec<f64>> {
        if self.dropout <= 0.0 {
            return None;
        }
        let keep = 1.0 / (1.0 - self.dropout);
        let rate = self.dropout;
        Some(
            (0..len)
                .map(|_| if self.rng.gen_bool(rate) { 0.0 } else { keep })
                .collect(),
        )
    }
}

struct WordState {
    chars: Vec<usize>,
    fwd: Trace,
    bwd: Trace,
}

struct ForwardState {
    words: Vec<WordState>,
    input_masks: Option<Vec<Vec<f64>>>,
    fwd: Trace,
    bwd: Trace,
    features: Vec<Vec<f64>>,
    feature_masks: Option<Vec<Vec<f64>>>,
    probs: Vec<Vec<f64>>,
}

/// Result of [`nll_loss`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NllLoss {
    pub value: f64,
    /// Gold probabilities that had to be floored at [`PROB_FLOOR`].
    pub clamped: usize,
}

pub const PROB_FLOOR: f64 = 1e-12;

/// `−Σ_t log p_t(gold_t)`.
pub fn nll_loss(probs: &[Vec<f64>], gold: &[usize]) -> Result<NllLoss, TaggerError> {
    if probs.len() != gold.len() {
        return Err(TaggerError::LengthMismatch {
            predicted: probs.len(),
            gold: gold.len(),
        });
    }
    let mut value = 0.0;
    let mut clamped = 0;
    for (row, &g) in probs.iter().zip(gold) {
        let mut p = row[g];
        if p < PROB_FLOOR {
            p = PROB_FLOOR;
            clamped += 1;
        }
        value -= p.ln();
    }
    Ok(NllLoss { value, clamped })
}

/// Clips `grads` to `clip_norm` (global norm), then applies `θ ← θ − lr·g`.
/// Returns the norm before clipping. Nothing is updated if a gradient is
/// not finite.
pub fn sgd_step(params: &mut Params, grads: &Params, lr: f64, clip_norm: f64) -> Result<f64, TaggerError> {
    for (name, t) in grads.tensors() {
        if let Some(pos) = t.iter().position(|v| !v.is_finite()) {
            return Err(TaggerError::NonFiniteGradient {
                tensor: name.to_owned(),
                index: pos,
            });
        }
    }
    let norm = grads.global_norm();
    let scale = if clip_norm > 0.0 && norm > clip_norm {
        clip_norm / norm
    } else {
        1.0
    };
    for ((_, p), (_, g)) in params.tensors_mut().into_iter().zip(grads.tensors()) {
        axpy(-lr * scale, g, p);
    }
    Ok(norm)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub config: TaggerConfig,
    pub chars: CharVocab,
    pub tags: TagVocab,
    pub params: Params,
}

impl TaggerModel {
    /// Builds vocabularies from `train` and initialises parameters from
    /// `cfg.seed`.
    pub fn new(train: &[Sentence], cfg: &TaggerConfig) -> Result<Self, TaggerError> {
        if train.iter().all(Sentence::is_empty) {
            return Err(TaggerError::EmptyTrainingSet);
        }
        Ok(Self::with_vocab(
            CharVocab::from_sentences(train),
            TagVocab::from_sentences(train),
            cfg,
        ))
    }

    pub fn with_vocab(chars: CharVocab, tags: TagVocab, cfg: &TaggerConfig) -> Self {
        let mut init_rng = rng::substream(cfg.seed, 0, "tagger-init");
        let params = Params::init(cfg, chars.len(), tags.len(), &mut init_rng);
        TaggerModel {
            config: cfg.clone(),
            chars,
            tags,
            params,
        }
    }

    fn encode_chars(&self, form: &str, noise: Option<&mut TrainingNoise<'_>>) -> Vec<usize> {
        let mut chars = self.chars.encode(form);
        if let Some(noise) = noise {
            if noise.unk_replace > 0.0 {
                for c in chars.iter_mut() {
                    if self.chars.is_singleton(*c) && noise.rng.gen_bool(noise.unk_replace) {
                        *c = UNK_INDEX;
                    }
                }
            }
        }
        chars
    }

    fn run_char_lstms(&self, chars: Vec<usize>) -> WordState {
        let emb = &self.params.char_embeddings;
        let fwd = self.params.char_fwd.forward(chars.iter().map(|&c| emb.row(c)));
        let bwd = self.params.char_bwd.forward(chars.iter().rev().map(|&c| emb.row(c)));
        WordState { chars, fwd, bwd }
    }

    fn compose(&self, state: &WordState) -> Vec<f64> {
        let p = &self.params;
        let mut w = p.compose_bias.clone();
        p.compose_fwd.matvec_acc(state.fwd.last_hidden(), &mut w);
        p.compose_bwd.matvec_acc(state.bwd.last_hidden(), &mut w);
        w
    }

    /// Word vector `W_f·hw_f + W_b·hw_b + b` for a surface form.
    pub fn compose_word(&self, form: &str) -> Vec<f64> {
        let state = self.run_char_lstms(self.chars.encode(form));
        self.compose(&state)
    }

    fn forward(&self, sentence: &Sentence, mut noise: Option<&mut TrainingNoise<'_>>) -> ForwardState {
        let p = &self.params;
        let words: Vec<WordState> = sentence
            .forms()
            .map(|form| {
                let chars = self.encode_chars(form, noise.as_deref_mut());
                self.run_char_lstms(chars)
            })
            .collect();

        let mut inputs: Vec<Vec<f64>> = words.iter().map(|w| self.compose(w)).collect();
        let input_masks = noise.as_deref_mut().and_then(|nz| {
            inputs
                .iter()
                .map(|x| nz.mask(x.len()))
                .collect::<Option<Vec<_>>>()
        });
        if let Some(masks) = &input_masks {
            for (x, m) in inputs.iter_mut().zip(masks) {
                x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
            }
        }

        let fwd = p.word_fwd.forward(inputs.iter().map(Vec::as_slice));
        let bwd = p.word_bwd.forward(inputs.iter().rev().map(Vec::as_slice));
        let n = inputs.len();

        let mut features: Vec<Vec<f64>> = (0..n)
            .map(|t| {
                let mut f = fwd.hidden(t).to_vec();
                f.extend_from_slice(bwd.hidden(n - 1 - t));
                f
            })
            .collect();
        let feature_masks = noise.and_then(|nz| {
            features
                .iter()
                .map(|x| nz.mask(x.len()))
                .collect::<Option<Vec<_>>>()
        });
        if let Some(masks) = &feature_masks {
            for (x, m) in features.iter_mut().zip(masks) {
                x.iter_mut().zip(m).for_each(|(v, k)| *v *= k);
            }
        }

        let probs = features
            .iter()
            .map(|f| {
                let mut logits = p.output_bias.clone();
                p.output.matvec_acc(f, &mut logits);
                softmax(&logits)
            })
            .collect();

        ForwardState {
            words,
            input_masks,
            fwd,
            bwd,
            features,
            feature_masks,
            probs,
        }
    }

    /// Per-token tag distributions, without dropout.
    pub fn encode_and_predict(&self, sentence: &Sentence) -> Vec<Vec<f64>> {
        self.forward(sentence, None).probs
    }

    /// Most probable tag index per token.
    pub fn predict(&self, sentence: &Sentence) -> Vec<usize> {
        self.encode_and_predict(sentence)
            .iter()
            .map(|p| argmax(p))
            .collect()
    }

    pub fn predict_tags(&self, sentence: &Sentence) -> Vec<&str> {
        self.predict(sentence)
            .into_iter()
            .map(|i| self.tags.tag(i))
            .collect()
    }

    /// Gold tag indices, failing on tags outside the vocabulary.
    pub fn gold_indices(&self, sentence: &Sentence) -> Result<Vec<usize>, TaggerError> {
        sentence
            .tokens
            .iter()
            .map(|t| {
                self.tags
                    .index(&t.upos)
                    .ok_or_else(|| TaggerError::UnknownTag(t.upos.clone()))
            })
            .collect()
    }

    /// Deterministic loss (no dropout, no symbol noise).
    pub fn loss(&self, sentence: &Sentence, gold: &[usize]) -> Result<NllLoss, TaggerError> {
        nll_loss(&self.encode_and_predict(sentence), gold)
    }

    /// Forward and backward pass for one sentence. Gradients of the summed
    /// negative log-likelihood are added into `grads`.
    pub fn loss_and_gradients(
        &self,
        sentence: &Sentence,
        gold: &[usize],
        grads: &mut Params,
        noise: Option<&mut TrainingNoise<'_>>,
    ) -> Result<NllLoss, TaggerError> {
        let state = self.forward(sentence, noise);
        let loss = nll_loss(&state.probs, gold)?;
        self.backward(&state, gold, grads);
        Ok(loss)
    }

    fn backward(&self, state: &ForwardState, gold: &[usize], grads: &mut Params) {
        let p = &self.params;
        let n = state.probs.len();
        let wh = p.word_fwd.hidden_size();

        // Softmax + NLL: d logits = p − onehot(gold).
        let mut d_fwd_h = vec![Vec::new(); n];
        let mut d_bwd_h = vec![Vec::new(); n];
        for t in 0..n {
            let mut d_logits = state.probs[t].clone();
            d_logits[gold[t]] -= 1.0;
            grads.output.outer_acc(&d_logits, &state.features[t]);
            axpy(1.0, &d_logits, &mut grads.output_bias);

            let mut d_feat = vec![0.0; 2 * wh];
            p.output.matvec_t_acc(&d_logits, &mut d_feat);
            if let Some(masks) = &state.feature_masks {
                d_feat.iter_mut().zip(&masks[t]).for_each(|(d, k)| *d *= k);
            }
            let back = d_feat.split_off(wh);
            d_fwd_h[t] = d_feat;
            // Backward LSTM step s reads word n-1-s.
            d_bwd_h[n - 1 - t] = back;
        }

        let d_in_fwd = p.word_fwd.backward(&state.fwd, &d_fwd_h, &mut grads.word_fwd);
        let d_in_bwd = p.word_bwd.backward(&state.bwd, &d_bwd_h, &mut grads.word_bwd);

        let ch = p.char_fwd.hidden_size();
        for t in 0..n {
            let mut d_word = d_in_fwd[t].clone();
            axpy(1.0, &d_in_bwd[n - 1 - t], &mut d_word);
            if let Some(masks) = &state.input_masks {
                d_word.iter_mut().zip(&masks[t]).for_each(|(d, k)| *d *= k);
            }

            let word = &state.words[t];
            grads.compose_fwd.outer_acc(&d_word, word.fwd.last_hidden());
            grads.compose_bwd.outer_acc(&d_word, word.bwd.last_hidden());
            axpy(1.0, &d_word, &mut grads.compose_bias);

            let steps = word.chars.len();
            let mut d_h = vec![vec![0.0; ch]; steps];
            p.compose_fwd.matvec_t_acc(&d_word, &mut d_h[steps - 1]);
            let d_emb_fwd = p.char_fwd.backward(&word.fwd, &d_h, &mut grads.char_fwd);

            d_h[steps - 1].iter_mut().for_each(|v| *v = 0.0);
            p.compose_bwd.matvec_t_acc(&d_word, &mut d_h[steps - 1]);
            let d_emb_bwd = p.char_bwd.backward(&word.bwd, &d_h, &mut grads.char_bwd);

            for (s, &c) in word.chars.iter().enumerate() {
                let row = grads.char_embeddings.row_mut(c);
                axpy(1.0, &d_emb_fwd[s], row);
                axpy(1.0, &d_emb_bwd[steps - 1 - s], row);
            }
        }
    }
}
