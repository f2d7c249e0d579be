//! Character-level bidirectional LSTM part-of-speech tagger.
//!
//! Words are composed from their characters by a bi-LSTM, a second bi-LSTM
//! runs over the word vectors, and a softmax layer predicts one tag per
//! token. Training minimises the sentence negative log-likelihood with plain
//! per-sentence SGD. Everything is `f64` and deterministic given the seed.

mod checkpoint;
pub mod linalg;
pub mod lstm;
pub mod model;
mod train;
pub mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError, CHECKPOINT_MAGIC};
pub use model::{nll_loss, sgd_step, NllLoss, Params, TaggerModel, TrainingNoise};
pub use train::{
    evaluate, train, train_with_scorer, AccuracyScorer, DevScorer, EpochRecord, Evaluation, History, Trained,
};

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("tag `{0}` is not in the tag vocabulary")]
    UnknownTag(String),
    #[error("{predicted} predictions for {gold} gold tags")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error("non-finite gradient in `{tensor}` at index {index}")]
    NonFiniteGradient { tensor: String, index: usize },
    #[error("epoch {epoch}, sentence {sentence}: {source}")]
    Diverged {
        epoch: usize,
        sentence: usize,
        source: Box<TaggerError>,
    },
    #[error("invalid tagger config: {0}")]
    Config(String),
}

/// How characters unseen in training get an embedding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnkStrategy {
    /// Unknown characters share an embedding that is never trained.
    None,
    /// Characters seen once in training are stochastically replaced by the
    /// unknown symbol so its embedding gets trained.
    Singletons,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub char_embed_dim: usize,
    /// Per direction.
    pub char_hidden_dim: usize,
    pub word_embed_dim: usize,
    /// Per direction.
    pub word_hidden_dim: usize,
    /// Parameters are drawn uniformly from `[-init_range, init_range]`.
    pub init_range: f64,
    pub lr_initial: f64,
    pub dropout_rate: f64,
    /// Global gradient-norm threshold; `0` disables clipping.
    pub clip_norm: f64,
    /// Consecutive non-improving epochs before stopping.
    pub early_stop_patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub unk_strategy: UnkStrategy,
    pub unk_replace_prob: f64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            char_embed_dim: 200,
            char_hidden_dim: 200,
            word_embed_dim: 200,
            word_hidden_dim: 200,
            init_range: 0.1,
            lr_initial: 1.0,
            dropout_rate: 0.5,
            clip_norm: 5.0,
            early_stop_patience: 3,
            max_epochs: 100,
            seed: 0,
            unk_strategy: UnkStrategy::Singletons,
            unk_replace_prob: 0.1,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<(), TaggerError> {
        let dims = [
            self.char_embed_dim,
            self.char_hidden_dim,
            self.word_embed_dim,
            self.word_hidden_dim,
        ];
        if dims.contains(&0) {
            return Err(TaggerError::Config("dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(TaggerError::Config(format!(
                "dropout rate {} is outside [0, 1)",
                self.dropout_rate
            )));
        }
        if self.lr_initial.is_nan() || self.lr_initial <= 0.0 {
            return Err(TaggerError::Config("initial learning rate must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.unk_replace_prob) {
            return Err(TaggerError::Config("unknown-symbol probability is outside [0, 1]".into()));
        }
        if self.early_stop_patience == 0 || self.max_epochs == 0 {
            return Err(TaggerError::Config("patience and max epochs must be positive".into()));
        }
        Ok(())
    }
}
