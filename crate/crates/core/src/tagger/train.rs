//! Per-sentence SGD with learning-rate halving and early stopping on a dev
//! score, plus token-accuracy evaluation.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::model::{sgd_step, Params, TaggerModel, TrainingNoise};
use super::{TaggerConfig, TaggerError, UnkStrategy};
use crate::conllu::Sentence;
use crate::rng;

/// Token accuracy on a labelled set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub correct: usize,
    pub total: usize,
    /// Gold tags missing from the model's tag vocabulary; always counted as
    /// errors.
    pub unknown_gold: usize,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Token accuracy of `model` on `test`, dropout off.
pub fn evaluate(model: &TaggerModel, test: &[Sentence]) -> Result<Evaluation, TaggerError> {
    let total: usize = test.iter().map(Sentence::len).sum();
    if total == 0 {
        return Err(TaggerError::EmptyTestSet);
    }
    let (correct, unknown_gold) = test
        .par_iter()
        .map(|s| {
            let predicted = model.predict(s);
            let mut correct = 0;
            let mut unknown = 0;
            for (token, &tag) in s.tokens.iter().zip(&predicted) {
                match model.tags.index(&token.upos) {
                    Some(g) if g == tag => correct += 1,
                    Some(_) => {}
                    None => unknown += 1,
                }
            }
            (correct, unknown)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(Evaluation {
        correct,
        total,
        unknown_gold,
    })
}

/// Scores a model on the development set after each epoch; higher is
/// better.
pub trait DevScorer {
    fn score(&mut self, model: &TaggerModel, dev: &[Sentence]) -> Result<f64, TaggerError>;
}

/// Dev token accuracy.
#[derive(Clone, Copy, Debug, Default)]
pub struct AccuracyScorer;

impl DevScorer for AccuracyScorer {
    fn score(&mut self, model: &TaggerModel, dev: &[Sentence]) -> Result<f64, TaggerError> {
        Ok(evaluate(model, dev)?.accuracy())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean negative log-likelihood per training token.
    pub train_loss: f64,
    pub dev_score: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    /// Dev score of the freshly initialised model.
    pub initial_dev_score: f64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (0 = initial parameters).
    pub best_epoch: usize,
    pub best_dev_score: f64,
    pub stopped_early: bool,
    /// Gold probabilities floored during loss computation.
    pub clamped_probabilities: usize,
}

impl History {
    /// `epoch\ttrain_loss\tdev_acc\tlr`, one row per epoch.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tdev_acc\tlr\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{}\t{:.6}\t{:.6}\t{}", r.epoch, r.train_loss, r.dev_score, r.lr);
        }
        out
    }

    pub fn learning_rates(&self) -> Vec<f64> {
        self.epochs.iter().map(|r| r.lr).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Trained {
    pub model: TaggerModel,
    pub history: History,
}

/// Trains with dev accuracy as the score. When `dev` is empty the training
/// set is scored instead.
pub fn train(model: TaggerModel, train: &[Sentence], dev: &[Sentence]) -> Result<Trained, TaggerError> {
    train_with_scorer(model, train, dev, &mut AccuracyScorer)
}

pub fn train_with_scorer<S: DevScorer + ?Sized>(
    mut model: TaggerModel,
    train: &[Sentence],
    dev: &[Sentence],
    scorer: &mut S,
) -> Result<Trained, TaggerError> {
    let cfg: TaggerConfig = model.config.clone();
    cfg.validate()?;

    let examples: Vec<(&Sentence, Vec<usize>)> = train
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| Ok((s, model.gold_indices(s)?)))
        .collect::<Result<_, TaggerError>>()?;
    if examples.is_empty() {
        return Err(TaggerError::EmptyTrainingSet);
    }
    let dev = if dev.iter().all(Sentence::is_empty) { train } else { dev };

    let mut order_rng = rng::substream(cfg.seed, 0, "tagger-order");
    let mut noise_rng = rng::substream(cfg.seed, 0, "tagger-noise");
    let unk_replace = match cfg.unk_strategy {
        UnkStrategy::None => 0.0,
        UnkStrategy::Singletons => cfg.unk_replace_prob,
    };

    let mut history = History {
        initial_dev_score: scorer.score(&model, dev)?,
        ..Default::default()
    };
    history.best_dev_score = history.initial_dev_score;
    let mut best: Params = model.params.clone();
    let mut lr = cfg.lr_initial;
    let mut bad_epochs = 0;
    let mut grads = model.params.zeros_like();
    let mut order: Vec<usize> = (0..examples.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut order_rng);
        let mut total_loss = 0.0;
        let mut tokens = 0usize;

        for &i in &order {
            let (sentence, gold) = &examples[i];
            grads.fill(0.0);
            let mut noise = TrainingNoise {
                rng: &mut noise_rng,
                dropout: cfg.dropout_rate,
                unk_replace,
            };
            let loss = model.loss_and_gradients(sentence, gold, &mut grads, Some(&mut noise))?;
            total_loss += loss.value;
            tokens += gold.len();
            history.clamped_probabilities += loss.clamped;
            sgd_step(&mut model.params, &grads, lr, cfg.clip_norm).map_err(|e| TaggerError::Diverged {
                epoch,
                sentence: i,
                source: Box::new(e),
            })?;
        }

        let score = scorer.score(&model, dev)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: total_loss / tokens as f64,
            dev_score: score,
            lr,
        });

        if score > history.best_dev_score {
            history.best_dev_score = score;
            history.best_epoch = epoch;
            best.clone_from(&model.params);
            bad_epochs = 0;
        } else {
            lr *= 0.5;
            bad_epochs += 1;
            if bad_epochs >= cfg.early_stop_patience {
                history.stopped_early = true;
                break;
            }
        }
    }

    model.params = best;
    Ok(Trained { model, history })
}
