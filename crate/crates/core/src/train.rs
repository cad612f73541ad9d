//! Mini-batch training with the set loss and evaluation helpers.
//!
//! Sentences of a batch are run on separate tapes in parallel; their
//! gradients are summed in batch order, so results do not depend on the
//! thread count. Dropout masks are drawn from a per-sentence stream
//! derived from the seed, the epoch and the sentence index.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Corpus, MatchingMode, Sentence};
use crate::decode::{extract_triples, ExtractedTriple, SpanWindow};
use crate::error::{Error, Result};
use crate::matching_loss::set_loss_on_tape;
use crate::metrics::{score, EvalReport};
use crate::model::TripleSetModel;
use crate::numerics::{AdamWConfig, OptimizerState, ParamGroup, ParamSet, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub encoder_learning_rate: f64,
    pub decoder_learning_rate: f64,
    pub seed: u64,
    /// `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub weight_decay: f64,
    /// Share of the training corpus held out for model selection. With 0
    /// the training corpus itself is used.
    pub dev_fraction: f64,
    /// Stop once the selection F1 reaches this value.
    pub target_f1: Option<f64>,
    /// Optional confidence threshold applied when decoding.
    pub threshold: Option<f64>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            batch_size: 8,
            encoder_learning_rate: 5e-4,
            decoder_learning_rate: 1e-3,
            seed: 1,
            clip_norm: Some(1.0),
            weight_decay: 0.01,
            dev_fraction: 0.1,
            target_f1: None,
            threshold: None,
        }
    }
}

impl TrainingConfig {
    /// Learning rates used for a pretrained encoder at full scale.
    pub fn pretrained_rates(self) -> Self {
        TrainingConfig {
            encoder_learning_rate: 1e-5,
            decoder_learning_rate: 2e-5,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.encoder_learning_rate > 0.0 && self.decoder_learning_rate > 0.0) {
            return Err(Error::invalid("learning rates must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(Error::invalid("dev fraction must lie in [0, 1)"));
        }
        if self.clip_norm.is_some_and(|c| c <= 0.0) {
            return Err(Error::invalid("clip norm must be positive"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::invalid("weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// One structured log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum LogRecord {
    Step {
        epoch: usize,
        step: u64,
        loss: f64,
        lr_encoder: f64,
        lr_decoder: f64,
        grad_norm: f64,
    },
    Epoch {
        epoch: usize,
        loss: f64,
        dev_f1: f64,
        best_f1: f64,
        improved: bool,
    },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best selection F1 (initial ones included).
    pub best_params: ParamSet,
    pub best_f1: f64,
    pub best_epoch: usize,
    /// Mean training loss per completed epoch.
    pub epoch_losses: Vec<f64>,
    pub dev_f1: Vec<f64>,
    pub log: Vec<LogRecord>,
}

fn stream_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    let mut x = seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(epoch as u64 + 1);
    x ^= (index as u64).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^ (x >> 31)
}

/// Loss value and parameter gradients of one sentence.
pub fn sentence_gradients(model: &TripleSetModel, sentence: &Sentence, tape: Tape) -> Result<(f64, Vec<Vec<f64>>)> {
    let b = model.bind(&tape);
    let (_, out) = model.forward(&tape, &b, &sentence.token_ids)?;
    let golds = sentence.gold_set(model.config().queries, model.config().null_relation(), 1)?;
    let (loss, _) = set_loss_on_tape(&tape, &golds, &out)?;
    let value = tape.item(loss);
    if !value.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    let mut grads = tape.backward(loss)?;
    let per_param = model
        .params()
        .ids()
        .map(|id| {
            grads
                .take(b.var(id))
                .unwrap_or_else(|| vec![0.0; model.params().tensor(id).len()])
        })
        .collect();
    Ok((value, per_param))
}

/// Extracted triples for every sentence (evaluation mode, word indices).
pub fn predict_corpus(model: &TripleSetModel, sentences: &[Sentence], threshold: Option<f64>) -> Result<Vec<Vec<ExtractedTriple>>> {
    sentences
        .par_iter()
        .map(|s| {
            let preds = model.predict(&s.token_ids)?;
            Ok(extract_triples(&preds, SpanWindow::between_markers(s.tokens.len()), threshold))
        })
        .collect()
}

pub fn evaluate(model: &TripleSetModel, sentences: &[Sentence], mode: MatchingMode, threshold: Option<f64>) -> Result<EvalReport> {
    let preds = predict_corpus(model, sentences, threshold)?;
    score(&preds, sentences, mode)
}

/// Checks that every sentence fits the model before any work is done.
pub fn check_corpus_fits(model: &TripleSetModel, corpus: &Corpus) -> Result<()> {
    let cfg = model.config();
    for s in &corpus.sentences {
        if s.tokens.len() + 2 > cfg.l_max {
            return Err(Error::TooLong {
                len: s.tokens.len() + 2,
                max: cfg.l_max,
            });
        }
        if s.triples.len() > cfg.queries {
            return Err(Error::TooManyTriples {
                sentence: s.text.clone(),
                count: s.triples.len(),
                m: cfg.queries,
            });
        }
        if let Some(t) = s.triples.iter().find(|t| t.relation >= cfg.null_relation()) {
            return Err(Error::invalid(format!(
                "relation index {} outside the model's {} real relations",
                t.relation,
                cfg.null_relation()
            )));
        }
    }
    Ok(())
}

/// Trains `model` in place on `train`, selecting the parameters with the
/// best F1 on `dev`. `on_log` sees every record as it is produced.
pub fn train(
    model: &mut TripleSetModel,
    train: &Corpus,
    dev: &Corpus,
    mode: MatchingMode,
    config: &TrainingConfig,
    mut on_log: impl FnMut(&LogRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_corpus_fits(model, train)?;
    check_corpus_fits(model, dev)?;
    if train.is_empty() {
        return Err(Error::invalid("training corpus is empty"));
    }
    let rates: Vec<f64> = model
        .params()
        .ids()
        .map(|id| match model.params().group(id) {
            ParamGroup::Encoder => config.encoder_learning_rate,
            ParamGroup::Decoder => config.decoder_learning_rate,
        })
        .collect();
    let mut optimizer = OptimizerState::new(
        AdamWConfig {
            learning_rate: config.decoder_learning_rate,
            weight_decay: config.weight_decay,
            clip_norm: config.clip_norm,
            ..AdamWConfig::default()
        },
        model.params().tensors(),
    );
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = Vec::new();
    let mut emit = |r: LogRecord, log: &mut Vec<LogRecord>| -> Result<()> {
        on_log(&r)?;
        log.push(r);
        Ok(())
    };

    let initial = evaluate(model, &dev.sentences, mode, config.threshold)?.overall.f1;
    let mut outcome = TrainOutcome {
        best_params: model.params().clone(),
        best_f1: initial,
        best_epoch: 0,
        epoch_losses: Vec::new(),
        dev_f1: Vec::new(),
        log: Vec::new(),
    };
    let reached = |f1: f64| config.target_f1.is_some_and(|t| f1 >= t);
    if reached(initial) {
        outcome.log = log;
        return Ok(outcome);
    }

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let results: Vec<(f64, Vec<Vec<f64>>)> = batch
                .par_iter()
                .map(|&i| {
                    let rng = ChaCha8Rng::seed_from_u64(stream_seed(config.seed, epoch, i));
                    sentence_gradients(model, &train.sentences[i], Tape::training(rng))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            let mut sums: Vec<Vec<f64>> = model.params().tensors().iter().map(|t| vec![0.0; t.len()]).collect();
            for (loss, grads) in &results {
                batch_loss += loss * scale;
                for (acc, g) in sums.iter_mut().zip(grads) {
                    for (a, x) in acc.iter_mut().zip(g) {
                        *a += x * scale;
                    }
                }
            }
            for (t, g) in model.params_mut().tensors_mut().iter_mut().zip(sums) {
                t.set_grad(g)?;
            }
            let stats = optimizer.step_with_rates(model.params_mut().tensors_mut(), &rates)?;
            epoch_loss += batch_loss * batch.len() as f64;
            emit(
                LogRecord::Step {
                    epoch,
                    step: stats.step,
                    loss: batch_loss,
                    lr_encoder: config.encoder_learning_rate,
                    lr_decoder: config.decoder_learning_rate,
                    grad_norm: stats.grad_norm,
                },
                &mut log,
            )?;
        }
        model.params_mut().zero_grads();
        let mean_loss = epoch_loss / train.len() as f64;
        let f1 = evaluate(model, &dev.sentences, mode, config.threshold)?.overall.f1;
        let improved = f1 > outcome.best_f1;
        if improved {
            outcome.best_f1 = f1;
            outcome.best_epoch = epoch;
            outcome.best_params = model.params().clone();
        }
        outcome.epoch_losses.push(mean_loss);
        outcome.dev_f1.push(f1);
        emit(
            LogRecord::Epoch {
                epoch,
                loss: mean_loss,
                dev_f1: f1,
                best_f1: outcome.best_f1,
                improved,
            },
            &mut log,
        )?;
        if reached(f1) {
            break;
        }
    }
    outcome.log = log;
    Ok(outcome)
}
