use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Encoded, Model, ModelConfig, Params, Vocabulary, UNK};
use crate::corpus::NliExample;
use crate::error::{Error, Result};
use crate::ner::NerCategory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Per example and epoch, each distinct ordinary word is replaced by the
    /// unknown token in both sentences with this probability. Teaches the
    /// model what to do with words it has never seen.
    pub unk_dropout: f64,
    /// Same, for words the gazetteer tags as names.
    ///
    /// Numbers and dates are never dropped: their pools are shared by all
    /// splits, and an unknown token that stood for a changed number would
    /// look exactly like an unseen name that changed.
    pub name_dropout: f64,
    /// When set, a batch gradient whose global L2 norm exceeds this value is
    /// rescaled to it before the step.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 0.05,
            batch_size: 32,
            seed: 0,
            unk_dropout: 0.0,
            name_dropout: 0.0,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Input("batch size must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::Input(format!("learning rate must be finite and nonnegative, got {}", self.lr)));
        }
        for (name, p) in [("unk_dropout", self.unk_dropout), ("name_dropout", self.name_dropout)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Input(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Input(format!("clip_norm must be positive and finite, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean training loss over the epoch's updates.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub dev_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub metrics: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept; 0 means the initialization.
    pub best_epoch: usize,
}

pub(crate) fn accuracy(model: &Model, encoded: &[Encoded]) -> Result<f64> {
    let hits: Vec<bool> = encoded
        .par_iter()
        .map(|enc| model.predict_encoded(enc).map(|p| p.label == enc.gold))
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len().max(1) as f64)
}

fn drop_words<R: Rng>(enc: &Encoded, rate: &[f64], rng: &mut R) -> Encoded {
    let mut types: Vec<usize> = enc.premise.iter().chain(&enc.hypothesis).copied().filter(|&i| i != UNK).collect();
    types.sort_unstable();
    types.dedup();
    let dropped: Vec<usize> = types.into_iter().filter(|&t| rate[t] > 0.0 && rng.gen_bool(rate[t])).collect();
    if dropped.is_empty() {
        return enc.clone();
    }
    let map = |ids: &[usize]| ids.iter().map(|i| if dropped.contains(i) { UNK } else { *i }).collect();
    Encoded {
        premise: map(&enc.premise),
        hypothesis: map(&enc.hypothesis),
        ..enc.clone()
    }
}

/// Mini-batch gradient descent with a fixed step.
///
/// The training set is sorted before the seeded shuffle, so results depend on
/// the seed and the set's contents but not on input order. The vocabulary is
/// built from the training set. Returns the parameters of the epoch with the
/// best dev accuracy (earliest on ties), or of the last epoch when `dev` is
/// empty.
pub fn train(config: ModelConfig, train_set: &[NliExample], dev: &[NliExample], tc: &TrainConfig) -> Result<TrainOutcome> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    tc.validate()?;
    let mut sorted = train_set.to_vec();
    sorted.sort();

    let mut init_rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut order_rng = ChaCha8Rng::seed_from_u64(tc.seed);
    order_rng.set_stream(1);

    let mut model = Model::init(config, Vocabulary::build(&sorted), &mut init_rng)?;
    let train_enc: Vec<Encoded> = sorted.iter().map(|ex| model.encode(ex)).collect::<Result<_>>()?;
    let dev_enc: Vec<Encoded> = dev.iter().map(|ex| model.encode(ex)).collect::<Result<_>>()?;

    let rate: Vec<f64> = model
        .vocab
        .tokens()
        .iter()
        .map(|t| match model.gazetteer.tag(t) {
            NerCategory::Name => tc.name_dropout,
            NerCategory::Other => tc.unk_dropout,
            NerCategory::Numeric | NerCategory::Date => 0.0,
        })
        .collect();
    let mut metrics = Vec::with_capacity(tc.epochs);
    let mut best: Option<(f64, usize, Params)> = None;
    let mut order: Vec<usize> = (0..train_enc.len()).collect();
    let frozen = model.config.freeze_embeddings;

    for epoch in 1..=tc.epochs {
        order.shuffle(&mut order_rng);
        let mut loss_sum = 0.0;
        for (batch, chunk) in order.chunks(tc.batch_size).enumerate() {
            let mut acc = model.params.zeros_like();
            for &i in chunk {
                let enc = if tc.unk_dropout > 0.0 || tc.name_dropout > 0.0 {
                    drop_words(&train_enc[i], &rate, &mut order_rng)
                } else {
                    train_enc[i].clone()
                };
                let (loss, grads, _) = model.loss_and_grad(&enc)?;
                if !loss.is_finite() || !grads.is_finite() {
                    return Err(Error::NonFinite { epoch, batch, example: i });
                }
                loss_sum += loss;
                for (a, g) in acc.tensors_mut().into_iter().zip(grads.tensors()) {
                    a.axpy(1.0, g)?;
                }
            }
            let mut step = -tc.lr / chunk.len() as f64;
            if let Some(c) = tc.clip_norm {
                let norm = acc
                    .tensors()
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| !(frozen && *k == 0))
                    .flat_map(|(_, t)| t.data())
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
                    / chunk.len() as f64;
                if norm > c {
                    step *= c / norm;
                }
            }
            for (k, (p, g)) in model.params.tensors_mut().into_iter().zip(acc.tensors()).enumerate() {
                if frozen && k == 0 {
                    continue;
                }
                p.axpy(step, g)?;
            }
        }
        let train_accuracy = accuracy(&model, &train_enc)?;
        let dev_accuracy = if dev_enc.is_empty() { None } else { Some(accuracy(&model, &dev_enc)?) };
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train_enc.len() as f64,
            train_accuracy,
            dev_accuracy,
        });
        let score = dev_accuracy.unwrap_or(epoch as f64);
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, epoch, model.params.clone()));
        }
    }

    let best_epoch = match best {
        Some((_, epoch, params)) => {
            model.params = params;
            epoch
        }
        None => 0,
    };
    Ok(TrainOutcome {
        model,
        metrics,
        best_epoch,
    })
}
