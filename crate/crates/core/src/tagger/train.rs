use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::labels::{encode_labels, Label};
use super::model::{Segmenter, TaggerConfig};
use super::provider::{Features, Provider};
use crate::data::{Corpus, Sentence};
use crate::error::{Error, Result};
use crate::eval::score_f1;
use crate::nn::{clipped_step, Adam, AdamConfig, Params};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaggerTrainOptions {
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TaggerTrainOptions {
    fn default() -> Self {
        Self {
            epochs: 30,
            seed: 42,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean per-character training loss.
    pub train_loss: f64,
    pub valid_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TaggerTraining {
    /// Parameters of the selected epoch.
    pub model: Segmenter,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept; `None` when no epoch ran.
    pub best_epoch: Option<usize>,
}

/// Predicted segmentation of every sentence in `corpus`.
pub fn segment_corpus(model: &Segmenter, provider: &Provider, corpus: &Corpus) -> Result<Corpus> {
    let sentences = corpus
        .iter()
        .map(|s| {
            let spans = model.segment_chars(provider, &s.chars)?;
            Sentence::from_spans(s.chars.clone(), spans)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus {
        sentences,
        source: None,
        normalized: corpus.normalized,
    })
}

fn f1_of(model: &Segmenter, provider: &Provider, corpus: &Corpus) -> Result<f64> {
    Ok(score_f1(corpus, &segment_corpus(model, provider, corpus)?)?.f1)
}

/// One sentence per update. After every epoch the model is scored on
/// `valid` (or on `train` when `valid` is empty); the returned parameters
/// come from the best-scoring epoch, later epochs winning ties.
pub fn train_tagger(
    train: &Corpus,
    valid: &Corpus,
    provider: &Provider,
    config: TaggerConfig,
    options: TaggerTrainOptions,
) -> Result<TaggerTraining> {
    if train.is_empty() {
        return Err(Error::Config("cannot train a tagger on an empty corpus".into()));
    }
    if config.embedding_source != provider.source() || config.input_dim != provider.dim() {
        return Err(Error::Config(format!(
            "tagger config ({} input, dim {}) does not fit the provider ({}, dim {})",
            config.embedding_source,
            config.input_dim,
            provider.source(),
            provider.dim()
        )));
    }
    let examples: Vec<(Features, Vec<Label>)> = train
        .iter()
        .map(|s| Ok((provider.features(&s.chars)?, encode_labels(s)?)))
        .collect::<Result<_>>()?;
    let selection = if valid.is_empty() { train } else { valid };

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut model = Segmenter::new(config, provider.fingerprint(), &mut rng)?;
    let mut adam = Adam::new(options.adam);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(options.epochs);
    let mut best: Option<(f64, usize, Segmenter)> = None;
    let n_chars = train.num_chars().max(1) as f64;

    for epoch in 1..=options.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let (features, labels) = &examples[i];
            model.zero_grad();
            total += model.loss_and_grad(features, labels, Some(&mut rng))?;
            clipped_step(&mut model, &mut adam)?;
        }
        let valid_f1 = f1_of(&model, provider, selection)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / n_chars,
            valid_f1,
        };
        log::info!(
            "tagger epoch {epoch}: loss {:.4}, validation f1 {valid_f1:.4}",
            record.train_loss
        );
        history.push(record);
        if best.as_ref().is_none_or(|(f1, _, _)| valid_f1 >= *f1) {
            best = Some((valid_f1, epoch, model.clone()));
        }
    }

    Ok(match best {
        Some((_, epoch, m)) => TaggerTraining {
            model: m,
            history,
            best_epoch: Some(epoch),
        },
        None => TaggerTraining {
            model,
            history,
            best_epoch: None,
        },
    })
}
