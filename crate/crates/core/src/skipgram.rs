//! Static character embeddings trained with skip-gram and negative sampling.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::container::ModelContainer;
use crate::data::{CharVocab, Corpus};
use crate::error::{Error, Result};
use crate::nn::{axpy, dot, sigmoid, ParamTensor, Params};

pub const COMPONENT: &str = "sgns";
pub const LEARNING_RATE: f64 = 0.025;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkipGramConfig {
    pub embed_dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            embed_dim: 64,
            window: 2,
            negatives: 5,
            epochs: 5,
            learning_rate: LEARNING_RATE,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkipGram {
    /// Rows returned by lookups.
    pub center: ParamTensor,
    pub context: ParamTensor,
}

/// (center, context) pairs for every position and every offset within
/// `window`, clipped at the sentence bounds.
pub fn skipgram_pairs(ids: &[usize], window: usize) -> Vec<(usize, usize)> {
    let n = ids.len();
    let mut pairs = Vec::new();
    for i in 0..n {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(n - 1);
        for j in lo..=hi {
            if j != i {
                pairs.push((ids[i], ids[j]));
            }
        }
    }
    pairs
}

impl SkipGram {
    /// Center rows uniform in `[-0.5/dim, 0.5/dim]`, context rows zero.
    pub fn new<R: Rng>(vocab_size: usize, embed_dim: usize, rng: &mut R) -> Self {
        let range = 0.5 / embed_dim as f64;
        Self {
            center: ParamTensor::uniform("sgns.center", &[vocab_size, embed_dim], range, rng),
            context: ParamTensor::zeros("sgns.context", &[vocab_size, embed_dim]),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.center.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.center.shape()[1]
    }

    pub fn embed_lookup(&self, id: usize) -> Result<&[f64]> {
        let v = self.vocab_size();
        if id >= v {
            return Err(Error::Index { index: id, limit: v });
        }
        let d = self.dim();
        Ok(&self.center.values[id * d..(id + 1) * d])
    }

    /// One positive update for `(center, context)` followed by the given
    /// negative updates, all at learning rate `lr`.
    fn update(&mut self, center: usize, context: usize, negatives: &[usize], lr: f64) {
        let d = self.dim();
        let v: Vec<f64> = self.center.values[center * d..(center + 1) * d].to_vec();
        let mut dv = vec![0.0; d];
        for (target, label) in std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0))) {
            let u = &mut self.context.values[target * d..(target + 1) * d];
            let g = lr * (label - sigmoid(dot(u, &v)));
            axpy(g, u, &mut dv);
            axpy(g, &v, u);
        }
        axpy(1.0, &dv, &mut self.center.values[center * d..(center + 1) * d]);
    }

    pub fn to_container(&self, vocab: &CharVocab) -> ModelContainer {
        let mut c = ModelContainer::new(COMPONENT);
        c.set_meta("vocab_size", self.vocab_size());
        c.set_meta("embed_dim", self.dim());
        c.push_params(self.params());
        c.vocab = vocab.to_tokens();
        c
    }

    pub fn from_container(c: &ModelContainer) -> Result<(Self, CharVocab)> {
        c.expect_component(COMPONENT)?;
        let v: usize = c.meta_parse("vocab_size")?;
        let d: usize = c.meta_parse("embed_dim")?;
        if v == 0 || d == 0 {
            return Err(Error::Format("empty embedding table".into()));
        }
        let mut model = Self {
            center: ParamTensor::zeros("sgns.center", &[v, d]),
            context: ParamTensor::zeros("sgns.context", &[v, d]),
        };
        c.load_params(model.params_mut())?;
        let vocab = CharVocab::from_tokens(&c.vocab)?;
        if vocab.len() != v {
            return Err(Error::Format(format!(
                "vocabulary has {} entries, table has {v} rows",
                vocab.len()
            )));
        }
        Ok((model, vocab))
    }
}

impl Params for SkipGram {
    fn params(&self) -> Vec<&ParamTensor> {
        vec![&self.center, &self.context]
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        vec![&mut self.center, &mut self.context]
    }
}

/// Negative sampler over `count^0.75`; never returns the excluded id.
pub struct NegativeSampler {
    dist: Option<WeightedIndex<f64>>,
    weights: Vec<f64>,
}

impl NegativeSampler {
    pub fn new(counts: &[usize]) -> Self {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(0.75)).collect();
        Self {
            dist: WeightedIndex::new(&weights).ok(),
            weights,
        }
    }

    /// Draws `k` ids different from `exclude`, resampling on collision. Returns
    /// fewer when no other id has mass.
    pub fn sample<R: Rng>(&self, k: usize, exclude: usize, rng: &mut R) -> Vec<usize> {
        let Some(dist) = &self.dist else {
            return Vec::new();
        };
        let others = self
            .weights
            .iter()
            .enumerate()
            .any(|(i, &w)| i != exclude && w > 0.0);
        if !others {
            return Vec::new();
        }
        (0..k)
            .map(|_| loop {
                let id = dist.sample(rng);
                if id != exclude {
                    break id;
                }
            })
            .collect()
    }
}

pub fn train_skipgram(corpus: &Corpus, vocab: &CharVocab, config: SkipGramConfig) -> Result<SkipGram> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot train embeddings on an empty corpus".into()));
    }
    if config.embed_dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = SkipGram::new(vocab.len(), config.embed_dim, &mut rng);
    let encoded: Vec<Vec<usize>> = corpus.iter().map(|s| vocab.encode(&s.chars)).collect();
    let mut counts = vec![0usize; vocab.len()];
    for id in encoded.iter().flatten() {
        counts[*id] += 1;
    }
    let sampler = NegativeSampler::new(&counts);
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            for (center, context) in skipgram_pairs(&encoded[i], config.window) {
                let negs = sampler.sample(config.negatives, context, &mut rng);
                model.update(center, context, &negs, config.learning_rate);
            }
        }
    }
    Ok(model)
}
