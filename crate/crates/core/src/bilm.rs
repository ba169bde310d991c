//! Character-level bidirectional language model.
//!
//! Each character id is embedded and passed through a one-hidden-layer tanh
//! MLP to give a context-free token representation. Two stacked forward LSTM
//! layers read `BOS t1 .. tN`, two stacked backward layers read
//! `EOS tN .. t1`, and a single output projection (shared by both directions)
//! turns the top layer state into next/previous-character logits.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::container::ModelContainer;
use crate::data::{CharVocab, Corpus, BOS, EOS};
use crate::error::{Error, Result};
use crate::nn::{
    axpy, clipped_step, log_softmax, softmax_xent, Adam, AdamConfig, Linear, LstmCell, LstmTrace,
    ParamTensor, Params, INIT_RANGE,
};

pub const COMPONENT: &str = "bilm";
pub const NUM_LAYERS: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BiLmConfig {
    pub vocab_size: usize,
    /// Width of the context-free token representation.
    pub embed_dim: usize,
    /// Hidden width of each directional LSTM layer.
    pub lm_hidden_dim: usize,
    /// Width of every exposed layer; equals `2 * lm_hidden_dim`.
    pub projection_dim: usize,
}

impl BiLmConfig {
    pub fn new(vocab_size: usize, embed_dim: usize, lm_hidden_dim: usize) -> Self {
        Self {
            vocab_size,
            embed_dim,
            lm_hidden_dim,
            projection_dim: 2 * lm_hidden_dim,
        }
    }

    /// Desk-scale defaults: 64-wide tokens, 64 hidden units per direction.
    pub fn desk(vocab_size: usize) -> Self {
        Self::new(vocab_size, 64, 64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.lm_hidden_dim == 0 {
            return Err(Error::Config(format!("all BiLM dimensions must be positive: {self:?}")));
        }
        if self.projection_dim != 2 * self.lm_hidden_dim {
            return Err(Error::Config(format!(
                "projection_dim must equal 2 * lm_hidden_dim ({}), got {}",
                2 * self.lm_hidden_dim,
                self.projection_dim
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Per-position activations exposed to downstream tasks. All three layers
/// share `projection_dim`; `h1`/`h2` are `[forward; backward]` concatenations.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerActivations {
    pub x: Vec<Vec<f64>>,
    pub h1: Vec<Vec<f64>>,
    pub h2: Vec<Vec<f64>>,
}

impl LayerActivations {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    pub fn layers(&self) -> [&[Vec<f64>]; 3] {
        [&self.x, &self.h1, &self.h2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiLm {
    config: BiLmConfig,
    pub embedding: ParamTensor,
    pub token_hidden: Linear,
    pub token_out: Linear,
    pub forward: [LstmCell; NUM_LAYERS],
    pub backward: [LstmCell; NUM_LAYERS],
    /// Output projection shared by both directions.
    pub softmax: Linear,
}

struct TokenCache {
    ids: Vec<usize>,
    hidden: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
}

struct DirectionPass {
    l1: LstmTrace,
    l2: LstmTrace,
}

struct Pass {
    tokens: TokenCache,
    forward: DirectionPass,
    backward: DirectionPass,
}

impl BiLm {
    pub fn new(config: BiLmConfig, seed: u64) -> Result<Self> {
        Self::with_rng(config, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn with_rng(config: BiLmConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let BiLmConfig {
            vocab_size: v,
            embed_dim: e,
            lm_hidden_dim: h,
            ..
        } = config;
        Ok(Self {
            config,
            embedding: ParamTensor::uniform("bilm.embedding", &[v, e], INIT_RANGE, rng),
            token_hidden: Linear::new("bilm.token.hidden", e, e, rng),
            token_out: Linear::new("bilm.token.out", e, e, rng),
            forward: [
                LstmCell::new("bilm.fwd.l1", e, h, rng),
                LstmCell::new("bilm.fwd.l2", h, h, rng),
            ],
            backward: [
                LstmCell::new("bilm.bwd.l1", e, h, rng),
                LstmCell::new("bilm.bwd.l2", h, h, rng),
            ],
            softmax: Linear::new("bilm.softmax", h, v, rng),
        })
    }

    pub fn config(&self) -> &BiLmConfig {
        &self.config
    }

    pub fn exposed_dim(&self) -> usize {
        self.config.projection_dim
    }

    /// Zeroes the shared output projection, making every prediction uniform.
    pub fn zero_output_projection(&mut self) {
        self.softmax.zero_weights();
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::Contract("language model input must be non-empty".into()));
        }
        let limit = self.config.vocab_size;
        match ids.iter().find(|&&id| id >= limit) {
            Some(&index) => Err(Error::Index { index, limit }),
            None => Ok(()),
        }
    }

    fn tokens(&self, ids: &[usize]) -> TokenCache {
        let e = self.config.embed_dim;
        let mut hidden = Vec::with_capacity(ids.len());
        let mut x = Vec::with_capacity(ids.len());
        for &id in ids {
            let row = &self.embedding.values[id * e..(id + 1) * e];
            let a: Vec<f64> = self.token_hidden.apply(row).into_iter().map(f64::tanh).collect();
            x.push(self.token_out.apply(&a));
            hidden.push(a);
        }
        TokenCache {
            ids: ids.to_vec(),
            hidden,
            x,
        }
    }

    /// Context-free representation of each id, independent of its neighbours.
    pub fn token_representation(&self, ids: &[usize]) -> Result<Vec<Vec<f64>>> {
        let limit = self.config.vocab_size;
        if let Some(&index) = ids.iter().find(|&&id| id >= limit) {
            return Err(Error::Index { index, limit });
        }
        Ok(self.tokens(ids).x)
    }

    fn run_direction(&self, cells: &[LstmCell; NUM_LAYERS], xs: &[Vec<f64>]) -> Result<DirectionPass> {
        let l1 = cells[0].run(xs)?;
        let h1: Vec<Vec<f64>> = l1.outputs().map(<[f64]>::to_vec).collect();
        let l2 = cells[1].run(&h1)?;
        Ok(DirectionPass { l1, l2 })
    }

    /// Full pass over `BOS ids EOS`.
    fn pass(&self, ids: &[usize]) -> Result<Pass> {
        self.check_ids(ids)?;
        let n = ids.len();
        let mut full = Vec::with_capacity(n + 2);
        full.push(BOS);
        full.extend_from_slice(ids);
        full.push(EOS);
        let tokens = self.tokens(&full);
        let forward = self.run_direction(&self.forward, &tokens.x[..=n])?;
        let reversed: Vec<Vec<f64>> = tokens.x[1..].iter().rev().cloned().collect();
        let backward = self.run_direction(&self.backward, &reversed)?;
        Ok(Pass {
            tokens,
            forward,
            backward,
        })
    }

    /// Log-probabilities over the vocabulary at each position of `ids`.
    ///
    /// Forward: position `k` conditions on `BOS t1 .. t(k-1)`. Backward:
    /// position `k` conditions on `EOS tN .. t(k+1)`. Either way the row at
    /// `k` is the distribution for `t_k`.
    pub fn lm_logprobs(&self, ids: &[usize], direction: Direction) -> Result<Vec<Vec<f64>>> {
        let p = self.pass(ids)?;
        let n = ids.len();
        let rows = (0..n).map(|k| {
            let state = match direction {
                Direction::Forward => &p.forward.l2.steps[k].h,
                Direction::Backward => &p.backward.l2.steps[n - 1 - k].h,
            };
            log_softmax(&self.softmax.apply(state))
        });
        Ok(rows.collect())
    }

    /// Negative joint log-likelihood of both directions, summed over positions.
    pub fn loss(&self, ids: &[usize]) -> Result<f64> {
        let p = self.pass(ids)?;
        let n = ids.len();
        let mut total = 0.0;
        for j in 0..n {
            let lp = log_softmax(&self.softmax.apply(&p.forward.l2.steps[j].h));
            total -= lp[ids[j]];
            let lp = log_softmax(&self.softmax.apply(&p.backward.l2.steps[j].h));
            total -= lp[ids[n - 1 - j]];
        }
        Ok(total)
    }

    /// Loss with gradients accumulated into every parameter.
    pub fn loss_and_grad(&mut self, ids: &[usize]) -> Result<f64> {
        let p = self.pass(ids)?;
        let n = ids.len();
        let h = self.config.lm_hidden_dim;
        let mut total = 0.0;
        let mut d_fwd = vec![vec![0.0; h]; n + 1];
        let mut d_bwd = vec![vec![0.0; h]; n + 1];
        for j in 0..n {
            for (trace, target, dh) in [
                (&p.forward.l2, ids[j], &mut d_fwd[j]),
                (&p.backward.l2, ids[n - 1 - j], &mut d_bwd[j]),
            ] {
                let state = &trace.steps[j].h;
                let (loss, dlogits) = softmax_xent(&self.softmax.apply(state), target)?;
                total += loss;
                self.softmax.backward(state, &dlogits, Some(dh));
            }
        }

        let dx_fwd = backprop_direction(&mut self.forward, &p.forward, &d_fwd);
        let dx_bwd = backprop_direction(&mut self.backward, &p.backward, &d_bwd);
        // full = [BOS, t1..tN, EOS]; forward read full[0..=N], backward read full[N+1..=1]
        let mut dx = vec![vec![0.0; self.config.embed_dim]; n + 2];
        for (j, d) in dx_fwd.iter().enumerate() {
            axpy(1.0, d, &mut dx[j]);
        }
        for (j, d) in dx_bwd.iter().enumerate() {
            axpy(1.0, d, &mut dx[n + 1 - j]);
        }
        self.token_backward(&p.tokens, &dx);
        Ok(total)
    }

    fn token_backward(&mut self, cache: &TokenCache, dx: &[Vec<f64>]) {
        let e = self.config.embed_dim;
        for ((&id, a), d) in cache.ids.iter().zip(&cache.hidden).zip(dx) {
            let mut da = vec![0.0; e];
            self.token_out.backward(a, d, Some(&mut da));
            for (g, ai) in da.iter_mut().zip(a) {
                *g *= 1.0 - ai * ai;
            }
            let row: Vec<f64> = self.embedding.values[id * e..(id + 1) * e].to_vec();
            let grow = &mut self.embedding.grad[id * e..(id + 1) * e];
            self.token_hidden.backward(&row, &da, Some(grow));
        }
    }

    /// Token representation (tiled up to the exposed width) and both layer
    /// outputs at every position. Deterministic; no dropout.
    pub fn extract_layers(&self, ids: &[usize]) -> Result<LayerActivations> {
        let p = self.pass(ids)?;
        let n = ids.len();
        let dim = self.config.projection_dim;
        let e = self.config.embed_dim;
        let concat = |f: &LstmTrace, b: &LstmTrace, k: usize| {
            let mut v = f.steps[k + 1].h.clone();
            v.extend_from_slice(&b.steps[n - k].h);
            v
        };
        let mut acts = LayerActivations {
            x: Vec::with_capacity(n),
            h1: Vec::with_capacity(n),
            h2: Vec::with_capacity(n),
        };
        for k in 0..n {
            let x = &p.tokens.x[k + 1];
            acts.x.push((0..dim).map(|r| x[r % e]).collect());
            acts.h1.push(concat(&p.forward.l1, &p.backward.l1, k));
            acts.h2.push(concat(&p.forward.l2, &p.backward.l2, k));
        }
        Ok(acts)
    }

    pub fn to_container(&self, vocab: &CharVocab) -> ModelContainer {
        let mut c = ModelContainer::new(COMPONENT);
        c.set_meta("vocab_size", self.config.vocab_size);
        c.set_meta("embed_dim", self.config.embed_dim);
        c.set_meta("lm_hidden_dim", self.config.lm_hidden_dim);
        c.set_meta("projection_dim", self.config.projection_dim);
        c.push_params(self.params());
        c.vocab = vocab.to_tokens();
        c
    }

    pub fn from_container(c: &ModelContainer) -> Result<(Self, CharVocab)> {
        c.expect_component(COMPONENT)?;
        let config = BiLmConfig {
            vocab_size: c.meta_parse("vocab_size")?,
            embed_dim: c.meta_parse("embed_dim")?,
            lm_hidden_dim: c.meta_parse("lm_hidden_dim")?,
            projection_dim: c.meta_parse("projection_dim")?,
        };
        let mut model = Self::new(config, 0)?;
        c.load_params(model.params_mut())?;
        let vocab = CharVocab::from_tokens(&c.vocab)?;
        if vocab.len() != config.vocab_size {
            return Err(Error::Format(format!(
                "vocabulary has {} entries, model expects {}",
                vocab.len(),
                config.vocab_size
            )));
        }
        Ok((model, vocab))
    }
}

fn backprop_direction(
    cells: &mut [LstmCell; NUM_LAYERS],
    pass: &DirectionPass,
    d_top: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let [l1, l2] = cells;
    let d_h1 = l2.backward(&pass.l2, d_top);
    l1.backward(&pass.l1, &d_h1)
}

impl Params for BiLm {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p = vec![&self.embedding];
        p.extend(self.token_hidden.params());
        p.extend(self.token_out.params());
        for cell in self.forward.iter().chain(&self.backward) {
            p.extend(cell.params());
        }
        p.extend(self.softmax.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.token_hidden.params_mut());
        p.extend(self.token_out.params_mut());
        for cell in self.forward.iter_mut().chain(self.backward.iter_mut()) {
            p.extend(cell.params_mut());
        }
        p.extend(self.softmax.params_mut());
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiLmTrainOptions {
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for BiLmTrainOptions {
    fn default() -> Self {
        Self {
            epochs: 10,
            seed: 42,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BiLmTraining {
    pub model: BiLm,
    /// Mean per-prediction loss of each epoch (two predictions per character).
    pub epoch_losses: Vec<f64>,
}

/// Trains a freshly initialized model one sentence per update.
pub fn train_bilm(
    corpus: &Corpus,
    vocab: &CharVocab,
    config: BiLmConfig,
    options: BiLmTrainOptions,
) -> Result<BiLmTraining> {
    if corpus.is_empty() {
        return Err(Error::Config("cannot train a language model on an empty corpus".into()));
    }
    if config.vocab_size != vocab.len() {
        return Err(Error::Config(format!(
            "config vocab_size {} does not match vocabulary of {}",
            config.vocab_size,
            vocab.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut model = BiLm::with_rng(config, &mut rng)?;
    let encoded: Vec<Vec<usize>> = corpus.iter().map(|s| vocab.encode(&s.chars)).collect();
    let mut order: Vec<usize> = (0..encoded.len()).collect();
    let mut adam = Adam::new(options.adam);
    let mut epoch_losses = Vec::with_capacity(options.epochs);
    for epoch in 0..options.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for &i in &order {
            model.zero_grad();
            total += model.loss_and_grad(&encoded[i])?;
            count += 2 * encoded[i].len();
            clipped_step(&mut model, &mut adam)?;
        }
        let mean = total / count as f64;
        log::info!("bilm epoch {}: mean loss {mean:.4}", epoch + 1);
        epoch_losses.push(mean);
    }
    Ok(BiLmTraining {
        model,
        epoch_losses,
    })
}
