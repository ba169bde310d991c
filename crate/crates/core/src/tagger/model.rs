use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::labels::{decode_labels, Label};
use super::provider::{EmbeddingSource, Features, Provider};
use crate::container::ModelContainer;
use crate::data::{normalize_halfwidth, Span};
use crate::elmo::ElmoMixer;
use crate::error::{Error, Result};
use crate::nn::{softmax_xent, BiLstmTrace, BiLstm, Dropout, Linear, ParamTensor, Params};

pub const COMPONENT: &str = "tagger";
pub const NUM_BILSTMS: usize = 3;
pub const NUM_LABELS: usize = 2;

/// How the three Bi-LSTMs are wired.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Topology {
    /// Each Bi-LSTM reads the input; outputs are concatenated.
    #[default]
    Parallel,
    /// Each Bi-LSTM reads the previous one's output.
    Stacked,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::Parallel => "parallel",
            Topology::Stacked => "stacked",
        })
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Topology::Parallel),
            "stacked" => Ok(Topology::Stacked),
            other => Err(Error::Config(format!("unknown topology {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaggerConfig {
    pub input_dim: usize,
    /// Hidden units per direction in every Bi-LSTM.
    pub hidden_dim: usize,
    pub topology: Topology,
    pub dropout_rate: f64,
    pub embedding_source: EmbeddingSource,
}

impl TaggerConfig {
    /// Full-size defaults: 300 hidden units, dropout 0.33, parallel wiring.
    pub fn new(embedding_source: EmbeddingSource, input_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim: 300,
            topology: Topology::Parallel,
            dropout_rate: 0.33,
            embedding_source,
        }
    }

    pub fn for_provider(provider: &Provider) -> Self {
        Self::new(provider.source(), provider.dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(format!("tagger dimensions must be positive: {self:?}")));
        }
        Dropout::new(self.dropout_rate)?;
        Ok(())
    }

    fn output_input_dim(&self) -> usize {
        match self.topology {
            Topology::Parallel => NUM_BILSTMS * 2 * self.hidden_dim,
            Topology::Stacked => 2 * self.hidden_dim,
        }
    }
}

/// Three Bi-LSTM layers and a two-way output projection, plus the scalar mix
/// when reading language model layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Segmenter {
    config: TaggerConfig,
    pub layers: Vec<BiLstm>,
    pub output: Linear,
    pub mixer: Option<ElmoMixer>,
    provider_fingerprint: String,
}

struct ForwardPass {
    inputs: Vec<Vec<f64>>,
    traces: Vec<BiLstmTrace>,
    /// Dropout multipliers applied to the outputs of layers 1 and 2.
    masks: Vec<Option<Vec<Vec<f64>>>>,
    /// Input of the output projection at every position.
    top: Vec<Vec<f64>>,
    logits: Vec<[f64; NUM_LABELS]>,
}

impl Segmenter {
    pub fn new(config: TaggerConfig, provider_fingerprint: impl Into<String>, rng: &mut ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let layers = (0..NUM_BILSTMS)
            .map(|l| {
                let input = match (config.topology, l) {
                    (Topology::Stacked, l) if l > 0 => 2 * h,
                    _ => config.input_dim,
                };
                BiLstm::new(&format!("tagger.l{}", l + 1), input, h, rng)
            })
            .collect();
        let output = Linear::new("tagger.output", config.output_input_dim(), NUM_LABELS, rng);
        let mixer = (config.embedding_source == EmbeddingSource::Elmo).then(ElmoMixer::new);
        Ok(Self {
            config,
            layers,
            output,
            mixer,
            provider_fingerprint: provider_fingerprint.into(),
        })
    }

    pub fn config(&self) -> &TaggerConfig {
        &self.config
    }

    pub fn provider_fingerprint(&self) -> &str {
        &self.provider_fingerprint
    }

    pub fn zero_output_projection(&mut self) {
        self.output.zero_weights();
    }

    /// Per-position input vectors: static rows as given, or the scalar mix of
    /// the language model layers.
    pub fn inputs(&self, features: &Features) -> Result<Vec<Vec<f64>>> {
        let inputs = match (features, &self.mixer) {
            (Features::Static(v), None) => v.clone(),
            (Features::Layers(acts), Some(mixer)) => mixer.mix(acts)?,
            _ => {
                return Err(Error::Config(format!(
                    "tagger expects {} features",
                    self.config.embedding_source
                )))
            }
        };
        if let Some(v) = inputs.iter().find(|v| v.len() != self.config.input_dim) {
            return Err(Error::Config(format!(
                "tagger expects {}-dimensional inputs, got {}",
                self.config.input_dim,
                v.len()
            )));
        }
        Ok(inputs)
    }

    fn forward(&self, inputs: Vec<Vec<f64>>, mut rng: Option<&mut ChaCha8Rng>) -> Result<ForwardPass> {
        let dropout = Dropout::new(self.config.dropout_rate)?;
        let mut traces = Vec::with_capacity(NUM_BILSTMS);
        let mut masks = Vec::with_capacity(NUM_BILSTMS);
        let mut outputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(NUM_BILSTMS);
        for (l, layer) in self.layers.iter().enumerate() {
            let source = match self.config.topology {
                Topology::Stacked if l > 0 => &outputs[l - 1],
                _ => &inputs,
            };
            let (mut out, trace) = layer.run(source)?;
            let mut mask = None;
            if l + 1 < NUM_BILSTMS {
                if let Some(rng) = rng.as_deref_mut() {
                    let m: Vec<Vec<f64>> = out.iter().map(|v| dropout.mask(v.len(), rng)).collect();
                    for (v, mv) in out.iter_mut().zip(&m) {
                        for (x, k) in v.iter_mut().zip(mv) {
                            *x *= k;
                        }
                    }
                    mask = Some(m);
                }
            }
            traces.push(trace);
            masks.push(mask);
            outputs.push(out);
        }
        let top: Vec<Vec<f64>> = match self.config.topology {
            Topology::Parallel => (0..inputs.len())
                .map(|k| outputs.iter().flat_map(|o| o[k].iter().copied()).collect())
                .collect(),
            Topology::Stacked => outputs.pop().unwrap_or_default(),
        };
        let logits = top
            .iter()
            .map(|v| {
                let z = self.output.apply(v);
                [z[0], z[1]]
            })
            .collect();
        Ok(ForwardPass {
            inputs,
            traces,
            masks,
            top,
            logits,
        })
    }

    /// Two logits per position. `rng` enables training-mode dropout.
    pub fn logits(&self, features: &Features, rng: Option<&mut ChaCha8Rng>) -> Result<Vec<[f64; NUM_LABELS]>> {
        let inputs = self.inputs(features)?;
        Ok(self.forward(inputs, rng)?.logits)
    }

    /// Logits for explicit input vectors; `training` draws dropout masks from `seed`.
    pub fn tagger_logits(&self, inputs: &[Vec<f64>], training: bool, seed: u64) -> Result<Vec<[f64; NUM_LABELS]>> {
        if let Some(v) = inputs.iter().find(|v| v.len() != self.config.input_dim) {
            return Err(Error::Config(format!(
                "tagger expects {}-dimensional inputs, got {}",
                self.config.input_dim,
                v.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok(self.forward(inputs.to_vec(), training.then_some(&mut rng))?.logits)
    }

    /// Summed cross-entropy against `labels`.
    pub fn loss(&self, features: &Features, labels: &[Label], rng: Option<&mut ChaCha8Rng>) -> Result<f64> {
        check_labels(features, labels)?;
        let logits = self.logits(features, rng)?;
        let mut total = 0.0;
        for (z, l) in logits.iter().zip(labels) {
            total += softmax_xent(z, l.index())?.0;
        }
        Ok(total)
    }

    /// Loss with gradients accumulated into the tagger and mixer parameters.
    pub fn loss_and_grad(
        &mut self,
        features: &Features,
        labels: &[Label],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<f64> {
        check_labels(features, labels)?;
        let inputs = self.inputs(features)?;
        let pass = self.forward(inputs, rng)?;
        let n = labels.len();
        let mut total = 0.0;
        let mut d_top = vec![vec![0.0; self.config.output_input_dim()]; n];
        for k in 0..n {
            let (loss, dz) = softmax_xent(&pass.logits[k], labels[k].index())?;
            total += loss;
            self.output.backward(&pass.top[k], &dz, Some(&mut d_top[k]));
        }

        let h2 = 2 * self.config.hidden_dim;
        let apply_mask = |d: &mut Vec<Vec<f64>>, mask: &Option<Vec<Vec<f64>>>| {
            if let Some(m) = mask {
                for (dv, mv) in d.iter_mut().zip(m) {
                    for (g, k) in dv.iter_mut().zip(mv) {
                        *g *= k;
                    }
                }
            }
        };
        let mut d_inputs = vec![vec![0.0; self.config.input_dim]; n];
        match self.config.topology {
            Topology::Parallel => {
                for l in 0..NUM_BILSTMS {
                    let mut d: Vec<Vec<f64>> = d_top.iter().map(|v| v[l * h2..(l + 1) * h2].to_vec()).collect();
                    apply_mask(&mut d, &pass.masks[l]);
                    let dx = self.layers[l].backward(&pass.traces[l], &d);
                    for (acc, g) in d_inputs.iter_mut().zip(&dx) {
                        crate::nn::axpy(1.0, g, acc);
                    }
                }
            }
            Topology::Stacked => {
                let mut d = d_top;
                for l in (0..NUM_BILSTMS).rev() {
                    apply_mask(&mut d, &pass.masks[l]);
                    d = self.layers[l].backward(&pass.traces[l], &d);
                }
                d_inputs = d;
            }
        }
        debug_assert_eq!(pass.inputs.len(), d_inputs.len());
        if let (Some(mixer), Features::Layers(acts)) = (self.mixer.as_mut(), features) {
            mixer.backward(acts, &d_inputs);
        }
        Ok(total)
    }

    /// Greedy labels; ties go to SEPARATE.
    pub fn predict(&self, features: &Features) -> Result<Vec<Label>> {
        Ok(self
            .logits(features, None)?
            .iter()
            .map(|z| if z[1] >= z[0] { Label::Separate } else { Label::Continue })
            .collect())
    }

    fn check_provider(&self, provider: &Provider) -> Result<()> {
        if provider.fingerprint() != self.provider_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.provider_fingerprint.clone(),
                actual: provider.fingerprint().to_string(),
            });
        }
        Ok(())
    }

    pub fn segment_chars(&self, provider: &Provider, chars: &[char]) -> Result<Vec<Span>> {
        self.check_provider(provider)?;
        if chars.is_empty() {
            return Ok(Vec::new());
        }
        let labels = self.predict(&provider.features(chars)?)?;
        decode_labels(chars, &labels)
    }

    /// Normalizes `text`, drops spaces, and returns the predicted words.
    pub fn segment(&self, provider: &Provider, text: &str) -> Result<Vec<String>> {
        let chars: Vec<char> = normalize_halfwidth(text)
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        let spans = self.segment_chars(provider, &chars)?;
        Ok(spans.iter().map(|&(s, e)| chars[s..e].iter().collect()).collect())
    }

    pub fn to_container(&self) -> ModelContainer {
        let mut c = ModelContainer::new(COMPONENT);
        c.set_meta("topology", self.config.topology);
        c.set_meta("num_bilstms", NUM_BILSTMS);
        c.set_meta("input_dim", self.config.input_dim);
        c.set_meta("hidden_dim", self.config.hidden_dim);
        c.set_meta("dropout_rate", self.config.dropout_rate);
        c.set_meta("embedding_source", self.config.embedding_source);
        c.set_meta("provider_fingerprint", &self.provider_fingerprint);
        c.push_params(self.params());
        c
    }

    pub fn from_container(c: &ModelContainer) -> Result<Self> {
        c.expect_component(COMPONENT)?;
        if c.meta_parse::<usize>("num_bilstms")? != NUM_BILSTMS {
            return Err(Error::Format("unsupported number of Bi-LSTM layers".into()));
        }
        let config = TaggerConfig {
            input_dim: c.meta_parse("input_dim")?,
            hidden_dim: c.meta_parse("hidden_dim")?,
            topology: c.meta("topology")?.parse().map_err(|e: Error| Error::Format(e.to_string()))?,
            dropout_rate: c.meta_parse("dropout_rate")?,
            embedding_source: c
                .meta("embedding_source")?
                .parse()
                .map_err(|e: Error| Error::Format(e.to_string()))?,
        };
        let mut model = Self::new(config, c.meta("provider_fingerprint")?, &mut ChaCha8Rng::seed_from_u64(0))
            .map_err(|e| Error::Format(e.to_string()))?;
        c.load_params(model.params_mut())?;
        Ok(model)
    }
}

fn check_labels(features: &Features, labels: &[Label]) -> Result<()> {
    if features.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} positions but {} labels",
            features.len(),
            labels.len()
        )));
    }
    Ok(())
}

impl Params for Segmenter {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut p: Vec<&ParamTensor> = self.layers.iter().flat_map(|l| l.params()).collect();
        p.extend(self.output.params());
        if let Some(m) = &self.mixer {
            p.extend(m.params());
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p: Vec<&mut ParamTensor> = self.layers.iter_mut().flat_map(|l| l.params_mut()).collect();
        p.extend(self.output.params_mut());
        if let Some(m) = &mut self.mixer {
            p.extend(m.params_mut());
        }
        p
    }
}
