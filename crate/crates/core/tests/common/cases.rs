//! Small seeded instances for the finite-difference suite.

use charseg::bilm::{BiLm, BiLmConfig, LayerActivations};
use charseg::elmo::ElmoMixer;
use charseg::nn::{softmax_xent, BiLstm, LstmCell, ParamTensor, Params};
use charseg::tagger::{EmbeddingSource, Features, Label, Segmenter, TaggerConfig, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_params, numeric_grad, rel_err, GradReport};

fn random_vecs(rng: &mut ChaCha8Rng, n: usize, dim: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

fn merge(reports: impl IntoIterator<Item = GradReport>) -> GradReport {
    reports.into_iter().fold(
        GradReport {
            checked: 0,
            worst: 0.0,
            worst_at: String::new(),
        },
        |mut acc, r| {
            acc.checked += r.checked;
            if r.worst >= acc.worst {
                acc.worst = r.worst;
                acc.worst_at = r.worst_at;
            }
            acc
        },
    )
}

pub fn softmax_xent_case(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = GradReport {
        checked: 0,
        worst: 0.0,
        worst_at: String::new(),
    };
    for k in 2..=8 {
        let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let target = rng.gen_range(0..k);
        let (_, grad) = softmax_xent(&logits, target).unwrap();
        let numeric = numeric_grad(&logits, |z| softmax_xent(z, target).unwrap().0);
        for (i, (a, n)) in grad.iter().zip(&numeric).enumerate() {
            worst.checked += 1;
            let e = rel_err(*a, *n);
            if e > worst.worst {
                worst.worst = e;
                worst.worst_at = format!("softmax_xent K={k} [{i}]");
            }
        }
    }
    worst
}

/// An LSTM cell run over a sequence, read out through a fixed random projection.
struct Chain {
    cell: LstmCell,
    readout: Vec<Vec<f64>>,
    xs: Vec<Vec<f64>>,
}

impl Chain {
    fn loss_at(&self, xs: &[Vec<f64>]) -> f64 {
        let trace = self.cell.run(xs).unwrap();
        trace
            .outputs()
            .zip(&self.readout)
            .map(|(h, r)| h.iter().zip(r).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }
}

impl Params for Chain {
    fn params(&self) -> Vec<&ParamTensor> {
        self.cell.params()
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.cell.params_mut()
    }
}

pub fn lstm_chain_case(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, hidden, len) = (5, 4, 6);
    let mut cell = LstmCell::new("chain", input, hidden, &mut rng);
    // widen the weights so the gates leave their linear regime
    for w in &mut cell.weight.values {
        *w *= 8.0;
    }
    let mut chain = Chain {
        cell,
        readout: random_vecs(&mut rng, len, hidden, 1.0),
        xs: random_vecs(&mut rng, len, input, 1.0),
    };
    let params = check_params(
        &mut chain,
        |c| c.loss_at(&c.xs),
        |c| {
            let trace = c.cell.run(&c.xs).unwrap();
            let readout = c.readout.clone();
            c.cell.backward(&trace, &readout);
            c.loss_at(&c.xs)
        },
    );

    // input gradients
    let trace = chain.cell.run(&chain.xs).unwrap();
    let dxs = chain.cell.clone().backward(&trace, &chain.readout);
    let flat: Vec<f64> = chain.xs.concat();
    let numeric = numeric_grad(&flat, |v| {
        let xs: Vec<Vec<f64>> = v.chunks(input).map(<[f64]>::to_vec).collect();
        chain.loss_at(&xs)
    });
    let mut inputs = GradReport {
        checked: 0,
        worst: 0.0,
        worst_at: String::new(),
    };
    for (i, (a, n)) in dxs.concat().iter().zip(&numeric).enumerate() {
        inputs.checked += 1;
        let e = rel_err(*a, *n);
        if e > inputs.worst {
            inputs.worst = e;
            inputs.worst_at = format!("lstm input [{i}]");
        }
    }
    merge([params, inputs])
}

struct BiChain {
    layer: BiLstm,
    readout: Vec<Vec<f64>>,
    xs: Vec<Vec<f64>>,
}

impl Params for BiChain {
    fn params(&self) -> Vec<&ParamTensor> {
        self.layer.params()
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layer.params_mut()
    }
}

pub fn bilstm_case(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = BiChain {
        layer: BiLstm::new("bi", 3, 4, &mut rng),
        readout: random_vecs(&mut rng, 5, 8, 1.0),
        xs: random_vecs(&mut rng, 5, 3, 1.0),
    };
    let loss = |c: &BiChain| {
        let (out, _) = c.layer.run(&c.xs).unwrap();
        out.iter()
            .zip(&c.readout)
            .map(|(h, r)| h.iter().zip(r).map(|(a, b)| a * b).sum::<f64>())
            .sum::<f64>()
    };
    check_params(&mut chain, loss, |c| {
        let (_, trace) = c.layer.run(&c.xs).unwrap();
        let readout = c.readout.clone();
        c.layer.backward(&trace, &readout);
        0.0
    })
}

pub fn bilm_case(seed: u64) -> GradReport {
    let mut model = BiLm::new(BiLmConfig::new(12, 6, 5), seed).unwrap();
    // larger weights than the default init so every path carries signal
    for p in model.params_mut() {
        for v in &mut p.values {
            *v *= 3.0;
        }
    }
    let ids = [4, 7, 11, 4, 1, 9];
    check_params(&mut model, |m| m.loss(&ids).unwrap(), |m| m.loss_and_grad(&ids).unwrap())
}

struct MixProbe {
    mixer: ElmoMixer,
    acts: LayerActivations,
    readout: Vec<Vec<f64>>,
}

impl MixProbe {
    fn loss(&self) -> f64 {
        let out = self.mixer.mix(&self.acts).unwrap();
        // quadratic readout so d_out depends on the output
        out.iter()
            .zip(&self.readout)
            .map(|(o, r)| o.iter().zip(r).map(|(a, b)| a * b + 0.5 * a * a).sum::<f64>())
            .sum()
    }
}

impl Params for MixProbe {
    fn params(&self) -> Vec<&ParamTensor> {
        self.mixer.params()
    }
    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.mixer.params_mut()
    }
}

pub fn elmo_mix_case(seed: u64) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d) = (4, 6);
    let mut probe = MixProbe {
        mixer: ElmoMixer::with_values([0.3, -0.8, 1.1], 1.7),
        acts: LayerActivations {
            x: random_vecs(&mut rng, n, d, 2.0),
            h1: random_vecs(&mut rng, n, d, 1.0),
            h2: random_vecs(&mut rng, n, d, 1.0),
        },
        readout: random_vecs(&mut rng, n, d, 1.0),
    };
    check_params(&mut probe, MixProbe::loss, |p| {
        let out = p.mixer.mix(&p.acts).unwrap();
        let d_out: Vec<Vec<f64>> = out
            .iter()
            .zip(&p.readout)
            .map(|(o, r)| o.iter().zip(r).map(|(a, b)| b + a).collect())
            .collect();
        let acts = p.acts.clone();
        p.mixer.backward(&acts, &d_out);
        p.loss()
    })
}

fn labels_for(n: usize, rng: &mut ChaCha8Rng) -> Vec<Label> {
    let mut l: Vec<Label> = (0..n)
        .map(|_| if rng.gen_bool(0.5) { Label::Separate } else { Label::Continue })
        .collect();
    l[n - 1] = Label::Separate;
    l
}

/// Full tagger loss, including dropout masks (replayed from a fixed seed) and
/// the scalar mix when the source is the language model.
pub fn tagger_case(seed: u64, topology: Topology, source: EmbeddingSource) -> GradReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (input, len) = (8, 5);
    let config = TaggerConfig {
        input_dim: input,
        hidden_dim: 4,
        topology,
        dropout_rate: 0.33,
        embedding_source: source,
    };
    let mut model = Segmenter::new(config, "fp", &mut rng).unwrap();
    for p in model.params_mut() {
        if !p.name().starts_with("elmo") {
            for v in &mut p.values {
                *v *= 4.0;
            }
        }
    }
    if let Some(m) = &mut model.mixer {
        *m = ElmoMixer::with_values([0.2, -0.4, 0.7], 1.3);
    }
    let features = match source {
        EmbeddingSource::Static => Features::Static(random_vecs(&mut rng, len, input, 1.0)),
        EmbeddingSource::Elmo => Features::Layers(LayerActivations {
            x: random_vecs(&mut rng, len, input, 1.0),
            h1: random_vecs(&mut rng, len, input, 1.0),
            h2: random_vecs(&mut rng, len, input, 1.0),
        }),
    };
    let labels = labels_for(len, &mut rng);
    let mask_seed = seed ^ 0x5eed;
    check_params(
        &mut model,
        |m| {
            m.loss(&features, &labels, Some(&mut ChaCha8Rng::seed_from_u64(mask_seed)))
                .unwrap()
        },
        |m| {
            m.loss_and_grad(&features, &labels, Some(&mut ChaCha8Rng::seed_from_u64(mask_seed)))
                .unwrap()
        },
    )
}

/// Every case in the suite, labelled.
pub fn all_cases(seed: u64) -> Vec<(&'static str, GradReport)> {
    vec![
        ("softmax_xent", softmax_xent_case(seed)),
        ("lstm_step chain", lstm_chain_case(seed)),
        ("bilstm", bilstm_case(seed)),
        ("bilm_loss", bilm_case(seed)),
        ("elmo mix", elmo_mix_case(seed)),
        ("tagger parallel/static", tagger_case(seed, Topology::Parallel, EmbeddingSource::Static)),
        ("tagger parallel/elmo", tagger_case(seed, Topology::Parallel, EmbeddingSource::Elmo)),
        ("tagger stacked/static", tagger_case(seed, Topology::Stacked, EmbeddingSource::Static)),
        ("tagger stacked/elmo", tagger_case(seed, Topology::Stacked, EmbeddingSource::Elmo)),
    ]
}
