use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::bilm::{self, BiLm, LayerActivations};
use crate::container::ModelContainer;
use crate::data::CharVocab;
use crate::error::{Error, Result};
use crate::skipgram::{self, SkipGram};

/// Where a tagger's per-character input vectors come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EmbeddingSource {
    /// Frozen bidirectional LM layers, mixed by a trainable scalar mix.
    Elmo,
    /// Frozen skip-gram table lookups.
    Static,
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingSource::Elmo => "elmo",
            EmbeddingSource::Static => "static",
        })
    }
}

impl FromStr for EmbeddingSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elmo" => Ok(EmbeddingSource::Elmo),
            "static" => Ok(EmbeddingSource::Static),
            other => Err(Error::Config(format!("unknown embedding source {other:?}"))),
        }
    }
}

/// Provider output for one sentence.
#[derive(Clone, Debug, PartialEq)]
pub enum Features {
    Static(Vec<Vec<f64>>),
    Layers(LayerActivations),
}

impl Features {
    pub fn len(&self) -> usize {
        match self {
            Features::Static(v) => v.len(),
            Features::Layers(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
enum Backend {
    Elmo(Box<BiLm>),
    Static(SkipGram),
}

/// A frozen embedding model plus its vocabulary and content fingerprint.
#[derive(Clone, Debug)]
pub struct Provider {
    backend: Backend,
    vocab: CharVocab,
    fingerprint: String,
}

impl Provider {
    pub fn elmo(model: BiLm, vocab: CharVocab) -> Self {
        let fingerprint = model.to_container(&vocab).fingerprint();
        Self {
            backend: Backend::Elmo(Box::new(model)),
            vocab,
            fingerprint,
        }
    }

    pub fn static_table(model: SkipGram, vocab: CharVocab) -> Self {
        let fingerprint = model.to_container(&vocab).fingerprint();
        Self {
            backend: Backend::Static(model),
            vocab,
            fingerprint,
        }
    }

    pub fn from_container(c: &ModelContainer) -> Result<Self> {
        match c.component.as_str() {
            bilm::COMPONENT => {
                let (m, v) = BiLm::from_container(c)?;
                Ok(Self::elmo(m, v))
            }
            skipgram::COMPONENT => {
                let (m, v) = SkipGram::from_container(c)?;
                Ok(Self::static_table(m, v))
            }
            other => Err(Error::Format(format!("{other:?} is not an embedding model"))),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(&ModelContainer::read(path)?)
    }

    pub fn to_container(&self) -> ModelContainer {
        match &self.backend {
            Backend::Elmo(m) => m.to_container(&self.vocab),
            Backend::Static(m) => m.to_container(&self.vocab),
        }
    }

    pub fn source(&self) -> EmbeddingSource {
        match self.backend {
            Backend::Elmo(_) => EmbeddingSource::Elmo,
            Backend::Static(_) => EmbeddingSource::Static,
        }
    }

    /// Width of the vectors the tagger receives.
    pub fn dim(&self) -> usize {
        match &self.backend {
            Backend::Elmo(m) => m.exposed_dim(),
            Backend::Static(m) => m.dim(),
        }
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn vocab(&self) -> &CharVocab {
        &self.vocab
    }

    pub fn features(&self, chars: &[char]) -> Result<Features> {
        let ids = self.vocab.encode(chars);
        match &self.backend {
            Backend::Elmo(m) => Ok(Features::Layers(m.extract_layers(&ids)?)),
            Backend::Static(m) => ids
                .iter()
                .map(|&id| m.embed_lookup(id).map(<[f64]>::to_vec))
                .collect::<Result<Vec<_>>>()
                .map(Features::Static),
        }
    }
}
