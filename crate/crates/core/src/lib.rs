//! Chinese word segmentation built on character-level contextual embeddings.
//!
//! The pipeline: a bidirectional character language model ([`bilm`]) whose
//! token representation and two layer outputs are combined by a learned
//! scalar mix ([`elmo`]), feeding a Bi-LSTM tagger that predicts
//! continue/separate at every character ([`tagger`]). A static skip-gram
//! embedding ([`skipgram`]) serves as the context-free baseline, and
//! [`eval`] scores segmentations and breaks down out-of-vocabulary recall.

pub mod bilm;
pub mod container;
pub mod data;
pub mod elmo;
mod error;
pub mod eval;
pub mod nn;
pub mod skipgram;
pub mod synth;
pub mod tagger;

pub use container::ModelContainer;
pub use bilm::{BiLm, BiLmConfig, LayerActivations};
pub use data::{CharVocab, Corpus, Sentence};
pub use elmo::ElmoMixer;
pub use eval::{OovReport, SegScore};
pub use skipgram::SkipGram;
pub use tagger::{EmbeddingSource, Label, Provider, Segmenter, TaggerConfig, Topology};
pub use error::{Error, Result};
