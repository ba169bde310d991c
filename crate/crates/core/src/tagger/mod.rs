//! Continue/separate segmenter over per-character input vectors.

mod labels;
mod model;
mod provider;
mod train;

pub use labels::{decode_labels, encode_labels, Label};
pub use model::{Segmenter, TaggerConfig, Topology, COMPONENT, NUM_BILSTMS, NUM_LABELS};
pub use provider::{EmbeddingSource, Features, Provider};
pub use train::{segment_corpus, train_tagger, EpochRecord, TaggerTraining, TaggerTrainOptions};
