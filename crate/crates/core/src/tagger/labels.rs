use crate::data::{Sentence, Span};
use crate::error::{Error, Result};

/// Transition label for one character: keep collecting, or close the word
/// after this character.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Label {
    Continue = 0,
    Separate = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(Label::Continue),
            1 => Some(Label::Separate),
            _ => None,
        }
    }
}

/// SEPARATE on the last character of every gold word, CONTINUE elsewhere.
pub fn encode_labels(sentence: &Sentence) -> Result<Vec<Label>> {
    let spans = sentence
        .gold_words
        .as_ref()
        .ok_or_else(|| Error::Contract("encode_labels needs a gold segmentation".into()))?;
    crate::data::check_partition(spans, sentence.len())?;
    let mut labels = vec![Label::Continue; sentence.len()];
    for &(_, end) in spans {
        labels[end - 1] = Label::Separate;
    }
    Ok(labels)
}

/// Word spans from labels. A word left open at the end is closed there.
pub fn decode_labels(chars: &[char], labels: &[Label]) -> Result<Vec<Span>> {
    if chars.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} characters but {} labels",
            chars.len(),
            labels.len()
        )));
    }
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, &l) in labels.iter().enumerate() {
        if l == Label::Separate {
            spans.push((start, i + 1));
            start = i + 1;
        }
    }
    if start < labels.len() {
        spans.push((start, labels.len()));
    }
    Ok(spans)
}
