//! Word-level precision/recall/F1 and out-of-vocabulary breakdowns.

use std::collections::HashSet;
use std::fmt;

use crate::data::{check_partition, normalize_halfwidth, Corpus, Sentence, Span};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WordSpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

/// Offsets and surfaces for a list of words laid end to end.
pub fn to_spans<S: AsRef<str>>(words: &[S]) -> Vec<WordSpan> {
    let mut at = 0;
    words
        .iter()
        .map(|w| {
            let w = w.as_ref();
            let start = at;
            at += w.chars().count();
            WordSpan {
                start,
                end: at,
                surface: w.to_string(),
            }
        })
        .collect()
}

/// Same as [`to_spans`] but from character spans over `chars`.
pub fn spans_over(chars: &[char], spans: &[Span]) -> Result<Vec<WordSpan>> {
    check_partition(spans, chars.len())?;
    Ok(spans
        .iter()
        .map(|&(start, end)| WordSpan {
            start,
            end,
            surface: chars[start..end].iter().collect(),
        })
        .collect())
}

fn sentence_spans(s: &Sentence) -> Result<Vec<WordSpan>> {
    let spans = s
        .gold_words
        .as_ref()
        .ok_or_else(|| Error::Contract("sentence has no segmentation".into()))?;
    spans_over(&s.chars, spans)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub gold_words: usize,
    pub predicted_words: usize,
    pub correct_words: usize,
}

impl SegScore {
    pub fn from_counts(gold: usize, predicted: usize, correct: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(correct, predicted);
        let recall = ratio(correct, gold);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            gold_words: gold,
            predicted_words: predicted,
            correct_words: correct,
        }
    }
}

fn aligned<'a>(gold: &'a Corpus, pred: &'a Corpus) -> Result<impl Iterator<Item = (&'a Sentence, &'a Sentence)>> {
    if let Some(i) = gold
        .iter()
        .zip(pred.iter())
        .position(|(g, p)| g.chars != p.chars)
    {
        return Err(Error::Alignment { sentence: i });
    }
    if gold.len() != pred.len() {
        return Err(Error::Alignment {
            sentence: gold.len().min(pred.len()),
        });
    }
    Ok(gold.iter().zip(pred.iter()))
}

/// Micro-averaged word scores under exact span matching.
pub fn score_f1(gold: &Corpus, pred: &Corpus) -> Result<SegScore> {
    let (mut n_gold, mut n_pred, mut n_correct) = (0, 0, 0);
    for (g, p) in aligned(gold, pred)? {
        let gs: HashSet<(usize, usize)> = sentence_spans(g)?.iter().map(|s| (s.start, s.end)).collect();
        let ps = sentence_spans(p)?;
        n_gold += gs.len();
        n_pred += ps.len();
        n_correct += ps.iter().filter(|s| gs.contains(&(s.start, s.end))).count();
    }
    Ok(SegScore::from_counts(n_gold, n_pred, n_correct))
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OovReport {
    /// OOV gold tokens over all gold test tokens.
    pub oov_rate: f64,
    /// OOV gold tokens recovered with the exact span, over OOV gold tokens.
    pub oov_recall: f64,
    /// Distinct OOV words containing an ASCII digit.
    pub digit_ratio: f64,
    /// Distinct OOV words at least [`LONG_WORD`] characters long.
    pub long_ratio: f64,
    pub oov_tokens: usize,
    pub oov_types: usize,
}

pub const LONG_WORD: usize = 5;

pub fn training_lexicon(train: &Corpus) -> Result<HashSet<String>> {
    let mut lexicon = HashSet::new();
    for s in train.iter() {
        for w in sentence_spans(s)? {
            lexicon.insert(w.surface);
        }
    }
    Ok(lexicon)
}

pub fn oov_report(train: &Corpus, gold: &Corpus, pred: &Corpus) -> Result<OovReport> {
    let lexicon = training_lexicon(train)?;
    let (mut total, mut oov, mut recovered) = (0usize, 0usize, 0usize);
    let mut types: HashSet<String> = HashSet::new();
    for (g, p) in aligned(gold, pred)? {
        let predicted: HashSet<(usize, usize)> =
            sentence_spans(p)?.iter().map(|s| (s.start, s.end)).collect();
        for w in sentence_spans(g)? {
            total += 1;
            if lexicon.contains(&w.surface) {
                continue;
            }
            oov += 1;
            if predicted.contains(&(w.start, w.end)) {
                recovered += 1;
            }
            types.insert(w.surface);
        }
    }
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let digits = types
        .iter()
        .filter(|w| normalize_halfwidth(w).chars().any(|c| c.is_ascii_digit()))
        .count();
    let long = types.iter().filter(|w| w.chars().count() >= LONG_WORD).count();
    Ok(OovReport {
        oov_rate: frac(oov, total),
        oov_recall: frac(recovered, oov),
        digit_ratio: frac(digits, types.len()),
        long_ratio: frac(long, types.len()),
        oov_tokens: oov,
        oov_types: types.len(),
    })
}

/// `key=value` report lines with four decimals.
pub struct Report<'a> {
    pub score: &'a SegScore,
    pub oov: Option<&'a OovReport>,
}

impl fmt::Display for Report<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "precision={:.4}", self.score.precision)?;
        writeln!(f, "recall={:.4}", self.score.recall)?;
        writeln!(f, "f1={:.4}", self.score.f1)?;
        if let Some(o) = self.oov {
            writeln!(f, "oov_rate={:.4}", o.oov_rate)?;
            writeln!(f, "oov_recall={:.4}", o.oov_recall)?;
            writeln!(f, "oov_digit_ratio={:.4}", o.digit_ratio)?;
            writeln!(f, "oov_long_ratio={:.4}", o.long_ratio)?;
        }
        Ok(())
    }
}
