//! Corpus loading, half-width normalization, vocabularies and the
//! train/validation split.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Maps the fullwidth forms block U+FF01..=U+FF5E onto ASCII and the
/// ideographic space onto U+0020. Everything else passes through.
pub fn normalize_halfwidth(text: &str) -> String {
    text.chars().map(halfwidth_char).collect()
}

#[inline]
pub fn halfwidth_char(c: char) -> char {
    match c as u32 {
        0xFF01..=0xFF5E => char::from_u32(c as u32 - 0xFEE0).unwrap_or(c),
        0x3000 => ' ',
        _ => c,
    }
}

/// Half-open character span `[start, end)`.
pub type Span = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    pub chars: Vec<char>,
    /// Gold word spans; contiguous, non-overlapping and covering when present.
    pub gold_words: Option<Vec<Span>>,
}

impl Sentence {
    /// An unsegmented sentence.
    pub fn raw(text: &str) -> Self {
        Self {
            chars: text.chars().collect(),
            gold_words: None,
        }
    }

    pub fn from_words<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        let mut chars = Vec::new();
        let mut spans = Vec::with_capacity(words.len());
        for w in words {
            let start = chars.len();
            chars.extend(w.as_ref().chars());
            if chars.len() == start {
                return Err(Error::Contract("empty word in segmentation".into()));
            }
            spans.push((start, chars.len()));
        }
        Ok(Self {
            chars,
            gold_words: Some(spans),
        })
    }

    pub fn from_spans(chars: Vec<char>, spans: Vec<Span>) -> Result<Self> {
        check_partition(&spans, chars.len())?;
        Ok(Self {
            chars,
            gold_words: Some(spans),
        })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    pub fn words(&self) -> Option<Vec<String>> {
        self.gold_words.as_ref().map(|spans| {
            spans
                .iter()
                .map(|&(s, e)| self.chars[s..e].iter().collect())
                .collect()
        })
    }

    /// Words joined by single spaces, or the bare text when unsegmented.
    pub fn render(&self) -> String {
        match self.words() {
            Some(w) => w.join(" "),
            None => self.text(),
        }
    }
}

/// Checks that `spans` tile `[0, len)` with non-empty pieces.
pub fn check_partition(spans: &[Span], len: usize) -> Result<()> {
    let mut at = 0;
    for &(s, e) in spans {
        if s != at || e <= s {
            return Err(Error::Contract(format!(
                "spans {spans:?} do not partition a sentence of length {len}"
            )));
        }
        at = e;
    }
    if at != len {
        return Err(Error::Contract(format!(
            "spans {spans:?} do not partition a sentence of length {len}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    pub sentences: Vec<Sentence>,
    pub source: Option<PathBuf>,
    pub normalized: bool,
}

impl Corpus {
    pub fn new(sentences: Vec<Sentence>) -> Self {
        Self {
            sentences,
            source: None,
            normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sentence> {
        self.sentences.iter()
    }

    /// Total number of characters.
    pub fn num_chars(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// One line per sentence, words separated by single spaces.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.sentences {
            out.push_str(&s.render());
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }
}

/// Parses whitespace-segmented text: one sentence per line, words separated
/// by runs of ASCII spaces. Blank lines are skipped.
pub fn parse_corpus(text: &str, normalize: bool) -> Corpus {
    let sentences = text
        .lines()
        .filter_map(|line| {
            let line = if normalize {
                normalize_halfwidth(line)
            } else {
                line.to_string()
            };
            let words: Vec<&str> = line
                .trim_end_matches('\r')
                .split(' ')
                .filter(|w| !w.is_empty())
                .collect();
            if words.is_empty() {
                None
            } else {
                Some(Sentence::from_words(&words).expect("non-empty words"))
            }
        })
        .collect();
    Corpus {
        sentences,
        source: None,
        normalized: normalize,
    }
}

/// Parses unsegmented text for inference. ASCII spaces are dropped; blank
/// lines are skipped.
pub fn parse_raw(text: &str, normalize: bool) -> Corpus {
    let sentences = text
        .lines()
        .filter_map(|line| {
            let line = if normalize {
                normalize_halfwidth(line)
            } else {
                line.to_string()
            };
            let chars: Vec<char> = line.chars().filter(|&c| c != ' ' && c != '\r').collect();
            (!chars.is_empty()).then_some(Sentence {
                chars,
                gold_words: None,
            })
        })
        .collect();
    Corpus {
        sentences,
        source: None,
        normalized: normalize,
    }
}

/// Reads a whole file, reporting the byte offset of the first invalid UTF-8 sequence.
pub fn read_utf8(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    String::from_utf8(bytes).map_err(|e| Error::Utf8 {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

pub fn load_corpus(path: impl AsRef<Path>, normalize: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let mut corpus = parse_corpus(&read_utf8(path)?, normalize);
    corpus.source = Some(path.to_path_buf());
    Ok(corpus)
}

pub fn load_raw(path: impl AsRef<Path>, normalize: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let mut corpus = parse_raw(&read_utf8(path)?, normalize);
    corpus.source = Some(path.to_path_buf());
    Ok(corpus)
}

/// Seeded shuffle that sends `ceil(fraction * N)` sentences to validation.
/// Both halves keep the original corpus order.
pub fn split_train_valid(corpus: &Corpus, fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!(
            "validation fraction must be in (0, 1), got {fraction}"
        )));
    }
    if corpus.is_empty() {
        return Err(Error::Config("cannot split an empty corpus".into()));
    }
    let n = corpus.len();
    // The epsilon keeps products like 0.07 * 100 = 7.000000000000001 from rounding up.
    let n_valid = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    if n_valid == n {
        log::warn!("validation split takes all {n} sentences; training set is empty");
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut valid_ids = order[..n_valid].to_vec();
    let mut train_ids = order[n_valid..].to_vec();
    valid_ids.sort_unstable();
    train_ids.sort_unstable();
    let pick = |ids: &[usize]| Corpus {
        sentences: ids.iter().map(|&i| corpus.sentences[i].clone()).collect(),
        source: corpus.source.clone(),
        normalized: corpus.normalized,
    };
    Ok((pick(&train_ids), pick(&valid_ids)))
}

/// Twenty hand-segmented sentences, small enough to memorize.
pub const TOY_CORPUS: &str = include_str!("../data/toy20.txt");

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const NUM_RESERVED: usize = 4;
const RESERVED_NAMES: [&str; NUM_RESERVED] = ["<pad>", "<unk>", "<bos>", "<eos>"];

/// Character vocabulary with the reserved ids PAD, UNK, BOS and EOS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharVocab {
    chars: Vec<char>,
    ids: HashMap<char, usize>,
}

impl CharVocab {
    /// Builds a vocabulary from characters already in id order.
    pub fn from_chars(chars: Vec<char>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(chars.len());
        for (i, &c) in chars.iter().enumerate() {
            if ids.insert(c, NUM_RESERVED + i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary entry {c:?}")));
            }
        }
        Ok(Self { chars, ids })
    }

    pub fn len(&self) -> usize {
        NUM_RESERVED + self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id_of(&self, c: char) -> usize {
        self.ids.get(&c).copied().unwrap_or(UNK)
    }

    pub fn char_of(&self, id: usize) -> Option<char> {
        id.checked_sub(NUM_RESERVED).and_then(|i| self.chars.get(i).copied())
    }

    pub fn contains(&self, c: char) -> bool {
        self.ids.contains_key(&c)
    }

    pub fn encode(&self, chars: &[char]) -> Vec<usize> {
        chars.iter().map(|&c| self.id_of(c)).collect()
    }

    /// Token strings in id order, reserved names first.
    pub fn to_tokens(&self) -> Vec<String> {
        RESERVED_NAMES
            .iter()
            .map(|s| s.to_string())
            .chain(self.chars.iter().map(|c| c.to_string()))
            .collect()
    }

    pub fn from_tokens(tokens: &[String]) -> Result<Self> {
        if tokens.len() < NUM_RESERVED
            || tokens.iter().zip(RESERVED_NAMES).any(|(t, r)| t != r)
        {
            return Err(Error::Format("vocabulary does not start with the reserved tokens".into()));
        }
        let chars = tokens[NUM_RESERVED..]
            .iter()
            .map(|t| {
                let mut it = t.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(Error::Format(format!("vocabulary entry {t:?} is not one character"))),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_chars(chars)
    }
}

/// Keeps characters seen at least `min_count` times, ordered by descending
/// frequency then code point.
pub fn build_vocab(train: &Corpus, min_count: usize) -> Result<CharVocab> {
    if train.is_empty() {
        return Err(Error::Config("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut counts: HashMap<char, usize> = HashMap::new();
    for s in train.iter() {
        for &c in &s.chars {
            *counts.entry(c).or_default() += 1;
        }
    }
    let mut kept: Vec<(char, usize)> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_count.max(1))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    CharVocab::from_chars(kept.into_iter().map(|(c, _)| c).collect())
}
