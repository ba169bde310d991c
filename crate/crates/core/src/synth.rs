//! Synthetic segmentation corpora for probing out-of-vocabulary behaviour.
//!
//! A random lexicon is drawn over a small character set, so the same
//! character starts some words and ends others: whether it binds to its left
//! or right neighbour depends on context. The lexicon is split into seen and
//! held-out words. Unlabeled text mixes both; the labeled training set uses
//! only seen words and the test set only held-out words, so every test word
//! is out of vocabulary.

use std::collections::HashSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Corpus, Sentence};

const ALPHABET: &str = "的一是不了在人有我他這個們中來上大為和國地到以說時要就出會可也你對生能而子那得於著下自之年過發後作裡用道行所然家種事成方多經麼去法學如都同現當沒動面起看定天分還進好小部其些主樣理心她本前開但因只從想實日軍者意無力它與長把機十民第公此已工使情明性知全三又關點正業外將兩高間由問很最重並物手應戰向頭文體政美相見被利什二等產或新己制身果加西斯月話合回特代內信表化老給世位次度門任常先海通教兒原東聲提立及比員解水名真論處走義各入幾口認條平系氣題活爾更別打女變四神總何電數安少報才結反受目太量再感建務做接必場件計管期市直德資命山金指克許統區保至隊形社便空決治展馬科司五基眼書非則聽白卻界達光放強即像難且權思王象完設式色路記南品住告類求據程北邊死張該交規萬取拉格望覺術領共確傳師觀清今切院讓識候帶導爭運笑飛風步改收根干造言聯持組每濟車親極林服快辦議往元英士證近失轉夫令準布始怎呢存未遠叫台單影具羅字愛擊流備兵連調深商算質團集百需價花黨華城石級整府離況亞請技際約示復病息究線似官火斷精滿支視消越器容照須九增研寫稱企八功嗎包片史委乎查輕易早曾除農找裝廣顯吧阿李標談吃圖念六引歷首醫局突專費號盡另周較注語仍護米言";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub alphabet_size: usize,
    pub lexicon_size: usize,
    /// Fraction of the lexicon that never appears in labeled training data.
    pub heldout_fraction: f64,
    /// Relative frequency of 1-, 2- and 3-character words.
    pub length_weights: [f64; 3],
    pub unlabeled_sentences: usize,
    pub train_sentences: usize,
    pub test_sentences: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            alphabet_size: 16,
            lexicon_size: 48,
            heldout_fraction: 0.3,
            length_weights: [0.15, 0.55, 0.3],
            unlabeled_sentences: 3000,
            train_sentences: 300,
            test_sentences: 100,
            min_words: 3,
            max_words: 7,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub alphabet: Vec<char>,
    pub seen_words: Vec<String>,
    pub heldout_words: Vec<String>,
    /// Sentences over the whole lexicon (gold segmentation kept for reference).
    pub unlabeled: Corpus,
    /// Sentences over seen words only.
    pub train: Corpus,
    /// Sentences over held-out words only.
    pub test: Corpus,
}

pub fn generate(config: &SyntheticConfig) -> SyntheticCorpus {
    let mut unique = HashSet::new();
    let mut pool: Vec<char> = ALPHABET.chars().filter(|&c| unique.insert(c)).collect();
    assert!(
        (1..=pool.len()).contains(&config.alphabet_size),
        "alphabet_size out of range"
    );
    assert!(config.min_words >= 1 && config.min_words <= config.max_words);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    pool.shuffle(&mut rng);
    let alphabet: Vec<char> = pool[..config.alphabet_size].to_vec();

    let lengths = WeightedIndex::new(config.length_weights).expect("length weights");
    let mut seen: HashSet<String> = HashSet::new();
    let mut lexicon: Vec<String> = Vec::with_capacity(config.lexicon_size);
    let mut attempts = 0;
    while lexicon.len() < config.lexicon_size && attempts < 100 * config.lexicon_size {
        attempts += 1;
        let len = lengths.sample(&mut rng) + 1;
        let word: String = (0..len).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        if seen.insert(word.clone()) {
            lexicon.push(word);
        }
    }
    let n_heldout = ((config.heldout_fraction * lexicon.len() as f64).round() as usize).min(lexicon.len() - 1);
    let heldout_words = lexicon[..n_heldout].to_vec();
    let seen_words = lexicon[n_heldout..].to_vec();

    let sentences = |words: &[String], count: usize, rng: &mut ChaCha8Rng| {
        let sentences = (0..count)
            .map(|_| {
                let n = rng.gen_range(config.min_words..=config.max_words);
                let picked: Vec<&String> = (0..n).map(|_| words.choose(rng).unwrap()).collect();
                Sentence::from_words(&picked).expect("non-empty words")
            })
            .collect();
        Corpus {
            sentences,
            source: None,
            normalized: true,
        }
    };
    let unlabeled = sentences(&lexicon, config.unlabeled_sentences, &mut rng);
    let train = sentences(&seen_words, config.train_sentences, &mut rng);
    let test = sentences(&heldout_words, config.test_sentences, &mut rng);
    SyntheticCorpus {
        alphabet,
        seen_words,
        heldout_words,
        unlabeled,
        train,
        test,
    }
}
