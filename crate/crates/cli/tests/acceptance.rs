//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that every criterion reports even when
//! an earlier one fails. Exits nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use charseg::bilm::{train_bilm, BiLm, BiLmConfig, BiLmTrainOptions};
use charseg::data::{
    build_vocab, load_corpus, normalize_halfwidth, parse_corpus, split_train_valid, Corpus, Sentence, Span,
    TOY_CORPUS,
};
use charseg::elmo::ElmoMixer;
use charseg::eval::{oov_report, score_f1};
use charseg::nn::softmax;
use charseg::skipgram::{train_skipgram, SkipGram, SkipGramConfig};
use charseg::synth::{generate, SyntheticConfig};
use charseg::tagger::{
    decode_labels, encode_labels, segment_corpus, train_tagger, Label, Provider, Segmenter, TaggerConfig,
    TaggerTrainOptions, Topology,
};
use charseg::LayerActivations;
use charseg_cli::run_with_output;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gradient_suite() -> Outcome {
    let mut worst: (f64, String) = (0.0, String::new());
    let mut checked = 0;
    for seed in [1, 2] {
        for (name, report) in common::cases::all_cases(seed) {
            checked += report.checked;
            if report.worst > worst.0 {
                worst = (report.worst, format!("{name} {}", report.worst_at));
            }
        }
    }
    ensure(worst.0 < common::MAX_REL_ERR, || {
        format!("worst relative error {:.2e} at {}", worst.0, worst.1)
    })?;
    Ok(format!("{checked} gradients, worst rel. err {:.2e}", worst.0))
}

fn uniform_logits() -> Outcome {
    let mut worst: f64 = 0.0;
    for (v, n) in [(5, 1), (12, 6), (40, 17)] {
        let mut lm = BiLm::new(BiLmConfig::new(v, 8, 6), v as u64).unwrap();
        lm.zero_output_projection();
        let ids: Vec<usize> = (0..n).map(|i| 4 + (i * 7) % (v - 4)).collect();
        let expected = 2.0 * n as f64 * (v as f64).ln();
        worst = worst.max((lm.loss(&ids).unwrap() - expected).abs());
    }
    ensure(worst <= 1e-6, || format!("bilm loss off by {worst:.2e}"))?;

    let corpus = parse_corpus(TOY_CORPUS, true);
    let vocab = build_vocab(&corpus, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let static_provider = Provider::static_table(SkipGram::new(vocab.len(), 8, &mut rng), vocab.clone());
    let elmo_provider = Provider::elmo(BiLm::new(BiLmConfig::new(vocab.len(), 8, 4), 1).unwrap(), vocab);
    let mut positions = 0;
    for provider in [&static_provider, &elmo_provider] {
        for topology in [Topology::Parallel, Topology::Stacked] {
            let mut config = TaggerConfig::for_provider(provider);
            config.hidden_dim = 6;
            config.topology = topology;
            let mut model = Segmenter::new(config, provider.fingerprint(), &mut rng).unwrap();
            model.zero_output_projection();
            for s in corpus.iter().take(5) {
                let features = provider.features(&s.chars).unwrap();
                for z in model.logits(&features, None).unwrap() {
                    let p = softmax(&z);
                    worst = worst.max((p[0] - 0.5).abs()).max((p[1] - 0.5).abs());
                    positions += 1;
                }
            }
        }
    }
    ensure(worst <= 1e-6, || format!("tagger distribution off by {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.1e} over {positions} tagger positions"))
}

fn spans_from_mask(n: usize, mask: u32) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 0..n {
        if i == n - 1 || mask & (1 << i) != 0 {
            spans.push((start, i + 1));
            start = i + 1;
        }
    }
    spans
}

fn roundtrip() -> Outcome {
    let mut cases = 0usize;
    for n in 1..=12usize {
        let chars: Vec<char> = (0..n).map(|i| char::from_u32(0x4E00 + i as u32).unwrap()).collect();
        for mask in 0..(1u32 << (n - 1)) {
            let spans = spans_from_mask(n, mask);
            let sentence = Sentence::from_spans(chars.clone(), spans.clone()).unwrap();
            let labels = encode_labels(&sentence).unwrap();
            ensure(labels.last() == Some(&Label::Separate), || format!("n={n} mask={mask:b}: last label"))?;
            let decoded = decode_labels(&chars, &labels).unwrap();
            ensure(decoded == spans, || format!("n={n} mask={mask:b}: {decoded:?} != {spans:?}"))?;
            cases += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..=30);
        let labels: Vec<Label> = (0..n).map(|_| Label::from_index(rng.gen_range(0..2)).unwrap()).collect();
        let spans = decode_labels(&vec!['x'; n], &labels).unwrap();
        charseg::data::check_partition(&spans, n).map_err(|e| e.to_string())?;
    }
    Ok(format!("{cases} segmentations roundtrip, 10000 random label sequences partition"))
}

fn scorer_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let (mut gold, mut pred) = (Vec::new(), Vec::new());
        let (mut n_gold, mut n_pred, mut n_correct) = (0usize, 0usize, 0usize);
        for _ in 0..rng.gen_range(1..=3) {
            let n = rng.gen_range(1..=10usize);
            let chars: Vec<char> = (0..n).map(|_| char::from(b'a' + rng.gen_range(0..3u8))).collect();
            let g = spans_from_mask(n, rng.gen());
            let p = spans_from_mask(n, rng.gen());
            for i in 0..n {
                for j in i + 1..=n {
                    if g.contains(&(i, j)) && p.contains(&(i, j)) {
                        n_correct += 1;
                    }
                }
            }
            n_gold += g.len();
            n_pred += p.len();
            gold.push(Sentence::from_spans(chars.clone(), g).unwrap());
            pred.push(Sentence::from_spans(chars, p).unwrap());
        }
        let s = score_f1(&Corpus::new(gold), &Corpus::new(pred)).unwrap();
        let precision = n_correct as f64 / n_pred as f64;
        let recall = n_correct as f64 / n_gold as f64;
        let f1 = if n_correct == 0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        ensure((s.precision, s.recall, s.f1) == (precision, recall, f1), || {
            format!("case {case}: {s:?} vs oracle p={precision} r={recall} f={f1}")
        })?;
    }
    let hand = score_f1(&parse_corpus("歡迎 來", false), &parse_corpus("歡 迎 來", false)).unwrap();
    let shown = format!("{:.4}", hand.f1);
    ensure(shown == "0.4000", || format!("hand case F = {shown}"))?;
    Ok(format!("200 cases exact, hand case F = {shown}"))
}

fn cli(args: &[&str]) -> Result<(), String> {
    let code = run_with_output(std::iter::once("charseg").chain(args.iter().copied()), &mut std::io::sink());
    ensure(code == 0, || format!("`charseg {}` exited with {code}", args.join(" ")))
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("temporary paths are UTF-8")
}

fn overfit_run() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("toy.txt");
    let raw_path = dir.path().join("toy.raw");
    let (embed, model, pred) = (dir.path().join("toy.sgns"), dir.path().join("toy.seg"), dir.path().join("toy.pred"));
    std::fs::write(&corpus_path, TOY_CORPUS).unwrap();
    std::fs::write(&raw_path, TOY_CORPUS.replace(' ', "")).unwrap();
    let corpus = path_str(&corpus_path);
    cli(&["train-embed", corpus, "--out", path_str(&embed), "--dim", "16", "--seed", "7"])?;
    cli(&[
        "train-seg", corpus, "--embed", path_str(&embed), "--out", path_str(&model), "--epochs", "300",
        "--hidden-dim", "24", "--valid-frac", "0", "--seed", "7",
    ])?;
    cli(&["segment", "--model", path_str(&model), "--embed", path_str(&embed), path_str(&raw_path), path_str(&pred)])?;
    let gold = load_corpus(&corpus_path, true).unwrap();
    let f1 = score_f1(&gold, &load_corpus(&pred, true).unwrap()).map_err(|e| e.to_string())?.f1;
    let elapsed = start.elapsed();
    ensure(f1 == 1.0, || format!("training F1 {f1:.4}"))?;
    ensure(elapsed < Duration::from_secs(120), || format!("took {elapsed:.1?}"))?;
    Ok(format!("training F1 1.0000 in {elapsed:.1?}"))
}

fn normalization() -> Outcome {
    for cp in 0xFF01u32..=0xFF5E {
        let c = char::from_u32(cp).unwrap();
        let want = char::from_u32(cp - 0xFEE0).unwrap();
        ensure(normalize_halfwidth(&c.to_string()) == want.to_string(), || format!("U+{cp:04X}"))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ranges = [(0x20u32, 0x7F), (0xFF00, 0xFF70), (0x3000, 0x3010), (0x4E00, 0x4F00), (0x1F600, 0x1F610)];
    for i in 0..10_000 {
        let len = rng.gen_range(0..24);
        let s: String = (0..len)
            .map(|_| {
                let (lo, hi) = ranges[rng.gen_range(0..ranges.len())];
                char::from_u32(rng.gen_range(lo..hi)).unwrap()
            })
            .collect();
        let once = normalize_halfwidth(&s);
        ensure(normalize_halfwidth(&once) == once, || format!("string {i} {s:?} not idempotent"))?;
    }
    let out = normalize_halfwidth("１５類");
    ensure(out.as_bytes() == "15類".as_bytes(), || format!("got {out:?}"))?;
    Ok("94 code points, 10000 strings idempotent, \"１５類\" -> \"15類\"".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("toy.txt");
    std::fs::write(&corpus_path, TOY_CORPUS).unwrap();
    let corpus = path_str(&corpus_path);
    let out = |name: &str| dir.path().join(name);
    for run_id in ["a", "b"] {
        let lm = out(&format!("lm.{run_id}"));
        let embed = out(&format!("sgns.{run_id}"));
        cli(&["train-lm", corpus, "--out", path_str(&lm), "--epochs", "2", "--embed-dim", "8", "--hidden-dim", "8", "--seed", "3"])?;
        cli(&["train-embed", corpus, "--out", path_str(&embed), "--dim", "8", "--epochs", "2", "--seed", "3"])?;
        let lm_seg = out(&format!("seg-lm.{run_id}"));
        let embed_seg = out(&format!("seg-sgns.{run_id}"));
        for (flag, provider, target) in [("--lm", &lm, &lm_seg), ("--embed", &embed, &embed_seg)] {
            cli(&[
                "train-seg", corpus, flag, path_str(provider), "--out", path_str(target), "--epochs", "3",
                "--hidden-dim", "8", "--valid-frac", "0.2", "--seed", "3",
            ])?;
        }
    }
    for name in ["lm", "sgns", "seg-lm", "seg-sgns"] {
        let a = std::fs::read(out(&format!("{name}.a"))).unwrap();
        let b = std::fs::read(out(&format!("{name}.b"))).unwrap();
        ensure(a == b, || format!("{name} differs between runs"))?;
    }
    Ok("train-lm, train-embed, train-seg (both providers) byte-identical".into())
}

fn oov_advantage() -> Outcome {
    let start = Instant::now();
    let mut gaps = Vec::new();
    for seed in [1u64, 2, 3] {
        let synth = generate(&SyntheticConfig {
            seed,
            ..Default::default()
        });
        let vocab = build_vocab(&synth.unlabeled, 1).unwrap();
        let lm_options = BiLmTrainOptions {
            epochs: 15,
            seed,
            ..Default::default()
        };
        let lm = train_bilm(&synth.unlabeled, &vocab, BiLmConfig::new(vocab.len(), 16, 32), lm_options).unwrap();
        let sg_config = SkipGramConfig {
            embed_dim: 32,
            seed,
            ..Default::default()
        };
        let sg = train_skipgram(&synth.unlabeled, &vocab, sg_config).unwrap();
        let (train, valid) = split_train_valid(&synth.train, 0.05, seed).unwrap();
        let mut recall = Vec::new();
        for provider in [Provider::static_table(sg, vocab.clone()), Provider::elmo(lm.model, vocab)] {
            let mut config = TaggerConfig::for_provider(&provider);
            config.hidden_dim = 16;
            let options = TaggerTrainOptions {
                epochs: 30,
                seed,
                ..Default::default()
            };
            let tagger = train_tagger(&train, &valid, &provider, config, options).unwrap();
            let pred = segment_corpus(&tagger.model, &provider, &synth.test).unwrap();
            recall.push(oov_report(&synth.train, &synth.test, &pred).unwrap().oov_recall);
        }
        gaps.push((recall[0], recall[1]));
    }
    let elapsed = start.elapsed();
    let wins = gaps.iter().filter(|(s, e)| e - s >= 0.05).count();
    let detail: Vec<String> = gaps.iter().map(|(s, e)| format!("static {s:.3} / elmo {e:.3}")).collect();
    let detail = format!("{} in {elapsed:.1?}", detail.join(", "));
    ensure(wins >= 2, || format!("only {wins}/3 seeds with a 5pp gap: {detail}"))?;
    ensure(elapsed < Duration::from_secs(600), || format!("too slow: {detail}"))?;
    Ok(format!("{wins}/3 seeds: {detail}"))
}

fn mixer_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_sum: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    for _ in 0..1000 {
        let w = [rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0), rng.gen_range(-20.0..20.0)];
        let s = ElmoMixer::with_values(w, 1.0).normalized_weights();
        worst_sum = worst_sum.max((s.iter().sum::<f64>() - 1.0).abs());
        let c: f64 = rng.gen_range(-50.0..50.0);
        let shifted = ElmoMixer::with_values(w.map(|x| x + c), 1.0).normalized_weights();
        for (a, b) in s.iter().zip(&shifted) {
            worst_shift = worst_shift.max((a - b).abs());
        }
    }
    ensure(worst_sum <= 1e-12, || format!("sum off by {worst_sum:.2e}"))?;
    ensure(worst_shift <= 1e-12, || format!("shift changes weights by {worst_shift:.2e}"))?;

    let layer = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..5).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
    };
    let acts = LayerActivations {
        x: layer(&mut rng),
        h1: layer(&mut rng),
        h2: layer(&mut rng),
    };
    let w = [0.3, -1.2, 0.7];
    let base = ElmoMixer::with_values(w, 1.0).mix(&acts).unwrap();
    for gamma in [0.0, 0.25, 2.0, 8.0, -4.0] {
        let mixed = ElmoMixer::with_values(w, gamma).mix(&acts).unwrap();
        let exact = mixed.iter().flatten().zip(base.iter().flatten()).all(|(m, b)| *m == gamma * b);
        ensure(exact, || format!("gamma {gamma} is not an exact rescaling"))?;
    }
    Ok(format!("sum err {worst_sum:.1e}, shift err {worst_shift:.1e}, gamma scaling exact"))
}

fn oov_statistics() -> Outcome {
    let train = parse_corpus("歡迎 來", true);
    let report = |gold: &str| {
        let gold = parse_corpus(gold, true);
        oov_report(&train, &gold, &gold).unwrap()
    };
    let rate = report("歡迎 台灣 來 電機系").oov_rate;
    let digits = report("15類 去年6月 電機系").digit_ratio;
    let long = report("電機系 中共湖北省委").long_ratio;
    ensure(rate == 0.5 && digits == 2.0 / 3.0 && long == 0.5, || {
        format!("rate {rate}, digit ratio {digits}, long ratio {long}")
    })?;
    Ok("oov_rate 0.5, digit_ratio 2/3, long_ratio 1/2".into())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient suite", gradient_suite),
        ("uniform-logit identities", uniform_logits),
        ("encode/decode roundtrip", roundtrip),
        ("scorer oracle equivalence", scorer_oracle),
        ("toy corpus overfit", overfit_run),
        ("half-width normalization", normalization),
        ("seeded determinism", determinism),
        ("synthetic OOV advantage", oov_advantage),
        ("mixer invariants", mixer_invariants),
        ("OOV statistics", oov_statistics),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.iter().any(|f| *f == id || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
