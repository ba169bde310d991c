//! The `charseg` command line.
//!
//! [`run`] parses arguments and dispatches to a subcommand. Exit codes: 0 on
//! success, 1 for usage errors, 2 for anything wrong with the data or models.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use charseg::bilm::{train_bilm, BiLmConfig, BiLmTrainOptions};
use charseg::data::{build_vocab, load_corpus, normalize_halfwidth, read_utf8, split_train_valid, Corpus};
use charseg::eval::{oov_report, score_f1, Report};
use charseg::skipgram::{train_skipgram, SkipGramConfig};
use charseg::tagger::{train_tagger, TaggerConfig, TaggerTrainOptions};
use charseg::{EmbeddingSource, Error, ModelContainer, Provider, Segmenter, Topology};
use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "charseg", version, about = "Character-based Chinese word segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Map full-width ASCII variants to their half-width forms.
    Normalize { input: PathBuf, output: PathBuf },
    /// Train the bidirectional character language model.
    TrainLm(TrainLm),
    /// Train static skip-gram character embeddings.
    TrainEmbed(TrainEmbed),
    /// Train the segmenter on a space-segmented corpus.
    TrainSeg(TrainSeg),
    /// Segment raw text, one sentence per line.
    Segment(SegmentArgs),
    /// Word precision, recall and F1 of a prediction against gold.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
    /// Scores plus out-of-vocabulary statistics relative to a training corpus.
    OovStats {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
    },
}

#[derive(Args, Debug)]
struct TrainLm {
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    embed_dim: usize,
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct TrainEmbed {
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    #[arg(long, default_value_t = 5)]
    epochs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct ProviderArg {
    /// Language model file (contextual embeddings).
    #[arg(long)]
    lm: Option<PathBuf>,
    /// Skip-gram embedding file (static embeddings).
    #[arg(long)]
    embed: Option<PathBuf>,
}

impl ProviderArg {
    fn load(&self) -> Result<Provider, Error> {
        let (path, expected) = match (&self.lm, &self.embed) {
            (Some(p), _) => (p, EmbeddingSource::Elmo),
            (None, Some(p)) => (p, EmbeddingSource::Static),
            (None, None) => unreachable!("clap requires one provider"),
        };
        let provider = Provider::load(path)?;
        if provider.source() != expected {
            return Err(Error::Config(format!(
                "{} holds {} embeddings, but the flag asks for {expected}",
                path.display(),
                provider.source()
            )));
        }
        Ok(provider)
    }
}

#[derive(Args, Debug)]
struct TrainSeg {
    corpus: PathBuf,
    #[command(flatten)]
    provider: ProviderArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 300)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 0.33)]
    dropout: f64,
    #[arg(long, default_value_t = Topology::Parallel)]
    topology: Topology,
    /// Held-out fraction for model selection; 0 selects on the training set.
    #[arg(long, default_value_t = 0.05)]
    valid_frac: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug)]
struct SegmentArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    provider: ProviderArg,
    input: PathBuf,
    output: PathBuf,
}

/// Runs the command line given in `argv` (program name first) and returns
/// the process exit code. Reports go to stdout.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_with_output(argv, &mut std::io::stdout().lock())
}

/// Like [`run`] but writes reports to `out`. Diagnostics still go to stderr.
pub fn run_with_output<I, T>(argv: I, out: &mut dyn io::Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(report) => {
            if let Err(e) = out.write_all(report.as_bytes()) {
                eprintln!("error: cannot write report: {e}");
                return EXIT_DATA;
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn training_corpus(path: &Path) -> Result<Corpus, Error> {
    let corpus = load_corpus(path, true)?;
    if corpus.is_empty() {
        return Err(Error::Config(format!("{} contains no sentences", path.display())));
    }
    Ok(corpus)
}

fn dispatch(command: Command) -> Result<String, Error> {
    match command {
        Command::Normalize { input, output } => {
            let text = read_utf8(&input)?;
            write_text(&output, &normalize_halfwidth(&text))?;
            Ok(String::new())
        }
        Command::TrainLm(a) => {
            let corpus = training_corpus(&a.corpus)?;
            let vocab = build_vocab(&corpus, 1)?;
            let config = BiLmConfig::new(vocab.len(), a.embed_dim, a.hidden_dim);
            let options = BiLmTrainOptions {
                epochs: a.epochs,
                seed: a.seed,
                ..Default::default()
            };
            let trained = train_bilm(&corpus, &vocab, config, options)?;
            trained.model.to_container(&vocab).write(&a.out)?;
            let mut out = String::new();
            if let Some(loss) = trained.epoch_losses.last() {
                writeln!(out, "final_loss={loss:.4}").unwrap();
            }
            Ok(out)
        }
        Command::TrainEmbed(a) => {
            let corpus = training_corpus(&a.corpus)?;
            let vocab = build_vocab(&corpus, 1)?;
            let config = SkipGramConfig {
                embed_dim: a.dim,
                window: a.window,
                negatives: a.negatives,
                epochs: a.epochs,
                seed: a.seed,
                ..Default::default()
            };
            train_skipgram(&corpus, &vocab, config)?
                .to_container(&vocab)
                .write(&a.out)?;
            Ok(String::new())
        }
        Command::TrainSeg(a) => train_seg(a),
        Command::Segment(a) => {
            let provider = a.provider.load()?;
            let model = Segmenter::from_container(&ModelContainer::read(&a.model)?)?;
            let mut out = String::new();
            for line in read_utf8(&a.input)?.lines() {
                out.push_str(&model.segment(&provider, line)?.join(" "));
                out.push('\n');
            }
            write_text(&a.output, &out)?;
            Ok(String::new())
        }
        Command::Eval { gold, pred } => {
            let score = score_f1(&load_corpus(&gold, true)?, &load_corpus(&pred, true)?)?;
            Ok(Report { score: &score, oov: None }.to_string())
        }
        Command::OovStats { train, gold, pred } => {
            let train = load_corpus(&train, true)?;
            let gold = load_corpus(&gold, true)?;
            let pred = load_corpus(&pred, true)?;
            let score = score_f1(&gold, &pred)?;
            let oov = oov_report(&train, &gold, &pred)?;
            Ok(Report {
                score: &score,
                oov: Some(&oov),
            }
            .to_string())
        }
    }
}

fn train_seg(a: TrainSeg) -> Result<String, Error> {
    let corpus = training_corpus(&a.corpus)?;
    let provider = a.provider.load()?;
    let (train, valid) = if a.valid_frac == 0.0 {
        (corpus, Corpus::default())
    } else {
        split_train_valid(&corpus, a.valid_frac, a.seed)?
    };
    let mut config = TaggerConfig::for_provider(&provider);
    config.hidden_dim = a.hidden_dim;
    config.dropout_rate = a.dropout;
    config.topology = a.topology;
    let options = TaggerTrainOptions {
        epochs: a.epochs,
        seed: a.seed,
        ..Default::default()
    };
    let trained = train_tagger(&train, &valid, &provider, config, options)?;
    trained.model.to_container().write(&a.out)?;
    let mut out = String::new();
    if let (Some(epoch), Some(best)) = (trained.best_epoch, trained.best_epoch.and_then(|e| trained.history.get(e - 1))) {
        writeln!(out, "best_epoch={epoch}").unwrap();
        writeln!(out, "selection_f1={:.4}", best.valid_f1).unwrap();
    }
    Ok(out)
}
