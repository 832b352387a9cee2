//! The five subcommands, as library functions that return their results
//! and write their files. `main` only parses arguments and prints.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use wete_core::metrics::{cluster_metrics, topic_metrics, KMeansConfig, MetricsReport};
use wete_core::model::top_words;
use wete_core::train::{train as train_model, EpochLog};
use wete_core::{corpus::build_corpus, Corpus, Matrix, Vocabulary, WeteModel};

use crate::checkpoint;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::fmt::g6;
use crate::io;

/// Separate stream for out-of-vocabulary rows so they do not share draws
/// with model initialisation.
const OOV_STREAM: u64 = 0x6f6f_765f_726f_7773;

pub const TRAIN_LOG: &str = "train_log.csv";
pub const METRICS_TXT: &str = "metrics.txt";
pub const METRICS_JSON: &str = "metrics.json";

/// Reads and preprocesses the training corpus named in `cfg`, attaching
/// labels when configured.
pub fn load_corpus(cfg: &RunConfig) -> Result<Corpus> {
    let path = cfg
        .corpus
        .as_deref()
        .ok_or_else(|| CliError::Config("corpus is required".into()))?;
    let lines = io::read_lines(path)?;
    let stopwords = match &cfg.stopwords {
        Some(p) => io::read_stopwords(p)?,
        None => Default::default(),
    };
    let corpus = build_corpus(&lines, &cfg.build_options(stopwords))?;
    match &cfg.labels {
        Some(p) => Ok(corpus.attach_labels(&io::read_labels(p)?)?),
        None => Ok(corpus),
    }
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub epochs: Vec<EpochLog>,
    pub steps: usize,
    pub vocab_size: usize,
    pub documents: usize,
    pub embeddings_found: Option<usize>,
}

/// Trains a model and writes the checkpoint atomically. Progress and the
/// effective configuration go to `progress`.
pub fn train(cfg: &RunConfig, progress: &mut dyn Write) -> Result<TrainSummary> {
    cfg.validate_for_train()?;
    let _ = write!(progress, "{}", cfg.echo());
    let corpus = load_corpus(cfg)?;
    let vocab = corpus.vocab();
    let _ = writeln!(progress, "corpus: {} documents, {} terms", corpus.len(), vocab.len());

    let mut found = None;
    let mut model = match &cfg.embeddings {
        Some(path) if cfg.mode.needs_pretrained() => {
            let (e, report) = io::load_text_embeddings(path, vocab, cfg.oov_stddev, cfg.seed ^ OOV_STREAM)?;
            if e.dim() != cfg.embed_dim {
                return Err(CliError::Config(format!(
                    "embeddings file has dimension {} but embed_dim = {}",
                    e.dim(),
                    cfg.embed_dim
                )));
            }
            let _ = writeln!(
                progress,
                "embeddings: {} of {} terms found, {} initialised randomly",
                report.found,
                vocab.len(),
                report.missing.len()
            );
            found = Some(report.found);
            WeteModel::new(cfg.model_config(), e)?
        }
        _ => WeteModel::from_scratch(cfg.model_config(), vocab.len())?,
    };

    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::io(&cfg.output_dir, e))?;
    let log_path = cfg.output_dir.join(TRAIN_LOG);
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| CliError::io(&log_path, e))?;
    let mut log_err = None;
    let mut tick = Instant::now();
    let every = cfg.log_every;
    let result = train_model(&corpus, &mut model, &cfg.train_config(), |e, _| {
        let secs = tick.elapsed().as_secs_f64();
        tick = Instant::now();
        let line = format!("{},{},{},{},{}", e.epoch, g6(e.mean_loss), g6(e.mean_ct), g6(e.mean_nll), g6(secs));
        if let Err(err) = writeln!(log, "{line}") {
            log_err.get_or_insert(err);
        }
        if e.epoch % every == 0 || e.epoch == cfg.epochs {
            let _ = writeln!(
                progress,
                "epoch {}: loss {} (ct {}, nll {}) {}s",
                e.epoch,
                g6(e.mean_loss),
                g6(e.mean_ct),
                g6(e.mean_nll),
                g6(secs)
            );
        }
    });
    if let Some(err) = log_err {
        return Err(CliError::io(&log_path, err));
    }
    let report = result?;

    model.round_to_f32();
    let ckpt = cfg.checkpoint_path();
    if let Some(dir) = ckpt.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    checkpoint::save(&ckpt, &model, vocab)?;
    let _ = writeln!(progress, "checkpoint written to {}", ckpt.display());
    Ok(TrainSummary {
        epochs: report.epochs,
        steps: report.steps,
        vocab_size: vocab.len(),
        documents: corpus.len(),
        embeddings_found: found,
    })
}

/// Errors naming the first position where the two vocabularies differ.
pub fn check_vocab(checkpoint: &Vocabulary, corpus: &Vocabulary) -> Result<()> {
    let (a, b) = (checkpoint.terms(), corpus.terms());
    for i in 0..a.len().max(b.len()) {
        match (a.get(i), b.get(i)) {
            (Some(x), Some(y)) if x == y => continue,
            (Some(x), Some(y)) => {
                return Err(CliError::VocabMismatch(format!(
                    "term {i} is {x:?} in the checkpoint but {y:?} in the corpus"
                )))
            }
            (Some(x), None) => {
                return Err(CliError::VocabMismatch(format!(
                    "checkpoint has extra term {x:?} at position {i}"
                )))
            }
            (None, Some(y)) => {
                return Err(CliError::VocabMismatch(format!(
                    "corpus has extra term {y:?} at position {i}"
                )))
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(())
}

/// Proportions of every document, one row each.
pub fn theta_matrix(model: &WeteModel, corpus: &Corpus) -> Result<Matrix> {
    let rows: Vec<f64> = corpus.documents().iter().flat_map(|d| model.infer_theta(d)).collect();
    Ok(Matrix::from_vec(corpus.len(), model.num_topics(), rows)?)
}

fn write_report(dir: &Path, report: &MetricsReport) -> Result<String> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let entries = report.entries();
    let mut txt = String::new();
    let mut json = serde_json::Map::new();
    for (k, v) in &entries {
        let shown = g6(*v);
        txt.push_str(&format!("{k}={shown}\n"));
        let value = shown
            .parse::<f64>()
            .ok()
            .and_then(serde_json::Number::from_f64)
            .map_or(serde_json::Value::Null, serde_json::Value::Number);
        json.insert(k.clone(), value);
    }
    let txt_path = dir.join(METRICS_TXT);
    fs::write(&txt_path, &txt).map_err(|e| CliError::io(&txt_path, e))?;
    let json_path = dir.join(METRICS_JSON);
    let body = serde_json::to_string_pretty(&serde_json::Value::Object(json)).expect("serializable") + "\n";
    fs::write(&json_path, body).map_err(|e| CliError::io(&json_path, e))?;
    Ok(txt)
}

/// Topic metrics against the training corpus, plus clustering metrics on
/// the test documents when labels are available. Writes `metrics.txt` and
/// `metrics.json` into the output directory and returns the report.
pub fn eval(cfg: &RunConfig) -> Result<MetricsReport> {
    cfg.check_inputs_exist()?;
    let (model, vocab) = checkpoint::load(&cfg.checkpoint_path())?;
    let reference = load_corpus(&RunConfig { labels: None, ..cfg.clone() })?;
    check_vocab(&vocab, reference.vocab())?;

    let (test_path, label_path) = match &cfg.test_corpus {
        Some(p) => (p.clone(), cfg.test_labels.clone()),
        None => (cfg.corpus.clone().expect("checked by load_corpus"), cfg.labels.clone()),
    };
    let lines = io::read_lines(&test_path)?;
    let test = Corpus::encode_with_vocab(&lines, Arc::new(vocab), false)?;
    let test = match &label_path {
        Some(p) => test.attach_labels(&io::read_labels(p)?)?,
        None => test,
    };

    let mut report = topic_metrics(&model.topic_word_dist(), &reference)?;
    if let Some(labels) = test.labels() {
        let theta = theta_matrix(&model, &test)?;
        let km = KMeansConfig {
            restarts: cfg.kmeans_restarts,
            ..KMeansConfig::new(cfg.n_clusters, cfg.seed)
        };
        let (purity, nmi) = cluster_metrics(&theta, &labels, &km)?;
        report.km_purity = Some(purity);
        report.km_nmi = Some(nmi);
    }
    write_report(&cfg.output_dir, &report)?;
    Ok(report)
}

/// `id: w1 ... wn` for every topic, words in decreasing probability.
pub fn topics(checkpoint_path: &Path, n_words: usize) -> Result<Vec<String>> {
    let (model, vocab) = checkpoint::load(checkpoint_path)?;
    if n_words > vocab.len() {
        return Err(CliError::Usage(format!(
            "cannot list {n_words} words per topic: vocabulary has {} terms",
            vocab.len()
        )));
    }
    let phi = model.topic_word_dist();
    (0..model.num_topics())
        .map(|k| {
            let words: Vec<&str> = top_words(&phi, k, n_words)?.into_iter().map(|id| vocab.term(id)).collect();
            Ok(format!("{k}: {}", words.join(" ")))
        })
        .collect()
}

/// Topic proportions for every line of `corpus_path`. Unknown tokens are
/// ignored; a line with no known token still gets a row.
pub fn infer(checkpoint_path: &Path, corpus_path: &Path) -> Result<Matrix> {
    let (model, vocab) = checkpoint::load(checkpoint_path)?;
    let lines = io::read_lines(corpus_path)?;
    if lines.is_empty() {
        return Err(CliError::Core(wete_core::Error::EmptyCorpus));
    }
    let corpus = Corpus::encode_with_vocab(&lines, Arc::new(vocab), true)?;
    if corpus.documents().iter().all(|d| d.is_empty()) {
        return Err(CliError::VocabMismatch(
            "no token of the corpus appears in the checkpoint vocabulary".into(),
        ));
    }
    theta_matrix(&model, &corpus)
}

/// The `k` words closest to `word` by cosine similarity of the checkpoint's
/// word embeddings, the query first.
pub fn nearest(checkpoint_path: &Path, word: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let (model, vocab) = checkpoint::load(checkpoint_path)?;
    let id = vocab
        .id(word)
        .ok_or_else(|| CliError::Usage(format!("{word:?} is not in the vocabulary")))?;
    if k == 0 || k > vocab.len() {
        return Err(CliError::Usage(format!("k must be between 1 and {}", vocab.len())));
    }
    Ok(model
        .word_embeddings
        .nearest_words(id as usize, k)?
        .into_iter()
        .map(|(w, s)| (vocab.term(w).to_owned(), s))
        .collect())
}
