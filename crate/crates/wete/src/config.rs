//! Run configuration. Precedence: `--set key=value` flags, then the
//! `key = value` config file, then built-in defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use wete_core::corpus::BuildOptions;
use wete_core::{InputTransform, ModelConfig, TrainConfig, TrainingMode};

use crate::error::{CliError, Result};
use crate::fmt::g6;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: TrainingMode,
    pub topics: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub min_doc_len: usize,
    pub min_term_doc_freq: usize,
    pub input_transform: InputTransform,
    pub n_clusters: usize,
    pub kmeans_restarts: usize,
    pub oov_stddev: f64,
    pub log_every: usize,
    pub corpus: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        Self {
            mode: m.mode,
            topics: m.topics,
            embed_dim: m.embed_dim,
            hidden: m.hidden,
            epsilon: m.epsilon,
            batch_size: t.batch_size,
            epochs: t.epochs,
            lr: t.lr,
            seed: 0,
            min_doc_len: 1,
            min_term_doc_freq: 1,
            input_transform: m.input_transform,
            n_clusters: 20,
            kmeans_restarts: 10,
            oov_stddev: wete_core::embedding::DEFAULT_INIT_STDDEV,
            log_every: 1,
            corpus: None,
            labels: None,
            stopwords: None,
            embeddings: None,
            test_corpus: None,
            test_labels: None,
            checkpoint: None,
            output_dir: PathBuf::from("."),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse {value:?}")))
}

fn positive(key: &str, value: &str) -> Result<usize> {
    match parse::<usize>(key, value)? {
        0 => Err(CliError::Config(format!("{key} must be at least 1"))),
        n => Ok(n),
    }
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "mode" => self.mode = value.parse().map_err(|_| CliError::Config(format!("mode: unknown value {value:?}")))?,
            "topics" => self.topics = parse(key, value)?,
            "embed_dim" => self.embed_dim = positive(key, value)?,
            "hidden" => self.hidden = positive(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "batch_size" => self.batch_size = positive(key, value)?,
            "epochs" => self.epochs = positive(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "min_doc_len" => self.min_doc_len = parse(key, value)?,
            "min_term_doc_freq" => self.min_term_doc_freq = parse(key, value)?,
            "input_transform" => {
                self.input_transform = value
                    .parse()
                    .map_err(|_| CliError::Config(format!("input_transform: unknown value {value:?}")))?
            }
            "n_clusters" => self.n_clusters = positive(key, value)?,
            "kmeans_restarts" => self.kmeans_restarts = positive(key, value)?,
            "oov_stddev" => self.oov_stddev = parse(key, value)?,
            "log_every" => self.log_every = positive(key, value)?,
            "corpus" => self.corpus = path(value),
            "labels" => self.labels = path(value),
            "stopwords" => self.stopwords = path(value),
            "embeddings" => self.embeddings = path(value),
            "test_corpus" => self.test_corpus = path(value),
            "test_labels" => self.test_labels = path(value),
            "checkpoint" => self.checkpoint = path(value),
            "output_dir" => self.output_dir = PathBuf::from(if value.is_empty() { "." } else { value }),
            other => return Err(CliError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a config file body. Relative paths stay relative to the
    /// working directory.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v)
                .map_err(|e| CliError::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("config: "))))?;
        }
        Ok(())
    }

    /// Applies `key=value` overrides.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .as_ref()
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects key=value, got {:?}", o.as_ref())))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides`.
    pub fn resolve<S: AsRef<str>>(file: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(p) = file {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            cfg.apply_text(&text)?;
        }
        cfg.apply_overrides(overrides)?;
        Ok(cfg)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            topics: self.topics,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            epsilon: self.epsilon,
            mode: self.mode,
            input_transform: self.input_transform,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            lr: self.lr,
            seed: self.seed,
            log_every: 1,
        }
    }

    pub fn build_options(&self, stopwords: std::collections::BTreeSet<String>) -> BuildOptions {
        BuildOptions {
            min_doc_len: self.min_doc_len,
            min_term_doc_freq: self.min_term_doc_freq,
            stopwords,
        }
    }

    /// Checks values needed by `train` and that every configured input file
    /// exists.
    pub fn validate_for_train(&self) -> Result<()> {
        if self.corpus.is_none() {
            return Err(CliError::Config("corpus is required".into()));
        }
        if self.mode.needs_pretrained() && self.embeddings.is_none() {
            return Err(CliError::Config(format!("mode {} requires an embeddings file", self.mode)));
        }
        if self.topics < 2 {
            return Err(CliError::Config("topics must be at least 2".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(CliError::Config("lr must be finite and non-negative".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Config("epsilon must be finite and non-negative".into()));
        }
        if !(self.oov_stddev > 0.0 && self.oov_stddev.is_finite()) {
            return Err(CliError::Config("oov_stddev must be positive".into()));
        }
        self.check_inputs_exist()
    }

    /// Missing input files are IO failures, reported before any work.
    pub fn check_inputs_exist(&self) -> Result<()> {
        let inputs = [
            ("corpus", &self.corpus),
            ("labels", &self.labels),
            ("stopwords", &self.stopwords),
            ("embeddings", &self.embeddings),
            ("test_corpus", &self.test_corpus),
            ("test_labels", &self.test_labels),
        ];
        for (key, p) in inputs {
            if let Some(p) = p {
                if let Err(e) = std::fs::File::open(p) {
                    return Err(CliError::io(p, std::io::Error::new(e.kind(), format!("{key}: {e}"))));
                }
                if !p.is_file() {
                    return Err(CliError::Config(format!("{key}: {} is not a file", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Checkpoint path, defaulting to `output_dir/model.wete`.
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.output_dir.join("model.wete"))
    }

    /// Effective configuration as `key = value` lines.
    pub fn echo(&self) -> String {
        let p = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("mode", self.mode.to_string());
        line("topics", self.topics.to_string());
        line("embed_dim", self.embed_dim.to_string());
        line("hidden", self.hidden.to_string());
        line("epsilon", g6(self.epsilon));
        line("batch_size", self.batch_size.to_string());
        line("epochs", self.epochs.to_string());
        line("lr", g6(self.lr));
        line("seed", self.seed.to_string());
        line("min_doc_len", self.min_doc_len.to_string());
        line("min_term_doc_freq", self.min_term_doc_freq.to_string());
        line("input_transform", self.input_transform.to_string());
        line("n_clusters", self.n_clusters.to_string());
        line("kmeans_restarts", self.kmeans_restarts.to_string());
        line("oov_stddev", g6(self.oov_stddev));
        line("log_every", self.log_every.to_string());
        line("corpus", p(&self.corpus));
        line("labels", p(&self.labels));
        line("stopwords", p(&self.stopwords));
        line("embeddings", p(&self.embeddings));
        line("test_corpus", p(&self.test_corpus));
        line("test_labels", p(&self.test_labels));
        line("checkpoint", self.checkpoint_path().display().to_string());
        line("output_dir", self.output_dir.display().to_string());
        s
    }
}
