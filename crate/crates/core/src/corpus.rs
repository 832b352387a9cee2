//! Tokenized documents, vocabulary and bag-of-words counts.
//!
//! Input lines are pre-tokenized text: tokens are separated by ASCII
//! whitespace. Filters apply in a fixed order: stopwords, then the
//! document-frequency threshold, then the minimum document length.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Bijection between terms and ids `0..V`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from distinct, non-empty terms in id order.
    pub fn from_terms<S: AsRef<str>>(terms: &[S]) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("vocabulary must not be empty"));
        }
        let mut index = BTreeMap::new();
        let mut list = Vec::with_capacity(terms.len());
        for (id, t) in terms.iter().enumerate() {
            let t = t.as_ref();
            if t.is_empty() {
                return Err(Error::InvalidArgument("vocabulary terms must be non-empty"));
            }
            if index.insert(t.to_string(), id as u32).is_some() {
                return Err(Error::InvalidArgument("vocabulary terms must be unique"));
            }
            list.push(t.to_string());
        }
        Ok(Self { terms: list, index })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// One tokenized document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    word_ids: Vec<u32>,
    bow: Vec<(u32, u32)>,
    label: Option<u32>,
}

impl Document {
    /// Builds a document from its token ids. Returns `None` for an empty
    /// sequence.
    pub fn from_word_ids(word_ids: Vec<u32>) -> Option<Self> {
        if word_ids.is_empty() {
            return None;
        }
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for &w in &word_ids {
            *counts.entry(w).or_default() += 1;
        }
        Some(Self {
            word_ids,
            bow: counts.into_iter().collect(),
            label: None,
        })
    }

    pub fn word_ids(&self) -> &[u32] {
        &self.word_ids
    }

    /// Sparse counts as `(term id, count)`, sorted by id.
    pub fn bow(&self) -> &[(u32, u32)] {
        &self.bow
    }

    /// Token count `N_j`.
    pub fn len(&self) -> usize {
        self.word_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_ids.is_empty()
    }

    pub fn label(&self) -> Option<u32> {
        self.label
    }

    /// Dense count vector of length `vocab_size`.
    pub fn dense_counts(&self, vocab_size: usize) -> Vec<f64> {
        let mut x = alloc::vec![0.0; vocab_size];
        for &(id, c) in &self.bow {
            x[id as usize] = f64::from(c);
        }
        x
    }
}

/// Preprocessing filters for [`build_corpus`].
#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Documents with fewer tokens than this after filtering are dropped.
    pub min_doc_len: usize,
    /// Terms appearing in fewer documents than this are removed.
    pub min_term_doc_freq: usize,
    pub stopwords: BTreeSet<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self {
            min_doc_len: 1,
            min_term_doc_freq: 1,
            stopwords: BTreeSet::new(),
        }
    }
}

/// An immutable collection of documents over a shared vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    vocab: Arc<Vocabulary>,
    documents: Vec<Document>,
    label_names: Option<Vec<String>>,
    /// Input line index of each surviving document.
    source_lines: Vec<usize>,
    /// Number of input lines the corpus was built from.
    source_len: usize,
}

/// Tokenizes `lines` and applies the filters in `options`.
///
/// The vocabulary lists surviving terms in order of first appearance in the
/// surviving documents.
pub fn build_corpus<S: AsRef<str>>(lines: &[S], options: &BuildOptions) -> Result<Corpus> {
    if lines.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let tokenized: Vec<Vec<&str>> = lines
        .iter()
        .map(|l| {
            l.as_ref()
                .split_ascii_whitespace()
                .filter(|t| !options.stopwords.contains(*t))
                .collect()
        })
        .collect();

    let mut doc_freq: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &tokenized {
        let distinct: BTreeSet<&str> = doc.iter().copied().collect();
        for t in distinct {
            *doc_freq.entry(t).or_default() += 1;
        }
    }

    let min_len = options.min_doc_len.max(1);
    let mut index: BTreeMap<String, u32> = BTreeMap::new();
    let mut terms: Vec<String> = Vec::new();
    let mut documents = Vec::new();
    let mut source_lines = Vec::new();
    for (line, doc) in tokenized.iter().enumerate() {
        let kept: Vec<&str> = doc
            .iter()
            .copied()
            .filter(|t| doc_freq[t] >= options.min_term_doc_freq)
            .collect();
        if kept.len() < min_len {
            continue;
        }
        let ids = kept
            .iter()
            .map(|&t| match index.get(t) {
                Some(&id) => id,
                None => {
                    let id = terms.len() as u32;
                    index.insert(t.to_string(), id);
                    terms.push(t.to_string());
                    id
                }
            })
            .collect();
        documents.extend(Document::from_word_ids(ids));
        source_lines.push(line);
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok(Corpus {
        vocab: Arc::new(Vocabulary { terms, index }),
        documents,
        label_names: None,
        source_lines,
        source_len: lines.len(),
    })
}

impl Corpus {
    /// Encodes `lines` against an existing vocabulary. Unknown tokens are
    /// skipped; when `keep_empty` is false, lines with no known token are
    /// dropped, otherwise they are kept as empty documents.
    pub fn encode_with_vocab<S: AsRef<str>>(
        lines: &[S],
        vocab: Arc<Vocabulary>,
        keep_empty: bool,
    ) -> Result<Self> {
        let mut documents = Vec::new();
        let mut source_lines = Vec::new();
        for (line, l) in lines.iter().enumerate() {
            let ids: Vec<u32> = l
                .as_ref()
                .split_ascii_whitespace()
                .filter_map(|t| vocab.id(t))
                .collect();
            match Document::from_word_ids(ids) {
                Some(doc) => documents.push(doc),
                None if keep_empty => documents.push(Document {
                    word_ids: Vec::new(),
                    bow: Vec::new(),
                    label: None,
                }),
                None => continue,
            }
            source_lines.push(line);
        }
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self {
            vocab,
            documents,
            label_names: None,
            source_lines,
            source_len: lines.len(),
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn shared_vocab(&self) -> Arc<Vocabulary> {
        Arc::clone(&self.vocab)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    /// Labels of all documents, if the corpus is labeled.
    pub fn labels(&self) -> Option<Vec<u32>> {
        self.documents.iter().map(|d| d.label).collect()
    }

    /// Input line index of each document.
    pub fn source_lines(&self) -> &[usize] {
        &self.source_lines
    }

    /// Attaches one label per *input line*; labels of dropped lines are
    /// discarded. Class ids follow first appearance among the surviving
    /// documents.
    pub fn attach_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        if labels.len() != self.source_len {
            return Err(Error::LabelCountMismatch {
                expected: self.source_len,
                got: labels.len(),
            });
        }
        let mut names: Vec<String> = Vec::new();
        let mut documents = self.documents.clone();
        for (doc, &line) in documents.iter_mut().zip(&self.source_lines) {
            let name = labels[line].as_ref().trim();
            let id = match names.iter().position(|n| n == name) {
                Some(i) => i,
                None => {
                    names.push(name.to_string());
                    names.len() - 1
                }
            };
            doc.label = Some(id as u32);
        }
        Ok(Self {
            documents,
            label_names: Some(names),
            ..self.clone()
        })
    }

    /// Deterministic train/test partition. The test side receives
    /// `round_half_up(test_fraction * J)` documents; both sides keep the
    /// original document order.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "test fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        let n = self.documents.len();
        let n_test = libm::floor(test_fraction * n as f64 + 0.5) as usize;
        if n_test == 0 || n_test >= n {
            return Err(Error::InvalidSplit(format!(
                "{n} documents with test fraction {test_fraction} leaves a side empty"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut is_test = alloc::vec![false; n];
        for &i in &order[..n_test] {
            is_test[i] = true;
        }
        Ok((self.subset(|i| !is_test[i]), self.subset(|i| is_test[i])))
    }

    fn subset(&self, keep: impl Fn(usize) -> bool) -> Corpus {
        let idx: Vec<usize> = (0..self.documents.len()).filter(|&i| keep(i)).collect();
        Corpus {
            vocab: Arc::clone(&self.vocab),
            documents: idx.iter().map(|&i| self.documents[i].clone()).collect(),
            label_names: self.label_names.clone(),
            source_lines: idx.iter().map(|&i| self.source_lines[i]).collect(),
            source_len: self.source_len,
        }
    }

    /// Relative frequency of every term over all tokens.
    pub fn term_distribution(&self) -> Vec<f64> {
        let mut p = alloc::vec![0.0; self.vocab.len()];
        let mut total = 0.0;
        for d in &self.documents {
            for &(id, c) in d.bow() {
                p[id as usize] += f64::from(c);
                total += f64::from(c);
            }
        }
        if total > 0.0 {
            p.iter_mut().for_each(|v| *v /= total);
        }
        p
    }
}

/// Free-function form of [`Corpus::attach_labels`].
pub fn attach_labels<S: AsRef<str>>(corpus: &Corpus, labels: &[S]) -> Result<Corpus> {
    corpus.attach_labels(labels)
}

/// Free-function form of [`Corpus::split`].
pub fn split_corpus(corpus: &Corpus, test_fraction: f64, seed: u64) -> Result<(Corpus, Corpus)> {
    corpus.split(test_fraction, seed)
}
