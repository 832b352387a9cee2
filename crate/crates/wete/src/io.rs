//! Text file formats: corpora, labels, stopwords, GloVe-style embeddings and
//! the topic-proportion CSV.

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use wete_core::embedding::TextEmbeddingLoader;
use wete_core::{CoverageReport, EmbeddingMatrix, Matrix, Vocabulary};

use crate::error::{CliError, Result};
use crate::fmt;

/// Lines of a UTF-8 text file, without terminators.
pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().map(str::to_owned).collect())
}

/// One label per line; surrounding whitespace is ignored.
pub fn read_labels(path: &Path) -> Result<Vec<String>> {
    Ok(read_lines(path)?.into_iter().map(|l| l.trim().to_owned()).collect())
}

/// One stopword per line; blank lines are skipped.
pub fn read_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    Ok(read_lines(path)?
        .into_iter()
        .map(|l| l.trim().to_owned())
        .filter(|l| !l.is_empty())
        .collect())
}

/// Streams a pretrained embedding file (`word f_1 ... f_H` per line).
pub fn load_text_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    oov_stddev: f64,
    seed: u64,
) -> Result<(EmbeddingMatrix, CoverageReport)> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut loader = TextEmbeddingLoader::new(vocab);
    for line in BufReader::new(file).lines() {
        loader.push_line(&line.map_err(|e| CliError::io(path, e))?)?;
    }
    Ok(loader.finish(oov_stddev, seed)?)
}

/// Writes embeddings in the same text format. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn save_text_embeddings(path: &Path, vocab: &Vocabulary, embeddings: &EmbeddingMatrix) -> Result<()> {
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for (id, term) in vocab.terms().iter().enumerate() {
        write!(w, "{term}").map_err(io)?;
        for v in embeddings.row(id) {
            write!(w, " {v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Significant digits for topic proportions: enough that every row still
/// sums to one within 1e-6 after rounding.
pub const THETA_DIGITS: usize = 10;

/// One comma-separated row per document.
pub fn write_theta_csv<W: Write>(mut out: W, theta: &Matrix) -> std::io::Result<()> {
    for r in 0..theta.rows() {
        let row: Vec<String> = theta.row(r).iter().map(|&x| fmt::sig(x, THETA_DIGITS)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()
}
