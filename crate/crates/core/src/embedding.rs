//! Word-embedding table: random initialization, pretrained text loading and
//! cosine nearest-neighbour queries.

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Default standard deviation for random rows (random init and OOV rows).
pub const DEFAULT_INIT_STDDEV: f64 = 0.02;

/// `V x H` embedding table, one row per vocabulary term.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    values: Matrix,
    trainable: Vec<bool>,
}

/// Which vocabulary terms were found in a pretrained file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub found: usize,
    pub missing: Vec<u32>,
}

fn gaussian_matrix(rows: usize, cols: usize, stddev: f64, rng: &mut ChaCha8Rng) -> Result<Matrix> {
    let normal = Normal::new(0.0, stddev).map_err(|_| Error::InvalidArgument("stddev must be positive"))?;
    let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
    Matrix::from_vec(rows, cols, data)
}

impl EmbeddingMatrix {
    /// Wraps existing values; every row starts trainable.
    pub fn new(values: Matrix) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::InvalidArgument("embedding matrix must be non-empty"));
        }
        if !values.is_finite() {
            return Err(Error::InvalidArgument("embedding values must be finite"));
        }
        let trainable = vec![true; values.rows()];
        Ok(Self { values, trainable })
    }

    /// Rows drawn i.i.d. from `N(0, stddev^2)`.
    pub fn random(vocab_size: usize, dim: usize, stddev: f64, seed: u64) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::InvalidArgument("vocabulary size and dimension must be >= 1"));
        }
        if !(stddev > 0.0) {
            return Err(Error::InvalidArgument("stddev must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::new(gaussian_matrix(vocab_size, dim, stddev, &mut rng)?)
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Matrix {
        &mut self.values
    }

    pub fn vocab_size(&self) -> usize {
        self.values.rows()
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.values.row(id)
    }

    pub fn trainable_mask(&self) -> &[bool] {
        &self.trainable
    }

    pub fn set_trainable(&mut self, id: usize, trainable: bool) {
        self.trainable[id] = trainable;
    }

    pub fn set_all_trainable(&mut self, trainable: bool) {
        self.trainable.iter_mut().for_each(|t| *t = trainable);
    }

    /// Cosine nearest neighbours of `query`. The query itself is listed
    /// first; the rest follow by descending similarity, ties by ascending id.
    /// Zero-norm candidate rows get similarity 0.
    pub fn nearest_words(&self, query: usize, k: usize) -> Result<Vec<(u32, f64)>> {
        let v = self.vocab_size();
        if query >= v {
            return Err(Error::InvalidArgument("query id out of range"));
        }
        if k > v {
            return Err(Error::InvalidArgument("k exceeds vocabulary size"));
        }
        let q = self.row(query);
        let qn = math::sqrt(math::dot(q, q));
        if qn == 0.0 {
            return Err(Error::DegenerateVector(query));
        }
        let mut sims: Vec<(u32, f64)> = (0..v)
            .map(|i| {
                let r = self.row(i);
                let rn = math::sqrt(math::dot(r, r));
                let s = if rn == 0.0 { 0.0 } else { math::dot(q, r) / (qn * rn) };
                (i as u32, s)
            })
            .collect();
        let query = query as u32;
        sims.sort_by(|a, b| {
            (b.0 == query)
                .cmp(&(a.0 == query))
                .then(b.1.total_cmp(&a.1))
                .then(a.0.cmp(&b.0))
        });
        sims.truncate(k);
        Ok(sims)
    }
}

/// Free-function form of [`EmbeddingMatrix::random`].
pub fn random_init(vocab_size: usize, dim: usize, stddev: f64, seed: u64) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::random(vocab_size, dim, stddev, seed)
}

/// Free-function form of [`EmbeddingMatrix::nearest_words`].
pub fn nearest_words(e: &EmbeddingMatrix, query: usize, k: usize) -> Result<Vec<(u32, f64)>> {
    e.nearest_words(query, k)
}

/// Incremental reader for the GloVe text format (`word f_1 ... f_H`, one
/// entry per line). Lines are fed one at a time so callers can stream large
/// files. The dimension is fixed by the first non-blank line; the first
/// occurrence of a word wins.
#[derive(Debug)]
pub struct TextEmbeddingLoader<'v> {
    vocab: &'v Vocabulary,
    dim: Option<usize>,
    rows: Vec<Option<Vec<f64>>>,
    line: usize,
    usable: usize,
}

impl<'v> TextEmbeddingLoader<'v> {
    pub fn new(vocab: &'v Vocabulary) -> Self {
        Self {
            vocab,
            dim: None,
            rows: vec![None; vocab.len()],
            line: 0,
            usable: 0,
        }
    }

    pub fn push_line(&mut self, text: &str) -> Result<()> {
        self.line += 1;
        let mut parts = text.split_ascii_whitespace();
        let Some(word) = parts.next() else {
            return Ok(());
        };
        let values = parts
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::EmbeddingParse {
                        line: self.line,
                        token: tok.into(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        let expected = *self.dim.get_or_insert(values.len());
        if values.len() != expected || expected == 0 {
            return Err(Error::EmbeddingDimMismatch {
                line: self.line,
                expected,
                found: values.len(),
            });
        }
        self.usable += 1;
        if let Some(id) = self.vocab.id(word) {
            let slot = &mut self.rows[id as usize];
            if slot.is_none() {
                *slot = Some(values);
            }
        }
        Ok(())
    }

    /// Assembles the matrix. Terms absent from the file get rows drawn from
    /// `N(0, oov_stddev^2)` using `seed`.
    pub fn finish(self, oov_stddev: f64, seed: u64) -> Result<(EmbeddingMatrix, CoverageReport)> {
        let dim = match self.dim {
            Some(d) if self.usable > 0 => d,
            _ => return Err(Error::NoEmbeddingLines),
        };
        let missing: Vec<u32> = (0..self.rows.len() as u32)
            .filter(|&i| self.rows[i as usize].is_none())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let oov = gaussian_matrix(missing.len(), dim, oov_stddev, &mut rng)?;
        let mut values = Matrix::zeros(self.rows.len(), dim);
        let mut next_oov = 0;
        for (i, row) in self.rows.iter().enumerate() {
            match row {
                Some(r) => values.row_mut(i).copy_from_slice(r),
                None => {
                    values.row_mut(i).copy_from_slice(oov.row(next_oov));
                    next_oov += 1;
                }
            }
        }
        let report = CoverageReport {
            found: self.rows.len() - missing.len(),
            missing,
        };
        Ok((EmbeddingMatrix::new(values)?, report))
    }
}

/// Parses a whole in-memory embedding text. See [`TextEmbeddingLoader`].
pub fn load_text_embeddings(
    text: &str,
    vocab: &Vocabulary,
    oov_stddev: f64,
    seed: u64,
) -> Result<(EmbeddingMatrix, CoverageReport)> {
    let mut loader = TextEmbeddingLoader::new(vocab);
    for line in text.lines() {
        loader.push_line(line)?;
    }
    loader.finish(oov_stddev, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn vocab(terms: &[&str]) -> Vocabulary {
        Vocabulary::from_terms(terms).unwrap()
    }

    #[test]
    fn verbatim_rows() {
        let (e, r) = load_text_embeddings("a 1 0\nb 0 1\n", &vocab(&["a", "b"]), 0.02, 0).unwrap();
        assert_eq!(e.values().as_slice(), &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(r.found, 2);
        assert!(r.missing.is_empty());
    }

    #[test]
    fn oov_reported() {
        let (e, r) = load_text_embeddings("a 1 0\nb 0 1\n", &vocab(&["a", "z"]), 0.02, 0).unwrap();
        assert_eq!(r.found, 1);
        assert_eq!(r.missing, vec![1]);
        assert_eq!(e.row(0), &[1.0, 0.0]);
        assert!(e.row(1).iter().all(|v| v.abs() < 0.2));
    }

    #[test]
    fn malformed_files() {
        let v = vocab(&["a", "b"]);
        assert_eq!(
            load_text_embeddings("a 1 0\nb 1", &v, 0.02, 0).unwrap_err(),
            Error::EmbeddingDimMismatch {
                line: 2,
                expected: 2,
                found: 1
            }
        );
        assert!(matches!(
            load_text_embeddings("a 1 x", &v, 0.02, 0),
            Err(Error::EmbeddingParse { line: 1, .. })
        ));
        assert_eq!(load_text_embeddings("\n\n", &v, 0.02, 0).unwrap_err(), Error::NoEmbeddingLines);
    }

    #[test]
    fn random_init_moments() {
        let (v, h, sd) = (10_000, 100, 0.02);
        let e = random_init(v, h, sd, 42).unwrap();
        let n = (v * h) as f64;
        let mean = e.values().as_slice().iter().sum::<f64>() / n;
        let var = e.values().as_slice().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean}");
        assert!((var.sqrt() - sd).abs() < 0.02 * sd, "stddev {}", var.sqrt());
        assert_eq!(random_init(v, h, sd, 42).unwrap(), e);
        assert!(e.trainable_mask().iter().all(|&t| t));
        assert!(random_init(0, 1, sd, 0).is_err());
        assert!(random_init(1, 1, 0.0, 0).is_err());
    }

    fn from_rows(rows: &[&[f64]]) -> EmbeddingMatrix {
        EmbeddingMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn nearest_duplicates_and_orthogonal() {
        let e = from_rows(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let n = e.nearest_words(0, 2).unwrap();
        assert_eq!(n.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1]);
        assert_relative_eq!(n[1].1, 1.0, epsilon = 1e-12);
        let n = e.nearest_words(1, 2).unwrap();
        assert_eq!(n.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 0]);

        let e = from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(e.nearest_words(0, 1).unwrap(), vec![(0, 1.0)]);
    }

    #[test]
    fn nearest_ranked_by_cosine() {
        let s = 1.0 / 2f64.sqrt();
        let e = from_rows(&[&[1.0, 0.0], &[s, s], &[0.0, 1.0]]);
        let n = e.nearest_words(0, 3).unwrap();
        assert_eq!(n.iter().map(|p| p.0).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_relative_eq!(n[0].1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(n[1].1, s, epsilon = 1e-12);
        assert_relative_eq!(n[2].1, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn nearest_errors() {
        let e = from_rows(&[&[0.0, 0.0], &[1.0, 0.0]]);
        assert_eq!(e.nearest_words(0, 1), Err(Error::DegenerateVector(0)));
        assert!(e.nearest_words(1, 3).is_err());
        assert!(e.nearest_words(2, 1).is_err());
    }

    proptest! {
        #[test]
        fn cosine_ranking_ignores_row_scale(
            rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..8),
            scale in 0.1f64..10.0,
            which in 0usize..8,
        ) {
            let rows: Vec<Vec<f64>> = rows.into_iter()
                .map(|mut r| { r[0] += 2.0; r })
                .collect();
            let which = which % rows.len();
            let e = EmbeddingMatrix::new(Matrix::from_rows(&rows).unwrap()).unwrap();
            let mut scaled = rows.clone();
            scaled[which].iter_mut().for_each(|v| *v *= scale);
            let s = EmbeddingMatrix::new(Matrix::from_rows(&scaled).unwrap()).unwrap();
            let a = e.nearest_words(0, rows.len()).unwrap();
            let b = s.nearest_words(0, rows.len()).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x.1 - y.1).abs() < 1e-9);
            }
        }
    }
}
