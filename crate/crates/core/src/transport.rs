//! Conditional transport between a document's word-embedding cloud and its
//! topic mixture.
//!
//! The point cost is `c(w, a) = exp(-<w, a>)`. Topic `k` is sent to word `i`
//! with probability proportional to `P(w_i) exp(<w_i, a_k>)`, and word `i`
//! is sent to topic `k` with probability proportional to
//! `theta_k exp(<w_i, a_k>)`. The total cost of the two directions
//! collapses to
//!
//! ```text
//! CT = sum_k theta_k / sum_i P(w_i) e^{<w_i,a_k>}  +  sum_i P(w_i) / sum_k theta_k e^{<w_i,a_k>}
//! ```
//!
//! which [`ct_cost_closed`] evaluates in log space. [`ct_cost_naive`] does
//! the explicit double sum and is kept as an independent check.
//!
//! Repeated tokens are aggregated: a word occurring `c` times in a document
//! of length `N` carries mass `c / N`, which is algebraically the same as `c`
//! separate entries of mass `1 / N`.

use alloc::vec::Vec;

use crate::corpus::Document;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::math::{self, dot, exp, ln_or_neg_inf, log_sum_exp};
use crate::matrix::Matrix;

/// Inner products are clamped to this magnitude wherever transport uses
/// them, in the cost and in both conditional probabilities, so the closed
/// form stays exact and finite.
pub const INNER_PRODUCT_CLAMP: f64 = 30.0;

fn clamp_score(s: f64) -> f64 {
    s.clamp(-INNER_PRODUCT_CLAMP, INNER_PRODUCT_CLAMP)
}

const SIMPLEX_TOL: f64 = 1e-9;

/// Empirical distribution of a document over the embeddings of its distinct
/// words.
#[derive(Debug, Clone, PartialEq)]
pub struct DocEmbedding {
    unique_ids: Vec<u32>,
    weights: Vec<f64>,
    vectors: Matrix,
}

impl DocEmbedding {
    pub fn new(unique_ids: Vec<u32>, weights: Vec<f64>, vectors: Matrix) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("document embedding must be non-empty"));
        }
        if unique_ids.len() != weights.len() || vectors.rows() != weights.len() {
            return Err(Error::LengthMismatch(weights.len(), vectors.rows()));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidArgument("word weights must be strictly positive"));
        }
        if (weights.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidArgument("word weights must sum to 1"));
        }
        Ok(Self {
            unique_ids,
            weights,
            vectors,
        })
    }

    /// Looks up the rows of `embeddings` for the words of `doc`.
    pub fn from_document(doc: &Document, embeddings: &EmbeddingMatrix) -> Result<Self> {
        let n = doc.len() as f64;
        let ids: Vec<u32> = doc.bow().iter().map(|&(id, _)| id).collect();
        let weights = doc.bow().iter().map(|&(_, c)| f64::from(c) / n).collect();
        let rows: Vec<&[f64]> = ids.iter().map(|&id| embeddings.row(id as usize)).collect();
        Self::new(ids, weights, Matrix::from_rows(&rows)?)
    }

    pub fn unique_ids(&self) -> &[u32] {
        &self.unique_ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// A document's normalized topic proportions over shared topic embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicMixture<'a> {
    theta_tilde: Vec<f64>,
    alpha: &'a Matrix,
}

impl<'a> TopicMixture<'a> {
    pub fn new(theta_tilde: Vec<f64>, alpha: &'a Matrix) -> Result<Self> {
        if theta_tilde.len() != alpha.rows() {
            return Err(Error::DimensionMismatch {
                expected: alpha.rows(),
                got: theta_tilde.len(),
            });
        }
        if theta_tilde.iter().any(|&t| !(t >= 0.0) || !t.is_finite()) {
            return Err(Error::InvalidMixture("proportions must be finite and non-negative"));
        }
        if (theta_tilde.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidMixture("proportions must sum to 1"));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidMixture("topic embeddings must be finite"));
        }
        Ok(Self { theta_tilde, alpha })
    }

    pub fn theta_tilde(&self) -> &[f64] {
        &self.theta_tilde
    }

    pub fn alpha(&self) -> &Matrix {
        self.alpha
    }
}

/// `exp(-<w, a>)`, with the inner product clamped to `[-30, 30]`.
pub fn point_cost(w: &[f64], a: &[f64]) -> f64 {
    exp(-clamp_score(dot(w, a)))
}

/// Probability of transporting topic embedding `a` to each distinct word of
/// `doc`: a weight-adjusted softmax of inner products.
pub fn topic_to_word_probs(doc: &DocEmbedding, a: &[f64]) -> Vec<f64> {
    let mut logits: Vec<f64> = (0..doc.len())
        .map(|i| math::ln(doc.weights[i]) + clamp_score(dot(doc.vectors.row(i), a)))
        .collect();
    math::softmax_in_place(&mut logits);
    logits
}

/// Probability of transporting word embedding `w` to each topic of `mix`.
/// Topics with zero proportion receive exactly zero.
pub fn word_to_topic_probs(w: &[f64], mix: &TopicMixture<'_>) -> Vec<f64> {
    let mut logits: Vec<f64> = (0..mix.alpha.rows())
        .map(|k| ln_or_neg_inf(mix.theta_tilde[k]) + clamp_score(dot(w, mix.alpha.row(k))))
        .collect();
    math::softmax_in_place(&mut logits);
    logits
}

fn check_dims(doc: &DocEmbedding, mix: &TopicMixture<'_>) -> Result<()> {
    if doc.vectors.cols() != mix.alpha.cols() {
        return Err(Error::DimensionMismatch {
            expected: mix.alpha.cols(),
            got: doc.vectors.cols(),
        });
    }
    Ok(())
}

/// Bidirectional CT cost by explicit summation over all (word, topic) pairs.
pub fn ct_cost_naive(doc: &DocEmbedding, mix: &TopicMixture<'_>) -> Result<f64> {
    check_dims(doc, mix)?;
    let k_topics = mix.alpha.rows();
    let mut topic_to_doc = 0.0;
    for k in 0..k_topics {
        let alpha_k = mix.alpha.row(k);
        let probs = topic_to_word_probs(doc, alpha_k);
        let inner: f64 = (0..doc.len())
            .map(|i| probs[i] * point_cost(doc.vectors.row(i), alpha_k))
            .sum();
        topic_to_doc += mix.theta_tilde[k] * inner;
    }
    let mut doc_to_topic = 0.0;
    for i in 0..doc.len() {
        let w = doc.vectors.row(i);
        let probs = word_to_topic_probs(w, mix);
        let inner: f64 = (0..k_topics)
            .map(|k| probs[k] * point_cost(w, mix.alpha.row(k)))
            .sum();
        doc_to_topic += doc.weights[i] * inner;
    }
    Ok(topic_to_doc + doc_to_topic)
}

/// Closed-form CT cost evaluated in log space.
pub fn ct_cost_closed(doc: &DocEmbedding, mix: &TopicMixture<'_>) -> Result<f64> {
    check_dims(doc, mix)?;
    let scores = inner_products(doc.vectors(), mix.alpha);
    let log_w: Vec<f64> = doc.weights.iter().map(|&w| math::ln(w)).collect();
    let log_theta: Vec<f64> = mix.theta_tilde.iter().map(|&t| ln_or_neg_inf(t)).collect();
    Ok(closed_form(&scores, &log_w, &log_theta, None))
}

/// Mean closed-form CT cost over aligned documents and mixtures.
pub fn batch_ct_cost(docs: &[DocEmbedding], mixes: &[TopicMixture<'_>]) -> Result<f64> {
    if docs.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if docs.len() != mixes.len() {
        return Err(Error::LengthMismatch(docs.len(), mixes.len()));
    }
    let mut total = 0.0;
    for (d, m) in docs.iter().zip(mixes) {
        total += ct_cost_closed(d, m)?;
    }
    Ok(total / docs.len() as f64)
}

/// `n x K` matrix of `<vectors_i, alpha_k>`.
pub(crate) fn inner_products(vectors: &Matrix, alpha: &Matrix) -> Matrix {
    let mut s = Matrix::zeros(vectors.rows(), alpha.rows());
    for i in 0..vectors.rows() {
        let w = vectors.row(i);
        for (k, out) in s.row_mut(i).iter_mut().enumerate() {
            *out = dot(w, alpha.row(k));
        }
    }
    s
}

/// Gradient sinks for [`closed_form`]: `d CT / d score[i][k]` and
/// `d CT / d theta_tilde[k]`, both accumulated with a multiplier.
pub(crate) struct ClosedFormGrad<'g> {
    pub scale: f64,
    pub d_scores: &'g mut Matrix,
    pub d_theta_tilde: &'g mut [f64],
}

/// Closed-form CT from raw scores `s[i][k] = <w_i, a_k>`, log word weights
/// and log proportions (`-inf` allowed for zero proportions). Scores are
/// clamped here; clamped cells get zero gradient.
pub(crate) fn closed_form(
    raw_scores: &Matrix,
    log_w: &[f64],
    log_theta: &[f64],
    grad: Option<ClosedFormGrad<'_>>,
) -> f64 {
    let n = raw_scores.rows();
    let k_topics = raw_scores.cols();
    let mut scores = raw_scores.clone();
    scores.as_mut_slice().iter_mut().for_each(|s| *s = clamp_score(*s));
    // ln sum_i w_i e^{s_ik}, per topic
    let lse_topic: Vec<f64> = (0..k_topics)
        .map(|k| log_sum_exp((0..n).map(|i| scores.get(i, k) + log_w[i])))
        .collect();
    // ln sum_k theta_k e^{s_ik}, per word
    let lse_word: Vec<f64> = (0..n)
        .map(|i| log_sum_exp((0..k_topics).map(|k| scores.get(i, k) + log_theta[k])))
        .collect();
    let t1: Vec<f64> = (0..k_topics).map(|k| exp(log_theta[k] - lse_topic[k])).collect();
    let t2: Vec<f64> = (0..n).map(|i| exp(log_w[i] - lse_word[i])).collect();
    let value = t1.iter().sum::<f64>() + t2.iter().sum::<f64>();

    if let Some(g) = grad {
        for k in 0..k_topics {
            let mut d = exp(-lse_topic[k]);
            for i in 0..n {
                d -= t2[i] * exp(scores.get(i, k) - lse_word[i]);
            }
            g.d_theta_tilde[k] += g.scale * d;
        }
        for i in 0..n {
            for k in 0..k_topics {
                let s = scores.get(i, k);
                let p_word = exp(s + log_w[i] - lse_topic[k]);
                let p_topic = exp(s + log_theta[k] - lse_word[i]);
                if raw_scores.get(i, k).abs() > INNER_PRODUCT_CLAMP {
                    continue;
                }
                let d = -t1[k] * p_word - t2[i] * p_topic;
                let cell = &mut g.d_scores.row_mut(i)[k];
                *cell += g.scale * d;
            }
        }
    }
    value
}
