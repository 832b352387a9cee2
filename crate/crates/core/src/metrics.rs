//! Topic-quality and clustering metrics.
//!
//! Coherence uses document-level co-occurrence on a reference corpus with
//! additive smoothing `gamma = 1/D`:
//!
//! ```text
//! NPMI(a, b) = ln((p(a,b) + gamma) / (p(a) p(b))) / -ln(p(a,b) + gamma)
//! ```
//!
//! clamped to `[-1, 1]`, and 0 when `p(a,b) + gamma >= 1`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::math::ln;
use crate::matrix::Matrix;
use crate::model::top_words;

/// Probability floor for the corpus word distribution in [`topic_specificity`].
pub const CORPUS_PROB_FLOOR: f64 = 1e-12;
/// Words per topic for coherence.
pub const COHERENCE_TOP_N: usize = 10;
/// Words per topic for diversity.
pub const DIVERSITY_TOP_N: usize = 25;
/// Topic proportions reported, in percent.
pub const PROPORTIONS: [u32; 10] = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100];

/// Document frequencies for a set of terms and their pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceStats {
    doc_freq: BTreeMap<u32, u32>,
    pair_doc_freq: BTreeMap<(u32, u32), u32>,
    num_docs: usize,
    gamma: f64,
}

impl CooccurrenceStats {
    /// Counts, over `docs`, how many documents contain each term in `terms`
    /// and each unordered pair of them.
    pub fn from_documents<'a, I>(docs: I, terms: &[u32]) -> Self
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let wanted: BTreeSet<u32> = terms.iter().copied().collect();
        let mut doc_freq: BTreeMap<u32, u32> = wanted.iter().map(|&t| (t, 0)).collect();
        let mut pair_doc_freq = BTreeMap::new();
        let mut num_docs = 0;
        let mut present = Vec::new();
        for doc in docs {
            num_docs += 1;
            present.clear();
            present.extend(doc.bow().iter().map(|&(id, _)| id).filter(|id| wanted.contains(id)));
            for (i, &a) in present.iter().enumerate() {
                *doc_freq.get_mut(&a).expect("wanted term") += 1;
                for &b in &present[i + 1..] {
                    *pair_doc_freq.entry((a, b)).or_insert(0) += 1;
                }
            }
        }
        let gamma = if num_docs > 0 { 1.0 / num_docs as f64 } else { 0.0 };
        Self {
            doc_freq,
            pair_doc_freq,
            num_docs,
            gamma,
        }
    }

    /// Replaces the smoothing constant (default `1/D`).
    pub fn with_smoothing(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn smoothing(&self) -> f64 {
        self.gamma
    }

    pub fn doc_freq(&self, term: u32) -> u32 {
        self.doc_freq.get(&term).copied().unwrap_or(0)
    }

    pub fn pair_doc_freq(&self, a: u32, b: u32) -> u32 {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.pair_doc_freq.get(&key).copied().unwrap_or(0)
    }
}

/// NPMI of a word pair, in `[-1, 1]`.
pub fn npmi_pair(stats: &CooccurrenceStats, a: u32, b: u32) -> Result<f64> {
    let (fa, fb) = (stats.doc_freq(a), stats.doc_freq(b));
    if fa == 0 || fb == 0 {
        return Err(Error::InvalidArgument("npmi needs terms present in the reference corpus"));
    }
    let d = stats.num_docs as f64;
    let p_a = f64::from(fa) / d;
    let p_b = f64::from(fb) / d;
    let joint = f64::from(stats.pair_doc_freq(a, b)) / d + stats.gamma;
    if joint >= 1.0 || joint <= 0.0 {
        return Ok(0.0);
    }
    let value = ln(joint / (p_a * p_b)) / -ln(joint);
    Ok(value.clamp(-1.0, 1.0))
}

/// Mean NPMI over all unordered pairs of one word list (0 for fewer than two
/// words).
pub fn topic_npmi(words: &[u32], stats: &CooccurrenceStats) -> Result<f64> {
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for (i, &a) in words.iter().enumerate() {
        for &b in &words[i + 1..] {
            sum += npmi_pair(stats, a, b)?;
            pairs += 1;
        }
    }
    Ok(if pairs == 0 { 0.0 } else { sum / pairs as f64 })
}

/// Mean of per-topic NPMI over the supplied topics.
pub fn topic_coherence(topics: &[Vec<u32>], stats: &CooccurrenceStats) -> Result<f64> {
    if topics.is_empty() {
        return Err(Error::InvalidArgument("no topics supplied"));
    }
    let mut sum = 0.0;
    for t in topics {
        sum += topic_npmi(t, stats)?;
    }
    Ok(sum / topics.len() as f64)
}

/// Indices of the `ceil(p K)` highest-scoring topics, best first, ties by
/// ascending index.
pub fn select_topics_by_npmi(scores: &[f64], proportion: f64) -> Result<Vec<usize>> {
    if !(proportion > 0.0 && proportion <= 1.0) {
        return Err(Error::InvalidArgument("proportion must be in (0, 1]"));
    }
    let k = scores.len();
    // guard against 0.3 * 10 = 3.0000000000000004
    let take = (libm::ceil(proportion * k as f64 - 1e-9) as usize).clamp(1, k.max(1)).min(k);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    order.truncate(take);
    Ok(order)
}

/// Distinct words over all lists divided by the total list length
/// (`25 x topics` for full lists).
pub fn topic_diversity(topics: &[Vec<u32>]) -> f64 {
    let total: usize = topics.iter().map(Vec::len).sum();
    if total == 0 {
        return 0.0;
    }
    let unique: BTreeSet<u32> = topics.iter().flatten().copied().collect();
    unique.len() as f64 / total as f64
}

pub fn topic_quality(tc: f64, td: f64) -> f64 {
    tc * td
}

/// Mean over topics of `KL(phi_k || p_w)`, with `p_w` floored at `1e-12`.
pub fn topic_specificity(phi: &Matrix, p_w: &[f64]) -> Result<f64> {
    if phi.rows() != p_w.len() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            got: p_w.len(),
        });
    }
    if phi.cols() == 0 {
        return Err(Error::InvalidArgument("no topics supplied"));
    }
    let mut total = 0.0;
    for k in 0..phi.cols() {
        for (v, &q) in p_w.iter().enumerate() {
            let p = phi.get(v, k);
            if p > 0.0 {
                total += p * ln(p / q.max(CORPUS_PROB_FLOOR));
            }
        }
    }
    Ok(total / phi.cols() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub n_clusters: usize,
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative inertia improvement below which Lloyd iterations stop.
    pub tol: f64,
    pub seed: u64,
}

impl KMeansConfig {
    pub fn new(n_clusters: usize, seed: u64) -> Self {
        Self {
            n_clusters,
            restarts: 10,
            max_iters: 300,
            tol: 1e-6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(point, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn seed_plus_plus(points: &Matrix, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let j = points.rows();
    let mut centroids = Matrix::zeros(n, points.cols());
    let first = rng.random_range(0..j);
    centroids.row_mut(0).copy_from_slice(points.row(first));
    let mut dist: Vec<f64> = (0..j).map(|i| sq_dist(points.row(i), centroids.row(0))).collect();
    for c in 1..n {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = j - 1;
            for (i, &d) in dist.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..j)
        };
        centroids.row_mut(c).copy_from_slice(points.row(pick));
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(points: &Matrix, mut centroids: Matrix, cfg: &KMeansConfig) -> ClusterResult {
    let (j, dim, n) = (points.rows(), points.cols(), cfg.n_clusters);
    let mut assignments = vec![usize::MAX; j];
    let mut prev = f64::INFINITY;
    let mut inertia = f64::INFINITY;
    for _ in 0..cfg.max_iters {
        let mut changed = false;
        let mut dists = vec![0.0; j];
        for i in 0..j {
            let (c, d) = nearest(points.row(i), &centroids);
            changed |= assignments[i] != c;
            assignments[i] = c;
            dists[i] = d;
        }
        // empty clusters take the point farthest from its centroid
        let mut counts = vec![0usize; n];
        for &a in &assignments {
            counts[a] += 1;
        }
        for c in 0..n {
            if counts[c] == 0 {
                let far = (0..j)
                    .filter(|&i| counts[assignments[i]] > 1)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
                if let Some(i) = far {
                    counts[assignments[i]] -= 1;
                    assignments[i] = c;
                    counts[c] = 1;
                    dists[i] = 0.0;
                    changed = true;
                }
            }
        }
        centroids.fill(0.0);
        for i in 0..j {
            let row = centroids.row_mut(assignments[i]);
            for (s, x) in row.iter_mut().zip(points.row(i)) {
                *s += x;
            }
        }
        for c in 0..n {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                centroids.row_mut(c).iter_mut().for_each(|s| *s *= inv);
            }
        }
        inertia = (0..j).map(|i| sq_dist(points.row(i), centroids.row(assignments[i]))).sum();
        if !changed || prev - inertia <= cfg.tol * prev {
            break;
        }
        prev = inertia;
    }
    debug_assert_eq!(centroids.cols(), dim);
    ClusterResult {
        assignments,
        centroids,
        inertia,
    }
}

/// Lloyd's algorithm with k-means++ seeding; the lowest-inertia restart wins
/// (earliest on ties).
pub fn kmeans(points: &Matrix, cfg: &KMeansConfig) -> Result<ClusterResult> {
    if cfg.n_clusters == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidArgument("n_clusters and restarts must be positive"));
    }
    if points.rows() < cfg.n_clusters {
        return Err(Error::TooFewPoints {
            needed: cfg.n_clusters,
            got: points.rows(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<ClusterResult> = None;
    for _ in 0..cfg.restarts {
        let init = seed_plus_plus(points, cfg.n_clusters, &mut rng);
        let result = lloyd(points, init, cfg);
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn contingency<A: Ord + Copy, L: Ord + Copy>(
    assignments: &[A],
    labels: &[L],
) -> Result<BTreeMap<(A, L), usize>> {
    if assignments.len() != labels.len() {
        return Err(Error::LengthMismatch(assignments.len(), labels.len()));
    }
    if assignments.is_empty() {
        return Err(Error::InvalidArgument("no points"));
    }
    let mut table = BTreeMap::new();
    for (&a, &l) in assignments.iter().zip(labels) {
        *table.entry((a, l)).or_insert(0) += 1;
    }
    Ok(table)
}

/// Fraction of points whose class is the majority class of their cluster.
pub fn purity<A: Ord + Copy, L: Ord + Copy>(assignments: &[A], labels: &[L]) -> Result<f64> {
    let table = contingency(assignments, labels)?;
    let mut best: BTreeMap<A, usize> = BTreeMap::new();
    for (&(a, _), &n) in &table {
        let e = best.entry(a).or_insert(0);
        *e = (*e).max(n);
    }
    Ok(best.values().sum::<usize>() as f64 / assignments.len() as f64)
}

fn entropy<K: Ord>(counts: &BTreeMap<K, usize>, n: f64) -> f64 {
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            -p * ln(p)
        })
        .sum()
}

/// Mutual information over the arithmetic mean of the two entropies. Two
/// single-group partitions score 1.
pub fn nmi<A: Ord + Copy, L: Ord + Copy>(assignments: &[A], labels: &[L]) -> Result<f64> {
    let table = contingency(assignments, labels)?;
    let n = assignments.len() as f64;
    let mut ca: BTreeMap<A, usize> = BTreeMap::new();
    let mut cl: BTreeMap<L, usize> = BTreeMap::new();
    for (&(a, l), &c) in &table {
        *ca.entry(a).or_insert(0) += c;
        *cl.entry(l).or_insert(0) += c;
    }
    let (ha, hl) = (entropy(&ca, n), entropy(&cl, n));
    if ca.len() == 1 && cl.len() == 1 {
        return Ok(1.0);
    }
    let denom = 0.5 * (ha + hl);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (&(a, l), &c) in &table {
        let p = c as f64 / n;
        let pa = ca[&a] as f64 / n;
        let pl = cl[&l] as f64 / n;
        mi += p * ln(p / (pa * pl));
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// All evaluation numbers for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// `(percent, TC)` for each proportion of NPMI-ranked topics.
    pub tc: Vec<(u32, f64)>,
    /// `(percent, TD)` over the same topic subsets.
    pub td_at: Vec<(u32, f64)>,
    /// TD over all topics.
    pub td: f64,
    /// TC over all topics times TD over all topics.
    pub tq: f64,
    pub ts: f64,
    pub km_purity: Option<f64>,
    pub km_nmi: Option<f64>,
}

impl MetricsReport {
    /// Flat `(key, value)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for &(p, v) in &self.tc {
            out.push((format!("tc_p{p}"), v));
        }
        for &(p, v) in &self.td_at {
            out.push((format!("td_p{p}"), v));
        }
        out.push((String::from("td"), self.td));
        out.push((String::from("tq"), self.tq));
        out.push((String::from("ts"), self.ts));
        if let Some(v) = self.km_purity {
            out.push((String::from("km_purity"), v));
        }
        if let Some(v) = self.km_nmi {
            out.push((String::from("km_nmi"), v));
        }
        out
    }
}

/// Topic-side metrics of `phi` against a reference (training) corpus.
pub fn topic_metrics(phi: &Matrix, reference: &Corpus) -> Result<MetricsReport> {
    let v = phi.rows();
    let k_topics = phi.cols();
    if v != reference.vocab().len() {
        return Err(Error::DimensionMismatch {
            expected: reference.vocab().len(),
            got: v,
        });
    }
    let top10: Vec<Vec<u32>> = (0..k_topics)
        .map(|k| top_words(phi, k, COHERENCE_TOP_N.min(v)))
        .collect::<Result<_>>()?;
    let top25: Vec<Vec<u32>> = (0..k_topics)
        .map(|k| top_words(phi, k, DIVERSITY_TOP_N.min(v)))
        .collect::<Result<_>>()?;
    let needed: Vec<u32> = top10.iter().flatten().copied().collect();
    let stats = CooccurrenceStats::from_documents(reference.documents(), &needed);
    let per_topic: Vec<f64> = top10
        .iter()
        .map(|t| topic_npmi(t, &stats))
        .collect::<Result<_>>()?;

    let mut tc = Vec::new();
    let mut td_at = Vec::new();
    for &p in &PROPORTIONS {
        let chosen = select_topics_by_npmi(&per_topic, f64::from(p) / 100.0)?;
        let mean = chosen.iter().map(|&k| per_topic[k]).sum::<f64>() / chosen.len() as f64;
        let lists: Vec<Vec<u32>> = chosen.iter().map(|&k| top25[k].clone()).collect();
        tc.push((p, mean));
        td_at.push((p, topic_diversity(&lists)));
    }
    let td = topic_diversity(&top25);
    let tc_all = per_topic.iter().sum::<f64>() / k_topics as f64;
    let ts = topic_specificity(phi, &reference.term_distribution())?;
    Ok(MetricsReport {
        tc,
        td_at,
        td,
        tq: topic_quality(tc_all, td),
        ts,
        km_purity: None,
        km_nmi: None,
    })
}

/// K-means on the rows of `theta` scored against `labels`, as
/// `(purity, nmi)`.
pub fn cluster_metrics(theta: &Matrix, labels: &[u32], cfg: &KMeansConfig) -> Result<(f64, f64)> {
    if theta.rows() != labels.len() {
        return Err(Error::LengthMismatch(theta.rows(), labels.len()));
    }
    let result = kmeans(theta, cfg)?;
    Ok((purity(&result.assignments, labels)?, nmi(&result.assignments, labels)?))
}
