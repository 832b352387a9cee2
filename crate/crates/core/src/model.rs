//! Trainable state and the forward pieces of the regularized objective.
//!
//! A document's bag of words goes through a shared ReLU trunk and two linear
//! heads whose softplus outputs are the shape and scale of a per-topic
//! Weibull. A reparameterized sample `theta` feeds both the transport cost
//! (after normalization) and the Poisson likelihood `x ~ Poisson(Phi theta)`,
//! where column `k` of `Phi` is the softmax over the vocabulary of
//! `<e_v, alpha_k>`.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::corpus::Document;
use crate::embedding::{EmbeddingMatrix, DEFAULT_INIT_STDDEV};
use crate::error::{Error, Result};
use crate::math::{self, exp, ln, log_sum_exp, sigmoid, softplus};
use crate::matrix::Matrix;
use crate::transport::inner_products;

pub const SHAPE_MIN: f64 = 1e-2;
pub const SHAPE_MAX: f64 = 50.0;
pub const SCALE_MIN: f64 = 1e-4;
pub const SCALE_MAX: f64 = 1e4;
pub const NOISE_MIN: f64 = 1e-6;
pub const NOISE_MAX: f64 = 1.0 - 1e-6;
/// Floor applied to unnormalized proportions before normalizing.
pub const THETA_FLOOR: f64 = 1e-10;
/// Floor applied to Poisson rates.
pub const RATE_FLOOR: f64 = 1e-10;

/// How word embeddings are sourced and whether they are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// Pretrained embeddings, frozen.
    Fixed,
    /// Pretrained embeddings, trained jointly.
    Finetune,
    /// Random `N(0, 0.02)` embeddings, trained jointly.
    Scratch,
}

impl TrainingMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::Finetune => "finetune",
            Self::Scratch => "scratch",
        }
    }

    pub fn needs_pretrained(self) -> bool {
        !matches!(self, Self::Scratch)
    }

    pub fn trains_embeddings(self) -> bool {
        !matches!(self, Self::Fixed)
    }
}

impl FromStr for TrainingMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "finetune" => Ok(Self::Finetune),
            "scratch" => Ok(Self::Scratch),
            _ => Err(Error::InvalidArgument("mode must be fixed, finetune or scratch")),
        }
    }
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Transform applied to raw counts before the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputTransform {
    Identity,
    Log1p,
}

impl InputTransform {
    #[inline]
    pub fn apply(self, count: f64) -> f64 {
        match self {
            Self::Identity => count,
            Self::Log1p => math::ln_1p(count),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Log1p => "log1p",
        }
    }
}

impl FromStr for InputTransform {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Self::Identity),
            "log1p" => Ok(Self::Log1p),
            _ => Err(Error::InvalidArgument("input_transform must be identity or log1p")),
        }
    }
}

impl fmt::Display for InputTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Number of topics `K`.
    pub topics: usize,
    /// Embedding dimension used when embeddings are initialized from scratch.
    pub embed_dim: usize,
    /// Trunk width of the encoder.
    pub hidden: usize,
    /// Weight of the Poisson log-likelihood term.
    pub epsilon: f64,
    pub mode: TrainingMode,
    pub input_transform: InputTransform,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            topics: 100,
            embed_dim: 100,
            hidden: 256,
            epsilon: 1.0,
            mode: TrainingMode::Fixed,
            input_transform: InputTransform::Log1p,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::InvalidArgument("topic count must be at least 2"));
        }
        if self.embed_dim == 0 || self.hidden == 0 {
            return Err(Error::InvalidArgument("dimensions must be >= 1"));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument("epsilon must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Names of the trainable tensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamId {
    WordEmbeddings,
    TopicEmbeddings,
    TrunkWeight,
    TrunkBias,
    ShapeWeight,
    ShapeBias,
    ScaleWeight,
    ScaleBias,
}

impl ParamId {
    pub const ALL: [ParamId; 8] = [
        ParamId::WordEmbeddings,
        ParamId::TopicEmbeddings,
        ParamId::TrunkWeight,
        ParamId::TrunkBias,
        ParamId::ShapeWeight,
        ParamId::ShapeBias,
        ParamId::ScaleWeight,
        ParamId::ScaleBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::WordEmbeddings => "word_embeddings",
            Self::TopicEmbeddings => "topic_embeddings",
            Self::TrunkWeight => "trunk.weight",
            Self::TrunkBias => "trunk.bias",
            Self::ShapeWeight => "head_shape.weight",
            Self::ShapeBias => "head_shape.bias",
            Self::ScaleWeight => "head_scale.weight",
            Self::ScaleBias => "head_scale.bias",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Affine map `y = x W + b` with `W` stored `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Matrix::zeros(inputs, outputs),
            bias: vec![0.0; outputs],
        }
    }

    /// Uniform `(-1/sqrt(inputs), 1/sqrt(inputs))` for weights and bias.
    fn uniform(inputs: usize, outputs: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / math::sqrt(inputs as f64);
        let mut draw = || rng.random_range(-bound..bound);
        let weight = (0..inputs * outputs).map(|_| draw()).collect();
        let bias = (0..outputs).map(|_| draw()).collect();
        Self {
            weight: Matrix::from_vec(inputs, outputs, weight).expect("shape"),
            bias,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    /// Forward pass for a sparse input given as `(index, value)` pairs.
    pub fn forward_sparse(&self, input: &[(usize, f64)]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for &(i, x) in input {
            for (o, w) in out.iter_mut().zip(self.weight.row(i)) {
                *o += x * w;
            }
        }
        out
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone();
        for (i, &x) in input.iter().enumerate() {
            if x != 0.0 {
                for (o, w) in out.iter_mut().zip(self.weight.row(i)) {
                    *o += x * w;
                }
            }
        }
        out
    }
}

/// Weibull posterior per topic.
#[derive(Debug, Clone, PartialEq)]
pub struct WeibullParams {
    pub shape: Vec<f64>,
    pub scale: Vec<f64>,
}

impl WeibullParams {
    /// `scale * Gamma(1 + 1/shape)` per topic.
    pub fn mean(&self) -> Vec<f64> {
        self.shape
            .iter()
            .zip(&self.scale)
            .map(|(&k, &l)| l * math::gamma(1.0 + 1.0 / k))
            .collect()
    }
}

/// Shared trunk and the two Weibull heads.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub trunk: Linear,
    pub head_shape: Linear,
    pub head_scale: Linear,
    pub input_transform: InputTransform,
}

/// Intermediate values of one encoder pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct EncoderTrace {
    pub input: Vec<(usize, f64)>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub shape_pre: Vec<f64>,
    pub scale_pre: Vec<f64>,
    pub params: WeibullParams,
}

impl EncoderParams {
    pub fn new(
        vocab_size: usize,
        hidden: usize,
        topics: usize,
        input_transform: InputTransform,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            trunk: Linear::uniform(vocab_size, hidden, &mut rng),
            head_shape: Linear::uniform(hidden, topics, &mut rng),
            head_scale: Linear::uniform(hidden, topics, &mut rng),
            input_transform,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.trunk.inputs()
    }

    pub fn topics(&self) -> usize {
        self.head_shape.outputs()
    }

    pub fn hidden(&self) -> usize {
        self.trunk.outputs()
    }

    fn sparse_input(&self, bow: &[(u32, u32)]) -> Vec<(usize, f64)> {
        bow.iter()
            .map(|&(id, c)| (id as usize, self.input_transform.apply(f64::from(c))))
            .collect()
    }

    pub(crate) fn trace(&self, input: Vec<(usize, f64)>) -> EncoderTrace {
        let hidden_pre = self.trunk.forward_sparse(&input);
        let hidden: Vec<f64> = hidden_pre.iter().map(|&h| h.max(0.0)).collect();
        let shape_pre = self.head_shape.forward(&hidden);
        let scale_pre = self.head_scale.forward(&hidden);
        let params = WeibullParams {
            shape: shape_pre
                .iter()
                .map(|&s| softplus(s).clamp(SHAPE_MIN, SHAPE_MAX))
                .collect(),
            scale: scale_pre
                .iter()
                .map(|&s| softplus(s).clamp(SCALE_MIN, SCALE_MAX))
                .collect(),
        };
        EncoderTrace {
            input,
            hidden_pre,
            hidden,
            shape_pre,
            scale_pre,
            params,
        }
    }

    pub(crate) fn trace_bow(&self, bow: &[(u32, u32)]) -> EncoderTrace {
        self.trace(self.sparse_input(bow))
    }

    /// Weibull parameters for a dense count vector of length `V`.
    pub fn encode(&self, x: &[f64]) -> Result<WeibullParams> {
        if x.len() != self.vocab_size() {
            return Err(Error::DimensionMismatch {
                expected: self.vocab_size(),
                got: x.len(),
            });
        }
        if x.iter().any(|&c| !(c >= 0.0)) {
            return Err(Error::InvalidArgument("counts must be non-negative"));
        }
        let input = x
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(i, &c)| (i, self.input_transform.apply(c)))
            .collect();
        Ok(self.trace(input).params)
    }

    /// Weibull parameters for a document.
    pub fn encode_document(&self, doc: &Document) -> WeibullParams {
        self.trace_bow(doc.bow()).params
    }
}

/// Free-function form of [`EncoderParams::encode`].
pub fn encode(x: &[f64], params: &EncoderParams) -> Result<WeibullParams> {
    params.encode(x)
}

#[inline]
pub(crate) fn clamp_noise(u: f64) -> f64 {
    u.clamp(NOISE_MIN, NOISE_MAX)
}

/// Reparameterized Weibull draw `scale * (-ln(1 - u))^(1/shape)` per topic,
/// with `u` clamped to `[1e-6, 1 - 1e-6]`.
pub fn sample_theta(params: &WeibullParams, noise: &[f64]) -> Result<Vec<f64>> {
    if noise.len() != params.shape.len() {
        return Err(Error::DimensionMismatch {
            expected: params.shape.len(),
            got: noise.len(),
        });
    }
    Ok(params
        .shape
        .iter()
        .zip(&params.scale)
        .zip(noise)
        .map(|((&k, &l), &u)| {
            let tail = -math::ln_1p(-clamp_noise(u));
            l * exp(ln(tail) / k)
        })
        .collect())
}

/// Projects non-negative proportions onto the simplex after flooring each
/// entry at `1e-10`.
pub fn normalize_theta(theta: &[f64]) -> Vec<f64> {
    let floored: Vec<f64> = theta.iter().map(|&t| t.max(THETA_FLOOR)).collect();
    let s: f64 = floored.iter().sum();
    floored.iter().map(|&t| t / s).collect()
}

/// `V x K` topic-word matrix whose column `k` is the softmax over words of
/// `<e_v, alpha_k>`.
pub fn topic_word_dist(embeddings: &EmbeddingMatrix, alpha: &Matrix) -> Result<Matrix> {
    if embeddings.dim() != alpha.cols() {
        return Err(Error::DimensionMismatch {
            expected: alpha.cols(),
            got: embeddings.dim(),
        });
    }
    let scores = inner_products(embeddings.values(), alpha);
    Ok(softmax_columns(&scores))
}

pub(crate) fn softmax_columns(scores: &Matrix) -> Matrix {
    let (v, k_topics) = (scores.rows(), scores.cols());
    let lse: Vec<f64> = (0..k_topics)
        .map(|k| log_sum_exp((0..v).map(|i| scores.get(i, k))))
        .collect();
    let mut phi = Matrix::zeros(v, k_topics);
    for i in 0..v {
        for (k, out) in phi.row_mut(i).iter_mut().enumerate() {
            *out = exp(scores.get(i, k) - lse[k]);
        }
    }
    phi
}

/// Poisson log-likelihood `sum_v [x_v ln r_v - r_v]` with `r = Phi theta`
/// floored at `1e-10`. The `-ln x_v!` constant is omitted.
pub fn poisson_loglik(x: &[f64], phi: &Matrix, theta: &[f64]) -> Result<f64> {
    if x.len() != phi.rows() {
        return Err(Error::DimensionMismatch {
            expected: phi.rows(),
            got: x.len(),
        });
    }
    if theta.len() != phi.cols() {
        return Err(Error::DimensionMismatch {
            expected: phi.cols(),
            got: theta.len(),
        });
    }
    Ok(x.iter()
        .enumerate()
        .map(|(v, &xv)| {
            let r = math::dot(phi.row(v), theta).max(RATE_FLOOR);
            let log_term = if xv == 0.0 { 0.0 } else { xv * ln(r) };
            log_term - r
        })
        .sum())
}

/// The `n` highest-probability words of topic `k`, ties by ascending id.
pub fn top_words(phi: &Matrix, k: usize, n: usize) -> Result<Vec<u32>> {
    if k >= phi.cols() {
        return Err(Error::InvalidArgument("topic index out of range"));
    }
    if n > phi.rows() {
        return Err(Error::InvalidArgument("requested more words than the vocabulary holds"));
    }
    let mut ids: Vec<u32> = (0..phi.rows() as u32).collect();
    ids.sort_by(|&a, &b| {
        phi.get(b as usize, k)
            .total_cmp(&phi.get(a as usize, k))
            .then(a.cmp(&b))
    });
    ids.truncate(n);
    Ok(ids)
}

/// Topic embeddings `alpha`, one row per topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicEmbeddings {
    alpha: Matrix,
}

impl TopicEmbeddings {
    pub fn new(alpha: Matrix) -> Result<Self> {
        if alpha.rows() < 2 {
            return Err(Error::InvalidArgument("topic count must be at least 2"));
        }
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument("topic embeddings must be finite"));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> &Matrix {
        &self.alpha
    }

    pub fn alpha_mut(&mut self) -> &mut Matrix {
        &mut self.alpha
    }

    pub fn topics(&self) -> usize {
        self.alpha.rows()
    }
}

/// Objective value and its two parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub loss: f64,
    /// Mean CT cost over the batch.
    pub ct: f64,
    /// Mean negative Poisson log-likelihood over the batch.
    pub nll: f64,
}

/// All trainable state of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct WeteModel {
    pub config: ModelConfig,
    pub word_embeddings: EmbeddingMatrix,
    pub topics: TopicEmbeddings,
    pub encoder: EncoderParams,
    frozen: BTreeSet<ParamId>,
}

const ALPHA_STREAM: u64 = 0x616c_7068_6100;
const ENCODER_STREAM: u64 = 0x656e_636f_6465;
const EMBED_STREAM: u64 = 0x656d_6265_6464;

impl WeteModel {
    /// Fresh model around existing word embeddings. Topic embeddings are
    /// drawn from `N(0, 0.02)`; in [`TrainingMode::Fixed`] the word
    /// embeddings are frozen.
    pub fn new(config: ModelConfig, mut word_embeddings: EmbeddingMatrix) -> Result<Self> {
        config.validate()?;
        let v = word_embeddings.vocab_size();
        let h = word_embeddings.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ALPHA_STREAM);
        let normal = Normal::new(0.0, DEFAULT_INIT_STDDEV).expect("valid stddev");
        let alpha = (0..config.topics * h).map(|_| normal.sample(&mut rng)).collect();
        let topics = TopicEmbeddings::new(Matrix::from_vec(config.topics, h, alpha)?)?;
        let encoder = EncoderParams::new(
            v,
            config.hidden,
            config.topics,
            config.input_transform,
            config.seed ^ ENCODER_STREAM,
        );
        word_embeddings.set_all_trainable(config.mode.trains_embeddings());
        let mut frozen = BTreeSet::new();
        if !config.mode.trains_embeddings() {
            frozen.insert(ParamId::WordEmbeddings);
        }
        Ok(Self {
            config,
            word_embeddings,
            topics,
            encoder,
            frozen,
        })
    }

    /// Fresh model with `N(0, 0.02)` word embeddings of dimension
    /// `config.embed_dim`.
    pub fn from_scratch(config: ModelConfig, vocab_size: usize) -> Result<Self> {
        let e = EmbeddingMatrix::random(
            vocab_size,
            config.embed_dim,
            DEFAULT_INIT_STDDEV,
            config.seed ^ EMBED_STREAM,
        )?;
        Self::new(config, e)
    }

    /// Reassembles a model from stored parts (used by checkpoint loading).
    pub fn from_parts(
        config: ModelConfig,
        mut word_embeddings: EmbeddingMatrix,
        topics: TopicEmbeddings,
        encoder: EncoderParams,
    ) -> Result<Self> {
        let (v, h, k) = (word_embeddings.vocab_size(), word_embeddings.dim(), topics.topics());
        if topics.alpha().cols() != h {
            return Err(Error::DimensionMismatch {
                expected: h,
                got: topics.alpha().cols(),
            });
        }
        if encoder.vocab_size() != v || encoder.topics() != k || encoder.head_scale.outputs() != k {
            return Err(Error::InvalidArgument("encoder shape does not match the model"));
        }
        if encoder.head_shape.inputs() != encoder.hidden() || encoder.head_scale.inputs() != encoder.hidden() {
            return Err(Error::InvalidArgument("encoder head width does not match the trunk"));
        }
        word_embeddings.set_all_trainable(config.mode.trains_embeddings());
        let mut frozen = BTreeSet::new();
        if !config.mode.trains_embeddings() {
            frozen.insert(ParamId::WordEmbeddings);
        }
        Ok(Self {
            config,
            word_embeddings,
            topics,
            encoder,
            frozen,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.word_embeddings.vocab_size()
    }

    pub fn embed_dim(&self) -> usize {
        self.word_embeddings.dim()
    }

    pub fn num_topics(&self) -> usize {
        self.topics.topics()
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        !self.frozen.contains(&id)
    }

    pub fn set_trainable(&mut self, id: ParamId, trainable: bool) {
        if trainable {
            self.frozen.remove(&id);
        } else {
            self.frozen.insert(id);
        }
    }

    pub fn trainable_params(&self) -> Vec<ParamId> {
        ParamId::ALL.into_iter().filter(|&p| self.is_trainable(p)).collect()
    }

    pub fn param(&self, id: ParamId) -> &[f64] {
        match id {
            ParamId::WordEmbeddings => self.word_embeddings.values().as_slice(),
            ParamId::TopicEmbeddings => self.topics.alpha.as_slice(),
            ParamId::TrunkWeight => self.encoder.trunk.weight.as_slice(),
            ParamId::TrunkBias => &self.encoder.trunk.bias,
            ParamId::ShapeWeight => self.encoder.head_shape.weight.as_slice(),
            ParamId::ShapeBias => &self.encoder.head_shape.bias,
            ParamId::ScaleWeight => self.encoder.head_scale.weight.as_slice(),
            ParamId::ScaleBias => &self.encoder.head_scale.bias,
        }
    }

    pub fn param_mut(&mut self, id: ParamId) -> &mut [f64] {
        match id {
            ParamId::WordEmbeddings => self.word_embeddings.values_mut().as_mut_slice(),
            ParamId::TopicEmbeddings => self.topics.alpha.as_mut_slice(),
            ParamId::TrunkWeight => self.encoder.trunk.weight.as_mut_slice(),
            ParamId::TrunkBias => &mut self.encoder.trunk.bias,
            ParamId::ShapeWeight => self.encoder.head_shape.weight.as_mut_slice(),
            ParamId::ShapeBias => &mut self.encoder.head_shape.bias,
            ParamId::ScaleWeight => self.encoder.head_scale.weight.as_mut_slice(),
            ParamId::ScaleBias => &mut self.encoder.head_scale.bias,
        }
    }

    /// `(rows, cols)` of a tensor; vectors are `(1, n)`.
    pub fn param_shape(&self, id: ParamId) -> (usize, usize) {
        let m = |m: &Matrix| (m.rows(), m.cols());
        match id {
            ParamId::WordEmbeddings => m(self.word_embeddings.values()),
            ParamId::TopicEmbeddings => m(&self.topics.alpha),
            ParamId::TrunkWeight => m(&self.encoder.trunk.weight),
            ParamId::ShapeWeight => m(&self.encoder.head_shape.weight),
            ParamId::ScaleWeight => m(&self.encoder.head_scale.weight),
            ParamId::TrunkBias | ParamId::ShapeBias | ParamId::ScaleBias => (1, self.param(id).len()),
        }
    }

    /// Topic-word matrix `Phi` (`V x K`).
    pub fn topic_word_dist(&self) -> Matrix {
        topic_word_dist(&self.word_embeddings, self.topics.alpha()).expect("dimensions checked at construction")
    }

    /// Deterministic topic proportions: the Weibull mean, normalized.
    pub fn infer_theta(&self, doc: &Document) -> Vec<f64> {
        normalize_theta(&self.encoder.encode_document(doc).mean())
    }

    /// Like [`Self::infer_theta`] for a dense count vector.
    pub fn infer_theta_dense(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(normalize_theta(&self.encoder.encode(x)?.mean()))
    }

    /// Single-sample objective: mean CT cost minus `epsilon` times the mean
    /// Poisson log-likelihood. `noise` holds one row of `K` uniforms per
    /// document.
    pub fn objective(&self, batch: &[&Document], noise: &Matrix) -> Result<ObjectiveValue> {
        crate::grad::evaluate(self, batch, noise, None)
    }

    /// Rounds every parameter to the nearest `f32`, so that a 32-bit
    /// checkpoint reproduces the state exactly.
    pub fn round_to_f32(&mut self) {
        for id in ParamId::ALL {
            for v in self.param_mut(id) {
                *v = f64::from(*v as f32);
            }
        }
    }
}

/// Free-function form of [`WeteModel::infer_theta`].
pub fn infer_theta(doc: &Document, model: &WeteModel) -> Vec<f64> {
    model.infer_theta(doc)
}

/// Free-function form of [`WeteModel::objective`].
pub fn objective(batch: &[&Document], model: &WeteModel, noise: &Matrix) -> Result<ObjectiveValue> {
    model.objective(batch, noise)
}

/// Backward through the clamped softplus: zero when the clamp is active.
#[inline]
pub(crate) fn clamped_softplus_grad(pre: f64, lo: f64, hi: f64) -> f64 {
    let v = softplus(pre);
    if v > lo && v < hi {
        sigmoid(pre)
    } else {
        0.0
    }
}
