//! Exact gradients of the single-sample objective and a central-difference
//! checker.
//!
//! The backward pass is derived by hand. Per step the dominant costs are the
//! `V x K` score matrix `<e_v, alpha_k>` (shared by the topic-word softmax
//! and the per-document transport scores) and its two adjoint products; the
//! per-document work is linear in the number of distinct words.
//!
//! Two simplifications are exact: the transport scores of a document are rows
//! of the global score matrix, and `sum_v r_v = sum_k theta_k` because every
//! column of `Phi` sums to one. Gradients through clamps are zero wherever
//! the clamp is active.

use alloc::vec;
use alloc::vec::Vec;

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::math::{exp, ln, ln_1p};
use crate::matrix::Matrix;
use crate::model::{
    clamp_noise, clamped_softplus_grad, softmax_columns, ObjectiveValue, ParamId, WeteModel, RATE_FLOOR,
    SCALE_MAX, SCALE_MIN, SHAPE_MAX, SHAPE_MIN, THETA_FLOOR,
};
use crate::transport::{closed_form, inner_products, ClosedFormGrad};

/// Gradient tensors for the trainable parameters, keyed by [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    entries: Vec<(ParamId, Vec<f64>)>,
}

impl Gradients {
    fn for_model(model: &WeteModel) -> Self {
        Self {
            entries: model
                .trainable_params()
                .into_iter()
                .map(|id| (id, vec![0.0; model.param(id).len()]))
                .collect(),
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(p, _)| *p == id)
            .map(|(_, g)| g.as_slice())
    }

    pub fn get_mut(&mut self, id: ParamId) -> Option<&mut [f64]> {
        self.entries
            .iter_mut()
            .find(|(p, _)| *p == id)
            .map(|(_, g)| g.as_mut_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[f64])> {
        self.entries.iter().map(|(p, g)| (*p, g.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}

/// Objective value and gradients for every trainable tensor, with `noise`
/// held fixed.
pub fn gradient(model: &WeteModel, batch: &[&Document], noise: &Matrix) -> Result<(ObjectiveValue, Gradients)> {
    let mut grads = Gradients::for_model(model);
    let value = evaluate(model, batch, noise, Some(&mut grads))?;
    if !value.loss.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok((value, grads))
}

pub(crate) fn evaluate(
    model: &WeteModel,
    batch: &[&Document],
    noise: &Matrix,
    mut grads: Option<&mut Gradients>,
) -> Result<ObjectiveValue> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let k_topics = model.num_topics();
    if noise.rows() != batch.len() || noise.cols() != k_topics {
        return Err(Error::DimensionMismatch {
            expected: batch.len() * k_topics,
            got: noise.rows() * noise.cols(),
        });
    }
    let v_size = model.vocab_size();
    let eps = model.config.epsilon;
    let inv_b = 1.0 / batch.len() as f64;
    let embeddings = model.word_embeddings.values();
    let alpha = model.topics.alpha();
    let encoder = &model.encoder;

    let scores = inner_products(embeddings, alpha);
    let phi_m = softmax_columns(&scores);
    let phi = |v: usize, k: usize| phi_m.get(v, k);

    let want_grad = grads.is_some();
    let mut d_scores = if want_grad { Matrix::zeros(v_size, k_topics) } else { Matrix::zeros(0, 0) };
    let mut d_phi = if want_grad { Matrix::zeros(v_size, k_topics) } else { Matrix::zeros(0, 0) };

    let mut total_ct = 0.0;
    let mut total_ll = 0.0;
    for (j, doc) in batch.iter().enumerate() {
        if doc.is_empty() {
            return Err(Error::InvalidArgument("documents in a batch must be non-empty"));
        }
        let bow = doc.bow();
        let n_tokens = doc.len() as f64;
        let trace = encoder.trace_bow(bow);
        let shape = &trace.params.shape;
        let scale = &trace.params.scale;

        // theta = scale * L^(1/shape), L = -ln(1 - u)
        let log_tail: Vec<f64> = (0..k_topics)
            .map(|k| ln(-ln_1p(-clamp_noise(noise.get(j, k)))))
            .collect();
        let theta: Vec<f64> = (0..k_topics)
            .map(|k| scale[k] * exp(log_tail[k] / shape[k]))
            .collect();
        let floored: Vec<f64> = theta.iter().map(|&t| t.max(THETA_FLOOR)).collect();
        let total: f64 = floored.iter().sum();
        let theta_tilde: Vec<f64> = floored.iter().map(|&t| t / total).collect();

        let n_unique = bow.len();
        let mut doc_scores = Matrix::zeros(n_unique, k_topics);
        for (u, &(id, _)) in bow.iter().enumerate() {
            doc_scores.row_mut(u).copy_from_slice(scores.row(id as usize));
        }
        let log_w: Vec<f64> = bow.iter().map(|&(_, c)| ln(f64::from(c) / n_tokens)).collect();
        let log_tt: Vec<f64> = theta_tilde.iter().map(|&t| ln(t)).collect();

        let mut d_doc_scores = Matrix::zeros(if want_grad { n_unique } else { 0 }, k_topics);
        let mut d_theta_tilde = vec![0.0; k_topics];
        let ct = closed_form(
            &doc_scores,
            &log_w,
            &log_tt,
            want_grad.then(|| ClosedFormGrad {
                scale: inv_b,
                d_scores: &mut d_doc_scores,
                d_theta_tilde: &mut d_theta_tilde,
            }),
        );

        let rates: Vec<f64> = bow
            .iter()
            .map(|&(id, _)| (0..k_topics).map(|k| phi(id as usize, k) * theta[k]).sum::<f64>())
            .collect();
        let ll: f64 = bow
            .iter()
            .zip(&rates)
            .map(|(&(_, c), &r)| f64::from(c) * ln(r.max(RATE_FLOOR)))
            .sum::<f64>()
            - theta.iter().sum::<f64>();

        total_ct += ct;
        total_ll += ll;

        let Some(grads) = grads.as_deref_mut() else {
            continue;
        };

        // loss contribution: ct / B - eps * ll / B
        let ll_scale = -eps * inv_b;
        let mut d_theta = vec![-ll_scale; k_topics];
        for (u, (&(id, c), &r)) in bow.iter().zip(&rates).enumerate() {
            let v = id as usize;
            for k in 0..k_topics {
                d_scores.row_mut(v)[k] += d_doc_scores.get(u, k);
            }
            if r <= RATE_FLOOR {
                continue;
            }
            let x_over_r = f64::from(c) / r;
            for k in 0..k_topics {
                d_theta[k] += ll_scale * x_over_r * phi(v, k);
                d_phi.row_mut(v)[k] += ll_scale * x_over_r * theta[k];
            }
        }
        let dot: f64 = d_theta_tilde.iter().zip(&theta_tilde).map(|(g, t)| g * t).sum();
        for k in 0..k_topics {
            if theta[k] > THETA_FLOOR {
                d_theta[k] += (d_theta_tilde[k] - dot) / total;
            }
        }

        let mut d_shape_pre = vec![0.0; k_topics];
        let mut d_scale_pre = vec![0.0; k_topics];
        for k in 0..k_topics {
            let d_scale = d_theta[k] * theta[k] / scale[k];
            let d_shape = -d_theta[k] * theta[k] * log_tail[k] / (shape[k] * shape[k]);
            d_scale_pre[k] = d_scale * clamped_softplus_grad(trace.scale_pre[k], SCALE_MIN, SCALE_MAX);
            d_shape_pre[k] = d_shape * clamped_softplus_grad(trace.shape_pre[k], SHAPE_MIN, SHAPE_MAX);
        }

        let hidden = encoder.hidden();
        let mut d_hidden = vec![0.0; hidden];
        for i in 0..hidden {
            let ws = encoder.head_shape.weight.row(i);
            let wl = encoder.head_scale.weight.row(i);
            d_hidden[i] = (0..k_topics)
                .map(|k| ws[k] * d_shape_pre[k] + wl[k] * d_scale_pre[k])
                .sum();
        }
        accumulate_linear(grads, ParamId::ShapeWeight, ParamId::ShapeBias, &trace.hidden, &d_shape_pre);
        accumulate_linear(grads, ParamId::ScaleWeight, ParamId::ScaleBias, &trace.hidden, &d_scale_pre);

        let d_hidden_pre: Vec<f64> = d_hidden
            .iter()
            .zip(&trace.hidden_pre)
            .map(|(&g, &h)| if h > 0.0 { g } else { 0.0 })
            .collect();
        if let Some(gw) = grads.get_mut(ParamId::TrunkWeight) {
            for &(v, x) in &trace.input {
                let row = &mut gw[v * hidden..(v + 1) * hidden];
                for (g, d) in row.iter_mut().zip(&d_hidden_pre) {
                    *g += x * d;
                }
            }
        }
        if let Some(gb) = grads.get_mut(ParamId::TrunkBias) {
            for (g, d) in gb.iter_mut().zip(&d_hidden_pre) {
                *g += d;
            }
        }
    }

    let ct = total_ct * inv_b;
    let nll = -total_ll * inv_b;
    let value = ObjectiveValue {
        loss: ct + eps * nll,
        ct,
        nll,
    };

    if let Some(grads) = grads {
        // softmax backward for Phi, column-wise
        for k in 0..k_topics {
            let c: f64 = (0..v_size).map(|v| d_phi.get(v, k) * phi(v, k)).sum();
            for v in 0..v_size {
                let g = phi(v, k) * (d_phi.get(v, k) - c);
                d_scores.row_mut(v)[k] += g;
            }
        }
        let h = model.embed_dim();
        if let Some(ga) = grads.get_mut(ParamId::TopicEmbeddings) {
            for v in 0..v_size {
                let e_v = embeddings.row(v);
                for k in 0..k_topics {
                    let d = d_scores.get(v, k);
                    if d != 0.0 {
                        for (g, e) in ga[k * h..(k + 1) * h].iter_mut().zip(e_v) {
                            *g += d * e;
                        }
                    }
                }
            }
        }
        if let Some(ge) = grads.get_mut(ParamId::WordEmbeddings) {
            let mask = model.word_embeddings.trainable_mask();
            for v in 0..v_size {
                if !mask[v] {
                    continue;
                }
                let row = &mut ge[v * h..(v + 1) * h];
                for k in 0..k_topics {
                    let d = d_scores.get(v, k);
                    if d != 0.0 {
                        for (g, a) in row.iter_mut().zip(alpha.row(k)) {
                            *g += d * a;
                        }
                    }
                }
            }
        }
    }
    Ok(value)
}

fn accumulate_linear(grads: &mut Gradients, weight: ParamId, bias: ParamId, input: &[f64], d_out: &[f64]) {
    let outputs = d_out.len();
    if let Some(gw) = grads.get_mut(weight) {
        for (i, &x) in input.iter().enumerate() {
            if x != 0.0 {
                for (g, d) in gw[i * outputs..(i + 1) * outputs].iter_mut().zip(d_out) {
                    *g += x * d;
                }
            }
        }
    }
    if let Some(gb) = grads.get_mut(bias) {
        for (g, d) in gb.iter_mut().zip(d_out) {
            *g += d;
        }
    }
}

/// Relative error with the denominator floored at `1e-8`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Central difference `(f(x + h) - f(x - h)) / 2h` of coordinate `i`.
pub fn central_difference<F>(f: &mut F, x: &mut [f64], i: usize, h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let orig = x[i];
    x[i] = orig + h;
    let plus = f(x);
    x[i] = orig - h;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * h)
}

/// Worst relative error between `grad` and central differences of `f` over
/// every coordinate of `x`, as `(error, coordinate)`.
pub fn check_gradient<F>(mut f: F, x: &mut [f64], grad: &[f64], h: f64) -> (f64, usize)
where
    F: FnMut(&[f64]) -> f64,
{
    let mut worst = (0.0, 0);
    for i in 0..x.len() {
        let numeric = central_difference(&mut f, x, i, h);
        let err = relative_error(grad[i], numeric);
        if err > worst.0 {
            worst = (err, i);
        }
    }
    worst
}

/// Worst relative error for one tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub param: ParamId,
    pub max_rel_error: f64,
    pub coordinate: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    pub tensors: Vec<TensorCheck>,
}

impl FiniteDiffReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error() < tol
    }
}

/// Compares `grads` against central differences of the objective for every
/// coordinate of every trainable tensor (intended for tiny models).
pub fn finite_diff_check_with(
    model: &WeteModel,
    batch: &[&Document],
    noise: &Matrix,
    grads: &Gradients,
    h: f64,
) -> Result<FiniteDiffReport> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive"));
    }
    let mut probe = model.clone();
    let mut tensors = Vec::new();
    for (id, g) in grads.iter() {
        let mut worst = TensorCheck {
            param: id,
            max_rel_error: 0.0,
            coordinate: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for i in 0..g.len() {
            let orig = probe.param(id)[i];
            probe.param_mut(id)[i] = orig + h;
            let plus = evaluate(&probe, batch, noise, None)?.loss;
            probe.param_mut(id)[i] = orig - h;
            let minus = evaluate(&probe, batch, noise, None)?.loss;
            probe.param_mut(id)[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(g[i], numeric);
            if err > worst.max_rel_error {
                worst = TensorCheck {
                    param: id,
                    max_rel_error: err,
                    coordinate: i,
                    analytic: g[i],
                    numeric,
                };
            }
        }
        tensors.push(worst);
    }
    Ok(FiniteDiffReport { tensors })
}

/// [`gradient`] followed by [`finite_diff_check_with`].
pub fn finite_diff_check(model: &WeteModel, batch: &[&Document], noise: &Matrix, h: f64) -> Result<FiniteDiffReport> {
    let (_, grads) = gradient(model, batch, noise)?;
    finite_diff_check_with(model, batch, noise, &grads, h)
}
