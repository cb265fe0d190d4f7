//! Gradient kernels for skip-gram training.
//!
//! Negative sampling minimises, per pair `(c, o)` with negatives `n_1..n_k`,
//!
//! ```text
//! L = -log σ(u_o · v_c) - Σ_k log σ(-u_{n_k} · v_c)
//! ```
//!
//! The exact-softmax path minimises `-log p(o | c)` with the partition
//! function summed over every place, and is only meant for small vocabularies.

use std::collections::BTreeMap;

use rand::Rng;

use super::{EmbeddingModel, NoiseTable, TrainError};
use crate::pairs::TrainingPair;

/// Largest vocabulary accepted by the dense softmax routines.
pub const MAX_EXACT_PLACES: usize = 10_000;

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Row storage the update kernel runs against: the plain model for
/// single-threaded training, a shared atomic view for Hogwild workers.
pub(crate) trait ParamStore {
    fn read_center(&self, i: usize, out: &mut [f64]);
    fn read_context(&self, i: usize, out: &mut [f64]);
    fn add_center(&mut self, i: usize, delta: &[f64]);
    fn add_context(&mut self, i: usize, delta: &[f64]);
}

impl ParamStore for EmbeddingModel {
    fn read_center(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.center_row(i));
    }

    fn read_context(&self, i: usize, out: &mut [f64]) {
        out.copy_from_slice(self.context_row(i));
    }

    fn add_center(&mut self, i: usize, delta: &[f64]) {
        for (x, d) in self.center_row_mut(i).iter_mut().zip(delta) {
            *x += d;
        }
    }

    fn add_context(&mut self, i: usize, delta: &[f64]) {
        for (x, d) in self.context_row_mut(i).iter_mut().zip(delta) {
            *x += d;
        }
    }
}

/// Reusable buffers for one worker.
#[derive(Debug, Clone)]
pub struct Scratch {
    v: Vec<f64>,
    u: Vec<f64>,
    grad_v: Vec<f64>,
    delta: Vec<f64>,
    negatives: Vec<usize>,
}

impl Scratch {
    pub fn new(dim: usize) -> Self {
        Scratch {
            v: vec![0.0; dim],
            u: vec![0.0; dim],
            grad_v: vec![0.0; dim],
            delta: vec![0.0; dim],
            negatives: Vec::new(),
        }
    }
}

/// One SGD step on `(center, targets)`; `targets` lists the true context
/// first (`true`) followed by negatives (`false`). Returns the pair loss
/// evaluated before the update.
pub(crate) fn sgns_update<P: ParamStore>(
    params: &mut P,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    s: &mut Scratch,
) -> f64 {
    params.read_center(center, &mut s.v);
    s.grad_v.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    let targets = std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0)));
    for (t, label) in targets {
        params.read_context(t, &mut s.u);
        let score = dot(&s.u, &s.v);
        loss += if label > 0.0 { softplus(-score) } else { softplus(score) };
        let g = lr * (label - sigmoid(score));
        for ((gv, d), (&u, &v)) in s.grad_v.iter_mut().zip(s.delta.iter_mut()).zip(s.u.iter().zip(&s.v)) {
            *gv += g * u;
            *d = g * v;
        }
        params.add_context(t, &s.delta);
    }
    params.add_center(center, &s.grad_v);
    loss
}

/// Draws `k` negatives from `noise`, redrawing any that equal `context`.
/// Yields none when the context is the only id in the noise support.
pub fn draw_negatives<R: Rng + ?Sized>(
    noise: &NoiseTable,
    context: usize,
    k: usize,
    rng: &mut R,
    out: &mut Vec<usize>,
) {
    out.clear();
    if noise.support().iter().all(|&id| id as usize == context) {
        return;
    }
    while out.len() < k {
        let n = noise.sample(rng);
        if n != context {
            out.push(n);
        }
    }
}

/// Negative-sampling SGD step with negatives drawn from `noise`. Returns the
/// loss before the update.
pub fn sgns_step<R: Rng + ?Sized>(
    model: &mut EmbeddingModel,
    pair: TrainingPair,
    lr: f64,
    negatives: usize,
    noise: &NoiseTable,
    rng: &mut R,
    scratch: &mut Scratch,
) -> f64 {
    let mut negs = std::mem::take(&mut scratch.negatives);
    draw_negatives(noise, pair.context.index(), negatives, rng, &mut negs);
    let loss = sgns_update(model, pair.center.index(), pair.context.index(), &negs, lr, scratch);
    scratch.negatives = negs;
    loss
}

/// Negative-sampling step with caller-chosen negatives.
pub fn sgns_step_with_negatives(model: &mut EmbeddingModel, pair: TrainingPair, negatives: &[usize], lr: f64) -> f64 {
    let mut scratch = Scratch::new(model.dim());
    sgns_update(model, pair.center.index(), pair.context.index(), negatives, lr, &mut scratch)
}

pub fn sgns_loss(model: &EmbeddingModel, pair: TrainingPair, negatives: &[usize]) -> f64 {
    let v = model.center_row(pair.center.index());
    let pos = softplus(-dot(model.context_row(pair.context.index()), v));
    pos + negatives.iter().map(|&n| softplus(dot(model.context_row(n), v))).sum::<f64>()
}

/// Gradient of a loss with respect to one center row and a sparse set of
/// context rows (duplicate ids merged).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradient {
    pub center_id: usize,
    pub center: Vec<f64>,
    pub context: BTreeMap<usize, Vec<f64>>,
}

pub fn sgns_gradient(model: &EmbeddingModel, pair: TrainingPair, negatives: &[usize]) -> SparseGradient {
    let c = pair.center.index();
    let v = model.center_row(c);
    let mut grad_v = vec![0.0; model.dim()];
    let mut context: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let targets = std::iter::once((pair.context.index(), true)).chain(negatives.iter().map(|&n| (n, false)));
    for (t, positive) in targets {
        let u = model.context_row(t);
        let s = dot(u, v);
        // dL/ds: -(1-σ(s)) for the positive, σ(s) for a negative
        let coef = if positive { sigmoid(s) - 1.0 } else { sigmoid(s) };
        for (g, &x) in grad_v.iter_mut().zip(u) {
            *g += coef * x;
        }
        let gu = context.entry(t).or_insert_with(|| vec![0.0; model.dim()]);
        for (g, &x) in gu.iter_mut().zip(v) {
            *g += coef * x;
        }
    }
    SparseGradient { center_id: c, center: grad_v, context }
}

fn check_exact(model: &EmbeddingModel) -> Result<(), TrainError> {
    if model.n_places() > MAX_EXACT_PLACES {
        Err(TrainError::TooLargeForExact { n: model.n_places(), max: MAX_EXACT_PLACES })
    } else {
        Ok(())
    }
}

/// Scores `u_k · v_center` for every place `k`.
fn scores(model: &EmbeddingModel, center: usize) -> Vec<f64> {
    let v = model.center_row(center);
    (0..model.n_places()).map(|k| dot(model.context_row(k), v)).collect()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `log p(context | center)` under the full softmax.
pub fn softmax_log_prob(model: &EmbeddingModel, pair: TrainingPair) -> f64 {
    let s = scores(model, pair.center.index());
    s[pair.context.index()] - log_sum_exp(&s)
}

/// Mean `log p(context | center)` over `pairs`.
pub fn exact_softmax_objective(model: &EmbeddingModel, pairs: &[TrainingPair]) -> Result<f64, TrainError> {
    check_exact(model)?;
    if pairs.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    Ok(pairs.iter().map(|&p| softmax_log_prob(model, p)).sum::<f64>() / pairs.len() as f64)
}

/// Gradient of `-log p(context | center)`: one center row and the full
/// context matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradient {
    pub center_id: usize,
    pub center: Vec<f64>,
    pub context: Vec<f64>,
}

pub fn softmax_gradient(model: &EmbeddingModel, pair: TrainingPair) -> Result<DenseGradient, TrainError> {
    check_exact(model)?;
    let (c, o) = (pair.center.index(), pair.context.index());
    let d = model.dim();
    let s = scores(model, c);
    let lse = log_sum_exp(&s);
    let v = model.center_row(c);
    let mut grad_v = vec![0.0; d];
    let mut grad_u = vec![0.0; model.n_places() * d];
    for (k, &sk) in s.iter().enumerate() {
        let coef = (sk - lse).exp() - if k == o { 1.0 } else { 0.0 };
        for (g, &x) in grad_v.iter_mut().zip(model.context_row(k)) {
            *g += coef * x;
        }
        for (g, &x) in grad_u[k * d..(k + 1) * d].iter_mut().zip(v) {
            *g = coef * x;
        }
    }
    Ok(DenseGradient { center_id: c, center: grad_v, context: grad_u })
}

/// Full-softmax SGD step. Returns `-log p(context | center)` before the update.
pub fn softmax_step(model: &mut EmbeddingModel, pair: TrainingPair, lr: f64) -> Result<f64, TrainError> {
    let loss = -softmax_log_prob(model, pair);
    let g = softmax_gradient(model, pair)?;
    for (x, gx) in model.context.iter_mut().zip(&g.context) {
        *x -= lr * gx;
    }
    for (x, gx) in model.center_row_mut(g.center_id).iter_mut().zip(&g.center) {
        *x -= lr * gx;
    }
    Ok(loss)
}
