//! Minimal trainable option scorer conditioned on an interleaved sequence.
//!
//! The query is the mean of the key tokens before the answer position; it
//! attends (bilinear logits `qᵀ A e_j`) over every earlier element, and each
//! option embedding `o` is scored against the pooled context `c` as `oᵀ B c`.
//! Without key tokens the query is zero and pooling is uniform.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adapter::{adapter_trace, backward_from_trace, AdapterCheckpoint, AdapterParams, AdapterTrace, GateConfig};
use super::interleave::{Element, InterleavedSequence};
use super::linalg::{axpy, dot, log_softmax, softmax, Matrix};
use crate::error::KernelError;
use crate::seed;
use rand_distr::{Distribution, Normal};

#[derive(Debug, Clone, PartialEq)]
pub struct ToySequenceModel {
    pub adapter: AdapterParams,
    /// `d × d` attention form.
    pub attn: Matrix,
    /// `d × d` option/context form.
    pub bilinear: Matrix,
    pub gate: GateConfig,
}

impl ToySequenceModel {
    pub fn init(d_h: usize, d: usize, gate: GateConfig, seed: u64) -> ToySequenceModel {
        let mut rng = seed::rng(seed, "toy-init", 0);
        let n = Normal::new(0.0, 0.1 / (d as f64).sqrt()).expect("valid std");
        ToySequenceModel {
            adapter: AdapterParams::init(d_h, d, seed),
            attn: Matrix::from_fn(d, d, |_, _| n.sample(&mut rng)),
            bilinear: Matrix::identity(d),
            gate,
        }
    }

    pub fn d(&self) -> usize {
        self.adapter.d
    }

    pub fn num_params(&self) -> usize {
        self.adapter.w1.data.len()
            + self.adapter.w2.data.len()
            + 2 * self.adapter.ln_gain.len()
            + self.attn.data.len()
            + self.bilinear.data.len()
    }

    /// Parameters as one vector: W1, W2, gain, bias, A, B.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.adapter.w1.data);
        v.extend_from_slice(&self.adapter.w2.data);
        v.extend_from_slice(&self.adapter.ln_gain);
        v.extend_from_slice(&self.adapter.ln_bias);
        v.extend_from_slice(&self.attn.data);
        v.extend_from_slice(&self.bilinear.data);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        assert_eq!(v.len(), self.num_params(), "parameter vector length");
        let mut rest = v;
        for dst in [
            &mut self.adapter.w1.data,
            &mut self.adapter.w2.data,
            &mut self.adapter.ln_gain,
            &mut self.adapter.ln_bias,
            &mut self.attn.data,
            &mut self.bilinear.data,
        ] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
    }

    pub fn to_checkpoint(&self) -> ToyCheckpoint {
        ToyCheckpoint {
            adapter: self.adapter.to_checkpoint(),
            attn: self.attn.data.clone(),
            bilinear: self.bilinear.data.clone(),
            tau: self.gate.tau,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyCheckpoint {
    pub adapter: AdapterCheckpoint,
    pub attn: Vec<f64>,
    pub bilinear: Vec<f64>,
    pub tau: f64,
}

impl ToyCheckpoint {
    pub fn into_model(self) -> Result<ToySequenceModel, KernelError> {
        let adapter = self.adapter.into_params()?;
        let d = adapter.d;
        let attn = Matrix::from_rows(d, d, self.attn).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        let bilinear = Matrix::from_rows(d, d, self.bilinear).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        let gate = GateConfig::new(self.tau).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        Ok(ToySequenceModel { adapter, attn, bilinear, gate })
    }
}

/// Per-frame inputs of one example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInput {
    pub frame_index: usize,
    /// `n_vis × d`
    pub visual: Matrix,
    /// Flattened camera-space keypoints (63).
    pub keypoints: Vec<f64>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyExample {
    pub qa_id: String,
    pub question: Vec<Vec<f64>>,
    pub frames: Vec<FrameInput>,
    pub answer_tokens: Vec<Vec<f64>>,
    pub options: Vec<Vec<f64>>,
    pub answer_index: usize,
}

fn check_width(d: usize, v: &[f64]) -> Result<(), KernelError> {
    if v.len() != d {
        return Err(KernelError::WidthMismatch { model: d, found: v.len() });
    }
    Ok(())
}

/// Forward values needed for the backward pass.
struct Pooled {
    q: Vec<f64>,
    r: Vec<f64>,
    alpha: Vec<f64>,
    c: Vec<f64>,
    logp: Vec<f64>,
}

fn pool_and_score(model: &ToySequenceModel, embs: &[&[f64]], keys: &[usize], options: &[Vec<f64>]) -> Pooled {
    let d = model.d();
    let mut q = vec![0.0; d];
    for &k in keys {
        axpy(&mut q, 1.0 / keys.len() as f64, embs[k]);
    }
    let r = model.attn.matvec_t(&q);
    let logits: Vec<f64> = embs.iter().map(|e| dot(&r, e)).collect();
    let alpha = softmax(&logits);
    let mut c = vec![0.0; d];
    for (a, e) in alpha.iter().zip(embs) {
        axpy(&mut c, *a, e);
    }
    let u = model.bilinear.matvec(&c);
    let scores: Vec<f64> = options.iter().map(|o| dot(o, &u)).collect();
    Pooled { q, r, alpha, c, logp: log_softmax(&scores) }
}

/// Per-option log-probabilities at the first answer position of `seq`.
pub fn toy_score(
    model: &ToySequenceModel,
    seq: &InterleavedSequence,
    options: &[Vec<f64>],
) -> Result<Vec<f64>, KernelError> {
    let d = model.d();
    let upto = seq.answer_position();
    let prefix = &seq.elements[..upto];
    for e in prefix {
        check_width(d, e.embedding())?;
    }
    for o in options {
        check_width(d, o)?;
    }
    if options.is_empty() {
        return Ok(Vec::new());
    }
    if prefix.is_empty() {
        return Ok(vec![-(options.len() as f64).ln(); options.len()]);
    }
    let embs: Vec<&[f64]> = prefix.iter().map(Element::embedding).collect();
    let keys: Vec<usize> = prefix.iter().enumerate().filter(|(_, e)| e.is_key()).map(|(i, _)| i).collect();
    Ok(pool_and_score(model, &embs, &keys, options).logp)
}

/// Pooled context vector at the answer position (exposed for inspection).
pub fn context_vector(model: &ToySequenceModel, seq: &InterleavedSequence) -> Vec<f64> {
    let prefix = &seq.elements[..seq.answer_position()];
    if prefix.is_empty() {
        return vec![0.0; model.d()];
    }
    let embs: Vec<&[f64]> = prefix.iter().map(Element::embedding).collect();
    let keys: Vec<usize> = prefix.iter().enumerate().filter(|(_, e)| e.is_key()).map(|(i, _)| i).collect();
    pool_and_score(model, &embs, &keys, &[]).c
}

/// Builds the interleaved sequence of an example under the model's gate.
pub fn example_sequence(
    model: &ToySequenceModel,
    ex: &ToyExample,
    use_hands: bool,
) -> Result<InterleavedSequence, KernelError> {
    let blocks: Vec<_> = ex
        .frames
        .iter()
        .map(|f| super::interleave::VisualTokenBlock { frame_index: f.frame_index, tokens: f.visual.clone() })
        .collect();
    let hands = ex
        .frames
        .iter()
        .map(|f| {
            if use_hands {
                super::adapter::adapter_forward(&model.adapter, &f.keypoints, f.confidence, &model.gate)
            } else {
                Ok(super::adapter::HandIntentToken::absent())
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    super::interleave::interleave(&ex.question, &blocks, &hands, &ex.answer_tokens)
}

pub fn predict(model: &ToySequenceModel, ex: &ToyExample, use_hands: bool) -> Result<usize, KernelError> {
    let seq = example_sequence(model, ex, use_hands)?;
    let logp = toy_score(model, &seq, &ex.options)?;
    Ok(logp.iter().enumerate().fold((0, f64::NEG_INFINITY), |best, (i, v)| if *v > best.1 { (i, *v) } else { best }).0)
}

/// Cross-entropy of one example and its gradient, accumulated into `grad`
/// (flat layout of [`ToySequenceModel::flat`]).
fn example_loss_grad(model: &ToySequenceModel, ex: &ToyExample, use_hands: bool, grad: Option<&mut [f64]>) -> f64 {
    let d = model.d();
    let mut traces: Vec<AdapterTrace> = Vec::new();
    for f in &ex.frames {
        if use_hands && model.gate.open(f.confidence) {
            traces.push(adapter_trace(&model.adapter, &f.keypoints).expect("validated example"));
        }
    }
    let mut embs: Vec<&[f64]> = ex.question.iter().map(Vec::as_slice).collect();
    let mut keys: Vec<usize> = Vec::with_capacity(traces.len());
    let mut next = traces.iter();
    for f in &ex.frames {
        for r in 0..f.visual.rows {
            embs.push(f.visual.row(r));
        }
        if use_hands && model.gate.open(f.confidence) {
            keys.push(embs.len());
            embs.push(&next.next().expect("one trace per open gate").out);
        }
    }
    let p = pool_and_score(model, &embs, &keys, &ex.options);
    let loss = -p.logp[ex.answer_index];
    let Some(grad) = grad else { return loss };

    let (n1, n2, n3) = (model.adapter.w1.data.len(), model.adapter.w2.data.len(), model.adapter.ln_gain.len());
    let off_a = n1 + n2 + 2 * n3;
    let off_b = off_a + d * d;

    let mut g_u = vec![0.0; d];
    for (o, (lp, opt)) in p.logp.iter().zip(&ex.options).enumerate() {
        let ds = lp.exp() - if o == ex.answer_index { 1.0 } else { 0.0 };
        axpy(&mut g_u, ds, opt);
    }
    {
        let mut gb = Matrix { rows: d, cols: d, data: grad[off_b..off_b + d * d].to_vec() };
        gb.add_outer(1.0, &g_u, &p.c);
        grad[off_b..off_b + d * d].copy_from_slice(&gb.data);
    }
    let dc = model.bilinear.matvec_t(&g_u);
    let dalpha: Vec<f64> = embs.iter().map(|e| dot(e, &dc)).collect();
    let m = dot(&p.alpha, &dalpha);
    let dl: Vec<f64> = p.alpha.iter().zip(&dalpha).map(|(a, g)| a * (g - m)).collect();
    let mut dr = vec![0.0; d];
    for (g, e) in dl.iter().zip(&embs) {
        axpy(&mut dr, *g, e);
    }
    if keys.is_empty() {
        return loss;
    }
    {
        let mut ga = Matrix { rows: d, cols: d, data: grad[off_a..off_a + d * d].to_vec() };
        ga.add_outer(1.0, &p.q, &dr);
        grad[off_a..off_a + d * d].copy_from_slice(&ga.data);
    }
    let dq = model.attn.matvec(&dr);
    let inv = 1.0 / keys.len() as f64;
    for (idx, trace) in keys.iter().zip(&traces) {
        let mut gh: Vec<f64> = dc.iter().map(|v| v * p.alpha[*idx]).collect();
        axpy(&mut gh, dl[*idx], &p.r);
        axpy(&mut gh, inv, &dq);
        let g = backward_from_trace(&model.adapter, trace, &gh).expect("shapes checked");
        let (gw1, rest) = grad.split_at_mut(n1);
        let (gw2, rest) = rest.split_at_mut(n2);
        let (ggain, rest) = rest.split_at_mut(n3);
        axpy(gw1, 1.0, &g.w1.data);
        axpy(gw2, 1.0, &g.w2.data);
        axpy(ggain, 1.0, &g.ln_gain);
        axpy(&mut rest[..n3], 1.0, &g.ln_bias);
    }
    loss
}

pub fn validate_example(model: &ToySequenceModel, ex: &ToyExample) -> Result<(), KernelError> {
    let d = model.d();
    for v in ex.question.iter().chain(&ex.answer_tokens).chain(&ex.options) {
        check_width(d, v)?;
    }
    for f in &ex.frames {
        if f.visual.cols != d {
            return Err(KernelError::WidthMismatch { model: d, found: f.visual.cols });
        }
        if f.keypoints.len() != super::adapter::KEYPOINT_DIM {
            return Err(KernelError::ShapeMismatch(format!("{} keypoint values", f.keypoints.len())));
        }
    }
    if ex.answer_index >= ex.options.len() {
        return Err(KernelError::ShapeMismatch(format!(
            "answer_index {} of {} options",
            ex.answer_index,
            ex.options.len()
        )));
    }
    Ok(())
}

const CHUNK: usize = 32;

/// Mean cross-entropy over `data` and its gradient. Chunked so the
/// summation order does not depend on thread scheduling.
pub fn loss_and_grad(model: &ToySequenceModel, data: &[ToyExample], use_hands: bool) -> (f64, Vec<f64>) {
    let n = model.num_params();
    let parts: Vec<(f64, Vec<f64>)> = data
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = vec![0.0; n];
            let l: f64 = chunk.iter().map(|ex| example_loss_grad(model, ex, use_hands, Some(&mut g))).sum();
            (l, g)
        })
        .collect();
    let mut grad = vec![0.0; n];
    let mut loss = 0.0;
    for (l, g) in parts {
        loss += l;
        axpy(&mut grad, 1.0, &g);
    }
    let k = 1.0 / data.len().max(1) as f64;
    grad.iter_mut().for_each(|v| *v *= k);
    (loss * k, grad)
}

pub fn mean_loss(model: &ToySequenceModel, data: &[ToyExample], use_hands: bool) -> f64 {
    let parts: Vec<f64> = data
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|ex| example_loss_grad(model, ex, use_hands, None)).sum())
        .collect();
    parts.iter().sum::<f64>() / data.len().max(1) as f64
}

pub fn accuracy(model: &ToySequenceModel, data: &[ToyExample], use_hands: bool) -> Result<f64, KernelError> {
    if data.is_empty() {
        return Err(KernelError::EmptyDataset);
    }
    let hits = data
        .par_iter()
        .map(|ex| predict(model, ex, use_hands).map(|p| usize::from(p == ex.answer_index)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(100.0 * hits.iter().sum::<usize>() as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Key tokens are dropped entirely when false.
    pub use_hands: bool,
    /// Halvings of the step size tried before training stops.
    pub max_backtracks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { steps: 300, lr: 0.01, beta1: 0.9, beta2: 0.999, use_hands: true, max_backtracks: 12 }
    }
}

/// Full-batch Adam with backtracking: a step is accepted only if it does not
/// raise the loss, otherwise the step size is halved and the step retried.
/// Deterministic; the returned trace holds the loss before training and
/// after each accepted step.
pub fn toy_train(
    model: &ToySequenceModel,
    data: &[ToyExample],
    config: &TrainConfig,
) -> Result<(ToySequenceModel, Vec<f64>), KernelError> {
    if data.is_empty() {
        return Err(KernelError::EmptyDataset);
    }
    for ex in data {
        validate_example(model, ex)?;
    }
    let mut model = model.clone();
    let mut theta = model.flat();
    let n = theta.len();
    let (mut loss, mut grad) = loss_and_grad(&model, data, config.use_hands);
    let mut trace = vec![loss];
    let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
    let mut lr = config.lr;
    let mut trial = model.clone();
    'outer: for t in 1..=config.steps {
        let (b1, b2) = (config.beta1, config.beta2);
        let m_new: Vec<f64> = m.iter().zip(&grad).map(|(m, g)| b1 * m + (1.0 - b1) * g).collect();
        let v_new: Vec<f64> = v.iter().zip(&grad).map(|(v, g)| b2 * v + (1.0 - b2) * g * g).collect();
        let (c1, c2) = (1.0 - b1.powi(t as i32), 1.0 - b2.powi(t as i32));
        let dir: Vec<f64> = m_new.iter().zip(&v_new).map(|(m, v)| (m / c1) / ((v / c2).sqrt() + 1e-8)).collect();
        let mut tries = 0;
        loop {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(p, s)| p - lr * s).collect();
            trial.set_flat(&cand);
            let (l_new, g_new) = loss_and_grad(&trial, data, config.use_hands);
            if l_new.is_finite() && l_new <= loss {
                theta = cand;
                loss = l_new;
                grad = g_new;
                m = m_new;
                v = v_new;
                trace.push(loss);
                lr = (lr * 1.2).min(config.lr * 4.0);
                break;
            }
            tries += 1;
            lr *= 0.5;
            if tries > config.max_backtracks {
                break 'outer;
            }
        }
    }
    model.set_flat(&theta);
    Ok((model, trace))
}
