//! Small feed-forward network engine.
//!
//! A network maps an input in `[0,1]^d` to a single score in `(-1, 1)`:
//! hidden layers use leaky-ReLU, the final dense layer is squashed by `tanh`.
//! Parameters live in one flat [`WeightVector`] so that Gaussian posteriors,
//! Adam, and checkpoints can treat them as a plain array.
//!
//! Reverse-mode gradients are available with respect to both the weights
//! (training) and the input (attacks).

use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{contract, shape, Error, Result};
use crate::rng;

/// Default leaky-ReLU slope.
pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl InputShape {
    /// A flat vector input of dimension `dim`.
    pub fn flat(dim: usize) -> Self {
        Self { channels: 1, height: 1, width: dim }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One layer of a [`NetworkSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Fully connected layer; the input is flattened first.
    Dense { out: usize },
    /// Stride-1 convolution with zero "same" padding. `kernel` must be odd.
    Conv2d { filters: usize, kernel: usize },
    /// 2x2 max-pooling with stride 2.
    MaxPool2,
}

/// Architecture of a voter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    pub leaky_slope: f64,
}

impl NetworkSpec {
    /// Dense network `input_dim -> hidden... -> 1`.
    pub fn mlp(input_dim: usize, hidden: &[usize]) -> Self {
        let mut layers: Vec<LayerSpec> = hidden.iter().map(|&out| LayerSpec::Dense { out }).collect();
        layers.push(LayerSpec::Dense { out: 1 });
        Self {
            input: InputShape::flat(input_dim),
            layers,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// 784 -> 128 -> 1, the default for MNIST pairs.
    pub fn desk_mnist() -> Self {
        Self::mlp(784, &[128])
    }

    /// Two conv blocks (32 and 64 filters, 5x5, each followed by 2x2
    /// max-pooling) and a 1024-unit dense layer on 28x28 grayscale input.
    pub fn conv_mnist() -> Self {
        Self {
            input: InputShape { channels: 1, height: 28, width: 28 },
            layers: vec![
                LayerSpec::Conv2d { filters: 32, kernel: 5 },
                LayerSpec::MaxPool2,
                LayerSpec::Conv2d { filters: 64, kernel: 5 },
                LayerSpec::MaxPool2,
                LayerSpec::Dense { out: 1024 },
                LayerSpec::Dense { out: 1 },
            ],
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        }
    }

    /// SHA-256 of the canonical JSON encoding; stamped into checkpoints.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("spec serializes");
        let mut out = [0u8; 32];
        out.copy_from_slice(&Sha256::digest(&json));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Activation {
    Identity,
    Leaky,
    Tanh,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Dense { inp: usize, out: usize },
    Conv { in_c: usize, h: usize, w: usize, filters: usize, k: usize },
    Pool { c: usize, h: usize, w: usize },
}

impl Op {
    fn n_params(&self) -> usize {
        match *self {
            Op::Dense { inp, out } => inp * out + out,
            Op::Conv { in_c, filters, k, .. } => filters * in_c * k * k + filters,
            Op::Pool { .. } => 0,
        }
    }

    fn out_len(&self) -> usize {
        match *self {
            Op::Dense { out, .. } => out,
            Op::Conv { h, w, filters, .. } => filters * h * w,
            Op::Pool { c, h, w } => c * (h / 2) * (w / 2),
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            Op::Dense { inp, .. } => inp,
            Op::Conv { in_c, k, .. } => in_c * k * k,
            Op::Pool { .. } => 1,
        }
    }

    fn n_weights(&self) -> usize {
        match *self {
            Op::Dense { inp, out } => inp * out,
            Op::Conv { in_c, filters, k, .. } => filters * in_c * k * k,
            Op::Pool { .. } => 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Stage {
    op: Op,
    offset: usize,
    act: Activation,
}

/// A validated [`NetworkSpec`] together with its layer plan.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    stages: Vec<Stage>,
    n_params: usize,
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        if spec.input.is_empty() {
            return Err(shape("input shape has zero size"));
        }
        if !(spec.leaky_slope.is_finite() && spec.leaky_slope >= 0.0) {
            return Err(contract("leaky slope must be finite and non-negative"));
        }
        let last = spec.layers.len().checked_sub(1).ok_or_else(|| shape("network has no layers"))?;
        if spec.layers[last] != (LayerSpec::Dense { out: 1 }) {
            return Err(shape("the last layer must be Dense { out: 1 }"));
        }

        let (mut c, mut h, mut w) = (spec.input.channels, spec.input.height, spec.input.width);
        let mut flat: Option<usize> = None;
        let mut stages = Vec::with_capacity(spec.layers.len());
        let mut offset = 0;
        for (idx, layer) in spec.layers.iter().enumerate() {
            let op = match *layer {
                LayerSpec::Dense { out } => {
                    if out == 0 {
                        return Err(shape(format!("layer {idx}: dense layer with zero outputs")));
                    }
                    let inp = flat.unwrap_or(c * h * w);
                    flat = Some(out);
                    Op::Dense { inp, out }
                }
                LayerSpec::Conv2d { filters, kernel } => {
                    if flat.is_some() {
                        return Err(shape(format!("layer {idx}: convolution after a dense layer")));
                    }
                    if filters == 0 || kernel == 0 || kernel % 2 == 0 {
                        return Err(shape(format!("layer {idx}: convolution needs filters > 0 and an odd kernel")));
                    }
                    let op = Op::Conv { in_c: c, h, w, filters, k: kernel };
                    c = filters;
                    op
                }
                LayerSpec::MaxPool2 => {
                    if flat.is_some() {
                        return Err(shape(format!("layer {idx}: pooling after a dense layer")));
                    }
                    if h < 2 || w < 2 {
                        return Err(shape(format!("layer {idx}: pooling a {h}x{w} map")));
                    }
                    let op = Op::Pool { c, h, w };
                    h /= 2;
                    w /= 2;
                    op
                }
            };
            let act = match op {
                _ if idx == last => Activation::Tanh,
                Op::Pool { .. } => Activation::Identity,
                _ => Activation::Leaky,
            };
            stages.push(Stage { op, offset, act });
            offset += op.n_params();
        }
        Ok(Self { spec, stages, n_params: offset })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Number of parameters `d`.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn input_len(&self) -> usize {
        self.spec.input.len()
    }

    fn check(&self, w: &WeightVector, x: &[f64]) -> Result<()> {
        if w.len() != self.n_params {
            return Err(shape(format!("weight vector has {} entries, network needs {}", w.len(), self.n_params)));
        }
        if x.len() != self.input_len() {
            return Err(shape(format!("input has {} entries, network needs {}", x.len(), self.input_len())));
        }
        Ok(())
    }
}

/// Flat parameter array of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(contract(format!("weight {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Squared Euclidean distance to `other`.
    pub fn dist2(&self, other: &WeightVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Fan-in scaled uniform initialization: weights in `±1/sqrt(fan_in)`, zero biases.
pub fn init_weights(net: &Network, seed: u64) -> WeightVector {
    let mut rng = rng::stream(seed, "init", 0);
    let mut values = vec![0.0; net.n_params];
    for stage in &net.stages {
        let n_w = stage.op.n_weights();
        if n_w == 0 {
            continue;
        }
        let limit = 1.0 / (stage.op.fan_in() as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("valid bounds");
        for v in &mut values[stage.offset..stage.offset + n_w] {
            *v = dist.sample(&mut rng);
        }
    }
    WeightVector(values)
}

/// A scalar loss of the network score, as seen by backpropagation.
pub trait ScoreLoss {
    /// Loss value and its derivative with respect to the score.
    fn eval(&self, score: f64, y: f64) -> (f64, f64);
}

/// `½(1 − y·h)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearLoss;

impl ScoreLoss for LinearLoss {
    fn eval(&self, score: f64, y: f64) -> (f64, f64) {
        (0.5 * (1.0 - y * score), -0.5 * y)
    }
}

impl<F: Fn(f64, f64) -> (f64, f64)> ScoreLoss for F {
    fn eval(&self, score: f64, y: f64) -> (f64, f64) {
        self(score, y)
    }
}

/// Result of [`grad`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub score: f64,
    pub loss: f64,
    pub weights: Vec<f64>,
    pub input: Vec<f64>,
}

struct Tape {
    /// `values[i]` is the input of stage `i`; the last entry is the score.
    values: Vec<Vec<f64>>,
    /// Pre-activation output of each stage.
    pre: Vec<Vec<f64>>,
    /// For pooling stages, the input index selected for each output.
    argmax: Vec<Vec<usize>>,
}

fn run(net: &Network, w: &[f64], x: &[f64], keep: bool) -> Result<Tape> {
    let mut tape = Tape {
        values: Vec::with_capacity(net.stages.len() + 1),
        pre: Vec::with_capacity(net.stages.len()),
        argmax: Vec::with_capacity(net.stages.len()),
    };
    let mut cur = x.to_vec();
    let slope = net.spec.leaky_slope;
    for (idx, stage) in net.stages.iter().enumerate() {
        let mut out = vec![0.0; stage.op.out_len()];
        let mut picks = Vec::new();
        match stage.op {
            Op::Dense { inp, out: n_out } => {
                let (weights, rest) = w[stage.offset..].split_at(inp * n_out);
                let bias = &rest[..n_out];
                for (o, slot) in out.iter_mut().enumerate() {
                    let row = &weights[o * inp..(o + 1) * inp];
                    *slot = bias[o] + dot(row, &cur);
                }
            }
            Op::Conv { in_c, h, w: width, filters, k } => {
                let n_w = filters * in_c * k * k;
                conv_forward(&w[stage.offset..stage.offset + n_w], &w[stage.offset + n_w..stage.offset + n_w + filters], &cur, &mut out, in_c, h, width, filters, k);
            }
            Op::Pool { c, h, w: width } => {
                picks = pool_forward(&cur, &mut out, c, h, width);
            }
        }
        if let Some(bad) = out.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric { layer: idx, what: format!("pre-activation {bad}") });
        }
        let pre = if keep { Some(out.clone()) } else { None };
        match stage.act {
            Activation::Identity => {}
            Activation::Leaky => out.iter_mut().for_each(|v| {
                if *v < 0.0 {
                    *v *= slope
                }
            }),
            Activation::Tanh => out.iter_mut().for_each(|v| *v = v.tanh()),
        }
        if keep {
            tape.values.push(cur);
            tape.pre.push(pre.unwrap_or_default());
            tape.argmax.push(picks);
        }
        cur = out;
    }
    tape.values.push(cur);
    Ok(tape)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize the reduction.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(weights: &[f64], bias: &[f64], inp: &[f64], out: &mut [f64], in_c: usize, h: usize, w: usize, filters: usize, k: usize) {
    let pad = k / 2;
    for f in 0..filters {
        let plane = &mut out[f * h * w..(f + 1) * h * w];
        plane.iter_mut().for_each(|v| *v = bias[f]);
        for c in 0..in_c {
            let src = &inp[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let wt = weights[((f * in_c + c) * k + ki) * k + kj];
                    for i in 0..h {
                        let si = i + ki;
                        if si < pad || si - pad >= h {
                            continue;
                        }
                        let si = si - pad;
                        for j in 0..w {
                            let sj = j + kj;
                            if sj < pad || sj - pad >= w {
                                continue;
                            }
                            plane[i * w + j] += wt * src[si * w + sj - pad];
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(weights: &[f64], inp: &[f64], d_out: &[f64], d_in: &mut [f64], d_w: Option<(&mut [f64], &mut [f64])>, in_c: usize, h: usize, w: usize, filters: usize, k: usize) {
    let pad = k / 2;
    let (mut dw, mut db) = match d_w {
        Some((dw, db)) => (Some(dw), Some(db)),
        None => (None, None),
    };
    for f in 0..filters {
        let g = &d_out[f * h * w..(f + 1) * h * w];
        if let Some(db) = db.as_deref_mut() {
            db[f] += g.iter().sum::<f64>();
        }
        for c in 0..in_c {
            let src = &inp[c * h * w..(c + 1) * h * w];
            let dst = &mut d_in[c * h * w..(c + 1) * h * w];
            for ki in 0..k {
                for kj in 0..k {
                    let widx = ((f * in_c + c) * k + ki) * k + kj;
                    let wt = weights[widx];
                    let mut acc = 0.0;
                    for i in 0..h {
                        let si = i + ki;
                        if si < pad || si - pad >= h {
                            continue;
                        }
                        let si = si - pad;
                        for j in 0..w {
                            let sj = j + kj;
                            if sj < pad || sj - pad >= w {
                                continue;
                            }
                            let s = si * w + sj - pad;
                            let go = g[i * w + j];
                            dst[s] += wt * go;
                            acc += src[s] * go;
                        }
                    }
                    if let Some(dw) = dw.as_deref_mut() {
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
}

fn pool_forward(inp: &[f64], out: &mut [f64], c: usize, h: usize, w: usize) -> Vec<usize> {
    let (oh, ow) = (h / 2, w / 2);
    let mut picks = vec![0; out.len()];
    for ch in 0..c {
        for i in 0..oh {
            for j in 0..ow {
                let mut best = ch * h * w + (2 * i) * w + 2 * j;
                for (di, dj) in [(0, 1), (1, 0), (1, 1)] {
                    let idx = ch * h * w + (2 * i + di) * w + 2 * j + dj;
                    if inp[idx] > inp[best] {
                        best = idx;
                    }
                }
                let o = ch * oh * ow + i * ow + j;
                out[o] = inp[best];
                picks[o] = best;
            }
        }
    }
    picks
}

/// Network score `h_w(x) ∈ (-1, 1)`.
pub fn forward(net: &Network, w: &WeightVector, x: &[f64]) -> Result<f64> {
    net.check(w, x)?;
    let tape = run(net, w.as_slice(), x, false)?;
    Ok(tape.values.last().expect("score")[0])
}

fn backward(net: &Network, w: &[f64], tape: &Tape, d_score: f64, mut d_weights: Option<&mut [f64]>) -> Result<Vec<f64>> {
    let slope = net.spec.leaky_slope;
    let mut grad = vec![d_score];
    for (idx, stage) in net.stages.iter().enumerate().rev() {
        let pre = &tape.pre[idx];
        match stage.act {
            Activation::Identity => {}
            Activation::Leaky => grad.iter_mut().zip(pre).for_each(|(g, &z)| {
                if z < 0.0 {
                    *g *= slope
                }
            }),
            Activation::Tanh => grad.iter_mut().zip(pre).for_each(|(g, &z)| {
                let t = z.tanh();
                *g *= 1.0 - t * t
            }),
        }
        let inp = &tape.values[idx];
        let mut d_in = vec![0.0; inp.len()];
        match stage.op {
            Op::Dense { inp: n_in, out: n_out } => {
                let weights = &w[stage.offset..stage.offset + n_in * n_out];
                for (o, &g) in grad.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    d_in.iter_mut().zip(row).for_each(|(d, &r)| *d += g * r);
                }
                if let Some(dw) = d_weights.as_deref_mut() {
                    let (dwm, dbias) = dw[stage.offset..stage.offset + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                    for (o, &g) in grad.iter().enumerate() {
                        dbias[o] += g;
                        if g == 0.0 {
                            continue;
                        }
                        dwm[o * n_in..(o + 1) * n_in].iter_mut().zip(inp).for_each(|(d, &a)| *d += g * a);
                    }
                }
            }
            Op::Conv { in_c, h, w: width, filters, k } => {
                let n_w = filters * in_c * k * k;
                let weights = &w[stage.offset..stage.offset + n_w];
                let dw = d_weights.as_deref_mut().map(|dw| dw[stage.offset..stage.offset + n_w + filters].split_at_mut(n_w));
                conv_backward(weights, inp, &grad, &mut d_in, dw, in_c, h, width, filters, k);
            }
            Op::Pool { .. } => {
                for (o, &src) in tape.argmax[idx].iter().enumerate() {
                    d_in[src] += grad[o];
                }
            }
        }
        if let Some(bad) = d_in.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric { layer: idx, what: format!("gradient {bad}") });
        }
        grad = d_in;
    }
    Ok(grad)
}

/// Reverse-mode gradient of `loss(h_w(x), y)` with respect to weights and input.
pub fn grad(net: &Network, w: &WeightVector, x: &[f64], y: f64, loss: &impl ScoreLoss) -> Result<Gradients> {
    net.check(w, x)?;
    let tape = run(net, w.as_slice(), x, true)?;
    let score = tape.values.last().expect("score")[0];
    let (value, slope) = loss.eval(score, y);
    let mut gw = vec![0.0; net.n_params];
    let gx = backward(net, w.as_slice(), &tape, slope, Some(&mut gw))?;
    Ok(Gradients { score, loss: value, weights: gw, input: gx })
}

/// Input gradient only; returns `(score, d loss / d x)`.
pub fn input_grad(net: &Network, w: &WeightVector, x: &[f64], y: f64, loss: &impl ScoreLoss) -> Result<(f64, Vec<f64>)> {
    net.check(w, x)?;
    let tape = run(net, w.as_slice(), x, true)?;
    let score = tape.values.last().expect("score")[0];
    let (_, slope) = loss.eval(score, y);
    let gx = backward(net, w.as_slice(), &tape, slope, None)?;
    Ok((score, gx))
}

/// Adds `scale · d loss / d w` into `acc`; returns `(score, loss)`.
pub fn accumulate_weight_grad(net: &Network, w: &WeightVector, x: &[f64], y: f64, loss: &impl ScoreLoss, scale: f64, acc: &mut [f64]) -> Result<(f64, f64)> {
    net.check(w, x)?;
    if acc.len() != net.n_params {
        return Err(shape("gradient accumulator length"));
    }
    let tape = run(net, w.as_slice(), x, true)?;
    let score = tape.values.last().expect("score")[0];
    let (value, slope) = loss.eval(score, y);
    backward(net, w.as_slice(), &tape, scale * slope, Some(acc))?;
    Ok((score, value))
}

/// Adam optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
}

impl AdamState {
    /// Zero moments with β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(len: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
        }
    }

    /// One bias-corrected Adam update of `w` along `-g`.
    pub fn step(&mut self, w: &mut [f64], g: &[f64]) -> Result<()> {
        if w.len() != self.m.len() || g.len() != self.m.len() {
            return Err(shape(format!("adam state has {} entries, got weights {} and gradient {}", self.m.len(), w.len(), g.len())));
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..w.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            w[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// `adam_step` in functional form.
pub fn adam_step(state: &mut AdamState, w: &mut WeightVector, g: &[f64]) -> Result<()> {
    state.step(w.as_mut_slice(), g)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"ADVBWT01";

/// Writes `magic | spec hash (32 bytes) | length (u64 LE) | f64 LE values`.
pub fn write_checkpoint(net: &Network, w: &WeightVector, out: &mut impl Write) -> Result<()> {
    if w.len() != net.n_params {
        return Err(shape("checkpoint weights do not match the network"));
    }
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&net.spec.hash())?;
    out.write_all(&(w.len() as u64).to_le_bytes())?;
    for v in w.as_slice() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Reads a checkpoint written by [`write_checkpoint`], rejecting a spec hash mismatch.
pub fn read_checkpoint(net: &Network, input: &mut impl Read) -> Result<WeightVector> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let mut hash = [0u8; 32];
    input.read_exact(&mut hash)?;
    if hash != net.spec.hash() {
        return Err(Error::Checkpoint("network spec hash mismatch".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len != net.n_params {
        return Err(Error::Checkpoint(format!("checkpoint holds {len} weights, network needs {}", net.n_params)));
    }
    let mut buf = vec![0u8; len * 8];
    input.read_exact(&mut buf)?;
    let values = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    WeightVector::new(values).map_err(|e| Error::Checkpoint(e.to_string()))
}

/// Draw a random input in `[0,1]^d`, handy for tests and smoke runs.
pub fn random_input(net: &Network, rng: &mut impl Rng) -> Vec<f64> {
    (0..net.input_len()).map(|_| rng.random::<f64>()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tiny() -> Network {
        Network::new(NetworkSpec::mlp(4, &[3])).unwrap()
    }

    #[test]
    fn zero_weights_score_zero() {
        let net = tiny();
        let w = WeightVector::zeros(net.n_params());
        assert_eq!(forward(&net, &w, &[0.3, 0.1, 0.9, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn single_unit_is_tanh() {
        let net = Network::new(NetworkSpec::mlp(1, &[])).unwrap();
        let w = WeightVector::new(vec![1.0, 0.0]).unwrap();
        assert_relative_eq!(forward(&net, &w, &[0.5]).unwrap(), 0.462_117_157_260_009_8, epsilon = 1e-15);
    }

    #[test]
    fn zero_weights_zero_gradients_upstream() {
        let net = tiny();
        let w = WeightVector::zeros(net.n_params());
        let g = grad(&net, &w, &[0.3, 0.1, 0.9, 0.5], 1.0, &LinearLoss).unwrap();
        assert!(g.input.iter().all(|&v| v == 0.0));
        // Only the output bias and output weights can see a signal; the
        // hidden activations are zero so only the output bias moves.
        let n = net.n_params();
        assert_eq!(g.weights[n - 1], -0.5);
        assert!(g.weights[..n - 1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let net = tiny();
        let w = WeightVector::zeros(net.n_params());
        assert!(matches!(forward(&net, &w, &[0.0; 3]), Err(Error::Shape(_))));
        let short = WeightVector::zeros(net.n_params() - 1);
        assert!(matches!(forward(&net, &short, &[0.0; 4]), Err(Error::Shape(_))));
        assert!(Network::new(NetworkSpec { input: InputShape::flat(3), layers: vec![LayerSpec::Dense { out: 2 }], leaky_slope: 0.01 }).is_err());
        assert!(Network::new(NetworkSpec { input: InputShape::flat(3), layers: vec![], leaky_slope: 0.01 }).is_err());
        let conv_after_dense = NetworkSpec {
            input: InputShape { channels: 1, height: 4, width: 4 },
            layers: vec![LayerSpec::Dense { out: 4 }, LayerSpec::Conv2d { filters: 1, kernel: 3 }, LayerSpec::Dense { out: 1 }],
            leaky_slope: 0.01,
        };
        assert!(Network::new(conv_after_dense).is_err());
    }

    #[test]
    fn non_finite_reports_layer() {
        let net = tiny();
        let mut w = init_weights(&net, 1);
        w.as_mut_slice()[0] = f64::INFINITY;
        match forward(&net, &w, &[1.0, 0.0, 0.0, 0.0]) {
            Err(Error::Numeric { layer, .. }) => assert_eq!(layer, 0),
            other => panic!("expected numeric error, got {other:?}"),
        }
    }

    #[test]
    fn init_is_seeded() {
        let net = tiny();
        assert_eq!(init_weights(&net, 3), init_weights(&net, 3));
        assert_ne!(init_weights(&net, 3), init_weights(&net, 4));
    }

    #[test]
    fn param_counts() {
        assert_eq!(Network::new(NetworkSpec::desk_mnist()).unwrap().n_params(), 784 * 128 + 128 + 128 + 1);
        let conv = Network::new(NetworkSpec::conv_mnist()).unwrap();
        let expected = (32 * 25 + 32) + (64 * 32 * 25 + 64) + (64 * 7 * 7 * 1024 + 1024) + (1024 + 1);
        assert_eq!(conv.n_params(), expected);
    }

    #[test]
    fn adam_zero_gradient_keeps_weights() {
        let mut state = AdamState::new(3, 0.01);
        let mut w = WeightVector::new(vec![0.5, -1.0, 2.0]).unwrap();
        for _ in 0..10 {
            adam_step(&mut state, &mut w, &[0.0; 3]).unwrap();
        }
        assert_eq!(w.as_slice(), &[0.5, -1.0, 2.0]);
        assert_eq!(state.step, 10);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut state = AdamState::new(2, 0.001);
        let mut w = WeightVector::new(vec![1.0, -1.0]).unwrap();
        adam_step(&mut state, &mut w, &[1.0, 1.0]).unwrap();
        // m̂ = v̂ = 1, so the step is lr / (1 + eps).
        let expected = 0.001 / (1.0 + 1e-8);
        assert_relative_eq!(w.as_slice()[0], 1.0 - expected, epsilon = 1e-15);
        assert_relative_eq!(w.as_slice()[1], -1.0 - expected, epsilon = 1e-15);
    }

    #[test]
    fn adam_state_round_trip_continues_identically() {
        let mut a = AdamState::new(3, 0.01);
        let mut wa = WeightVector::new(vec![0.1, 0.2, 0.3]).unwrap();
        let g = [0.3, -0.7, 1.1];
        adam_step(&mut a, &mut wa, &g).unwrap();
        let mut b: AdamState = serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
        let mut wb = wa.clone();
        adam_step(&mut a, &mut wa, &g).unwrap();
        adam_step(&mut b, &mut wb, &g).unwrap();
        assert_eq!(wa, wb);
        assert_eq!(a, b);
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut state = AdamState::new(2, 0.1);
        let mut w = WeightVector::zeros(3);
        assert!(adam_step(&mut state, &mut w, &[0.0; 3]).is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_hash_check() {
        let net = tiny();
        let w = init_weights(&net, 9);
        let mut buf = Vec::new();
        write_checkpoint(&net, &w, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 32 + 8 + 8 * net.n_params());
        assert_eq!(read_checkpoint(&net, &mut buf.as_slice()).unwrap(), w);

        let other = Network::new(NetworkSpec::mlp(4, &[5])).unwrap();
        assert!(matches!(read_checkpoint(&other, &mut buf.as_slice()), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn pooling_routes_gradient_to_argmax() {
        let spec = NetworkSpec {
            input: InputShape { channels: 1, height: 2, width: 2 },
            layers: vec![LayerSpec::MaxPool2, LayerSpec::Dense { out: 1 }],
            leaky_slope: 0.01,
        };
        let net = Network::new(spec).unwrap();
        let w = WeightVector::new(vec![1.0, 0.0]).unwrap();
        let g = grad(&net, &w, &[0.1, 0.7, 0.3, 0.2], 1.0, &LinearLoss).unwrap();
        assert_relative_eq!(g.score, 0.7f64.tanh(), epsilon = 1e-15);
        assert_eq!(g.input[0], 0.0);
        assert!(g.input[1] < 0.0);
        assert_eq!(g.input[2], 0.0);
    }
}
