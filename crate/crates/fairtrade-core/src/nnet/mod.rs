//! Minimal differentiable feed-forward networks on `f64`.
//!
//! The engine covers exactly what the learning stages need and no more:
//! multilayer perceptrons with ELU/ReLU hidden activations and one or more
//! distribution heads (Bernoulli, Gaussian, Categorical) on a shared trunk.
//! Parameters live in a flat [`ParamStore`] with a named layout (so
//! checkpoints are byte-stable and optimizers are trivial); gradients come
//! from a hand-written reverse pass that is *always* checked against central
//! finite differences in the test suite. There is no general computation
//! graph: composite models (e.g. an encoder feeding decoders) chain MLPs by
//! hand through the input-gradient each backward pass returns.
//!
//! Layout names are `h00.w`/`h00.b` for hidden layers and `o00.w`/`o00.b`
//! for head affines; offsets are assigned in lexicographic name order.

mod checkpoint;
mod gradcheck;
mod optim;

pub use checkpoint::MlpCheckpoint;
pub use gradcheck::{grad_check, GradCheckReport, HeadLoss, NegLogLik};
pub use optim::{OptAlgo, OptState};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) const LN_2PI: f64 = 1.8378770664093453;
/// Gaussian heads never report a standard deviation below this floor.
pub const SIGMA_MIN: f64 = 0.1;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Elu,
    Relu,
}

impl Activation {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    x
                } else {
                    x.exp() - 1.0
                }
            }
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative as a function of the pre-activation.
    #[inline]
    pub fn deriv(self, x: f64) -> f64 {
        match self {
            Activation::Elu => {
                if x > 0.0 {
                    1.0
                } else {
                    x.exp()
                }
            }
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Distribution family of an output head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadKind {
    /// Sigmoid probability per output.
    Bernoulli,
    /// Mean plus softplus-transformed standard deviation per output, with
    /// the deviation clamped to at least [`SIGMA_MIN`].
    Gaussian,
    /// `k`-way softmax per output.
    Categorical(usize),
}

/// One output head: a distribution family and how many variables it covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    pub kind: HeadKind,
    pub dim: usize,
}

impl HeadSpec {
    pub fn bernoulli(dim: usize) -> HeadSpec {
        HeadSpec { kind: HeadKind::Bernoulli, dim }
    }

    pub fn gaussian(dim: usize) -> HeadSpec {
        HeadSpec { kind: HeadKind::Gaussian, dim }
    }

    pub fn categorical(dim: usize, k: usize) -> HeadSpec {
        HeadSpec { kind: HeadKind::Categorical(k), dim }
    }

    /// Width of the raw affine output feeding this head.
    pub fn raw_width(&self) -> usize {
        match self.kind {
            HeadKind::Bernoulli => self.dim,
            HeadKind::Gaussian => 2 * self.dim,
            HeadKind::Categorical(k) => self.dim * k,
        }
    }
}

/// Architecture of one MLP: input width, hidden widths, activation, heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub heads: Vec<HeadSpec>,
}

/// Placement of one named parameter block in the flat array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Named layout of a flat parameter array. Offsets are contiguous and
/// assigned in lexicographic name order, which makes serialized checkpoints
/// byte-stable.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    entries: BTreeMap<String, LayoutEntry>,
    len: usize,
}

impl Layout {
    fn build(shapes: BTreeMap<String, (usize, usize)>) -> Layout {
        let mut entries = BTreeMap::new();
        let mut offset = 0;
        for (name, (rows, cols)) in shapes {
            entries.insert(name, LayoutEntry { offset, rows, cols });
            offset += rows * cols;
        }
        Layout { entries, len: offset }
    }

    /// Total parameter count.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn entry(&self, name: &str) -> Result<LayoutEntry> {
        self.entries.get(name).copied().ok_or_else(|| Error::UnknownName(format!("layer '{name}'")))
    }

    /// Iterate entries in name order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, LayoutEntry)> {
        self.entries.iter().map(|(n, e)| (n.as_str(), *e))
    }

    /// Name of the block containing flat index `i`.
    pub fn name_of(&self, i: usize) -> &str {
        self.entries
            .iter()
            .find(|(_, e)| i >= e.offset && i < e.offset + e.len())
            .map(|(n, _)| n.as_str())
            .unwrap_or("<out of range>")
    }
}

/// Flat parameter array plus companion gradient array.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
    layout: Layout,
}

impl ParamStore {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Zero the gradient array.
    pub fn clear_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    /// View of one named block's values.
    pub fn block(&self, name: &str) -> Result<&[f64]> {
        let e = self.layout.entry(name)?;
        Ok(&self.values[e.offset..e.offset + e.len()])
    }

    /// Mutable view of one named block's values.
    pub fn block_mut(&mut self, name: &str) -> Result<&mut [f64]> {
        let e = self.layout.entry(name)?;
        Ok(&mut self.values[e.offset..e.offset + e.len()])
    }
}

/// Intermediate activations of one forward pass, consumed by the backward
/// pass. Holding a `Trace` is proof a forward pass happened, so "backward
/// before forward" is unrepresentable.
#[derive(Debug, Clone)]
pub struct Trace {
    input: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    raw: Vec<Vec<f64>>,
}

impl Trace {
    /// Raw (pre-transform) affine outputs per head.
    pub fn raw(&self) -> &[Vec<f64>] {
        &self.raw
    }
}

/// Transformed distribution parameters produced by one head, with the raw
/// pre-transform values retained for stable log-probabilities and backward.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput {
    Bernoulli { p: Vec<f64>, logit: Vec<f64> },
    Gaussian { mean: Vec<f64>, sd: Vec<f64>, raw_sd: Vec<f64> },
    Categorical { probs: Vec<f64>, logits: Vec<f64>, k: usize },
}

impl HeadOutput {
    /// Log-probability of an observation under this head. Bernoulli
    /// observations must be 0/1; categorical observations must be integer
    /// class indices in `0..k`.
    pub fn log_prob(&self, obs: &[f64]) -> Result<f64> {
        match self {
            HeadOutput::Bernoulli { logit, .. } => {
                expect_len("bernoulli observation", obs, logit.len())?;
                let mut lp = 0.0;
                for (y, l) in obs.iter().zip(logit) {
                    if *y != 0.0 && *y != 1.0 {
                        return Err(Error::Validation(format!("bernoulli observation {y} is not 0/1")));
                    }
                    // y ln p + (1-y) ln(1-p), written in terms of the logit.
                    lp += -softplus(-l) * y - softplus(*l) * (1.0 - y);
                }
                Ok(lp)
            }
            HeadOutput::Gaussian { mean, sd, .. } => {
                expect_len("gaussian observation", obs, mean.len())?;
                let mut lp = 0.0;
                for ((y, m), s) in obs.iter().zip(mean).zip(sd) {
                    let z = (y - m) / s;
                    lp += -0.5 * LN_2PI - s.ln() - 0.5 * z * z;
                }
                Ok(lp)
            }
            HeadOutput::Categorical { logits, k, .. } => {
                let dim = logits.len() / k;
                expect_len("categorical observation", obs, dim)?;
                let mut lp = 0.0;
                for (b, y) in obs.iter().enumerate() {
                    if y.fract() != 0.0 || *y < 0.0 || *y >= *k as f64 {
                        return Err(Error::Validation(format!(
                            "categorical observation {y} outside 0..{k}"
                        )));
                    }
                    let block = &logits[b * k..(b + 1) * k];
                    lp += block[*y as usize] - log_sum_exp(block);
                }
                Ok(lp)
            }
        }
    }

    /// Gradient of [`HeadOutput::log_prob`] with respect to the head's raw
    /// affine outputs (transform derivatives fused in).
    pub fn dlogprob_draw(&self, obs: &[f64]) -> Result<Vec<f64>> {
        match self {
            HeadOutput::Bernoulli { p, .. } => {
                expect_len("bernoulli observation", obs, p.len())?;
                Ok(obs.iter().zip(p).map(|(y, p)| y - p).collect())
            }
            HeadOutput::Gaussian { mean, sd, raw_sd } => {
                expect_len("gaussian observation", obs, mean.len())?;
                let mut d = vec![0.0; 2 * mean.len()];
                for i in 0..mean.len() {
                    let (m, s, y) = (mean[i], sd[i], obs[i]);
                    d[i] = (y - m) / (s * s);
                    let d_sd = (y - m) * (y - m) / (s * s * s) - 1.0 / s;
                    d[mean.len() + i] = d_sd * sd_transform_deriv(raw_sd[i]);
                }
                Ok(d)
            }
            HeadOutput::Categorical { probs, k, .. } => {
                let dim = probs.len() / k;
                expect_len("categorical observation", obs, dim)?;
                let mut d = Vec::with_capacity(probs.len());
                for (b, y) in obs.iter().enumerate() {
                    let block = &probs[b * k..(b + 1) * k];
                    for (j, pj) in block.iter().enumerate() {
                        let onehot = if j == *y as usize { 1.0 } else { 0.0 };
                        d.push(onehot - pj);
                    }
                }
                Ok(d)
            }
        }
    }

    /// Map a gradient w.r.t. a Gaussian head's `(mean, sd)` parameters to a
    /// gradient w.r.t. the raw affine outputs. Used when a loss touches the
    /// distribution parameters directly (e.g. reparameterized samples).
    pub fn gaussian_param_grad_to_raw(&self, d_mean: &[f64], d_sd: &[f64]) -> Result<Vec<f64>> {
        match self {
            HeadOutput::Gaussian { mean, raw_sd, .. } => {
                expect_len("d_mean", d_mean, mean.len())?;
                expect_len("d_sd", d_sd, mean.len())?;
                let mut d = Vec::with_capacity(2 * mean.len());
                d.extend_from_slice(d_mean);
                for i in 0..mean.len() {
                    d.push(d_sd[i] * sd_transform_deriv(raw_sd[i]));
                }
                Ok(d)
            }
            _ => Err(Error::Validation("not a gaussian head".into())),
        }
    }

    /// Draw one observation vector from the head's distribution.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            HeadOutput::Bernoulli { p, .. } => {
                p.iter().map(|p| if rng.gen::<f64>() < *p { 1.0 } else { 0.0 }).collect()
            }
            HeadOutput::Gaussian { mean, sd, .. } => {
                use rand_distr::{Distribution, StandardNormal};
                mean.iter()
                    .zip(sd)
                    .map(|(m, s)| {
                        let eps: f64 = StandardNormal.sample(rng);
                        m + s * eps
                    })
                    .collect()
            }
            HeadOutput::Categorical { probs, k, .. } => {
                let dim = probs.len() / k;
                (0..dim)
                    .map(|b| {
                        let block = &probs[b * k..(b + 1) * k];
                        let u: f64 = rng.gen();
                        let mut acc = 0.0;
                        for (j, pj) in block.iter().enumerate() {
                            acc += pj;
                            if u < acc {
                                return j as f64;
                            }
                        }
                        (k - 1) as f64
                    })
                    .collect()
            }
        }
    }

    /// Deterministic summary: Gaussian mean, Bernoulli probability,
    /// categorical mode.
    pub fn mean_or_mode(&self) -> Vec<f64> {
        match self {
            HeadOutput::Bernoulli { p, .. } => p.clone(),
            HeadOutput::Gaussian { mean, .. } => mean.clone(),
            HeadOutput::Categorical { probs, k, .. } => {
                let dim = probs.len() / k;
                (0..dim)
                    .map(|b| {
                        let block = &probs[b * k..(b + 1) * k];
                        let mut best = 0usize;
                        for j in 1..*k {
                            if block[j] > block[best] {
                                best = j;
                            }
                        }
                        best as f64
                    })
                    .collect()
            }
        }
    }

    /// Gaussian accessor, erroring on other heads.
    pub fn as_gaussian(&self) -> Result<(&[f64], &[f64])> {
        match self {
            HeadOutput::Gaussian { mean, sd, .. } => Ok((mean, sd)),
            _ => Err(Error::Validation("head is not gaussian".into())),
        }
    }

    /// Bernoulli probability accessor, erroring on other heads.
    pub fn as_bernoulli(&self) -> Result<&[f64]> {
        match self {
            HeadOutput::Bernoulli { p, .. } => Ok(p),
            _ => Err(Error::Validation("head is not bernoulli".into())),
        }
    }
}

/// A feed-forward network: spec plus derived layout. Parameters live
/// outside the struct so frozen models can be shared across threads while a
/// trainer owns a mutable [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    layout: Layout,
}

impl Mlp {
    pub fn new(spec: MlpSpec) -> Result<Mlp> {
        if spec.input_dim == 0 {
            return Err(Error::Validation("input_dim must be positive".into()));
        }
        if spec.heads.is_empty() {
            return Err(Error::Validation("network needs at least one head".into()));
        }
        for h in &spec.heads {
            if h.dim == 0 {
                return Err(Error::Validation("head dim must be positive".into()));
            }
            if let HeadKind::Categorical(k) = h.kind {
                if k < 2 {
                    return Err(Error::Validation(format!("categorical head needs k >= 2, got {k}")));
                }
            }
        }
        if spec.hidden.iter().any(|w| *w == 0) {
            return Err(Error::Validation("hidden widths must be positive".into()));
        }
        let mut shapes = BTreeMap::new();
        let mut width = spec.input_dim;
        for (i, h) in spec.hidden.iter().enumerate() {
            shapes.insert(format!("h{i:02}.w"), (width, *h));
            shapes.insert(format!("h{i:02}.b"), (1, *h));
            width = *h;
        }
        for (j, head) in spec.heads.iter().enumerate() {
            shapes.insert(format!("o{j:02}.w"), (width, head.raw_width()));
            shapes.insert(format!("o{j:02}.b"), (1, head.raw_width()));
        }
        Ok(Mlp { layout: Layout::build(shapes), spec })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn param_count(&self) -> usize {
        self.layout.len()
    }

    /// Fresh parameters: weights uniform in ±sqrt(6 / (fan_in + fan_out)),
    /// biases zero.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> ParamStore {
        let mut values = vec![0.0; self.layout.len()];
        for (name, e) in self.layout.iter() {
            if name.ends_with(".w") {
                let bound = (6.0 / (e.rows + e.cols) as f64).sqrt();
                for v in &mut values[e.offset..e.offset + e.len()] {
                    *v = rng.gen_range(-bound..=bound);
                }
            }
        }
        ParamStore { grads: vec![0.0; values.len()], values, layout: self.layout.clone() }
    }

    /// Zero-initialized parameters (useful for hand-set weights in tests).
    pub fn zero_params(&self) -> ParamStore {
        ParamStore {
            values: vec![0.0; self.layout.len()],
            grads: vec![0.0; self.layout.len()],
            layout: self.layout.clone(),
        }
    }

    /// Forward pass: head outputs plus the trace needed for backward.
    pub fn forward(&self, params: &ParamStore, input: &[f64]) -> Result<(Vec<HeadOutput>, Trace)> {
        expect_len("input", input, self.spec.input_dim)?;
        if params.len() != self.layout.len() {
            return Err(Error::Dimension(format!(
                "param store holds {} values, network needs {}",
                params.len(),
                self.layout.len()
            )));
        }
        let mut pre = Vec::with_capacity(self.spec.hidden.len());
        let mut post = Vec::with_capacity(self.spec.hidden.len());
        let mut h: Vec<f64> = input.to_vec();
        for i in 0..self.spec.hidden.len() {
            let z = affine(params, &format!("h{i:02}"), &h)?;
            let a: Vec<f64> = z.iter().map(|v| self.spec.activation.eval(*v)).collect();
            pre.push(z);
            post.push(a.clone());
            h = a;
        }
        let mut raws = Vec::with_capacity(self.spec.heads.len());
        let mut heads = Vec::with_capacity(self.spec.heads.len());
        for (j, head) in self.spec.heads.iter().enumerate() {
            let raw = affine(params, &format!("o{j:02}"), &h)?;
            heads.push(transform_head(head, &raw));
            raws.push(raw);
        }
        Ok((heads, Trace { input: input.to_vec(), pre, post, raw: raws }))
    }

    /// Reverse pass from gradients w.r.t. each head's raw affine outputs.
    /// Accumulates parameter gradients (additive across calls until
    /// [`ParamStore::clear_grads`]) and returns the gradient w.r.t. the
    /// network input, which is how composite models chain.
    pub fn backward_raw(
        &self,
        params: &mut ParamStore,
        trace: &Trace,
        d_raw: &[Vec<f64>],
    ) -> Result<Vec<f64>> {
        if d_raw.len() != self.spec.heads.len() {
            return Err(Error::Dimension(format!(
                "got {} head gradients, network has {} heads",
                d_raw.len(),
                self.spec.heads.len()
            )));
        }
        for (j, head) in self.spec.heads.iter().enumerate() {
            expect_len("head gradient", &d_raw[j], head.raw_width())?;
        }
        let last = if self.spec.hidden.is_empty() {
            &trace.input
        } else {
            &trace.post[self.spec.hidden.len() - 1]
        };
        // Heads: accumulate affine grads and the shared trunk gradient.
        let mut d_h = vec![0.0; last.len()];
        for j in 0..self.spec.heads.len() {
            affine_backward(params, &format!("o{j:02}"), last, &d_raw[j], &mut d_h)?;
        }
        // Hidden layers in reverse.
        for i in (0..self.spec.hidden.len()).rev() {
            let mut d_pre = d_h;
            for (g, z) in d_pre.iter_mut().zip(&trace.pre[i]) {
                *g *= self.spec.activation.deriv(*z);
            }
            let below = if i == 0 { &trace.input } else { &trace.post[i - 1] };
            d_h = vec![0.0; below.len()];
            affine_backward(params, &format!("h{i:02}"), below, &d_pre, &mut d_h)?;
        }
        Ok(d_h)
    }

    /// Backward from a scalar loss over head outputs; returns `(loss value,
    /// d loss / d input)`.
    pub fn backward(
        &self,
        params: &mut ParamStore,
        trace: &Trace,
        heads: &[HeadOutput],
        loss: &dyn HeadLoss,
    ) -> Result<(f64, Vec<f64>)> {
        let value = loss.value(heads)?;
        let d_raw = loss.raw_grad(heads)?;
        let d_input = self.backward_raw(params, trace, &d_raw)?;
        Ok((value, d_input))
    }
}

/// `pre = W^T h + b` for the named layer.
fn affine(params: &ParamStore, layer: &str, h: &[f64]) -> Result<Vec<f64>> {
    let we = params.layout.entry(&format!("{layer}.w"))?;
    let be = params.layout.entry(&format!("{layer}.b"))?;
    debug_assert_eq!(we.rows, h.len(), "affine input width mismatch in {layer}");
    let w = &params.values[we.offset..we.offset + we.len()];
    let b = &params.values[be.offset..be.offset + be.len()];
    let mut out = b.to_vec();
    for (i, hi) in h.iter().enumerate() {
        if *hi == 0.0 {
            continue;
        }
        let row = &w[i * we.cols..(i + 1) * we.cols];
        for (o, wij) in out.iter_mut().zip(row) {
            *o += hi * wij;
        }
    }
    Ok(out)
}

/// Accumulate affine gradients; adds the input gradient into `d_h`.
fn affine_backward(
    params: &mut ParamStore,
    layer: &str,
    h: &[f64],
    d_out: &[f64],
    d_h: &mut [f64],
) -> Result<()> {
    let we = params.layout.entry(&format!("{layer}.w"))?;
    let be = params.layout.entry(&format!("{layer}.b"))?;
    for (g, d) in params.grads[be.offset..be.offset + be.len()].iter_mut().zip(d_out) {
        *g += d;
    }
    let cols = we.cols;
    for (i, hi) in h.iter().enumerate() {
        let wrow = &params.values[we.offset + i * cols..we.offset + (i + 1) * cols];
        let grow = &mut params.grads[we.offset + i * cols..we.offset + (i + 1) * cols];
        // Safe split: values and grads are distinct arrays.
        let mut acc = 0.0;
        for j in 0..cols {
            grow[j] += hi * d_out[j];
            acc += wrow[j] * d_out[j];
        }
        d_h[i] += acc;
    }
    Ok(())
}

fn transform_head(spec: &HeadSpec, raw: &[f64]) -> HeadOutput {
    match spec.kind {
        HeadKind::Bernoulli => HeadOutput::Bernoulli {
            p: raw.iter().map(|l| sigmoid(*l)).collect(),
            logit: raw.to_vec(),
        },
        HeadKind::Gaussian => {
            let dim = spec.dim;
            let mean = raw[..dim].to_vec();
            let raw_sd = raw[dim..].to_vec();
            let sd = raw_sd.iter().map(|r| softplus(*r).max(SIGMA_MIN)).collect();
            HeadOutput::Gaussian { mean, sd, raw_sd }
        }
        HeadKind::Categorical(k) => {
            let mut probs = Vec::with_capacity(raw.len());
            for b in 0..spec.dim {
                let block = &raw[b * k..(b + 1) * k];
                let lse = log_sum_exp(block);
                probs.extend(block.iter().map(|l| (l - lse).exp()));
            }
            HeadOutput::Categorical { probs, logits: raw.to_vec(), k }
        }
    }
}

/// Derivative of `sd = max(SIGMA_MIN, softplus(raw))` w.r.t. `raw`.
#[inline]
fn sd_transform_deriv(raw: f64) -> f64 {
    if softplus(raw) > SIGMA_MIN {
        sigmoid(raw)
    } else {
        0.0
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Stable `ln Σ e^{x_i}`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Reparameterized Gaussian sample `z = mu + sd * eps`. Gradients flow to
/// the caller via `dz/dmu = 1` and `dz/dsd = eps`.
pub fn sample_gaussian_reparam(mu: &[f64], sd: &[f64], eps: &[f64]) -> Vec<f64> {
    debug_assert_eq!(mu.len(), sd.len());
    debug_assert_eq!(mu.len(), eps.len());
    mu.iter().zip(sd).zip(eps).map(|((m, s), e)| m + s * e).collect()
}

fn expect_len(what: &str, xs: &[f64], want: usize) -> Result<()> {
    if xs.len() == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} has length {}, expected {want}", xs.len())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn two_head_spec() -> MlpSpec {
        MlpSpec {
            input_dim: 3,
            hidden: vec![8, 5],
            activation: Activation::Elu,
            heads: vec![HeadSpec::gaussian(2), HeadSpec::bernoulli(1), HeadSpec::categorical(1, 4)],
        }
    }

    #[test]
    fn scalar_transforms_match_known_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((Activation::Elu.eval(-1.0) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert_eq!(Activation::Relu.eval(-2.0), 0.0);
        assert_eq!(Activation::Relu.eval(2.0), 2.0);
    }

    #[test]
    fn forward_matches_hand_computed_affine_sigmoid() {
        // No hidden layer, one Bernoulli head on 2-d input: p = sigmoid(w·x + b).
        let mlp = Mlp::new(MlpSpec {
            input_dim: 2,
            hidden: vec![],
            activation: Activation::Relu,
            heads: vec![HeadSpec::bernoulli(1)],
        })
        .unwrap();
        let mut params = mlp.zero_params();
        params.block_mut("o00.w").unwrap().copy_from_slice(&[0.5, -1.0]);
        params.block_mut("o00.b").unwrap().copy_from_slice(&[0.25]);
        let (heads, _) = mlp.forward(&params, &[2.0, 1.0]).unwrap();
        let p = heads[0].as_bernoulli().unwrap()[0];
        assert!((p - sigmoid(0.5 * 2.0 - 1.0 + 0.25)).abs() < 1e-15);
    }

    #[test]
    fn log_prob_identities() {
        let bern = HeadOutput::Bernoulli { p: vec![0.5], logit: vec![0.0] };
        assert!((bern.log_prob(&[1.0]).unwrap() - 0.5f64.ln()).abs() < 1e-12);
        let gauss = HeadOutput::Gaussian { mean: vec![0.0], sd: vec![1.0], raw_sd: vec![0.0] };
        assert!((gauss.log_prob(&[0.0]).unwrap() + 0.5 * LN_2PI).abs() < 1e-12);
        let cat = HeadOutput::Categorical {
            probs: vec![0.25; 4],
            logits: vec![0.0; 4],
            k: 4,
        };
        assert!((cat.log_prob(&[2.0]).unwrap() + 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn invalid_observations_are_rejected() {
        let bern = HeadOutput::Bernoulli { p: vec![0.5], logit: vec![0.0] };
        assert!(bern.log_prob(&[0.5]).is_err());
        let cat = HeadOutput::Categorical { probs: vec![0.25; 4], logits: vec![0.0; 4], k: 4 };
        assert!(cat.log_prob(&[4.0]).is_err());
        assert!(cat.log_prob(&[-1.0]).is_err());
        assert!(cat.log_prob(&[1.5]).is_err());
    }

    #[test]
    fn categorical_probs_sum_to_one() {
        let mlp = Mlp::new(two_head_spec()).unwrap();
        let mut rng = stream(3, "cat-sum");
        for _ in 0..20 {
            let params = mlp.init_params(&mut rng);
            let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (heads, _) = mlp.forward(&params, &input).unwrap();
            if let HeadOutput::Categorical { probs, .. } = &heads[2] {
                let s: f64 = probs.iter().sum();
                assert!((s - 1.0).abs() < 1e-9, "probs sum {s}");
            } else {
                panic!("expected categorical head");
            }
        }
    }

    #[test]
    fn gaussian_sd_respects_floor() {
        let mlp = Mlp::new(two_head_spec()).unwrap();
        let mut rng = stream(4, "sd-floor");
        for _ in 0..20 {
            let mut params = mlp.init_params(&mut rng);
            // Force very negative raw sd outputs via the bias.
            params.block_mut("o00.b").unwrap().iter_mut().for_each(|b| *b = -30.0);
            let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (heads, _) = mlp.forward(&params, &input).unwrap();
            let (_, sd) = heads[0].as_gaussian().unwrap();
            assert!(sd.iter().all(|s| *s >= SIGMA_MIN));
        }
    }

    #[test]
    fn xavier_init_is_bounded_and_biases_zero() {
        let mlp = Mlp::new(two_head_spec()).unwrap();
        let params = mlp.init_params(&mut stream(5, "init"));
        for (name, e) in params.layout().iter() {
            let vals = &params.values[e.offset..e.offset + e.len()];
            if name.ends_with(".b") {
                assert!(vals.iter().all(|v| *v == 0.0), "{name} biases should be zero");
            } else {
                let bound = (6.0 / (e.rows + e.cols) as f64).sqrt();
                assert!(vals.iter().all(|v| v.abs() <= bound), "{name} exceeds xavier bound");
                assert!(vals.iter().any(|v| *v != 0.0), "{name} all zero");
            }
        }
    }

    #[test]
    fn backward_accumulates_additively() {
        let mlp = Mlp::new(two_head_spec()).unwrap();
        let mut rng = stream(6, "accum");
        let mut params = mlp.init_params(&mut rng);
        let input = [0.3, -0.6, 1.1];
        let obs: Vec<Option<Vec<f64>>> = vec![Some(vec![0.2, -0.4]), Some(vec![1.0]), Some(vec![3.0])];
        let loss = NegLogLik::new(obs);
        let (heads, trace) = mlp.forward(&params, &input).unwrap();
        mlp.backward(&mut params, &trace, &heads, &loss).unwrap();
        let once = params.grads.clone();
        mlp.backward(&mut params, &trace, &heads, &loss).unwrap();
        for (g2, g1) in params.grads.iter().zip(&once) {
            assert!((g2 - 2.0 * g1).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatches_error() {
        let mlp = Mlp::new(two_head_spec()).unwrap();
        let params = mlp.init_params(&mut stream(7, "dims"));
        assert!(matches!(mlp.forward(&params, &[1.0, 2.0]), Err(Error::Dimension(_))));
        let gauss = HeadOutput::Gaussian { mean: vec![0.0; 2], sd: vec![1.0; 2], raw_sd: vec![0.0; 2] };
        assert!(gauss.log_prob(&[0.0]).is_err());
    }

    #[test]
    fn reparam_sample_mean_matches_mu() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = stream(8, "reparam");
        let (mu, sd) = (1.25, 0.5);
        let n = 100_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let eps: f64 = StandardNormal.sample(&mut rng);
            acc += sample_gaussian_reparam(&[mu], &[sd], &[eps])[0];
        }
        let mean = acc / n as f64;
        let tol = 3.0 * sd / (n as f64).sqrt();
        assert!((mean - mu).abs() < tol, "mean {mean} vs {mu} (tol {tol})");
    }

    #[test]
    fn bernoulli_trivial_loss_grad_is_p_minus_y() {
        // -d log p / d logit = p - y.
        let mlp = Mlp::new(MlpSpec {
            input_dim: 1,
            hidden: vec![],
            activation: Activation::Relu,
            heads: vec![HeadSpec::bernoulli(1)],
        })
        .unwrap();
        let mut params = mlp.zero_params();
        params.block_mut("o00.w").unwrap()[0] = 0.0;
        params.block_mut("o00.b").unwrap()[0] = 0.0;
        let (heads, trace) = mlp.forward(&params, &[1.0]).unwrap();
        let loss = NegLogLik::new(vec![Some(vec![1.0])]);
        mlp.backward(&mut params, &trace, &heads, &loss).unwrap();
        // p = 0.5, y = 1: d(-logp)/db = p - y = -0.5; d/dw = x·(p-y) = -0.5.
        let be = params.layout().entry("o00.b").unwrap();
        assert!((params.grads[be.offset] + 0.5).abs() < 1e-12);
    }
}
