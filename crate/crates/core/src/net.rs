//! Feed-forward evidential classifier with hand-written backpropagation.
//!
//! Hidden layers use ReLU; the head maps logits to concentrations with
//! `α = softplus(z) + 1`. Parameters live in one flat vector laid out layer
//! by layer, each layer as its weight matrix (row-major, `out × in`)
//! followed by its bias. The checkpoint format and the optimizers share that
//! layout.

use std::borrow::Cow;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::Dataset;
use crate::dirichlet::DirichletParams;
use crate::error::{Error, Result};
use crate::loss::{grad_total_loss, total_loss, LossBreakdown, LossConfig, Objective, OneHotLabel};
use crate::seed;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IEDL";
pub const CHECKPOINT_VERSION: u32 = 1;

pub const DEFAULT_HIDDEN: [usize; 2] = [64, 64];

#[inline]
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvidentialMlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl EvidentialMlp {
    fn check_sizes(sizes: &[usize]) -> Result<()> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("layer sizes must be >= 1 and at least two layers, got {sizes:?}")));
        }
        if *sizes.last().unwrap() < 2 {
            return Err(Error::InvalidArgument("need at least 2 output classes".into()));
        }
        Ok(())
    }

    fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
    }

    /// He-uniform weights `U(±√(6/fan_in))`, zero biases.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        Self::check_sizes(sizes)?;
        let mut rng = seed::rng(seed);
        let mut params = Vec::with_capacity(Self::param_count(sizes));
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let bound = (6.0 / n_in as f64).sqrt();
            params.extend((0..n_in * n_out).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat(0.0).take(n_out));
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// `input → hidden… → classes` with every parameter zero.
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; Self::param_count(sizes)],
        })
    }

    /// The default architecture `input → 64 → 64 → classes`.
    pub fn default_sizes(input: usize, classes: usize) -> Vec<usize> {
        let mut s = vec![input];
        s.extend_from_slice(&DEFAULT_HIDDEN);
        s.push(classes);
        s
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Dimension {
                context: "parameter vector",
                expected: self.params.len(),
                found: params.len(),
            });
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        // (offset, n_in, n_out)
        self.sizes.windows(2).scan(0, |off, w| {
            let start = *off;
            *off += w[0] * w[1] + w[1];
            Some((start, w[0], w[1]))
        })
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "network input",
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Fills `ws` with every layer's pre-activations and returns nothing;
    /// the logits end up in `ws.pre.last()`.
    fn forward_into(&self, x: &[f64], ws: &mut Workspace) {
        ws.act[0].clear();
        ws.act[0].extend_from_slice(x);
        let n_layers = self.sizes.len() - 1;
        for (l, (off, n_in, n_out)) in self.layers().enumerate() {
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let (input, rest) = ws.act.split_at_mut(l + 1);
            let a = &input[l];
            let z = &mut ws.pre[l];
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                z[o] = b[o] + row.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>();
            }
            if l + 1 < n_layers {
                for (dst, &v) in rest[0].iter_mut().zip(z.iter()) {
                    // NaN must propagate, so not f64::max.
                    *dst = if v < 0.0 { 0.0 } else { v };
                }
            }
        }
    }

    fn alpha_from_logits(logits: &[f64]) -> Result<DirichletParams> {
        if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { term: format!("logit {i}") });
        }
        DirichletParams::new(logits.iter().map(|&z| softplus(z) + 1.0).collect())
    }

    pub fn forward(&self, x: &[f64]) -> Result<DirichletParams> {
        self.check_input(x)?;
        let mut ws = Workspace::new(&self.sizes);
        self.forward_into(x, &mut ws);
        Self::alpha_from_logits(ws.pre.last().unwrap())
    }

    /// Batch-mean loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, batch: &LabeledBatch<'_>, cfg: &LossConfig, lambda_t: f64) -> Result<BatchResult> {
        self.batch_pass(batch, cfg, lambda_t, true)
    }

    /// As [`Self::loss_and_gradient`] without the backward pass; the
    /// returned gradient is empty.
    pub fn loss(&self, batch: &LabeledBatch<'_>, cfg: &LossConfig, lambda_t: f64) -> Result<BatchResult> {
        self.batch_pass(batch, cfg, lambda_t, false)
    }

    fn batch_pass(&self, batch: &LabeledBatch<'_>, cfg: &LossConfig, lambda_t: f64, backward: bool) -> Result<BatchResult> {
        if batch.data.dim() != self.input_dim() {
            return Err(Error::Dimension {
                context: "batch feature width",
                expected: self.input_dim(),
                found: batch.data.dim(),
            });
        }
        if batch.data.classes() != self.classes() {
            return Err(Error::Dimension {
                context: "batch class count",
                expected: self.classes(),
                found: batch.data.classes(),
            });
        }
        let labels = batch.data.require_labels()?;
        let mut ws = Workspace::new(&self.sizes);
        let mut grad = if backward { vec![0.0; self.params.len()] } else { Vec::new() };
        let mut sum = LossBreakdown::default();
        let mut correct = 0usize;
        let scale = 1.0 / batch.len() as f64;
        let layers: Vec<_> = self.layers().collect();

        for &i in batch.indices.iter() {
            self.forward_into(batch.data.row(i), &mut ws);
            let logits = ws.pre.last().unwrap();
            let d = Self::alpha_from_logits(logits).map_err(|e| match e {
                Error::Domain { .. } => Error::NonFinite {
                    term: format!("alpha (sample {i})"),
                },
                e => e,
            })?;
            let y = OneHotLabel::new(labels[i], self.classes())?;
            let lb = total_loss(&d, &y, cfg, lambda_t)?;
            if let Some(term) = lb.non_finite_term() {
                return Err(Error::NonFinite {
                    term: format!("{term} (sample {i})"),
                });
            }
            sum.mse += lb.mse;
            sum.log_det += lb.log_det;
            sum.kl += lb.kl;
            sum.total += lb.total;
            if d.mean().argmax() == labels[i] {
                correct += 1;
            }
            if !backward {
                continue;
            }

            let g_alpha = grad_total_loss(&d, &y, cfg, lambda_t)?;
            if let Some(k) = g_alpha.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    term: format!("dL/dalpha[{k}] (sample {i})"),
                });
            }
            let last = ws.delta.len() - 1;
            for ((dz, &ga), &z) in ws.delta[last].iter_mut().zip(&g_alpha).zip(logits) {
                *dz = scale * ga * sigmoid(z);
            }
            for l in (0..layers.len()).rev() {
                let (off, n_in, n_out) = layers[l];
                let (head, tail) = ws.delta.split_at_mut(l);
                let delta = &tail[0];
                let a = &ws.act[l];
                let gw = &mut grad[off..off + n_in * n_out + n_out];
                for o in 0..n_out {
                    let dv = delta[o];
                    if dv != 0.0 {
                        for (g, &ai) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(a) {
                            *g += dv * ai;
                        }
                    }
                    gw[n_in * n_out + o] += dv;
                }
                if l > 0 {
                    let w = &self.params[off..off + n_in * n_out];
                    let prev = &mut head[l - 1];
                    prev.iter_mut().for_each(|v| *v = 0.0);
                    for o in 0..n_out {
                        let dv = delta[o];
                        if dv != 0.0 {
                            for (p, &wi) in prev.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                                *p += dv * wi;
                            }
                        }
                    }
                    for (p, &z) in prev.iter_mut().zip(&ws.pre[l - 1]) {
                        if z <= 0.0 {
                            *p = 0.0;
                        }
                    }
                }
            }
        }
        let loss = LossBreakdown {
            mse: sum.mse * scale,
            log_det: sum.log_det * scale,
            kl: sum.kl * scale,
            total: sum.total * scale,
        };
        if let Some(p) = grad.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                term: format!("parameter gradient {p}"),
            });
        }
        Ok(BatchResult { loss, gradient: grad, correct })
    }

    pub fn save<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(self.sizes.len() as u32).to_le_bytes())?;
        for &s in &self.sizes {
            out.write_all(&(s as u32).to_le_bytes())?;
        }
        for &p in &self.params {
            out.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        let magic = cur.take(4)?;
        if magic != CHECKPOINT_MAGIC {
            return Err(Error::Format {
                expected: "checkpoint magic \"IEDL\"".into(),
                found: format!("{magic:?}"),
            });
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format {
                expected: format!("checkpoint version {CHECKPOINT_VERSION}"),
                found: version.to_string(),
            });
        }
        let n = cur.u32()? as usize;
        let sizes = (0..n).map(|_| cur.u32().map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
        Self::check_sizes(&sizes)?;
        let count = Self::param_count(&sizes);
        let params = (0..count).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if cur.pos != bytes.len() {
            return Err(Error::Format {
                expected: format!("{} checkpoint bytes", cur.pos),
                found: bytes.len().to_string(),
            });
        }
        Ok(Self { sizes, params })
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.save(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(fs::File::open(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        let s = self.bytes.get(self.pos..end).ok_or(Error::Truncated {
            expected: end,
            found: self.bytes.len(),
        })?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Per-layer scratch buffers for one forward/backward pass.
struct Workspace {
    act: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
}

impl Workspace {
    fn new(sizes: &[usize]) -> Self {
        Self {
            act: sizes[..sizes.len() - 1].iter().map(|&s| vec![0.0; s]).collect(),
            pre: sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
            delta: sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
        }
    }
}

/// Rows of a labelled dataset selected by index.
#[derive(Debug, Clone)]
pub struct LabeledBatch<'a> {
    data: &'a Dataset,
    indices: Cow<'a, [usize]>,
}

impl<'a> LabeledBatch<'a> {
    pub fn new(data: &'a Dataset, indices: &'a [usize]) -> Result<Self> {
        Self::build(data, Cow::Borrowed(indices))
    }

    pub fn full(data: &'a Dataset) -> Result<Self> {
        Self::build(data, Cow::Owned((0..data.len()).collect()))
    }

    fn build(data: &'a Dataset, indices: Cow<'a, [usize]>) -> Result<Self> {
        data.require_labels()?;
        if indices.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
            return Err(Error::InvalidArgument(format!("batch index {bad} out of range for {} rows", data.len())));
        }
        Ok(Self { data, indices })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Batch-mean terms.
    pub loss: LossBreakdown,
    pub gradient: Vec<f64>,
    /// Samples whose mean-probability argmax equals the label.
    pub correct: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(OptimizerKind::Adam),
            "sgd" => Ok(OptimizerKind::Sgd),
            _ => Err(Error::InvalidArgument(format!("unknown optimizer {s:?}; expected adam or sgd"))),
        }
    }
}

/// Adam (β1 = 0.9, β2 = 0.999, ε = 1e-8, bias-corrected) or plain SGD.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, n_params: usize) -> Self {
        let n = if kind == OptimizerKind::Adam { n_params } else { 0 };
        Self {
            kind,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - Self::BETA1.powi(self.t);
                let c2 = 1.0 - Self::BETA2.powi(self.t);
                for (((p, &g), m), v) in params.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
                    *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
                    *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
                    *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lambda1: f64,
    pub objective: Objective,
    pub optimizer: OptimizerKind,
    /// Epochs without validation improvement before stopping; `None`
    /// disables early stopping.
    pub patience: Option<usize>,
    /// Drives batch shuffling.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 64,
            learning_rate: 1e-3,
            lambda1: 0.01,
            objective: Objective::IEdl,
            optimizer: OptimizerKind::Adam,
            patience: Some(10),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        if !(self.lambda1 >= 0.0) || !self.lambda1.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda1 must be >= 0, got {}", self.lambda1)));
        }
        Ok(())
    }

    pub fn loss_config(&self) -> LossConfig {
        self.objective.config(self.lambda1)
    }

    /// KL annealing weight min(1, t/T) for zero-based epoch `t`.
    pub fn lambda_t(&self, epoch: usize) -> f64 {
        (epoch as f64 / self.epochs as f64).min(1.0)
    }
}

/// One optimizer update on `batch`; returns the pre-update batch loss.
pub fn backward_step(
    model: &mut EvidentialMlp,
    batch: &LabeledBatch<'_>,
    cfg: &LossConfig,
    lambda_t: f64,
    optimizer: &mut Optimizer,
) -> Result<BatchResult> {
    let res = model.loss_and_gradient(batch, cfg, lambda_t)?;
    optimizer.step(&mut model.params, &res.gradient);
    if let Some(p) = model.params.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            term: format!("parameter {p} after update"),
        });
    }
    Ok(res)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub lambda_t: f64,
    /// Running mean over the epoch's batches.
    pub train: LossBreakdown,
    pub train_accuracy: f64,
    /// Evaluated after the epoch with the full KL weight.
    pub val: LossBreakdown,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// Mean loss and accuracy of `model` on a labelled dataset.
pub fn evaluate(model: &EvidentialMlp, data: &Dataset, cfg: &LossConfig, lambda_t: f64) -> Result<(LossBreakdown, f64)> {
    let res = model.loss(&LabeledBatch::full(data)?, cfg, lambda_t)?;
    Ok((res.loss, res.correct as f64 / data.len() as f64))
}

/// Mini-batch training with KL annealing and validation-based early
/// stopping. On return `model` holds the weights of the best validation
/// epoch.
pub fn train(model: &mut EvidentialMlp, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Empty("training or validation set"));
    }
    let loss_cfg = cfg.loss_config();
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, model.params.len());
    let mut rng = seed::rng(seed::derive(cfg.seed, "shuffle", 0));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best = (f64::INFINITY, 0usize, model.params.clone());
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let lambda_t = cfg.lambda_t(epoch);
        order.shuffle(&mut rng);
        let mut sum = LossBreakdown::default();
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = LabeledBatch::new(train_set, chunk)?;
            let res = backward_step(model, &batch, &loss_cfg, lambda_t, &mut optimizer)?;
            let w = chunk.len() as f64;
            sum.mse += res.loss.mse * w;
            sum.log_det += res.loss.log_det * w;
            sum.kl += res.loss.kl * w;
            sum.total += res.loss.total * w;
            correct += res.correct;
        }
        let n = train_set.len() as f64;
        let train_loss = LossBreakdown {
            mse: sum.mse / n,
            log_det: sum.log_det / n,
            kl: sum.kl / n,
            total: sum.total / n,
        };
        let (val, val_accuracy) = evaluate(model, val_set, &loss_cfg, 1.0)?;
        log::debug!(
            "epoch {epoch} lambda_t {lambda_t:.3} train {:.5} val {:.5} val_acc {val_accuracy:.4}",
            train_loss.total,
            val.total
        );
        epochs.push(EpochLog {
            epoch,
            lambda_t,
            train: train_loss,
            train_accuracy: correct as f64 / n,
            val,
            val_accuracy,
        });
        if val.total < best.0 {
            best = (val.total, epoch, model.params.clone());
        } else if let Some(p) = cfg.patience {
            if epoch - best.1 >= p {
                stopped_early = true;
                break;
            }
        }
    }
    model.params = best.2;
    Ok(TrainLog {
        epochs,
        best_epoch: best.1,
        stopped_early,
    })
}

/// Uncertainty scores derived from one predicted Dirichlet.
#[derive(Debug, Clone, PartialEq)]
pub struct Scores {
    pub alpha: DirichletParams,
    pub max_p: f64,
    pub max_alpha: f64,
    pub alpha0: f64,
    pub diff_ent: f64,
    pub mi: f64,
    pub predicted: usize,
}

impl Scores {
    pub fn from_alpha(alpha: DirichletParams) -> Self {
        let mean = alpha.mean();
        let predicted = mean.argmax();
        Self {
            max_p: mean.as_slice()[predicted],
            max_alpha: alpha.max_alpha(),
            alpha0: alpha.precision(),
            diff_ent: alpha.differential_entropy(),
            mi: alpha.mutual_information(),
            predicted,
            alpha,
        }
    }
}

pub fn predict_scores(model: &EvidentialMlp, x: &[f64]) -> Result<Scores> {
    Ok(Scores::from_alpha(model.forward(x)?))
}

pub fn predict_dataset(model: &EvidentialMlp, data: &Dataset) -> Result<Vec<Scores>> {
    (0..data.len()).map(|i| predict_scores(model, data.row(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{make_blobs, unit_triangle};
    use std::f64::consts::LN_2;

    #[test]
    fn softplus_and_sigmoid_are_stable() {
        assert_eq!(softplus(0.0), LN_2);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.3) - 1.0 / (1.0 + (-0.3f64).exp())).abs() < 1e-16);
    }

    #[test]
    fn zero_network_is_uniform() {
        let m = EvidentialMlp::zeros(&[3, 5, 4]).unwrap();
        let d = m.forward(&[0.3, -2.0, 7.0]).unwrap();
        for &a in d.alpha() {
            assert!((a - (1.0 + LN_2)).abs() < 1e-15);
        }
        let s = predict_scores(&m, &[1.0, 1.0, 1.0]).unwrap();
        assert!((s.max_p - 0.25).abs() < 1e-15);
        assert!((s.alpha0 - 4.0 * (1.0 + LN_2)).abs() < 1e-14);
        assert_eq!(s.predicted, 0);
        assert!(m.forward(&[1.0]).is_err());
    }

    #[test]
    fn layout_and_init() {
        let m = EvidentialMlp::new(&[2, 4, 3], 7).unwrap();
        assert_eq!(m.parameters().len(), 2 * 4 + 4 + 4 * 3 + 3);
        assert!(m.parameters()[8..12].iter().all(|&b| b == 0.0));
        let bound = 3f64.sqrt();
        assert!(m.parameters()[..8].iter().all(|w| w.abs() < bound));
        assert_eq!(m, EvidentialMlp::new(&[2, 4, 3], 7).unwrap());
        assert!(EvidentialMlp::new(&[2, 1], 0).is_err());
    }

    #[test]
    fn checkpoint_round_trip_and_layout() {
        let m = EvidentialMlp::new(&[2, 3, 2], 11).unwrap();
        let mut buf = Vec::new();
        m.save(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"IEDL");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 3);
        let first = f64::from_le_bytes(buf[24..32].try_into().unwrap());
        assert_eq!(first, m.parameters()[0]);
        assert_eq!(buf.len(), 24 + 8 * m.parameters().len());
        assert_eq!(EvidentialMlp::load(buf.as_slice()).unwrap(), m);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(EvidentialMlp::load(bad.as_slice()), Err(Error::Format { .. })));
        assert!(matches!(EvidentialMlp::load(&buf[..buf.len() - 1]), Err(Error::Truncated { .. })));
    }

    #[test]
    fn lambda_schedule() {
        let cfg = TrainConfig {
            epochs: 4,
            ..TrainConfig::default()
        };
        let seq: Vec<f64> = (0..4).map(|t| cfg.lambda_t(t)).collect();
        assert_eq!(seq, vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(cfg.lambda_t(9), 1.0);
    }

    #[test]
    fn single_sample_step_descends() {
        let ds = make_blobs(1, &unit_triangle(), 0.2, 3).unwrap();
        let idx = [1usize];
        let batch = LabeledBatch::new(&ds, &idx).unwrap();
        let cfg = LossConfig::iedl(0.01);
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut m = EvidentialMlp::new(&[2, 8, 3], 5).unwrap();
            let before = m.loss_and_gradient(&batch, &cfg, 0.5).unwrap().loss.total;
            let mut opt = Optimizer::new(kind, 1e-4, m.parameters().len());
            backward_step(&mut m, &batch, &cfg, 0.5, &mut opt).unwrap();
            let after = m.loss_and_gradient(&batch, &cfg, 0.5).unwrap().loss.total;
            assert!(after < before, "{kind:?}: {after} !< {before}");
        }
    }

    #[test]
    fn nan_parameters_are_reported() {
        let ds = make_blobs(2, &unit_triangle(), 0.2, 3).unwrap();
        let mut m = EvidentialMlp::new(&[2, 4, 3], 5).unwrap();
        let mut p = m.parameters().to_vec();
        p[0] = f64::NAN;
        m.set_parameters(&p).unwrap();
        let err = m.loss_and_gradient(&LabeledBatch::full(&ds).unwrap(), &LossConfig::EDL, 0.0).unwrap_err();
        assert!(err.to_string().contains("logit"), "{err}");
    }
}
