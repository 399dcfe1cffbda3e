//! Softmax classifiers with analytic gradients and momentum SGD.
//!
//! Parameters live in one flat vector so the optimizer, checkpoints and
//! gradient checks can treat every architecture alike. Layout:
//!
//! * `LinearSoftmax`: `W (K × d) | b (K)`, features `G(x) = x`
//! * `OneHidden`: `W1 (h × d) | b1 (h) | W2 (K × h) | b2 (K)`,
//!   features `G(x) = relu(W1 x + b1)`

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::io::Cursor;
use crate::dataset::NoisyDataset;
use crate::error::{Error, Result};
use crate::exec::{rng_for, Exec};
use crate::prototypes::FeatureExtractor;
use crate::similarity::FeatureMatrix;

/// Probabilities are floored here before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

pub const MODEL_MAGIC: &[u8; 4] = b"SMPM";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    LinearSoftmax,
    /// One rectified hidden layer of `hidden` units.
    OneHidden {
        hidden: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    arch: Architecture,
    d_in: usize,
    classes: usize,
    params: Vec<f64>,
}

/// Output of a batched forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Row-major `n × K` probabilities.
    pub probs: Vec<f64>,
    /// Row-major `n × d_G` features.
    pub features: Vec<f64>,
}

/// Loss components of one batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub noisy: f64,
    pub corrected: Option<f64>,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl ClassifierModel {
    pub fn zeros(arch: Architecture, d_in: usize, classes: usize) -> Result<Self> {
        if d_in == 0 || classes == 0 {
            return Err(Error::config(
                "architecture",
                "input dimension and class count must be positive",
            ));
        }
        if let Architecture::OneHidden { hidden: 0 } = arch {
            return Err(Error::config("hidden", "must be at least 1"));
        }
        let mut m = ClassifierModel {
            arch,
            d_in,
            classes,
            params: Vec::new(),
        };
        m.params = vec![0.0; m.num_params()];
        Ok(m)
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn init(arch: Architecture, d_in: usize, classes: usize, seed: u64) -> Result<Self> {
        let mut m = Self::zeros(arch, d_in, classes)?;
        let mut rng = rng_for(seed, "init", 0);
        let layers = m.layers();
        for (w_off, rows, cols) in layers {
            let a = (6.0 / (rows + cols) as f64).sqrt();
            for v in &mut m.params[w_off..w_off + rows * cols] {
                *v = rng.random_range(-a..a);
            }
        }
        Ok(m)
    }

    pub fn from_params(arch: Architecture, d_in: usize, classes: usize, params: Vec<f64>) -> Result<Self> {
        let mut m = Self::zeros(arch, d_in, classes)?;
        if params.len() != m.params.len() {
            return Err(Error::Shape(format!(
                "{} parameters, expected {}",
                params.len(),
                m.params.len()
            )));
        }
        m.params = params;
        Ok(m)
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.d_in
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        match self.arch {
            Architecture::LinearSoftmax => self.classes * self.d_in + self.classes,
            Architecture::OneHidden { hidden } => hidden * self.d_in + hidden + self.classes * hidden + self.classes,
        }
    }

    /// Dimension of `G(x)`.
    pub fn feature_dim(&self) -> usize {
        match self.arch {
            Architecture::LinearSoftmax => self.d_in,
            Architecture::OneHidden { hidden } => hidden,
        }
    }

    /// `(weight offset, rows, cols)` per weight matrix.
    fn layers(&self) -> Vec<(usize, usize, usize)> {
        match self.arch {
            Architecture::LinearSoftmax => vec![(0, self.classes, self.d_in)],
            Architecture::OneHidden { hidden } => {
                let w2 = hidden * self.d_in + hidden;
                vec![(0, hidden, self.d_in), (w2, self.classes, hidden)]
            }
        }
    }

    fn output_offset(&self) -> usize {
        match self.arch {
            Architecture::LinearSoftmax => 0,
            Architecture::OneHidden { hidden } => hidden * self.d_in + hidden,
        }
    }

    /// Hidden pre-activations (empty for the linear model) and features.
    fn hidden(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self.arch {
            Architecture::LinearSoftmax => (Vec::new(), x.to_vec()),
            Architecture::OneHidden { hidden } => {
                let w = &self.params[..hidden * self.d_in];
                let b = &self.params[hidden * self.d_in..hidden * self.d_in + hidden];
                let z: Vec<f64> = (0..hidden)
                    .map(|u| {
                        let row = &w[u * self.d_in..(u + 1) * self.d_in];
                        b[u] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>()
                    })
                    .collect();
                let g = z.iter().map(|&v| v.max(0.0)).collect();
                (z, g)
            }
        }
    }

    fn output_probs(&self, g: &[f64]) -> Vec<f64> {
        let dg = g.len();
        let off = self.output_offset();
        let w = &self.params[off..off + self.classes * dg];
        let b = &self.params[off + self.classes * dg..off + self.classes * dg + self.classes];
        let mut z: Vec<f64> = (0..self.classes)
            .map(|c| b[c] + w[c * dg..(c + 1) * dg].iter().zip(g).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        softmax_in_place(&mut z);
        z
    }

    pub fn features_of(&self, x: &[f64]) -> Vec<f64> {
        self.hidden(x).1
    }

    /// Probabilities and features of one sample.
    pub fn forward_row(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.d_in {
            return Err(Error::Shape(format!(
                "input of length {}, model expects {}",
                x.len(),
                self.d_in
            )));
        }
        let (_, g) = self.hidden(x);
        let p = self.output_probs(&g);
        if p.iter().chain(&g).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("activation".into()));
        }
        Ok((p, g))
    }

    /// Forward pass over `n` row-major inputs.
    pub fn forward(&self, batch: &[f64]) -> Result<Forward> {
        if !batch.len().is_multiple_of(self.d_in) {
            return Err(Error::Shape(format!(
                "batch of {} values, rows of {}",
                batch.len(),
                self.d_in
            )));
        }
        let mut probs = Vec::new();
        let mut features = Vec::new();
        for x in batch.chunks(self.d_in) {
            let (p, g) = self.forward_row(x)?;
            probs.extend(p);
            features.extend(g);
        }
        Ok(Forward { probs, features })
    }

    /// Argmax predictions for every sample of `ds`.
    pub fn predict(&self, ds: &NoisyDataset, exec: Exec) -> Result<Vec<usize>> {
        self.check_dataset(ds)?;
        exec.try_map(ds.len(), |i| {
            let x = to_f64(ds.row(i));
            let (p, _) = self.forward_row(&x)?;
            Ok(crate::correction::argmax(&p))
        })
    }

    /// Fraction of predictions equal to the reference labels of `ds`.
    pub fn accuracy(&self, ds: &NoisyDataset, exec: Exec) -> Result<f64> {
        if ds.is_empty() {
            return Ok(0.0);
        }
        let pred = self.predict(ds, exec)?;
        let hits = pred.iter().zip(ds.reference_labels()).filter(|(a, b)| a == b).count();
        Ok(hits as f64 / ds.len() as f64)
    }

    pub fn extract_with(&self, ds: &NoisyDataset, indices: &[usize], exec: Exec) -> Result<FeatureMatrix> {
        self.check_dataset(ds)?;
        let rows = exec.map(indices.len(), |k| self.features_of(&to_f64(ds.row(indices[k]))));
        FeatureMatrix::new(indices.len(), self.feature_dim(), rows.concat())
    }

    fn check_dataset(&self, ds: &NoisyDataset) -> Result<()> {
        if ds.dim != self.d_in || ds.classes != self.classes {
            return Err(Error::Shape(format!(
                "dataset is {}-dim with {} classes, model expects {} and {}",
                ds.dim, ds.classes, self.d_in, self.classes
            )));
        }
        Ok(())
    }

    /// Loss and gradient of `(1 − α)·CE(y) + α·CE(ŷ)` averaged over the batch.
    /// Without corrected labels only the noisy term is used, whatever `alpha`.
    pub fn backward(
        &self,
        batch: &[f64],
        noisy: &[usize],
        corrected: Option<&[usize]>,
        alpha: f64,
    ) -> Result<(Vec<f64>, LossParts)> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::config("alpha", "must lie in [0, 1]"));
        }
        let n = noisy.len();
        if batch.len() != n * self.d_in || corrected.is_some_and(|c| c.len() != n) {
            return Err(Error::Shape(
                "batch, labels and corrected labels disagree in length".into(),
            ));
        }
        if n == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        let k = self.classes;
        let check = |l: usize, index: usize| {
            if l >= k {
                Err(Error::LabelOutOfRange {
                    index,
                    label: l as i64,
                    classes: k,
                })
            } else {
                Ok(())
            }
        };
        let mut grad = vec![0.0; self.params.len()];
        let (mut loss_noisy, mut loss_corr) = (0.0, 0.0);
        let inv_n = 1.0 / n as f64;
        let off = self.output_offset();
        for (i, x) in batch.chunks(self.d_in).enumerate() {
            check(noisy[i], i)?;
            let (z1, g) = self.hidden(x);
            let p = self.output_probs(&g);
            loss_noisy -= p[noisy[i]].max(LOG_FLOOR).ln();
            let mut dz: Vec<f64> = p.clone();
            match corrected {
                Some(c) => {
                    check(c[i], i)?;
                    loss_corr -= p[c[i]].max(LOG_FLOOR).ln();
                    dz[noisy[i]] -= 1.0 - alpha;
                    dz[c[i]] -= alpha;
                }
                None => dz[noisy[i]] -= 1.0,
            }
            dz.iter_mut().for_each(|v| *v *= inv_n);
            let dg = g.len();
            for c in 0..k {
                let row = &mut grad[off + c * dg..off + (c + 1) * dg];
                row.iter_mut().zip(&g).for_each(|(w, gv)| *w += dz[c] * gv);
                grad[off + k * dg + c] += dz[c];
            }
            if let Architecture::OneHidden { hidden } = self.arch {
                let w2 = &self.params[off..off + k * hidden];
                for u in 0..hidden {
                    if z1[u] <= 0.0 {
                        continue;
                    }
                    let dh: f64 = (0..k).map(|c| w2[c * hidden + u] * dz[c]).sum();
                    let row = &mut grad[u * self.d_in..(u + 1) * self.d_in];
                    row.iter_mut().zip(x).for_each(|(w, xv)| *w += dh * xv);
                    grad[hidden * self.d_in + u] += dh;
                }
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        let noisy_mean = loss_noisy * inv_n;
        let parts = match corrected {
            Some(_) => {
                let corr_mean = loss_corr * inv_n;
                LossParts {
                    total: (1.0 - alpha) * noisy_mean + alpha * corr_mean,
                    noisy: noisy_mean,
                    corrected: Some(corr_mean),
                }
            }
            None => LossParts {
                total: noisy_mean,
                noisy: noisy_mean,
                corrected: None,
            },
        };
        Ok((grad, parts))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.params.len() * 8);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        let (kind, hidden) = match self.arch {
            Architecture::LinearSoftmax => (0u32, 0u32),
            Architecture::OneHidden { hidden } => (1, hidden as u32),
        };
        for v in [kind, hidden, self.d_in as u32, self.classes as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub(crate) fn read_from(cur: &mut Cursor<'_>) -> Result<Self> {
        if cur.take(4).map_err(|_| Error::Format("bad model magic".into()))? != MODEL_MAGIC {
            return Err(Error::Format("bad model magic".into()));
        }
        let version = cur.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let kind = cur.u32()?;
        let hidden = cur.u32()? as usize;
        let d_in = cur.u32()? as usize;
        let classes = cur.u32()? as usize;
        let arch = match kind {
            0 => Architecture::LinearSoftmax,
            1 => Architecture::OneHidden { hidden },
            other => return Err(Error::Format(format!("unknown architecture {other}"))),
        };
        let count = cur.u64()? as usize;
        if count.saturating_mul(8) > cur.remaining() {
            return Err(Error::Format("truncated parameters".into()));
        }
        let params = (0..count).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("non-finite parameter".into()));
        }
        Self::from_params(arch, d_in, classes, params).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(buf);
        let m = Self::read_from(&mut cur)?;
        cur.finish()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl FeatureExtractor for ClassifierModel {
    fn feature_dim(&self) -> usize {
        ClassifierModel::feature_dim(self)
    }

    fn extract(&self, ds: &NoisyDataset, indices: &[usize]) -> Result<FeatureMatrix> {
        self.extract_with(ds, indices, Exec::default())
    }
}

pub(crate) fn to_f64(x: &[f32]) -> Vec<f64> {
    x.iter().map(|&v| f64::from(v)).collect()
}

/// Mean negative log-probability of the labelled class, logs floored at
/// [`LOG_FLOOR`].
pub fn cross_entropy(probs: &[f64], labels: &[usize], classes: usize) -> Result<f64> {
    if probs.len() != labels.len() * classes || labels.is_empty() {
        return Err(Error::Shape(format!(
            "{} probabilities for {} labels",
            probs.len(),
            labels.len()
        )));
    }
    let mut sum = 0.0;
    for (i, &l) in labels.iter().enumerate() {
        if l >= classes {
            return Err(Error::LabelOutOfRange {
                index: i,
                label: l as i64,
                classes,
            });
        }
        sum -= probs[i * classes + l].max(LOG_FLOOR).ln();
    }
    Ok(sum / labels.len() as f64)
}

/// `(1 − α)·CE(y) + α·CE(ŷ)`.
pub fn joint_loss(probs: &[f64], noisy: &[usize], corrected: &[usize], alpha: f64, classes: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config("alpha", "must lie in [0, 1]"));
    }
    Ok((1.0 - alpha) * cross_entropy(probs, noisy, classes)? + alpha * cross_entropy(probs, corrected, classes)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    /// The learning rate is divided by this every `decay_period` epochs.
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    #[serde(default = "default_decay_period")]
    pub decay_period: usize,
}

fn default_momentum() -> f64 {
    0.9
}

fn default_weight_decay() -> f64 {
    5e-3
}

fn default_decay_factor() -> f64 {
    10.0
}

fn default_decay_period() -> usize {
    5
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay", "must be non-negative"));
        }
        if !(self.decay_factor >= 1.0 && self.decay_factor.is_finite()) {
            return Err(Error::config("decay_factor", "must be at least 1"));
        }
        if self.decay_period == 0 {
            return Err(Error::config("decay_period", "must be at least 1"));
        }
        Ok(())
    }

    /// Learning rate for a 1-based epoch under step decay.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let steps = epoch.saturating_sub(1) / self.decay_period;
        self.learning_rate / self.decay_factor.powi(steps as i32)
    }
}

/// Optimizer configuration plus momentum buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub config: OptimConfig,
    pub velocity: Vec<f64>,
}

impl OptimState {
    pub fn new(config: OptimConfig, num_params: usize) -> Self {
        OptimState {
            config,
            velocity: vec![0.0; num_params],
        }
    }
}

/// `v ← μ·v + g + λ·θ; θ ← θ − lr·v`.
pub fn sgd_update(params: &mut [f64], grads: &[f64], velocity: &mut [f64], lr: f64, momentum: f64, weight_decay: f64) {
    for ((p, g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g + weight_decay * *p;
        *p -= lr * *v;
    }
}

pub fn sgd_step(model: &mut ClassifierModel, grads: &[f64], opt: &mut OptimState, lr: f64) -> Result<()> {
    if grads.len() != model.params.len() || opt.velocity.len() != model.params.len() {
        return Err(Error::Shape(format!(
            "{} gradients and {} velocities for {} parameters",
            grads.len(),
            opt.velocity.len(),
            model.params.len()
        )));
    }
    sgd_update(
        &mut model.params,
        grads,
        &mut opt.velocity,
        lr,
        opt.config.momentum,
        opt.config.weight_decay,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_is_uniform() {
        let m = ClassifierModel::zeros(Architecture::LinearSoftmax, 3, 4).unwrap();
        let f = m.forward(&[1.0, -2.0, 0.5]).unwrap();
        assert!(f.probs.iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert_eq!(f.features, vec![1.0, -2.0, 0.5]);
    }

    #[test]
    fn rows_sum_to_one() {
        let m = ClassifierModel::init(Architecture::OneHidden { hidden: 5 }, 3, 4, 1).unwrap();
        let f = m.forward(&[1.0, -2.0, 0.5, 30.0, 4.0, -9.0]).unwrap();
        for row in f.probs.chunks(4) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| p > 0.0));
        }
        assert_eq!(f.features.len(), 10);
    }

    #[test]
    fn forward_shape_mismatch() {
        let m = ClassifierModel::zeros(Architecture::LinearSoftmax, 3, 2).unwrap();
        assert!(matches!(m.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[0.0, 1.0], &[1], 2).unwrap(), 0.0);
        let u = cross_entropy(&[0.25; 4], &[2], 4).unwrap();
        assert!((u - 4f64.ln()).abs() < 1e-12);
        let v = cross_entropy(&[0.9, 0.1, 0.2, 0.8], &[0, 1], 2).unwrap();
        assert!((v - 0.164252033486018).abs() < 1e-12);
        assert!(cross_entropy(&[0.5, 0.5], &[2], 2).is_err());
        // floor keeps the loss finite
        assert!((cross_entropy(&[1.0, 0.0], &[1], 2).unwrap() - 27.631021115928547).abs() < 1e-9);
    }

    #[test]
    fn joint_loss_examples() {
        let p = [0.7, 0.2, 0.1, 0.3, 0.3, 0.4];
        let y = [0, 2];
        let c = [1, 1];
        assert_eq!(
            joint_loss(&p, &y, &c, 0.0, 3).unwrap(),
            cross_entropy(&p, &y, 3).unwrap()
        );
        assert_eq!(
            joint_loss(&p, &y, &c, 1.0, 3).unwrap(),
            cross_entropy(&p, &c, 3).unwrap()
        );
        let half = joint_loss(&[0.5, 0.5], &[0], &[1], 0.5, 2).unwrap();
        assert!((half - 2f64.ln()).abs() < 1e-12);
        assert!(joint_loss(&p, &y, &c, 1.5, 3).is_err());
    }

    #[test]
    fn linear_gradient_closed_form() {
        let m = ClassifierModel::init(Architecture::LinearSoftmax, 3, 3, 7).unwrap();
        let x = [0.4, -1.0, 2.0];
        let alpha = 0.3;
        let (g, _) = m.backward(&x, &[0], Some(&[2]), alpha).unwrap();
        let (p, _) = m.forward_row(&x).unwrap();
        for c in 0..3 {
            let target = (1.0 - alpha) * f64::from(u8::from(c == 0)) + alpha * f64::from(u8::from(c == 2));
            let d = p[c] - target;
            for j in 0..3 {
                assert!((g[c * 3 + j] - d * x[j]).abs() < 1e-12);
            }
            assert!((g[9 + c] - d).abs() < 1e-12);
        }
    }

    #[test]
    fn coinciding_targets_ignore_alpha() {
        let m = ClassifierModel::init(Architecture::OneHidden { hidden: 4 }, 2, 3, 3).unwrap();
        let x = [0.5, -0.5, 1.0, 2.0];
        let y = [1, 2];
        let (a, _) = m.backward(&x, &y, Some(&y), 0.0).unwrap();
        let (b, _) = m.backward(&x, &y, Some(&y), 0.7).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_loss_matches_joint_loss() {
        let m = ClassifierModel::init(Architecture::OneHidden { hidden: 4 }, 2, 3, 3).unwrap();
        let x = [0.5, -0.5, 1.0, 2.0];
        let (_, parts) = m.backward(&x, &[0, 1], Some(&[2, 1]), 0.4).unwrap();
        let f = m.forward(&x).unwrap();
        let want = joint_loss(&f.probs, &[0, 1], &[2, 1], 0.4, 3).unwrap();
        assert!((parts.total - want).abs() < 1e-12);
        assert!(m.backward(&x, &[0, 1], None, 1.2).is_err());
    }

    #[test]
    fn sgd_reductions() {
        let mut p = vec![1.0, -2.0];
        let mut v = vec![0.0; 2];
        sgd_update(&mut p, &[0.5, 0.5], &mut v, 0.1, 0.0, 0.0);
        assert_eq!(p, vec![0.95, -2.05]);
        let mut p = vec![1.0, -2.0];
        let mut v = vec![0.0; 2];
        sgd_update(&mut p, &[0.0, 0.0], &mut v, 0.1, 0.9, 0.0);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn sgd_two_steps_on_quadratic() {
        // f(θ) = θ², hand-iterated: v1 = 2, θ1 = 0.8; v2 = 0.9·2 + 1.6 = 3.4, θ2 = 0.46
        let mut p = vec![1.0];
        let mut v = vec![0.0];
        for _ in 0..2 {
            let g = [2.0 * p[0]];
            sgd_update(&mut p, &g, &mut v, 0.1, 0.9, 0.0);
        }
        assert!((p[0] - 0.46).abs() < 1e-12);
    }

    #[test]
    fn sgd_step_shape_checked() {
        let mut m = ClassifierModel::zeros(Architecture::LinearSoftmax, 2, 2).unwrap();
        let cfg = OptimConfig {
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 0.0,
            decay_factor: 10.0,
            decay_period: 5,
        };
        let mut opt = OptimState::new(cfg, 6);
        assert!(sgd_step(&mut m, &[0.0; 5], &mut opt, 0.1).is_err());
        sgd_step(&mut m, &[1.0; 6], &mut opt, 0.1).unwrap();
        assert!(m.params().iter().all(|&p| (p + 0.1).abs() < 1e-15));
    }

    #[test]
    fn step_decay_schedule() {
        let cfg = OptimConfig {
            learning_rate: 1.0,
            momentum: 0.9,
            weight_decay: 0.0,
            decay_factor: 10.0,
            decay_period: 5,
        };
        assert_eq!(cfg.learning_rate_at(1), 1.0);
        assert_eq!(cfg.learning_rate_at(5), 1.0);
        assert_eq!(cfg.learning_rate_at(6), 0.1);
        assert!((cfg.learning_rate_at(11) - 0.01).abs() < 1e-18);
    }

    #[test]
    fn checkpoint_roundtrip_and_corruption() {
        let m = ClassifierModel::init(Architecture::OneHidden { hidden: 3 }, 4, 2, 9).unwrap();
        let bytes = m.to_bytes();
        assert_eq!(ClassifierModel::from_bytes(&bytes).unwrap(), m);
        assert!(ClassifierModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[1] = b'X';
        assert!(ClassifierModel::from_bytes(&bad).is_err());
    }
}
