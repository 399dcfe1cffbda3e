//! Iterative self-learning: warmup on noisy labels, then per epoch elect
//! prototypes from the current features, correct every training label and
//! train one pass on the joint loss.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::correction::{correct_labels_with, label_accuracy, CorrectedLabels, Voting};
use crate::dataset::io::Cursor;
use crate::dataset::NoisyDataset;
use crate::error::{Error, Result};
use crate::exec::{derive_seed, rng_for, Exec};
use crate::model::{sgd_step, to_f64, Architecture, ClassifierModel, OptimConfig, OptimState};
use crate::prototypes::{build_prototype_set_with, Precomputed, PrototypeSet, SelectorConfig};

pub const STATE_MAGIC: &[u8; 4] = b"SMPS";
pub const STATE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub num_epochs: usize,
    /// First epoch (1-based) that runs label correction.
    pub start_epoch: usize,
    pub alpha: f64,
    pub batch_size: usize,
    pub selector: SelectorConfig,
    pub optim: OptimConfig,
    pub architecture: Architecture,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub restrict_to_verified: bool,
    /// Share of the dataset held out for test accuracy when a single dataset
    /// is split by the caller.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub voting: Voting,
}

fn default_test_fraction() -> f64 {
    0.2
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_epochs == 0 {
            return Err(Error::config("num_epochs", "must be at least 1"));
        }
        if self.start_epoch == 0 || self.start_epoch > self.num_epochs + 1 {
            return Err(Error::config("start_epoch", "must lie in [1, num_epochs + 1]"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "must lie in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::config("test_fraction", "must lie in [0, 1)"));
        }
        self.selector.validate()?;
        self.optim.validate()
    }

    /// Fresh model for this config, initialized from the master seed.
    pub fn init_model(&self, d_in: usize, classes: usize) -> Result<ClassifierModel> {
        ClassifierModel::init(self.architecture, d_in, classes, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    pub epoch: usize,
    pub phase: String,
    pub alpha: f64,
    pub learning_rate: f64,
    pub loss_total: f64,
    pub loss_noisy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_corrected: Option<f64>,
    pub train_acc: f64,
    pub test_acc: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrected_acc: Option<f64>,
    pub prototype_warnings: usize,
    /// Config fields changed on resume, listed on the first resumed epoch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<String>,
    /// Wall-clock time. Kept out of the metrics stream so it stays
    /// byte-reproducible.
    #[serde(skip)]
    pub duration_ms: f64,
}

pub fn write_jsonl(reports: &[EpochReport], out: &mut impl Write) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> Result<Vec<EpochReport>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Everything needed to continue training bit-exactly from an epoch boundary.
/// RNG streams are derived from `(seed, epoch)`, so the seed and the next
/// epoch index are the complete RNG state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub model: ClassifierModel,
    pub velocity: Vec<f64>,
    pub next_epoch: usize,
    pub seed: u64,
    pub alpha: f64,
}

impl TrainState {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(STATE_MAGIC);
        out.extend_from_slice(&STATE_VERSION.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&(self.next_epoch as u64).to_le_bytes());
        out.extend_from_slice(&self.alpha.to_le_bytes());
        out.extend_from_slice(&(self.velocity.len() as u64).to_le_bytes());
        for v in &self.velocity {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(self.model.to_bytes());
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor::new(buf);
        if cur.take(4).map_err(|_| Error::Format("bad checkpoint magic".into()))? != STATE_MAGIC {
            return Err(Error::Format("bad checkpoint magic".into()));
        }
        let version = cur.u32()?;
        if version != STATE_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let seed = cur.u64()?;
        let next_epoch = cur.u64()? as usize;
        let alpha = cur.f64()?;
        let count = cur.u64()? as usize;
        if count.saturating_mul(8) > cur.remaining() {
            return Err(Error::Format("truncated checkpoint".into()));
        }
        let velocity = (0..count).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        let model = ClassifierModel::read_from(&mut cur)?;
        cur.finish()?;
        if velocity.len() != model.num_params() {
            return Err(Error::Format("velocity does not match model parameters".into()));
        }
        Ok(TrainState {
            model,
            velocity,
            next_epoch,
            seed,
            alpha,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub model: ClassifierModel,
    pub reports: Vec<EpochReport>,
    /// Labels from the first correction epoch of this run.
    pub first_corrected: Option<CorrectedLabels>,
    pub final_corrected: Option<CorrectedLabels>,
    pub final_prototypes: Option<PrototypeSet>,
    pub state: TrainState,
}

/// Epoch-by-epoch driver. Use [`run`] for a whole run.
pub struct Trainer<'a> {
    train: &'a NoisyDataset,
    test: &'a NoisyDataset,
    cfg: TrainConfig,
    exec: Exec,
    model: ClassifierModel,
    optim: OptimState,
    next_epoch: usize,
    correction: bool,
    pending_overrides: Vec<String>,
    reports: Vec<EpochReport>,
    first_corrected: Option<CorrectedLabels>,
    last_corrected: Option<CorrectedLabels>,
    last_prototypes: Option<PrototypeSet>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        train: &'a NoisyDataset,
        test: &'a NoisyDataset,
        model: ClassifierModel,
        cfg: TrainConfig,
        exec: Exec,
    ) -> Result<Self> {
        cfg.validate()?;
        check_compat(train, test, &model)?;
        let optim = OptimState::new(cfg.optim.clone(), model.num_params());
        Ok(Trainer {
            train,
            test,
            cfg,
            exec,
            model,
            optim,
            next_epoch: 1,
            correction: true,
            pending_overrides: Vec::new(),
            reports: Vec::new(),
            first_corrected: None,
            last_corrected: None,
            last_prototypes: None,
        })
    }

    /// Continues from a saved state. Config changes are allowed; the ones
    /// that matter for the trajectory are recorded on the next report.
    pub fn resume(
        train: &'a NoisyDataset,
        test: &'a NoisyDataset,
        state: TrainState,
        cfg: TrainConfig,
        exec: Exec,
    ) -> Result<Self> {
        if cfg.architecture != state.model.architecture() {
            return Err(Error::Incompatible(format!(
                "checkpoint architecture {:?}, config {:?}",
                state.model.architecture(),
                cfg.architecture
            )));
        }
        check_compat(train, test, &state.model).map_err(|e| Error::Incompatible(e.to_string()))?;
        let mut overrides = Vec::new();
        if cfg.alpha != state.alpha {
            overrides.push(format!("alpha: {} -> {}", state.alpha, cfg.alpha));
        }
        if cfg.seed != state.seed {
            overrides.push(format!("seed: {} -> {}", state.seed, cfg.seed));
        }
        let mut t = Trainer::new(train, test, state.model, cfg, exec)?;
        t.optim.velocity = state.velocity;
        t.next_epoch = state.next_epoch;
        t.pending_overrides = overrides;
        Ok(t)
    }

    /// Warmup-only trainer: never runs label correction, whatever `start_epoch`.
    pub fn plain(
        train: &'a NoisyDataset,
        test: &'a NoisyDataset,
        model: ClassifierModel,
        cfg: TrainConfig,
        exec: Exec,
    ) -> Result<Self> {
        let mut t = Trainer::new(train, test, model, cfg, exec)?;
        t.correction = false;
        Ok(t)
    }

    pub fn is_done(&self) -> bool {
        self.next_epoch > self.cfg.num_epochs
    }

    pub fn reports(&self) -> &[EpochReport] {
        &self.reports
    }

    pub fn model(&self) -> &ClassifierModel {
        &self.model
    }

    pub fn state(&self) -> TrainState {
        TrainState {
            model: self.model.clone(),
            velocity: self.optim.velocity.clone(),
            next_epoch: self.next_epoch,
            seed: self.cfg.seed,
            alpha: self.cfg.alpha,
        }
    }

    fn correct(&self, epoch: usize) -> Result<(CorrectedLabels, PrototypeSet)> {
        let all: Vec<usize> = (0..self.train.len()).collect();
        let feats = self.model.extract_with(self.train, &all, self.exec)?;
        let extractor = Precomputed(&feats);
        let sel = SelectorConfig {
            seed: derive_seed(self.cfg.seed, "prototypes", epoch as u64),
            ..self.cfg.selector.clone()
        };
        let protos = build_prototype_set_with(self.train, &extractor, &sel, self.cfg.restrict_to_verified, self.exec)?;
        let corrected = correct_labels_with(self.train, &extractor, &protos, self.cfg.voting, epoch, self.exec)?;
        Ok((corrected, protos))
    }

    pub fn step(&mut self) -> Result<&EpochReport> {
        let epoch = self.next_epoch;
        if self.is_done() {
            return Err(Error::config(
                "num_epochs",
                format!("run already finished at epoch {}", epoch - 1),
            ));
        }
        let started = Instant::now();
        let corrected_phase = self.correction && epoch >= self.cfg.start_epoch;
        let mut warnings = 0;
        let mut corrected_acc = None;
        let corrected = if corrected_phase {
            let (corrected, protos) = self.correct(epoch).map_err(|e| e.in_phase(epoch, "label correction"))?;
            warnings = protos.warnings();
            if self.train.true_labels.is_some() {
                corrected_acc = Some(label_accuracy(&corrected.labels, self.train)?.0);
            }
            self.last_prototypes = Some(protos);
            Some(corrected)
        } else {
            None
        };
        let lr = self.cfg.optim.learning_rate_at(epoch);
        let alpha = if corrected_phase { self.cfg.alpha } else { 0.0 };
        let (loss_total, loss_noisy, loss_corrected) = self
            .train_pass(epoch, lr, corrected.as_ref().map(|c| &c.labels[..]), alpha)
            .map_err(|e| e.in_phase(epoch, "training"))?;
        let train_acc = self
            .model
            .accuracy(self.train, self.exec)
            .map_err(|e| e.in_phase(epoch, "evaluation"))?;
        let test_acc = self
            .model
            .accuracy(self.test, self.exec)
            .map_err(|e| e.in_phase(epoch, "evaluation"))?;
        if let Some(c) = corrected {
            if self.first_corrected.is_none() {
                self.first_corrected = Some(c.clone());
            }
            self.last_corrected = Some(c);
        }
        self.reports.push(EpochReport {
            epoch,
            phase: if corrected_phase { "correction" } else { "warmup" }.into(),
            alpha,
            learning_rate: lr,
            loss_total,
            loss_noisy,
            loss_corrected,
            train_acc,
            test_acc,
            corrected_acc,
            prototype_warnings: warnings,
            overrides: std::mem::take(&mut self.pending_overrides),
            duration_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        self.next_epoch += 1;
        Ok(self.reports.last().unwrap())
    }

    /// One shuffled mini-batch pass; returns sample-weighted mean losses.
    fn train_pass(
        &mut self,
        epoch: usize,
        lr: f64,
        corrected: Option<&[usize]>,
        alpha: f64,
    ) -> Result<(f64, f64, Option<f64>)> {
        let n = self.train.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(self.cfg.seed, "shuffle", epoch as u64));
        let (mut total, mut noisy, mut corr) = (0.0, 0.0, 0.0);
        let mut x = Vec::with_capacity(self.cfg.batch_size * self.train.dim);
        for chunk in order.chunks(self.cfg.batch_size) {
            x.clear();
            for &i in chunk {
                x.extend(to_f64(self.train.row(i)));
            }
            let y: Vec<usize> = chunk.iter().map(|&i| self.train.noisy_labels[i]).collect();
            let yc: Option<Vec<usize>> = corrected.map(|c| chunk.iter().map(|&i| c[i]).collect());
            let (grads, parts) = self.model.backward(&x, &y, yc.as_deref(), alpha)?;
            let w = chunk.len() as f64;
            total += parts.total * w;
            noisy += parts.noisy * w;
            corr += parts.corrected.unwrap_or(0.0) * w;
            sgd_step(&mut self.model, &grads, &mut self.optim, lr)?;
        }
        let n = n.max(1) as f64;
        Ok((total / n, noisy / n, corrected.map(|_| corr / n)))
    }

    pub fn run_to_end(mut self) -> Result<RunOutcome> {
        while !self.is_done() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> RunOutcome {
        let state = self.state();
        RunOutcome {
            model: self.model,
            reports: self.reports,
            first_corrected: self.first_corrected,
            final_corrected: self.last_corrected,
            final_prototypes: self.last_prototypes,
            state,
        }
    }
}

fn check_compat(train: &NoisyDataset, test: &NoisyDataset, model: &ClassifierModel) -> Result<()> {
    if train.dim != test.dim || train.classes != test.classes {
        return Err(Error::Shape(
            "train and test datasets differ in dimension or class count".into(),
        ));
    }
    if train.dim != model.input_dim() || train.classes != model.classes() {
        return Err(Error::Shape(format!(
            "model expects {}-dim inputs and {} classes, data has {} and {}",
            model.input_dim(),
            model.classes(),
            train.dim,
            train.classes
        )));
    }
    if train.is_empty() {
        return Err(Error::Shape("empty training set".into()));
    }
    Ok(())
}

pub fn run(train: &NoisyDataset, test: &NoisyDataset, model: ClassifierModel, cfg: &TrainConfig) -> Result<RunOutcome> {
    run_with(train, test, model, cfg, Exec::default())
}

pub fn run_with(
    train: &NoisyDataset,
    test: &NoisyDataset,
    model: ClassifierModel,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<RunOutcome> {
    Trainer::new(train, test, model, cfg.clone(), exec)?.run_to_end()
}

/// Plain noisy-label training for `cfg.num_epochs` epochs.
pub fn run_noisy_baseline(
    train: &NoisyDataset,
    test: &NoisyDataset,
    model: ClassifierModel,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<RunOutcome> {
    Trainer::plain(train, test, model, cfg.clone(), exec)?.run_to_end()
}

pub fn resume(
    train: &NoisyDataset,
    test: &NoisyDataset,
    state: TrainState,
    cfg: &TrainConfig,
    exec: Exec,
) -> Result<RunOutcome> {
    Trainer::resume(train, test, state, cfg.clone(), exec)?.run_to_end()
}
