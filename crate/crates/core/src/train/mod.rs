//! Supervised training: MSE on SOI waveforms, Adam with per-step dilation
//! projection, validation each epoch, learning-rate reduction on plateau,
//! early stopping and best-validation checkpointing.

use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, Tensor, TensorError};
use crate::datagen::MixtureExample;
use crate::dsp::ComplexSignal;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Rng};
use crate::wavenet::{save_checkpoint, WaveNetModel};

/// Relative margin a validation loss must beat the best by to count as an
/// improvement.
pub const IMPROVEMENT_THRESHOLD: f64 = 1e-4;

const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub steps_per_epoch: usize,
    pub lr: f64,
    pub plateau_factor: f64,
    /// Non-improving validation checks before the learning rate is cut.
    pub plateau_patience: usize,
    /// Non-improving validation checks before training stops.
    pub early_stop_patience: usize,
    pub min_lr: f64,
    pub seed: u64,
    pub checkpoint_path: Option<PathBuf>,
    /// Train on random windows of this many samples instead of whole
    /// examples. Validation always uses whole examples.
    pub crop_len: Option<usize>,
    /// Learning-rate multiplier for dilation parameters.
    pub dilation_lr_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 20,
            batch_size: 8,
            steps_per_epoch: 25,
            lr: 1e-3,
            plateau_factor: 0.5,
            plateau_patience: 2,
            early_stop_patience: 4,
            min_lr: 1e-5,
            seed: 0,
            checkpoint_path: None,
            crop_len: None,
            dilation_lr_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(format!("train: {msg}")));
        if self.max_epochs == 0 || self.batch_size == 0 || self.steps_per_epoch == 0 {
            return fail("max_epochs, batch_size and steps_per_epoch must be positive");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return fail("lr must be a positive finite value");
        }
        if !(self.min_lr >= 0.0 && self.min_lr < self.lr) {
            return fail("min_lr must satisfy 0 ≤ min_lr < lr");
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return fail("plateau_factor must lie in (0, 1)");
        }
        if self.plateau_patience == 0 || self.early_stop_patience == 0 {
            return fail("patience values must be at least 1");
        }
        if self.crop_len == Some(0) {
            return fail("crop_len must be positive");
        }
        if !(self.dilation_lr_scale.is_finite() && self.dilation_lr_scale >= 0.0) {
            return fail("dilation_lr_scale must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PlateauAction {
    None,
    ReduceLr,
    Stop,
}

/// Counter state behind [`PlateauState::update`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauState {
    best: f64,
    since_reduce: usize,
    since_improvement: usize,
    lr: f64,
    factor: f64,
    plateau_patience: usize,
    early_stop_patience: usize,
    min_lr: f64,
}

impl PlateauState {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            best: f64::INFINITY,
            since_reduce: 0,
            since_improvement: 0,
            lr: config.lr,
            factor: config.plateau_factor,
            plateau_patience: config.plateau_patience,
            early_stop_patience: config.early_stop_patience,
            min_lr: config.min_lr,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Records one validation loss. `Stop` wins over `ReduceLr` when both
    /// counters fire together; at `min_lr` a plateau yields `None`.
    pub fn update(&mut self, val_loss: f64) -> Result<PlateauAction> {
        if !val_loss.is_finite() {
            return Err(Error::Config(format!("validation loss is not finite: {val_loss}")));
        }
        if val_loss < self.best * (1.0 - IMPROVEMENT_THRESHOLD) {
            self.best = val_loss;
            self.since_reduce = 0;
            self.since_improvement = 0;
            return Ok(PlateauAction::None);
        }
        self.since_reduce += 1;
        self.since_improvement += 1;
        if self.since_improvement >= self.early_stop_patience {
            return Ok(PlateauAction::Stop);
        }
        if self.since_reduce >= self.plateau_patience {
            self.since_reduce = 0;
            if self.lr > self.min_lr {
                self.lr = (self.lr * self.factor).max(self.min_lr);
                return Ok(PlateauAction::ReduceLr);
            }
        }
        Ok(PlateauAction::None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub dilations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
    pub best_val: f64,
    pub best_epoch: usize,
    pub stop_reason: StopReason,
}

impl TrainHistory {
    /// One JSON object per epoch, newline-terminated.
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
            .collect()
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(Error::io(path))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(Error::io(path))
    }
}

/// One epoch of work as seen by [`run_schedule`].
pub trait EpochRunner {
    /// Trains one epoch at `lr`; returns `(mean train loss, val loss)`.
    fn run_epoch(&mut self, epoch: usize, lr: f64) -> Result<(f64, f64)>;
    fn dilations(&self) -> Vec<f64>;
    /// Called when `val_loss` is the lowest seen so far.
    fn on_best(&mut self, epoch: usize, val_loss: f64) -> Result<()>;
}

/// Epoch loop with plateau and early-stop bookkeeping.
pub fn run_schedule(config: &TrainConfig, runner: &mut impl EpochRunner) -> Result<TrainHistory> {
    config.validate()?;
    let mut plateau = PlateauState::new(config);
    let mut records = Vec::new();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stop_reason = StopReason::MaxEpochs;
    for epoch in 1..=config.max_epochs {
        let lr = plateau.lr();
        let (train_loss, val_loss) = runner.run_epoch(epoch, lr)?;
        records.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            lr,
            dilations: runner.dilations(),
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            runner.on_best(epoch, val_loss)?;
        }
        if plateau.update(val_loss)? == PlateauAction::Stop {
            stop_reason = StopReason::EarlyStop;
            break;
        }
    }
    Ok(TrainHistory {
        records,
        best_val,
        best_epoch,
        stop_reason,
    })
}

fn window(sig: &ComplexSignal, start: usize, len: usize) -> Tensor {
    let samples = &sig.samples()[start..start + len];
    let mut data = Vec::with_capacity(2 * len);
    data.extend(samples.iter().map(|s| s.re));
    data.extend(samples.iter().map(|s| s.im));
    Tensor::new(&[2, len], data).expect("[2, len] matches data")
}

/// Mean of [`WaveNetModel::loss`] over whole examples.
pub fn validation_loss(model: &WaveNetModel, examples: &[MixtureExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::Config("validation set is empty".into()));
    }
    let losses: Vec<f64> = examples
        .par_iter()
        .map(|e| model.loss(&e.mixture.to_tensor(), &e.soi.to_tensor()))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

struct Trainer<'a> {
    model: WaveNetModel,
    best: Option<WaveNetModel>,
    optimizer: AdamState,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    train: &'a [MixtureExample],
    val: &'a [MixtureExample],
    config: &'a TrainConfig,
    saved: Option<PathBuf>,
}

impl Trainer<'_> {
    /// Next training index; the permutation is redrawn when exhausted.
    fn next_index(&mut self) -> usize {
        if self.cursor == self.order.len() {
            self.rng.shuffle(&mut self.order);
            self.cursor = 0;
        }
        self.cursor += 1;
        self.order[self.cursor - 1]
    }

    fn diverged(&self, epoch: usize, step: usize) -> Error {
        Error::Diverged {
            epoch,
            step,
            last_good: self.saved.clone(),
        }
    }
}

impl EpochRunner for Trainer<'_> {
    fn run_epoch(&mut self, epoch: usize, lr: f64) -> Result<(f64, f64)> {
        self.optimizer.set_lr(lr);
        let mut total = 0.0;
        let b = self.config.batch_size;
        for step in 1..=self.config.steps_per_epoch {
            let batch: Vec<(Tensor, Tensor)> = (0..b)
                .map(|_| {
                    let e = &self.train[self.next_index()];
                    let crop = self.config.crop_len.unwrap_or(e.len()).min(e.len());
                    let start = self.rng.below(e.len() - crop + 1);
                    (window(&e.mixture, start, crop), window(&e.soi, start, crop))
                })
                .collect();
            self.model.zero_grad();
            let model = &self.model;
            let results: Vec<(f64, Vec<Vec<f64>>)> = batch
                .par_iter()
                .map(|(x, y)| model.loss_grad(x, y))
                .collect::<Result<_>>()?;
            let mut loss = 0.0;
            for (l, grads) in &results {
                if !l.is_finite() {
                    return Err(self.diverged(epoch, step));
                }
                loss += l / b as f64;
                self.model.add_grads(grads, 1.0 / b as f64);
            }
            total += loss;
            let scale = self.config.dilation_lr_scale;
            match self.optimizer.step(&mut self.model.param_refs(scale)) {
                Err(TensorError::NonFiniteGradient { .. }) => return Err(self.diverged(epoch, step)),
                other => other?,
            }
            if !self.model.all_finite() {
                return Err(self.diverged(epoch, step));
            }
        }
        let val = validation_loss(&self.model, self.val)?;
        if !val.is_finite() {
            return Err(self.diverged(epoch, self.config.steps_per_epoch));
        }
        Ok((total / self.config.steps_per_epoch as f64, val))
    }

    fn dilations(&self) -> Vec<f64> {
        self.model.dilations()
    }

    fn on_best(&mut self, epoch: usize, val_loss: f64) -> Result<()> {
        let mut best = self.model.clone();
        best.zero_grad();
        self.best = Some(best);
        if let Some(path) = &self.config.checkpoint_path {
            let meta = serde_json::json!({ "epoch": epoch, "val_loss": val_loss, "seed": self.config.seed });
            save_checkpoint(&self.model, path, meta)?;
            self.saved = Some(path.clone());
        }
        Ok(())
    }
}

/// Trains `model` and returns the best-validation model with the history.
pub fn train(
    model: WaveNetModel,
    train_set: &[MixtureExample],
    val_set: &[MixtureExample],
    config: &TrainConfig,
) -> Result<(WaveNetModel, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("train and validation sets must be non-empty".into()));
    }
    let train_seeds: HashSet<u64> = train_set.iter().map(|e| e.seed).collect();
    if val_set.iter().any(|e| train_seeds.contains(&e.seed)) {
        return Err(Error::Config("train and validation sets share examples".into()));
    }
    if !model.all_finite() {
        return Err(Error::Config("model parameters are not finite".into()));
    }
    let mut rng = Rng::new(derive_seed(config.seed, SHUFFLE_STREAM));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    rng.shuffle(&mut order);
    let mut trainer = Trainer {
        model,
        best: None,
        optimizer: AdamState::new(AdamConfig {
            lr: config.lr,
            ..Default::default()
        }),
        rng,
        order,
        cursor: 0,
        train: train_set,
        val: val_set,
        config,
        saved: None,
    };
    let history = run_schedule(config, &mut trainer)?;
    let best = trainer.best.take().expect("epoch 1 always sets a best model");
    Ok((best, history))
}
