use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Model, ModelConfig};
use super::objective::{discriminator_objective, generator_grads};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_on, SsimParams};
use crate::nn::{AdamState, Mode, Tensor};
use crate::optics::derive_seed;

const SHUFFLE_STREAM: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    /// Validation metrics are recorded every this many optimizer steps.
    #[serde(default = "default_eval_every")]
    pub eval_every: u64,
    /// Optional hard cap on optimizer steps.
    #[serde(default)]
    pub max_steps: Option<u64>,
    /// Optional cap on the number of test samples scored during training.
    #[serde(default)]
    pub val_limit: Option<usize>,
}

fn default_lr() -> f64 {
    1e-4
}
fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_batch() -> usize {
    16
}
fn default_epochs() -> usize {
    30
}
fn default_eval_every() -> u64 {
    100
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: default_lr(),
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            batch_size: default_batch(),
            epochs: default_epochs(),
            seed: 0,
            eval_every: default_eval_every(),
            max_steps: None,
            val_limit: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lr) {
            return Err(Error::config("/train/lr", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("/train/beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("/train/beta2", "must lie in [0, 1)"));
        }
        if !positive(self.eps) {
            return Err(Error::config("/train/eps", "must be > 0"));
        }
        if self.batch_size < 2 {
            return Err(Error::config("/train/batch_size", "batch norm needs at least 2 samples per batch"));
        }
        if self.epochs == 0 {
            return Err(Error::config("/train/epochs", "must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("/train/eval_every", "must be >= 1"));
        }
        if self.max_steps == Some(0) {
            return Err(Error::config("/train/max_steps", "must be >= 1"));
        }
        if self.val_limit == Some(0) {
            return Err(Error::config("/train/val_limit", "must be >= 1"));
        }
        Ok(())
    }
}

/// One validation record. Losses are averaged over the steps since the
/// previous record; `d_loss` is absent for non-adversarial models and the
/// accuracies are absent for grayscale targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub step: u64,
    pub d_loss: Option<f64>,
    pub g_loss: f64,
    pub val_ssim1: f64,
    pub val_ssim2: f64,
    pub val_acc1: Option<f64>,
    pub val_acc2: Option<f64>,
}

pub const HISTORY_HEADER: &str = "step,d_loss,g_loss,val_ssim1,val_ssim2,val_acc1,val_acc2";

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = format!("{HISTORY_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.step,
            opt(r.d_loss),
            r.g_loss,
            r.val_ssim1,
            r.val_ssim2,
            opt(r.val_acc1),
            opt(r.val_acc2)
        );
    }
    s
}

/// Result of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub steps: u64,
    pub history: Vec<HistoryRow>,
    /// Step and mean validation SSIM of the best record.
    pub best: Option<(u64, f64)>,
}

pub const FINAL_DIR: &str = "final";
pub const BEST_DIR: &str = "best";
pub const LAST_GOOD_DIR: &str = "last_good";
pub const HISTORY_FILE: &str = "history.csv";

/// Hook invoked after every validation record (progress reporting).
pub type Observer<'a> = &'a mut dyn FnMut(&HistoryRow);

/// Alternating training. Per batch: one train-mode generator pass; for
/// YGAN one discriminator Adam step on real vs. generated pairs; then one
/// generator Adam step against the (updated, frozen) discriminator.
///
/// With `out_dir`, writes `best/`, `final/` checkpoints and `history.csv`;
/// on a non-finite loss the current (still finite) parameters are written
/// to `last_good/` and an [`Error::Numeric`] is returned.
pub fn train(config: &ModelConfig, dataset: &Dataset, out_dir: Option<&Path>, observer: Option<Observer<'_>>) -> Result<TrainOutcome> {
    config.validate()?;
    let t = &config.train;
    let side = dataset.side();
    if side != config.generator.input_side {
        return Err(Error::config(
            "/generator/input_side",
            format!("dataset side {side} differs from generator input side {}", config.generator.input_side),
        ));
    }
    let train_idx = dataset.train_indices();
    if train_idx.len() < t.batch_size {
        return Err(Error::invalid(format!(
            "train split holds {} samples, fewer than one batch of {}",
            train_idx.len(),
            t.batch_size
        )));
    }
    let val_idx: Vec<usize> = {
        let test = dataset.test_indices();
        test[..t.val_limit.unwrap_or(test.len()).min(test.len())].to_vec()
    };
    if val_idx.is_empty() {
        return Err(Error::invalid("test split is empty"));
    }

    let mut model = Model::new(config)?;
    let mut adam_g = AdamState::new(model.generator.params(), t.lr, t.beta1, t.beta2, t.eps);
    let mut adam_d = model
        .discriminator
        .as_ref()
        .map(|d| AdamState::new(d.params(), t.lr, t.beta1, t.beta2, t.eps));
    let ssim_params = SsimParams::default();
    let mut observer = observer;
    let mut history = Vec::new();
    let mut best: Option<(u64, f64)> = None;
    let mut step = 0u64;
    let mut acc = LossAccumulator::default();
    let max_steps = t.max_steps.unwrap_or(u64::MAX);

    let mut record = |model: &Model, step: u64, acc: &mut LossAccumulator, history: &mut Vec<HistoryRow>, best: &mut Option<(u64, f64)>| -> Result<()> {
        let report = evaluate_on(model, dataset, &val_idx, &ssim_params, config.model.name())?;
        let (d_loss, g_loss) = acc.take();
        let row = HistoryRow {
            step,
            d_loss: model.discriminator.as_ref().map(|_| d_loss),
            g_loss,
            val_ssim1: report.mean_obj1,
            val_ssim2: report.mean_obj2,
            val_acc1: report.mean_acc1,
            val_acc2: report.mean_acc2,
        };
        info!(
            "step {step}: g_loss {g_loss:.4} val ssim {:.4}/{:.4}",
            row.val_ssim1, row.val_ssim2
        );
        if let Some(obs) = observer.as_mut() {
            obs(&row);
        }
        history.push(row);
        let mean = report.mean();
        if best.is_none_or(|(_, b)| mean > b) {
            *best = Some((step, mean));
            if let Some(dir) = out_dir {
                model.save(&dir.join(BEST_DIR), step)?;
            }
        }
        Ok(())
    };

    'epochs: for epoch in 0..t.epochs {
        let mut order = train_idx.to_vec();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(t.seed, SHUFFLE_STREAM + epoch as u64)));
        for chunk in order.chunks_exact(t.batch_size) {
            if step >= max_steps {
                break 'epochs;
            }
            let batch = dataset.batch(chunk);
            let outputs = model.generator.forward(&[&batch.x], Mode::Train)?;
            let mut d_loss = 0.0;
            if let (Some(d), Some(adam)) = (model.discriminator.as_mut(), adam_d.as_mut()) {
                let real = Tensor::concat_channels(&batch.y1, &batch.y2)?;
                let fake = Tensor::concat_channels(&outputs[0], &outputs[1])?;
                let eval = discriminator_objective(d, &real, &fake)?;
                d_loss = eval.loss;
                if !d_loss.is_finite() {
                    return Err(halt(&model, out_dir, step, "discriminator", d_loss));
                }
                adam.step(d.params_mut(), &eval.grads)?;
                d.clear_tape();
            }
            let g_eval = generator_grads(
                &model.generator,
                model.discriminator.as_mut(),
                &outputs,
                &batch.y1,
                &batch.y2,
                &config.loss,
            )?;
            if !g_eval.loss.is_finite() {
                return Err(halt(&model, out_dir, step, "generator", g_eval.loss));
            }
            adam_g.step(model.generator.params_mut(), &g_eval.grads)?;
            model.generator.clear_tape();
            if let Some(d) = model.discriminator.as_mut() {
                d.clear_tape();
            }
            acc.add(d_loss, g_eval.loss);
            step += 1;
            if step % t.eval_every == 0 {
                record(&model, step, &mut acc, &mut history, &mut best)?;
            }
        }
    }
    if step == 0 {
        return Err(Error::invalid("no optimizer step was taken"));
    }
    if history.last().is_none_or(|r| r.step != step) {
        record(&model, step, &mut acc, &mut history, &mut best)?;
    }
    if let Some(dir) = out_dir {
        model.save(&dir.join(FINAL_DIR), step)?;
        let path = dir.join(HISTORY_FILE);
        std::fs::write(&path, history_csv(&history)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(TrainOutcome {
        model,
        steps: step,
        history,
        best,
    })
}

fn halt(model: &Model, out_dir: Option<&Path>, step: u64, which: &str, value: f64) -> Error {
    let mut msg = format!("{which} loss became {value} at step {}", step + 1);
    if let Some(dir) = out_dir {
        let target: PathBuf = dir.join(LAST_GOOD_DIR);
        match model.save(&target, step) {
            Ok(()) => msg.push_str(&format!("; last good parameters saved to {}", target.display())),
            Err(e) => warn!("could not save last good checkpoint: {e}"),
        }
    }
    Error::Numeric(msg)
}

#[derive(Default)]
struct LossAccumulator {
    d: f64,
    g: f64,
    n: u64,
}

impl LossAccumulator {
    fn add(&mut self, d: f64, g: f64) {
        self.d += d;
        self.g += g;
        self.n += 1;
    }

    fn take(&mut self) -> (f64, f64) {
        let n = self.n.max(1) as f64;
        let out = (self.d / n, self.g / n);
        *self = Self::default();
        out
    }
}
