//! Teacher-forced training with Adam and global-norm clipping.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::text::{BOS_ID, EOS_ID};

use super::{ModelError, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub label_smoothing: f64,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 3e-4,
            batch_size: 16,
            epochs: 10,
            seed: 0,
            optimizer: Optimizer::default(),
            label_smoothing: 0.0,
            clip_norm: 1.0,
        }
    }
}

/// One teacher-forcing example.
///
/// The decoder reads `[BOS] + y` and predicts `y + [EOS]`; `flags[j]` is
/// the flag column after `j` gold output tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub src: Vec<usize>,
    pub dec_in: Vec<usize>,
    pub targets: Vec<usize>,
    pub flags: Option<Vec<Vec<u8>>>,
}

impl TrainExample {
    pub fn new(src: Vec<usize>, target: &[usize], flags: Option<Vec<Vec<u8>>>) -> Self {
        let mut dec_in = Vec::with_capacity(target.len() + 1);
        dec_in.push(BOS_ID);
        dec_in.extend_from_slice(target);
        let mut targets = target.to_vec();
        targets.push(EOS_ID);
        TrainExample {
            src,
            dec_in,
            targets,
            flags,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub step: usize,
    /// Mean per-token loss of the batch.
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub steps: Vec<LossRecord>,
    /// Mean per-token loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,step,loss\n");
        for r in &self.steps {
            let _ = writeln!(out, "{},{},{}", r.epoch, r.step, r.loss);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

struct AdamState {
    m: ModelParams,
    v: ModelParams,
    t: i32,
}

fn validate(config: &TrainingConfig) -> Result<(), ModelError> {
    let ok = config.learning_rate > 0.0
        && config.learning_rate.is_finite()
        && config.batch_size > 0
        && (0.0..1.0).contains(&config.label_smoothing)
        && config.clip_norm >= 0.0;
    if ok {
        Ok(())
    } else {
        Err(ModelError::BadConfig(format!(
            "invalid training config {config:?}"
        )))
    }
}

/// Trains `params` on `corpus` and returns the final parameters with the
/// loss log. Examples are visited in a seeded shuffled order each epoch.
pub fn train(
    mut params: ModelParams,
    corpus: &[TrainExample],
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainReport), ModelError> {
    if corpus.is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut adam = AdamState {
        m: params.zeros_like(),
        v: params.zeros_like(),
        t: 0,
    };
    let mut grads = params.zeros_like();
    let mut report = TrainReport::default();
    let mut step = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut epoch_tokens = 0;
        for batch in order.chunks(config.batch_size) {
            step += 1;
            grads.tensors_mut().into_iter().for_each(|t| t.fill(0.0));
            let mut batch_loss = 0.0;
            let mut tokens = 0;
            for &i in batch {
                let ex = &corpus[i];
                batch_loss += params
                    .loss_and_grads(
                        &ex.src,
                        &ex.dec_in,
                        &ex.targets,
                        ex.flags.as_deref(),
                        config.label_smoothing,
                        &mut grads,
                    )
                    .map_err(|e| match e {
                        ModelError::NonFiniteLoss(l) => ModelError::Diverged {
                            epoch,
                            step,
                            detail: format!("non-finite loss {l} on example {i}"),
                        },
                        e => e,
                    })?;
                tokens += ex.targets.len();
            }
            let mean = batch_loss / tokens as f64;
            let scale = 1.0 / tokens as f64;
            grads.tensors_mut().into_iter().for_each(|t| *t *= scale);
            let grad_norm = grads.sq_norm().sqrt();
            if !mean.is_finite() || !grad_norm.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    step,
                    detail: format!("loss {mean}, gradient norm {grad_norm}, batch {batch:?}"),
                });
            }
            if config.clip_norm > 0.0 && grad_norm > config.clip_norm {
                let s = config.clip_norm / grad_norm;
                grads.tensors_mut().into_iter().for_each(|t| *t *= s);
            }
            apply_update(&mut params, &grads, &mut adam, config);
            if !params.all_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    step,
                    detail: "parameters became non-finite after the update".into(),
                });
            }
            report.steps.push(LossRecord {
                epoch,
                step,
                loss: mean,
            });
            epoch_loss += batch_loss;
            epoch_tokens += tokens;
        }
        let mean = epoch_loss / epoch_tokens as f64;
        log::info!("epoch {epoch}: loss {mean:.4}");
        report.epoch_losses.push(mean);
    }
    Ok((params, report))
}

fn apply_update(
    params: &mut ModelParams,
    grads: &ModelParams,
    adam: &mut AdamState,
    config: &TrainingConfig,
) {
    let lr = config.learning_rate;
    match config.optimizer {
        Optimizer::Sgd => params.add_scaled(grads, -lr),
        Optimizer::Adam { beta1, beta2, eps } => {
            adam.t += 1;
            let c1 = 1.0 - beta1.powi(adam.t);
            let c2 = 1.0 - beta2.powi(adam.t);
            let ms = adam.m.tensors_mut();
            let vs = adam.v.tensors_mut();
            let ps = params.tensors_mut();
            for (((p, m), v), (_, g)) in ps.into_iter().zip(ms).zip(vs).zip(grads.tensors()) {
                ndarray::Zip::from(p)
                    .and(m)
                    .and(v)
                    .and(g)
                    .for_each(|p, m, v, &g| {
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    });
            }
        }
    }
}
