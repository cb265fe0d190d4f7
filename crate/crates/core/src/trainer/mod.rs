//! Skip-gram trainer over per-epoch pair corpora.
//!
//! Negative sampling is the scalable path and may run multi-threaded with
//! lock-free shared updates. The exact-softmax mode is single-threaded and
//! exists for small vocabularies where the full objective can be evaluated.

mod hogwild;
pub mod io;
mod model;
mod noise;
pub mod sgd;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::pairs::{PairSource, TrainingPair};
use crate::seed::stream_rng;

pub use model::{init_model, EmbeddingModel, Embeddings};
pub use noise::NoiseTable;
pub use sgd::{
    exact_softmax_objective, sgns_gradient, sgns_loss, sgns_step, sgns_step_with_negatives, softmax_gradient,
    softmax_log_prob, softmax_step, DenseGradient, Scratch, SparseGradient, MAX_EXACT_PLACES,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("exact softmax limited to {max} places, model has {n}")]
    TooLargeForExact { n: usize, max: usize },
    #[error("empty pair corpus")]
    EmptyCorpus,
    #[error("pair references place {id} but the model has {n} places")]
    PairOutOfRange { id: u32, n: usize },
    #[error("matrix shape does not match n={n}, dim={dim}")]
    Shape { n: usize, dim: usize },
    #[error("malformed embedding data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    #[default]
    NegativeSampling,
    ExactSoftmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub epochs: u32,
    pub negatives: usize,
    pub lr_initial: f64,
    pub lr_min: f64,
    pub noise_power: f64,
    pub seed: u64,
    pub mode: TrainMode,
    /// Worker count for negative sampling. `1` is bit-reproducible.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 180,
            epochs: 6,
            negatives: 5,
            lr_initial: 0.025,
            lr_min: 1e-4,
            noise_power: 0.75,
            seed: 0,
            mode: TrainMode::NegativeSampling,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.dim == 0 {
            return bad("dim must be at least 1");
        }
        if self.mode == TrainMode::NegativeSampling && self.negatives == 0 {
            return bad("negatives must be at least 1");
        }
        if !(self.lr_min > 0.0 && self.lr_min <= self.lr_initial && self.lr_initial.is_finite()) {
            return bad("need 0 < lr_min <= lr_initial");
        }
        if !self.noise_power.is_finite() {
            return bad("noise_power must be finite");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> [u8; 32] {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json).into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: u32,
    pub pairs: usize,
    pub mean_loss: f64,
    pub lr_end: f64,
    /// Mean `log p(context | center)` on the evaluation pairs (exact mode).
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainStats {
    pub initial_objective: Option<f64>,
    pub epochs: Vec<EpochStats>,
}

/// Learning rate after `done` of `total` scheduled pairs.
#[inline]
fn learning_rate(cfg: &TrainConfig, done: usize, total: usize) -> f64 {
    if total == 0 {
        return cfg.lr_initial;
    }
    let frac = (done as f64 / total as f64).min(1.0);
    (cfg.lr_initial - (cfg.lr_initial - cfg.lr_min) * frac).max(cfg.lr_min)
}

fn check_pairs(pairs: &[TrainingPair], n: usize) -> Result<(), TrainError> {
    match pairs.iter().flat_map(|p| [p.center, p.context]).find(|id| id.index() >= n) {
        Some(id) => Err(TrainError::PairOutOfRange { id: id.0, n }),
        None => Ok(()),
    }
}

/// Runs `cfg.epochs` passes over `source`. The learning rate decays linearly
/// from `lr_initial` to `lr_min` over all scheduled pairs.
///
/// In exact mode the objective is tracked on the epoch-0 pairs: once before
/// training and after every epoch.
pub fn train(model: &mut EmbeddingModel, source: &dyn PairSource, cfg: &TrainConfig) -> Result<TrainStats, TrainError> {
    cfg.validate()?;
    if cfg.dim != model.dim() {
        return Err(TrainError::InvalidConfig(format!("config dim {} != model dim {}", cfg.dim, model.dim())));
    }
    let mut stats = TrainStats::default();
    if cfg.epochs == 0 {
        return Ok(stats);
    }
    let n = model.n_places();
    let per_epoch = source.pairs_per_epoch();
    let total = per_epoch * cfg.epochs as usize;

    let eval_pairs = match cfg.mode {
        TrainMode::ExactSoftmax => {
            let p = source.epoch_pairs(0);
            check_pairs(&p, n)?;
            stats.initial_objective = Some(exact_softmax_objective(model, &p)?);
            Some(p)
        }
        TrainMode::NegativeSampling => None,
    };

    let mut done = 0usize;
    for epoch in 0..cfg.epochs {
        let pairs = source.epoch_pairs(epoch);
        check_pairs(&pairs, n)?;
        let loss_sum = match cfg.mode {
            TrainMode::ExactSoftmax => {
                let mut sum = 0.0;
                for (i, &p) in pairs.iter().enumerate() {
                    sum += softmax_step(model, p, learning_rate(cfg, done + i, total))?;
                }
                sum
            }
            TrainMode::NegativeSampling => match NoiseTable::from_pairs(n, &pairs, cfg.noise_power) {
                Some(noise) if cfg.threads > 1 => train_epoch_shared(model, &pairs, &noise, cfg, epoch, done, total),
                Some(noise) => {
                    let mut rng = stream_rng(cfg.seed, "negatives", u64::from(epoch));
                    let mut scratch = Scratch::new(model.dim());
                    let mut sum = 0.0;
                    for (i, &p) in pairs.iter().enumerate() {
                        let lr = learning_rate(cfg, done + i, total);
                        sum += sgns_step(model, p, lr, cfg.negatives, &noise, &mut rng, &mut scratch);
                    }
                    sum
                }
                None => 0.0,
            },
        };
        done += pairs.len();
        let objective = match &eval_pairs {
            Some(p) => Some(exact_softmax_objective(model, p)?),
            None => None,
        };
        stats.epochs.push(EpochStats {
            epoch,
            pairs: pairs.len(),
            mean_loss: if pairs.is_empty() { 0.0 } else { loss_sum / pairs.len() as f64 },
            lr_end: learning_rate(cfg, done, total),
            objective,
        });
    }
    Ok(stats)
}

/// One epoch split into contiguous shards, one per worker, all writing to
/// the same matrices without locks.
fn train_epoch_shared(
    model: &mut EmbeddingModel,
    pairs: &[TrainingPair],
    noise: &NoiseTable,
    cfg: &TrainConfig,
    epoch: u32,
    done: usize,
    total: usize,
) -> f64 {
    let dim = model.dim();
    let workers = cfg.threads.min(pairs.len().max(1));
    let shard = pairs.len().div_ceil(workers);
    let shared = hogwild::SharedParams::new(dim, &mut model.center, &mut model.context);
    std::thread::scope(|scope| {
        let handles: Vec<_> = pairs
            .chunks(shard.max(1))
            .enumerate()
            .map(|(w, chunk)| {
                let mut params = shared;
                scope.spawn(move || {
                    let mut rng = stream_rng(cfg.seed, "negatives", (u64::from(epoch) << 16) | w as u64);
                    let mut scratch = Scratch::new(dim);
                    let mut negs = Vec::with_capacity(cfg.negatives);
                    let mut sum = 0.0;
                    for (i, p) in chunk.iter().enumerate() {
                        // workers advance in lockstep, so global progress is about i * workers
                        let lr = learning_rate(cfg, done + i * workers, total);
                        sgd::draw_negatives(noise, p.context.index(), cfg.negatives, &mut rng, &mut negs);
                        sum +=
                            sgd::sgns_update(&mut params, p.center.index(), p.context.index(), &negs, lr, &mut scratch);
                    }
                    sum
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training worker panicked")).sum()
    })
}
