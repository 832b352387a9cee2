//! Mini-batch training driver.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adam::{Adam, AdamConfig};
use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::grad::gradient;
use crate::matrix::Matrix;
use crate::model::WeteModel;

/// Consecutive epochs above the loss ceiling tolerated before aborting.
pub const DIVERGENCE_PATIENCE: usize = 3;
/// Ceiling on the epoch-mean loss, as a multiple of the first epoch's.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Seeds both the per-epoch shuffle and the Weibull noise.
    pub seed: u64,
    /// Call the epoch callback every `log_every` epochs (and on the last).
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 200,
            epochs: 50,
            lr: 1e-3,
            seed: 0,
            log_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be at least 1"));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidArgument("log_every must be at least 1"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::InvalidArgument("lr must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Batch-averaged objective terms for one epoch (1-based).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_ct: f64,
    pub mean_nll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    pub steps: usize,
}

/// Trains `model` in place.
///
/// On divergence the model is restored to the state at the end of the last
/// epoch whose loss was acceptable and [`Error::Divergence`] is returned.
pub fn train<F>(corpus: &Corpus, model: &mut WeteModel, cfg: &TrainConfig, mut on_epoch: F) -> Result<TrainReport>
where
    F: FnMut(&EpochLog, &WeteModel),
{
    cfg.validate()?;
    let docs: Vec<&Document> = corpus.documents().iter().filter(|d| !d.is_empty()).collect();
    if docs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let k_topics = model.num_topics();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut order: Vec<usize> = (0..docs.len()).collect();
    let mut last_good = model.clone();
    let mut ceiling = f64::INFINITY;
    let mut streak = 0;
    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        steps: 0,
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut ct, mut nll) = (0.0, 0.0, 0.0);
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Document> = chunk.iter().map(|&i| docs[i]).collect();
            let noise = Matrix::from_vec(
                batch.len(),
                k_topics,
                (0..batch.len() * k_topics).map(|_| rng.random::<f64>()).collect(),
            )?;
            let step = gradient(model, &batch, &noise).and_then(|(value, grads)| {
                let finite = grads.iter().all(|(_, g)| g.iter().all(|x| x.is_finite()));
                if finite { Ok((value, grads)) } else { Err(Error::NonFinite) }
            });
            let (value, grads) = match step {
                Ok(v) => v,
                Err(Error::NonFinite) => {
                    *model = last_good;
                    return Err(Error::Divergence { epoch });
                }
                Err(e) => return Err(e),
            };
            opt.step(model, &grads)?;
            report.steps += 1;
            batches += 1;
            loss += value.loss;
            ct += value.ct;
            nll += value.nll;
        }
        let n = batches as f64;
        let log = EpochLog {
            epoch,
            mean_loss: loss / n,
            mean_ct: ct / n,
            mean_nll: nll / n,
        };
        if epoch == 1 {
            ceiling = DIVERGENCE_FACTOR * log.mean_loss.abs().max(1.0);
        }
        if !log.mean_loss.is_finite() || !model.topics.alpha().is_finite() {
            *model = last_good;
            return Err(Error::Divergence { epoch });
        }
        if log.mean_loss > ceiling {
            streak += 1;
            if streak >= DIVERGENCE_PATIENCE {
                *model = last_good;
                return Err(Error::Divergence { epoch });
            }
        } else {
            streak = 0;
            last_good = model.clone();
        }
        report.epochs.push(log);
        if epoch % cfg.log_every == 0 || epoch == cfg.epochs {
            on_epoch(&log, model);
        }
    }
    Ok(report)
}
