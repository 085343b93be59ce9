use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{loss_and_gradients, SrcnnWeights, TrainPair};
use crate::error::{ensure, Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning rate must be positive, got {}",
            self.learning_rate
        );
        ensure!(self.batch_size >= 1, "batch size must be >= 1");
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: SrcnnWeights,
    /// Batch loss before each update.
    pub losses: Vec<f64>,
}

/// Epoch-wise shuffled index stream; reshuffles once every index is used.
struct BatchSampler {
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    fn new(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Self { order, cursor: 0, rng }
    }

    fn next_batch(&mut self, size: usize, out: &mut Vec<usize>) {
        out.clear();
        while out.len() < size {
            if self.cursor == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(self.order[self.cursor]);
            self.cursor += 1;
        }
    }
}

/// Plain minibatch SGD, `w <- w - lr * grad`, for exactly `cfg.steps` steps.
/// Deterministic in `(w0, data, cfg)`.
pub fn train(w0: &SrcnnWeights, data: &[TrainPair], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    ensure!(!data.is_empty(), "training data is empty");
    let mut weights = w0.clone();
    let mut losses = Vec::with_capacity(cfg.steps);
    let mut sampler = BatchSampler::new(data.len(), cfg.seed);
    let mut idx = Vec::with_capacity(cfg.batch_size);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for step in 0..cfg.steps {
        sampler.next_batch(cfg.batch_size, &mut idx);
        batch.clear();
        batch.extend(idx.iter().map(|&i| data[i].clone()));
        let (loss, grads) = loss_and_gradients(&weights, &batch)?;
        if !loss.is_finite() || !grads.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        weights.add_scaled(&grads, -cfg.learning_rate);
        if !weights.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        losses.push(loss);
        if (step + 1) % 100 == 0 {
            log::debug!("step {}/{}: loss {loss:.6e}", step + 1, cfg.steps);
        }
    }
    Ok(TrainOutcome { weights, losses })
}
