use rand::seq::SliceRandom;

use crate::error::{Error, Result};

use super::{rng_from_seed, Minibatch, Rng};

/// Seeded without-replacement minibatch sampler.
///
/// Each epoch walks a fresh permutation. A trailing batch that would be
/// shorter than `B` is dropped and the next epoch starts instead.
#[derive(Debug, Clone)]
pub struct SamplerState {
    seed: u64,
    rng: Rng,
    permutation: Vec<usize>,
    cursor: usize,
    epoch: u64,
}

impl SamplerState {
    pub fn new(seed: u64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "cannot sample from an empty dataset"));
        }
        let mut rng = rng_from_seed(seed);
        let mut permutation: Vec<usize> = (0..n).collect();
        permutation.shuffle(&mut rng);
        Ok(Self { seed, rng, permutation, cursor: 0, epoch: 0 })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of completed epochs.
    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn next_batch(&mut self, batch_size: usize) -> Result<Minibatch> {
        let n = self.permutation.len();
        if batch_size == 0 || batch_size > n {
            return Err(Error::invalid("batch_size", format!("must lie in [1, {n}], got {batch_size}")));
        }
        if self.cursor + batch_size > n {
            self.permutation.shuffle(&mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
        }
        let indices = self.permutation[self.cursor..self.cursor + batch_size].to_vec();
        self.cursor += batch_size;
        Ok(Minibatch { indices })
    }
}

/// Functional form: returns the batch together with the advanced state.
pub fn next_batch(mut state: SamplerState, batch_size: usize) -> Result<(Minibatch, SamplerState)> {
    let batch = state.next_batch(batch_size)?;
    Ok((batch, state))
}
