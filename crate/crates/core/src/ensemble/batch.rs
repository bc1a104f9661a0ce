use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// i.i.d. uniform draws; what the theory assumes.
    #[default]
    WithReplacement,
    /// Shuffle once per epoch and cut into consecutive batches.
    EpochShuffle,
}

/// Sample indices `S_t` (0-based) drawn for one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
    pub mode: SamplingMode,
}

impl MiniBatch {
    pub fn new(indices: Vec<usize>, mode: SamplingMode) -> Self {
        Self { indices, mode }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn as_batch(&self) -> Batch<'_> {
        Batch::Indices(&self.indices)
    }
}

/// Which samples a gradient is taken over.
#[derive(Debug, Clone, Copy)]
pub enum Batch<'a> {
    /// `S_t = S`, every sample exactly once.
    Full,
    Indices(&'a [usize]),
}

impl<'a> From<&'a MiniBatch> for Batch<'a> {
    fn from(batch: &'a MiniBatch) -> Self {
        batch.as_batch()
    }
}

#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    mode: SamplingMode,
    rng: ChaCha8Rng,
    permutation: Vec<usize>,
    cursor: usize,
}

impl BatchSampler {
    pub fn new(n: usize, mode: SamplingMode, rng: ChaCha8Rng) -> Self {
        Self {
            n,
            mode,
            rng,
            permutation: (0..n).collect(),
            cursor: n,
        }
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Reshuffles for epoch-shuffle sampling; a no-op for i.i.d. sampling.
    pub fn start_epoch(&mut self) {
        if self.mode == SamplingMode::EpochShuffle {
            self.permutation.shuffle(&mut self.rng);
            self.cursor = 0;
        }
    }

    /// Draws the next batch. In epoch-shuffle mode the final batch of an
    /// epoch holds whatever remains (`n − (⌈n/b⌉−1)·b` samples).
    pub fn next_batch(&mut self, batch_size: usize) -> MiniBatch {
        let indices = match self.mode {
            SamplingMode::WithReplacement => (0..batch_size)
                .map(|_| self.rng.random_range(0..self.n))
                .collect(),
            SamplingMode::EpochShuffle => {
                if self.cursor >= self.n {
                    self.start_epoch();
                }
                let end = (self.cursor + batch_size).min(self.n);
                let chunk = self.permutation[self.cursor..end].to_vec();
                self.cursor = end;
                chunk
            }
        };
        MiniBatch::new(indices, self.mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn epoch_shuffle_covers_each_index_once() {
        let mut sampler = BatchSampler::new(10, SamplingMode::EpochShuffle, stream(1, Purpose::Batches));
        for _ in 0..3 {
            sampler.start_epoch();
            let mut seen = Vec::new();
            let steps = 10usize.div_ceil(4);
            for s in 0..steps {
                let batch = sampler.next_batch(4);
                let mut sorted = batch.indices.clone();
                sorted.sort_unstable();
                sorted.dedup();
                assert_eq!(sorted.len(), batch.len(), "duplicate inside a batch");
                assert_eq!(batch.len(), if s + 1 == steps { 2 } else { 4 });
                seen.extend(batch.indices);
            }
            seen.sort_unstable();
            assert_eq!(seen, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn with_replacement_is_roughly_uniform() {
        let mut sampler = BatchSampler::new(5, SamplingMode::WithReplacement, stream(2, Purpose::Batches));
        let mut counts = [0usize; 5];
        for _ in 0..10_000 {
            for i in sampler.next_batch(2).indices {
                counts[i] += 1;
            }
        }
        // 20000 draws, p = 0.2: sd ≈ 56.6
        for c in counts {
            assert!((c as f64 - 4000.0).abs() < 5.0 * 56.6, "{counts:?}");
        }
    }
}
