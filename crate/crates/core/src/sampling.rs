//! Deterministic mini-batch sampling.
//!
//! Every batch is a pure function of `(seed, step, batch_size, n_samples)`.
//! The generator is ChaCha8 keyed by `seed` with the ChaCha stream id set to
//! the step index, so draws never depend on how many batches were sampled
//! before and are stable across platforms.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sorted, distinct sample indices drawn from `[0, n_samples)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Batch {
    indices: Vec<usize>,
}

impl Batch {
    /// The full batch `[0, 1, ..., n - 1]`.
    pub fn full(n_samples: usize) -> Self {
        Self {
            indices: (0..n_samples).collect(),
        }
    }

    /// Builds a batch from explicit indices, checking the batch invariants.
    pub fn from_indices(mut indices: Vec<usize>, n_samples: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::MalformedData("empty batch".into()));
        }
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedData("repeated index in batch".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= n_samples {
                return Err(Error::MalformedData(alloc::format!(
                    "index {last} out of range for {n_samples} samples"
                )));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Generator for one `(seed, step)` pair.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// Draws `batch_size` distinct indices out of `n_samples` without replacement.
///
/// A full-batch request returns all indices in order without touching the
/// generator.
pub fn sample_indices(n_samples: usize, seed: u64, step: u64, batch_size: usize) -> Result<Batch> {
    if batch_size == 0 {
        return Err(crate::error::invalid("batch_size", "must be positive"));
    }
    if batch_size > n_samples {
        return Err(Error::BatchTooLarge {
            requested: batch_size,
            available: n_samples,
        });
    }
    if batch_size == n_samples {
        return Ok(Batch::full(n_samples));
    }
    let mut rng = step_rng(seed, step);
    let mut indices = rand::seq::index::sample(&mut rng, n_samples, batch_size).into_vec();
    indices.sort_unstable();
    Ok(Batch { indices })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_batch_is_ordered() {
        let b = sample_indices(7, 3, 11, 7).unwrap();
        assert_eq!(b.indices(), &[0, 1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn same_seed_and_step_repeat() {
        let a = sample_indices(100, 42, 5, 10).unwrap();
        let b = sample_indices(100, 42, 5, 10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn consecutive_steps_differ() {
        let mut same = 0;
        for step in 0..1000 {
            let a = sample_indices(50, 9, step, 5).unwrap();
            let b = sample_indices(50, 9, step + 1, 5).unwrap();
            if a == b {
                same += 1;
            }
        }
        // P(equal) = 1 / C(50, 5) per pair.
        assert!(same <= 1, "{same} identical consecutive batches");
    }

    #[test]
    fn oversized_batch_is_rejected() {
        assert!(matches!(
            sample_indices(4, 0, 0, 5),
            Err(Error::BatchTooLarge { requested: 5, available: 4 })
        ));
        assert!(sample_indices(4, 0, 0, 0).is_err());
    }

    #[test]
    fn indices_are_valid_and_distinct() {
        for step in 0..200 {
            let b = sample_indices(30, 1, step, 12).unwrap();
            assert_eq!(b.len(), 12);
            assert!(b.indices().windows(2).all(|w| w[0] < w[1]));
            assert!(b.indices().iter().all(|&i| i < 30));
        }
    }

    #[test]
    fn from_indices_validates() {
        assert!(Batch::from_indices(alloc::vec![], 3).is_err());
        assert!(Batch::from_indices(alloc::vec![1, 1], 3).is_err());
        assert!(Batch::from_indices(alloc::vec![3], 3).is_err());
        assert_eq!(Batch::from_indices(alloc::vec![2, 0], 3).unwrap().indices(), &[0, 2]);
    }
}
