use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMode {
    /// Fresh permutation every epoch; the short final batch is kept.
    Shuffled,
    /// In-order contiguous batches; recurrent state carries across batches.
    Adjacent,
}

impl SamplingMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMode::Shuffled => "shuffled",
            SamplingMode::Adjacent => "adjacent",
        }
    }
}

impl std::str::FromStr for SamplingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "shuffled" => Ok(SamplingMode::Shuffled),
            "adjacent" => Ok(SamplingMode::Adjacent),
            other => Err(Error::InvalidConfig(format!(
                "unknown sampling mode '{other}'"
            ))),
        }
    }
}

/// Produces the minibatch index lists for successive epochs.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    batch_size: usize,
    mode: SamplingMode,
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, mode: SamplingMode, rng: ChaCha8Rng) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        if batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be >= 1".into()));
        }
        Ok(Self {
            n,
            batch_size,
            mode,
            rng,
        })
    }

    /// Whether the training loop should seed each batch's recurrent state
    /// with the final state of the previous batch.
    pub fn carries_state(&self) -> bool {
        self.mode == SamplingMode::Adjacent
    }

    pub fn next_epoch(&mut self) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..self.n).collect();
        if self.mode == SamplingMode::Shuffled {
            order.shuffle(&mut self.rng);
        }
        order
            .chunks(self.batch_size)
            .map(<[usize]>::to_vec)
            .collect()
    }
}

/// Batches for a single epoch.
pub fn make_batches(
    n: usize,
    batch_size: usize,
    mode: SamplingMode,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    let mut sampler = BatchSampler::new(n, batch_size, mode, crate::optim::rng_for(seed, 0))?;
    Ok(sampler.next_epoch())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn shuffled_epoch_shape() {
        let b = make_batches(1000, 32, SamplingMode::Shuffled, 1234).unwrap();
        assert_eq!(b.len(), 32);
        assert!(b[..31].iter().all(|x| x.len() == 32));
        assert_eq!(b[31].len(), 8);
        let mut all: Vec<usize> = b.concat();
        assert_ne!(all, (0..1000).collect::<Vec<_>>());
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn same_seed_same_permutations() {
        let mk = |seed| {
            let mut s = BatchSampler::new(
                100,
                7,
                SamplingMode::Shuffled,
                crate::optim::rng_for(seed, 0),
            )
            .unwrap();
            (s.next_epoch(), s.next_epoch())
        };
        let (a1, a2) = mk(42);
        assert_eq!((a1.clone(), a2.clone()), mk(42));
        assert_ne!(a1, a2);
        assert_ne!(mk(43).0, a1);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            make_batches(0, 32, SamplingMode::Shuffled, 1),
            Err(Error::EmptyBatch)
        ));
        assert!(make_batches(10, 0, SamplingMode::Shuffled, 1).is_err());
    }

    proptest! {
        #[test]
        fn shuffled_covers_every_example_once(n in 1usize..500, bs in 1usize..64, seed: u64) {
            let mut s = BatchSampler::new(n, bs, SamplingMode::Shuffled, crate::optim::rng_for(seed, 0)).unwrap();
            prop_assert!(!s.carries_state());
            for _ in 0..2 {
                let mut all = s.next_epoch().concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }

        #[test]
        fn adjacent_batches_are_contiguous(n in 1usize..500, bs in 1usize..64) {
            let mut s = BatchSampler::new(n, bs, SamplingMode::Adjacent, crate::optim::rng_for(0, 0)).unwrap();
            prop_assert!(s.carries_state());
            let batches = s.next_epoch();
            prop_assert_eq!(batches[0][0], 0);
            for w in batches.windows(2) {
                prop_assert_eq!(w[1][0], *w[0].last().unwrap() + 1);
            }
            for b in &batches {
                for p in b.windows(2) {
                    prop_assert_eq!(p[1], p[0] + 1);
                }
            }
        }
    }
}
