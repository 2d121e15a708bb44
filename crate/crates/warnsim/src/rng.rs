//! Seeded random streams. Identical (seed, stream) pairs yield identical
//! draw sequences across runs and platforms; every stochastic draw in an
//! episode goes through one of these.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A reproducible random stream identified by (seed, stream id).
#[derive(Debug, Clone)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { seed, stream, rng }
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Sample an index from a discrete distribution given as (item, weight)
    /// pairs; weights must sum to ~1. Returns the last index on rounding
    /// leftovers.
    pub fn pick<'a, T>(&mut self, items: &'a [(T, f64)]) -> &'a T {
        debug_assert!(!items.is_empty());
        let u = self.uniform();
        let mut acc = 0.0;
        for (item, w) in items {
            acc += w;
            if u < acc {
                return item;
            }
        }
        &items.last().expect("non-empty").0
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
