//! Seeded random stream shared by every generator and sampler.
//!
//! Backed by ChaCha8, whose output is specified bit-for-bit and therefore
//! identical across platforms for a given seed.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a parallel worker: seeded with `seed ^ worker`.
    pub fn for_worker(seed: u64, worker: u64) -> Self {
        Self::new(seed ^ worker)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, low: f64, high: f64) -> f64 {
        low + (high - low) * self.uniform()
    }

    /// Uniform integer in `0..n`. Panics if `n == 0`.
    pub fn index(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn gamma(&mut self, shape: f64) -> Result<f64> {
        let dist = Gamma::new(shape, 1.0).map_err(|e| Error::param(format!("gamma shape {shape}: {e}")))?;
        Ok(dist.sample(&mut self.inner))
    }

    /// Symmetric Dirichlet draw built from normalized Gamma(alpha, 1) variates.
    pub fn dirichlet(&mut self, alpha: f64, len: usize) -> Result<Vec<f64>> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(format!("dirichlet alpha must be > 0, got {alpha}")));
        }
        let dist = Gamma::new(alpha, 1.0).map_err(|e| Error::param(e.to_string()))?;
        loop {
            let mut draws: Vec<f64> = (0..len).map(|_| dist.sample(&mut self.inner)).collect();
            let total: f64 = draws.iter().sum();
            // all-underflow is possible for tiny alpha; redraw
            if total > 0.0 && total.is_finite() {
                draws.iter_mut().for_each(|d| *d /= total);
                return Ok(draws);
            }
        }
    }

    /// Samples an index from a probability row by inverting its CDF.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the final partial sum; take the last supported index
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}
