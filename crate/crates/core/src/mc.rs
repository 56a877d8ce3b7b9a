//! Seeded, reproducible Monte Carlo plumbing.
//!
//! Every randomised estimate in the crate runs through the batch engine
//! here. Work is split into fixed-size batches of [`BATCH_SIZE`] samples;
//! batch `b` draws from a ChaCha8 generator seeded with the run seed on
//! stream `b`. Batches may execute on any number of rayon workers: integer
//! hit counts are summed (order-free) and floating-point accumulators are
//! reduced in batch order, so identical `(seed, samples)` give bit-identical
//! results regardless of worker count. That fixed partition policy is part
//! of the determinism contract.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed batch size of the deterministic partition policy.
pub const BATCH_SIZE: u64 = 1 << 14;

/// Two-sided 99% Wilson quantile, Phi^-1(0.995).
pub const WILSON_Z99: f64 = 2.575829303548901;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Time step for path-discretising estimators; `None` means the
    /// estimator's documented default.
    pub step: Option<f64>,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self { samples, seed, step: None }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = Some(step);
        self
    }
}

/// A probability estimate with a 99% two-sided Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_hits(hits: u64, samples: u64, seed: u64) -> Self {
        let mean = hits as f64 / samples as f64;
        let (ci_low, ci_high) = wilson_interval(hits, samples, WILSON_Z99);
        Self { mean, ci_low, ci_high, samples, seed }
    }

    pub fn ci_contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    assert!(n > 0, "Wilson interval needs at least one trial");
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2n = z * z / nf;
    let denom = 1.0 + z2n;
    let center = (p + z2n / 2.0) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2n / (4.0 * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// RNG for batch `batch` of the run with the given seed.
pub(crate) fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

pub(crate) struct BatchPlan {
    pub samples: u64,
    pub batches: u64,
}

impl BatchPlan {
    pub fn new(samples: u64) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Precondition("sample count must be positive".into()));
        }
        Ok(Self { samples, batches: samples.div_ceil(BATCH_SIZE) })
    }

    pub fn batch_len(&self, batch: u64) -> u64 {
        if batch + 1 < self.batches {
            BATCH_SIZE
        } else {
            self.samples - batch * BATCH_SIZE
        }
    }
}

/// Count hits of a per-sample predicate over `samples` draws.
pub(crate) fn count_hits<F>(samples: u64, seed: u64, per_sample: F) -> Result<u64>
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let plan = BatchPlan::new(samples)?;
    let hits = (0..plan.batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let mut h = 0u64;
            for _ in 0..plan.batch_len(b) {
                if per_sample(&mut rng) {
                    h += 1;
                }
            }
            h
        })
        .sum();
    Ok(hits)
}

/// Accumulate per-batch partial results and merge them in batch order.
pub(crate) fn accumulate<S, F, M>(samples: u64, seed: u64, per_batch: F, merge: M) -> Result<S>
where
    S: Send + Default,
    F: Fn(&mut ChaCha8Rng, u64) -> S + Sync,
    M: Fn(S, S) -> S,
{
    let plan = BatchPlan::new(samples)?;
    let partials: Vec<S> = (0..plan.batches)
        .into_par_iter()
        .map(|b| per_batch(&mut batch_rng(seed, b), plan.batch_len(b)))
        .collect();
    Ok(partials.into_iter().fold(S::default(), merge))
}
