//! Sharded Monte-Carlo engine.
//!
//! Sample indices are split evenly across shards. Shard `s` draws from a
//! ChaCha12 generator seeded with the master seed and switched to stream `s`,
//! so results depend only on `(seed, shards, n_samples)`, never on thread
//! scheduling. Per-shard accumulators are merged by a fixed pairwise tree.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator used for every Monte-Carlo draw.
pub type McRng = ChaCha12Rng;

/// Identifier recorded in reports.
pub const RNG_ALGORITHM: &str = "chacha12 (seed_from_u64(seed), stream = shard id)";

/// Acceptance factor applied to standard errors in statistical checks.
pub const SIGMA_FACTOR: f64 = 5.0;

/// The generator for one shard.
pub fn shard_rng(seed: u64, shard: usize) -> McRng {
    let mut rng = McRng::seed_from_u64(seed);
    rng.set_stream(shard as u64);
    rng
}

/// Sample budget and seeding for one Monte-Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_samples: usize,
    pub seed: u64,
    pub shards: usize,
}

impl McConfig {
    pub fn new(n_samples: usize, seed: u64, shards: usize) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::invalid("n_samples must be positive"));
        }
        if shards == 0 {
            return Err(Error::invalid("shards must be positive"));
        }
        Ok(Self { n_samples, seed, shards })
    }

    /// Same seed and shards with a different sample count.
    pub fn with_samples(self, n_samples: usize) -> Self {
        Self { n_samples, ..self }
    }

    /// Number of samples assigned to `shard`.
    pub fn shard_len(&self, shard: usize) -> usize {
        let base = self.n_samples / self.shards;
        base + usize::from(shard < self.n_samples % self.shards)
    }
}

/// Running mean and (co)variance of a vector statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    n: u64,
    mean: DVector<f64>,
    /// Sum of centered outer products, or only its diagonal when `full` is false.
    comoment: DMatrix<f64>,
    full: bool,
}

impl Accumulator {
    pub fn new(dim: usize, full_covariance: bool) -> Self {
        let comoment = if full_covariance { DMatrix::zeros(dim, dim) } else { DMatrix::zeros(dim, 1) };
        Self { n: 0, mean: DVector::zeros(dim), comoment, full: full_covariance }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim());
        self.n += 1;
        let n = self.n as f64;
        let delta: DVector<f64> = DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
        self.mean.axpy(1.0 / n, &delta, 1.0);
        if self.full {
            let delta2: DVector<f64> =
                DVector::from_iterator(x.len(), x.iter().zip(self.mean.iter()).map(|(a, m)| a - m));
            self.comoment.ger(1.0, &delta, &delta2, 1.0);
        } else {
            for i in 0..x.len() {
                self.comoment[(i, 0)] += delta[i] * (x[i] - self.mean[i]);
            }
        }
    }

    /// Chan et al. parallel combination.
    pub fn merge(mut self, other: &Accumulator) -> Self {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other.clone();
        }
        let na = self.n as f64;
        let nb = other.n as f64;
        let n = na + nb;
        let delta = &other.mean - &self.mean;
        self.mean.axpy(nb / n, &delta, 1.0);
        let w = na * nb / n;
        if self.full {
            self.comoment += &other.comoment;
            self.comoment.ger(w, &delta, &delta, 1.0);
        } else {
            for i in 0..delta.len() {
                self.comoment[(i, 0)] += other.comoment[(i, 0)] + w * delta[i] * delta[i];
            }
        }
        self.n += other.n;
        self
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.mean[i]
    }

    pub fn means(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Unbiased sample variance of slot `i`.
    pub fn variance(&self, i: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let c = if self.full { self.comoment[(i, i)] } else { self.comoment[(i, 0)] };
        (c / (self.n - 1) as f64).max(0.0)
    }

    /// Unbiased sample covariance; requires full tracking unless `i == j`.
    pub fn covariance(&self, i: usize, j: usize) -> Result<f64> {
        if i == j {
            return Ok(self.variance(i));
        }
        if !self.full {
            return Err(Error::invalid("accumulator does not track cross covariances"));
        }
        if self.n < 2 {
            return Ok(0.0);
        }
        Ok(self.comoment[(i, j)] / (self.n - 1) as f64)
    }

    /// Standard error of the mean of slot `i`.
    pub fn stderr(&self, i: usize) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        (self.variance(i) / self.n as f64).sqrt()
    }

    /// Standard error of `Σ_i w_i · mean_i`.
    pub fn linear_stderr(&self, weights: &[f64]) -> Result<f64> {
        if self.n == 0 {
            return Ok(0.0);
        }
        let mut var = 0.0;
        for (i, &wi) in weights.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for (j, &wj) in weights.iter().enumerate() {
                if wj != 0.0 {
                    var += wi * wj * self.covariance(i, j)?;
                }
            }
        }
        Ok((var.max(0.0) / self.n as f64).sqrt())
    }
}

fn tree_reduce(mut parts: Vec<Accumulator>) -> Accumulator {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(&b)),
                None => next.push(a),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one shard")
}

/// Runs `sampler` `cfg.n_samples` times across shards. Each call writes one
/// `dim`-vector statistic into the provided buffer.
pub fn run_sharded<S>(cfg: &McConfig, dim: usize, full_covariance: bool, sampler: S) -> Result<Accumulator>
where
    S: Fn(&mut McRng, &mut [f64]) -> Result<()> + Sync,
{
    if cfg.shards == 0 || cfg.n_samples == 0 {
        return Err(Error::invalid("Monte-Carlo run needs positive samples and shards"));
    }
    let parts = (0..cfg.shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(cfg.seed, shard);
            let mut acc = Accumulator::new(dim, full_covariance);
            let mut buf = vec![0.0; dim];
            for _ in 0..cfg.shard_len(shard) {
                sampler(&mut rng, &mut buf)?;
                if let Some(bad) = buf.iter().position(|v| !v.is_finite()) {
                    return Err(Error::invalid(format!("non-finite Monte-Carlo statistic in slot {bad}")));
                }
                acc.push(&buf);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tree_reduce(parts))
}

/// Draws `cfg.n_samples` vectors, concatenated in shard order.
pub fn collect_sharded<S>(cfg: &McConfig, sampler: S) -> Result<Vec<Vec<f64>>>
where
    S: Fn(&mut McRng) -> Result<Vec<f64>> + Sync,
{
    if cfg.shards == 0 || cfg.n_samples == 0 {
        return Err(Error::invalid("Monte-Carlo run needs positive samples and shards"));
    }
    let parts = (0..cfg.shards)
        .into_par_iter()
        .map(|shard| {
            let mut rng = shard_rng(cfg.seed, shard);
            (0..cfg.shard_len(shard)).map(|_| sampler(&mut rng)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Result of a scalar Monte-Carlo estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub estimator: String,
    pub n_samples: usize,
    pub seed: u64,
    pub shards: usize,
    pub value: f64,
    pub stderr: f64,
    pub rng: String,
    pub sigma_factor: f64,
    #[serde(flatten, default, skip_serializing_if = "serde_json::Map::is_empty")]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl McReport {
    pub fn new(estimator: impl Into<String>, cfg: &McConfig, value: f64, stderr: f64) -> Self {
        Self {
            estimator: estimator.into(),
            n_samples: cfg.n_samples,
            seed: cfg.seed,
            shards: cfg.shards,
            value,
            stderr,
            rng: RNG_ALGORITHM.to_string(),
            sigma_factor: SIGMA_FACTOR,
            extra: serde_json::Map::new(),
        }
    }

    pub fn with_extra(mut self, key: &str, value: serde_json::Value) -> Self {
        self.extra.insert(key.to_string(), value);
        self
    }

    /// Whether `target` lies within `k` standard errors of the estimate.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}
