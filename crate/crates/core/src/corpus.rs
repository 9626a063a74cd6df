//! Seeded random test corpora of symmetric kernels and chaos expansions.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::chaos::exact_covariance;
use crate::error::{Error, Result};
use crate::mc::McRng;
use crate::operator::{OperatorMatrix, Truncation};
use crate::tensor::{binomial, factorial, ChaosExpansion, Index, Kernel, ScalarKernel};

/// Upper limit on the number of multisets drawn per component.
pub const MAX_TERMS: usize = 8;

fn multiset_from_rank(mut rank: usize, p: usize, d: usize) -> Vec<Index> {
    // lexicographic unranking of nondecreasing tuples over 0..d
    let mut out = Vec::with_capacity(p);
    let mut lo = 0usize;
    for slot in 0..p {
        let left = p - slot - 1;
        let mut j = lo;
        loop {
            let count = binomial(d - j - 1 + left, left) as usize;
            if rank < count {
                break;
            }
            rank -= count;
            j += 1;
        }
        out.push(j as Index);
        lo = j;
    }
    out
}

/// Random order-`p` kernel on `d` coordinates with `I_p(f)` of unit variance.
pub fn random_scalar_kernel<R: Rng + ?Sized>(p: usize, d: usize, rng: &mut R) -> Result<ScalarKernel> {
    if p == 0 || d == 0 {
        return Err(Error::invalid("random kernels need p >= 1 and d >= 1"));
    }
    let total = binomial(d + p - 1, p) as usize;
    let terms = rng.random_range(1..=total.min(MAX_TERMS));
    let picks = sample(rng, total, terms);
    let entries: Vec<(Vec<Index>, f64)> =
        picks.iter().map(|r| (multiset_from_rank(r, p, d), rng.sample::<f64, _>(StandardNormal))).collect();
    let g = ScalarKernel::from_multisets(p, d, entries)?;
    let var = factorial(p) * g.norm_sq();
    if var == 0.0 {
        return random_scalar_kernel(p, d, rng);
    }
    Ok(g.scale(var.sqrt().recip()))
}

/// Random vector kernel with `m` components, each of unit variance.
pub fn random_kernel<R: Rng + ?Sized>(p: usize, d: usize, m: usize, rng: &mut R) -> Result<Kernel> {
    let comps = (0..m).map(|_| random_scalar_kernel(p, d, rng)).collect::<Result<Vec<_>>>()?;
    Kernel::new(p, Truncation::new(d, m)?, comps)
}

/// `count` scalar kernels with `p ∈ {2, 3, 4}` and `d ∈ {2, …, 6}`.
pub fn scalar_corpus(seed: u64, count: usize) -> Result<Vec<ScalarKernel>> {
    let mut rng = McRng::seed_from_u64(seed);
    (0..count)
        .map(|k| random_scalar_kernel(2 + k % 3, rng.random_range(2..=6), &mut rng))
        .collect()
}

/// A corpus entry: an expansion and a Gaussian target covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusCase {
    pub name: String,
    pub expansion: ChaosExpansion,
    pub target: OperatorMatrix,
}

/// Parameters recorded alongside a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifestEntry {
    pub name: String,
    pub orders: Vec<usize>,
    pub hdim: usize,
    #[serde(rename = "Hdim")]
    pub big_hdim: usize,
}

impl CorpusCase {
    pub fn manifest(&self) -> CorpusManifestEntry {
        let t = self.expansion.truncation();
        CorpusManifestEntry { name: self.name.clone(), orders: self.expansion.orders(), hdim: t.hdim, big_hdim: t.big_hdim }
    }
}

/// Simulable expansions with Gaussian targets: fixed-chaos cases targeting
/// their own covariance, two-order cases, and cases whose target is the
/// identity instead of the true covariance.
pub fn expansion_corpus(seed: u64, count: usize) -> Result<Vec<CorpusCase>> {
    let mut rng = McRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let d = rng.random_range(2..=5);
        let m = rng.random_range(1..=3);
        let trunc = Truncation::new(d, m)?;
        let (name, expansion) = match k % 4 {
            0 | 2 | 3 => {
                let p = [1, 0, 2, 3][k % 4];
                let f = random_kernel(p, d, m, &mut rng)?;
                (format!("fixed_p{p}_{k}"), ChaosExpansion::from_kernels(trunc, [f])?)
            }
            _ => {
                let f1 = random_kernel(1, d, m, &mut rng)?.scale(0.8);
                let f2 = random_kernel(2, d, m, &mut rng)?.scale(0.6);
                (format!("mixed_{k}"), ChaosExpansion::from_kernels(trunc, [f1, f2])?)
            }
        };
        let target = if k % 5 == 4 { OperatorMatrix::identity(m) } else { exact_covariance(&expansion) };
        out.push(CorpusCase { name, expansion, target });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn unranking_enumerates_all_multisets() {
        for (p, d) in [(1, 3), (2, 3), (3, 4), (4, 2)] {
            let total = binomial(d + p - 1, p) as usize;
            let all: BTreeSet<Vec<Index>> = (0..total).map(|r| multiset_from_rank(r, p, d)).collect();
            assert_eq!(all.len(), total);
            assert!(all.iter().all(|k| k.windows(2).all(|w| w[0] <= w[1]) && k.iter().all(|&j| (j as usize) < d)));
        }
    }

    #[test]
    fn corpus_is_seeded_and_normalized() {
        let a = scalar_corpus(3, 12).unwrap();
        assert_eq!(a, scalar_corpus(3, 12).unwrap());
        for g in &a {
            assert!((factorial(g.order()) * g.norm_sq() - 1.0).abs() < 1e-12);
        }
        let c = expansion_corpus(1, 10).unwrap();
        assert_eq!(c.len(), 10);
        assert!(c.iter().all(|case| case.target.dim() == case.expansion.truncation().big_hdim));
    }
}
