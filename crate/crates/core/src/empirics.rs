//! Sample-side estimators: dictionary lower bounds on `d₂`, the Stein gap,
//! moment estimates and the polarization identity for quartic forms.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::{eval_expansion, gamma_sample, sample_isonormal};
use crate::error::{Error, Result};
use crate::mc::{collect_sharded, run_sharded, McConfig, McReport, McRng};
use crate::operator::OperatorMatrix;
use crate::tensor::ChaosExpansion;

/// Identifier of the only normalization rule in use.
pub const NORMALIZATION: &str = "cos(<x,a>+b)/(1+|a|+|a|^2)";

/// Radii used by the default dictionary.
pub const DEFAULT_RADII: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Random unit directions added to the basis directions in the default dictionary.
pub const DEFAULT_RANDOM_DIRECTIONS: usize = 16;

/// One test function `x ↦ cos(⟨x, a⟩ + b) / (1 + ‖a‖ + ‖a‖²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestDirection {
    pub a: Vec<f64>,
    pub b: f64,
}

impl TestDirection {
    fn norm(&self) -> f64 {
        self.a.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `1 / (1 + ‖a‖ + ‖a‖²)`.
    pub fn amplitude(&self) -> f64 {
        let n = self.norm();
        1.0 / (1.0 + n + n * n)
    }

    /// `sup|h| + sup‖Dh‖ + sup‖D²h‖`.
    pub fn derivative_budget(&self) -> f64 {
        let n = self.norm();
        self.amplitude() * (1.0 + n + n * n)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let dot: f64 = self.a.iter().zip(x).map(|(a, x)| a * x).sum();
        (dot + self.b).cos() * self.amplitude()
    }

    /// `E h(Z)` for `Z ~ N(μ, Σ)`: `A e^{-aᵀΣa/2} cos(⟨μ, a⟩ + b)`.
    pub fn gaussian_expectation(&self, mean: &[f64], cov: &OperatorMatrix) -> f64 {
        let a = DVector::from_column_slice(&self.a);
        let q = (a.transpose() * cov.matrix() * &a)[(0, 0)];
        let shift: f64 = self.a.iter().zip(mean).map(|(a, m)| a * m).sum();
        self.amplitude() * (-0.5 * q).exp() * (shift + self.b).cos()
    }
}

/// A finite family of admissible test functions on `ℝ^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionDictionary {
    pub dim: usize,
    pub entries: Vec<TestDirection>,
    pub normalization: String,
}

impl TestFunctionDictionary {
    pub fn new(dim: usize, entries: Vec<TestDirection>) -> Result<Self> {
        for (k, e) in entries.iter().enumerate() {
            if e.a.len() != dim {
                return Err(Error::DimensionMismatch { what: "direction length", expected: dim, got: e.a.len() });
            }
            if !e.b.is_finite() || e.a.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("dictionary entry {k} is not finite")));
            }
            if e.derivative_budget() > 1.0 + 1e-12 {
                return Err(Error::invalid(format!("dictionary entry {k} violates the derivative budget")));
            }
        }
        Ok(Self { dim, entries, normalization: NORMALIZATION.to_string() })
    }

    /// Radii `{0.25, 0.5, 1, 2}` times (basis vectors plus 16 seeded random
    /// unit vectors), each with phases `0` and `π/2`.
    pub fn default_for(dim: usize, seed: u64) -> Result<Self> {
        let mut rng = McRng::seed_from_u64(seed);
        let mut dirs: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut v = vec![0.0; dim];
                v[i] = 1.0;
                v
            })
            .collect();
        for _ in 0..DEFAULT_RANDOM_DIRECTIONS {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
                dirs.push(v);
            }
        }
        let mut entries = Vec::with_capacity(DEFAULT_RADII.len() * dirs.len() * 2);
        for rho in DEFAULT_RADII {
            for v in &dirs {
                for b in [0.0, FRAC_PI_2] {
                    entries.push(TestDirection { a: v.iter().map(|x| rho * x).collect(), b });
                }
            }
        }
        Self::new(dim, entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A dictionary lower bound on `d₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub stderr: f64,
    pub argmax_entry: usize,
    pub dictionary_size: usize,
}

fn mean_var(vals: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for v in vals {
        n += 1;
        let d = v - mean;
        mean += d / n as f64;
        m2 += d * (v - mean);
    }
    let var = if n > 1 { m2 / (n - 1) as f64 } else { 0.0 };
    (mean, var, n)
}

/// `max_h |mean h(F) - mean h(Z)|` over the dictionary; ties go to the lowest index.
pub fn d2_lower_bound(
    samples_f: &[Vec<f64>],
    samples_z: &[Vec<f64>],
    dict: &TestFunctionDictionary,
) -> Result<LowerBound> {
    if samples_f.is_empty() || samples_z.is_empty() || dict.is_empty() {
        return Err(Error::invalid("d2 lower bound needs nonempty samples and dictionary"));
    }
    for s in samples_f.iter().chain(samples_z) {
        if s.len() != dict.dim {
            return Err(Error::DimensionMismatch { what: "sample length", expected: dict.dim, got: s.len() });
        }
    }
    let gaps: Vec<(f64, f64)> = dict
        .entries
        .par_iter()
        .map(|h| {
            let (mf, vf, nf) = mean_var(samples_f.iter().map(|x| h.eval(x)));
            let (mz, vz, nz) = mean_var(samples_z.iter().map(|x| h.eval(x)));
            ((mf - mz).abs(), (vf / nf as f64 + vz / nz as f64).sqrt())
        })
        .collect();
    let best = gaps.iter().enumerate().fold(0, |b, (k, g)| if g.0 > gaps[b].0 { k } else { b });
    Ok(LowerBound {
        value: gaps[best].0,
        stderr: gaps[best].1,
        argmax_entry: best,
        dictionary_size: dict.len(),
    })
}

impl LowerBound {
    pub fn to_report(&self, estimator: &str, cfg: &McConfig) -> McReport {
        McReport::new(estimator, cfg, self.value, self.stderr)
            .with_extra("dictionary_size", self.dictionary_size.into())
            .with_extra("argmax_entry", self.argmax_entry.into())
    }
}

/// Factor `L` with `L Lᵀ = T` from the symmetric eigendecomposition, negative
/// eigenvalues floored at zero.
pub fn spectral_factor(t: &OperatorMatrix) -> DMatrix<f64> {
    let sym = (t.matrix() + t.matrix().transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let scales = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    eig.eigenvectors * DMatrix::from_diagonal(&scales)
}

/// Draws from `N(0, T)`.
pub fn sample_gaussian(t: &OperatorMatrix, cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    let l = spectral_factor(t);
    let m = t.dim();
    collect_sharded(cfg, |rng| {
        let xi = DVector::from_iterator(m, (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)));
        Ok((&l * xi).as_slice().to_vec())
    })
}

/// Draws realizations of the expansion.
pub fn sample_expansion(f: &ChaosExpansion, cfg: &McConfig) -> Result<Vec<Vec<f64>>> {
    let d = f.truncation().hdim;
    collect_sharded(cfg, |rng| eval_expansion(f, &sample_isonormal(d, rng)))
}

/// MC estimate of `(1/2) E ‖Γ(F, -L⁻¹F) - T_Z‖_{𝒮₁}`.
pub fn mc_stein_gap(f: &ChaosExpansion, t_z: &OperatorMatrix, cfg: &McConfig) -> Result<McReport> {
    let trunc = f.truncation();
    if t_z.dim() != trunc.big_hdim {
        return Err(Error::DimensionMismatch { what: "target dim", expected: trunc.big_hdim, got: t_z.dim() });
    }
    let acc = run_sharded(cfg, 1, false, |rng, out| {
        let xi = sample_isonormal(trunc.hdim, rng);
        let g = gamma_sample(f, &xi)?;
        out[0] = 0.5 * g.matrix.sub(t_z)?.trace_norm();
        Ok(())
    })?;
    Ok(McReport::new("stein_gap", cfg, acc.mean(0), acc.stderr(0)))
}

/// A sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Coordinate moments of an expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub second: Vec<Estimate>,
    pub fourth: Vec<Estimate>,
    /// Row-major `m × m` estimate of `E[F_i F_j]`.
    pub covariance: Vec<f64>,
    pub covariance_stderr: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    pub shards: usize,
}

impl MomentReport {
    pub fn covariance(&self, i: usize, j: usize) -> Estimate {
        let m = self.second.len();
        Estimate { value: self.covariance[i * m + j], stderr: self.covariance_stderr[i * m + j] }
    }
}

/// Sample second and fourth moments per coordinate plus the covariance matrix.
pub fn mc_moments(f: &ChaosExpansion, cfg: &McConfig) -> Result<MomentReport> {
    let trunc = f.truncation();
    let m = trunc.big_hdim;
    let n_pairs = m * (m + 1) / 2;
    let acc = run_sharded(cfg, m + n_pairs, false, |rng, out| {
        let x = eval_expansion(f, &sample_isonormal(trunc.hdim, rng))?;
        for i in 0..m {
            out[i] = x[i].powi(4);
        }
        let mut k = m;
        for i in 0..m {
            for j in i..m {
                out[k] = x[i] * x[j];
                k += 1;
            }
        }
        Ok(())
    })?;
    let mut covariance = vec![0.0; m * m];
    let mut covariance_stderr = vec![0.0; m * m];
    let mut second = Vec::with_capacity(m);
    let mut k = m;
    for i in 0..m {
        for j in i..m {
            for (a, b) in [(i, j), (j, i)] {
                covariance[a * m + b] = acc.mean(k);
                covariance_stderr[a * m + b] = acc.stderr(k);
            }
            if i == j {
                second.push(Estimate { value: acc.mean(k), stderr: acc.stderr(k) });
            }
            k += 1;
        }
    }
    let fourth = (0..m).map(|i| Estimate { value: acc.mean(i), stderr: acc.stderr(i) }).collect();
    Ok(MomentReport {
        second,
        fourth,
        covariance,
        covariance_stderr,
        n_samples: cfg.n_samples,
        seed: cfg.seed,
        shards: cfg.shards,
    })
}

/// Recovers the symmetric multilinear form `M(x₁, x₂, x₃, x₄)` from the quartic
/// `R(u) = M(u, u, u, u)`:
/// `M = (1/24) Σ_{r=1}^{4} (-1)^{4-r} Σ_{|S|=r} R(Σ_{j∈S} x_j)`.
pub fn polarized_weak_moment(quartic: impl Fn(&[f64]) -> f64, x: [&[f64]; 4]) -> Result<f64> {
    let m = x[0].len();
    if x.iter().any(|v| v.len() != m) {
        return Err(Error::invalid("polarization vectors must share a dimension"));
    }
    let mut total = 0.0;
    for mask in 1u32..16 {
        let r = mask.count_ones();
        let mut u = vec![0.0; m];
        for (j, xj) in x.iter().enumerate() {
            if mask & (1 << j) != 0 {
                u.iter_mut().zip(xj.iter()).for_each(|(a, b)| *a += b);
            }
        }
        let sign = if (4 - r) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * quartic(&u);
    }
    Ok(total / 24.0)
}

/// `u ↦ E⟨Z, u⟩⁴ = 3 (uᵀ T u)²` for `Z ~ N(0, T)`.
pub fn gaussian_quartic(t: &OperatorMatrix) -> impl Fn(&[f64]) -> f64 + '_ {
    move |u: &[f64]| {
        let v = DVector::from_column_slice(u);
        let q = (v.transpose() * t.matrix() * &v)[(0, 0)];
        3.0 * q * q
    }
}

/// Outcome of comparing a lower estimate against an upper estimate with error bars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichCheck {
    pub lower: f64,
    pub lower_stderr: f64,
    pub upper: f64,
    pub upper_stderr: f64,
    pub k_sigma: f64,
    pub holds: bool,
    pub reran: bool,
}

/// Checks `lower - kσ_l <= upper + kσ_u`. When the first evaluation fails, the
/// estimators are rerun once with 4× the samples before the failure stands.
pub fn sandwich_with_rerun(
    cfg: &McConfig,
    k_sigma: f64,
    eval: impl Fn(&McConfig) -> Result<(Estimate, Estimate)>,
) -> Result<SandwichCheck> {
    let check = |lo: Estimate, up: Estimate, reran| SandwichCheck {
        lower: lo.value,
        lower_stderr: lo.stderr,
        upper: up.value,
        upper_stderr: up.stderr,
        k_sigma,
        holds: lo.value - k_sigma * lo.stderr <= up.value + k_sigma * up.stderr,
        reran,
    };
    let (lo, up) = eval(cfg)?;
    let first = check(lo, up, false);
    if first.holds {
        return Ok(first);
    }
    let (lo, up) = eval(&cfg.with_samples(cfg.n_samples * 4))?;
    Ok(check(lo, up, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Truncation;
    use crate::tensor::{Kernel, ScalarKernel};

    #[test]
    fn default_dictionary_is_admissible() {
        let d = TestFunctionDictionary::default_for(3, 1).unwrap();
        assert_eq!(d.len(), 4 * (3 + 16) * 2);
        for e in &d.entries {
            assert!(e.derivative_budget() <= 1.0 + 1e-12);
        }
        let bad = TestDirection { a: vec![1.0], b: 0.0 };
        let mut too_big = bad.clone();
        too_big.a[0] = f64::NAN;
        assert!(TestFunctionDictionary::new(1, vec![bad]).is_ok());
        assert!(TestFunctionDictionary::new(1, vec![too_big]).is_err());
    }

    #[test]
    fn identical_samples_give_zero() {
        let cfg = McConfig::new(500, 2, 2).unwrap();
        let s = sample_gaussian(&OperatorMatrix::identity(2), &cfg).unwrap();
        let d = TestFunctionDictionary::default_for(2, 0).unwrap();
        let lb = d2_lower_bound(&s, &s, &d).unwrap();
        assert_eq!(lb.value, 0.0);
        assert_eq!(lb.argmax_entry, 0);
        assert!(d2_lower_bound(&[], &s, &d).is_err());
    }

    #[test]
    fn spectral_factor_reproduces_covariance() {
        let t = OperatorMatrix::from_row_major(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let l = spectral_factor(&t);
        assert!((&l * l.transpose() - t.matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn polarization_examples() {
        let t = OperatorMatrix::identity(2);
        let q = gaussian_quartic(&t);
        let u = [0.3, -1.2];
        assert!((polarized_weak_moment(&q, [&u, &u, &u, &u]).unwrap() - q(&u)).abs() < 1e-12);
        let (e1, e2) = ([1.0, 0.0], [0.0, 1.0]);
        let v = polarized_weak_moment(&q, [&e1, &e1, &e2, &e2]).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
        let x = [[0.2, 0.7], [1.0, -0.4], [-0.3, 0.5], [0.9, 0.1]];
        let base = polarized_weak_moment(&q, [&x[0], &x[1], &x[2], &x[3]]).unwrap();
        for c in [-1.0, 2.0] {
            let scaled = [c * x[0][0], c * x[0][1]];
            let v = polarized_weak_moment(&q, [&scaled, &x[1], &x[2], &x[3]]).unwrap();
            assert!((v - c * base).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_expansion_has_zero_moments() {
        let f = ChaosExpansion::new(Truncation::new(2, 2).unwrap());
        let r = mc_moments(&f, &McConfig::new(100, 1, 2).unwrap()).unwrap();
        assert!(r.second.iter().chain(&r.fourth).all(|e| e.value == 0.0 && e.stderr == 0.0));
        assert!(r.covariance.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn first_chaos_stein_gap_vanishes() {
        let t = Truncation::new(2, 2).unwrap();
        let k = Kernel::new(
            1,
            t,
            vec![
                ScalarKernel::basis_product(2, &[0]).unwrap(),
                ScalarKernel::basis_product(2, &[1]).unwrap().scale(0.5),
            ],
        )
        .unwrap();
        let f = ChaosExpansion::from_kernels(t, [k]).unwrap();
        let tz = crate::chaos::exact_covariance(&f);
        let r = mc_stein_gap(&f, &tz, &McConfig::new(200, 3, 2).unwrap()).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn sandwich_reruns_once_with_more_samples() {
        use std::cell::RefCell;
        let cfg = McConfig::new(100, 1, 1).unwrap();
        let seen = RefCell::new(Vec::new());
        let est = |v| Estimate { value: v, stderr: 0.01 };
        let failing = sandwich_with_rerun(&cfg, 3.0, |c| {
            seen.borrow_mut().push(c.n_samples);
            Ok((est(1.0), est(0.5)))
        })
        .unwrap();
        assert!(!failing.holds && failing.reran);
        assert_eq!(*seen.borrow(), vec![100, 400]);
        let borderline = sandwich_with_rerun(&cfg, 3.0, |_| Ok((est(0.55), est(0.5)))).unwrap();
        assert!(borderline.holds && !borderline.reran);
    }
}
