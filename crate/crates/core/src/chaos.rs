//! Pointwise evaluation and exact moments of multiple Wiener-Itô integrals.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::operator::{OperatorMatrix, Truncation};
use crate::tensor::{binomial, contract, factorial, multiplicities, orbit_size, ChaosExpansion, ScalarKernel};

/// Probabilists' Hermite polynomial `He_n(x)`.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if n == 0 {
        return 1.0;
    }
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// One realization of `(W(h_1), …, W(h_d))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSample {
    pub xi: Vec<f64>,
}

impl GaussianSample {
    pub fn new(xi: Vec<f64>) -> Self {
        Self { xi }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

/// `d` independent standard normals.
pub fn sample_isonormal<R: Rng + ?Sized>(hdim: usize, rng: &mut R) -> GaussianSample {
    GaussianSample { xi: (0..hdim).map(|_| rng.sample(StandardNormal)).collect() }
}

/// `I_p(f)` at the given Gaussian coordinates.
pub fn eval_multiple_integral(f: &ScalarKernel, xi: &GaussianSample) -> Result<f64> {
    if f.order() == 0 {
        return Ok(f.get(&[]));
    }
    if f.hdim() != xi.len() {
        return Err(Error::DimensionMismatch { what: "sample length", expected: f.hdim(), got: xi.len() });
    }
    let mut total = 0.0;
    for (key, coeff) in f.multisets() {
        let mut prod = coeff * orbit_size(key);
        for (j, mult) in multiplicities(key) {
            prod *= hermite(mult as usize, xi.xi[j as usize]);
        }
        total += prod;
    }
    Ok(total)
}

fn check_sample(trunc: Truncation, xi: &GaussianSample) -> Result<()> {
    if trunc.hdim != xi.len() {
        return Err(Error::DimensionMismatch { what: "sample length", expected: trunc.hdim, got: xi.len() });
    }
    Ok(())
}

/// The vector `(⟨F, e_i⟩)_i` at the given Gaussian coordinates.
pub fn eval_expansion(f: &ChaosExpansion, xi: &GaussianSample) -> Result<Vec<f64>> {
    let trunc = f.truncation();
    check_sample(trunc, xi)?;
    let mut out = vec![0.0; trunc.big_hdim];
    for (_, kernel) in f.kernels() {
        for (i, g) in kernel.components().iter().enumerate() {
            if !g.is_zero() {
                out[i] += eval_multiple_integral(g, xi)?;
            }
        }
    }
    Ok(out)
}

/// `Cov(F)[i, j] = Σ_r r! ⟨f_{r,i}, f_{r,j}⟩`.
pub fn exact_covariance(f: &ChaosExpansion) -> OperatorMatrix {
    let m = f.truncation().big_hdim;
    let mut cov = DMatrix::zeros(m, m);
    for (r, kernel) in f.kernels() {
        let w = factorial(r);
        let comps = kernel.components();
        for i in 0..m {
            if comps[i].is_zero() {
                continue;
            }
            for j in i..m {
                let v = w * comps[i].inner(&comps[j]);
                cov[(i, j)] += v;
                if i != j {
                    cov[(j, i)] += v;
                }
            }
        }
    }
    OperatorMatrix::new(cov).expect("covariance of finite kernels is finite")
}

/// `E F⁴ - 3 (E F²)²` for `F = I_p(f)`.
pub fn exact_fourth_excess(f: &ScalarKernel) -> Result<f64> {
    let p = f.order();
    let pf2 = factorial(p).powi(2);
    let mut total = 0.0;
    for r in 1..p {
        let c = contract(f, f, r)?;
        let plain = c.norm_sq();
        let sym = c.symmetrize().norm_sq();
        total += pf2 * binomial(p, r).powi(2) * (plain + binomial(2 * p - 2 * r, p - r) * sym);
    }
    Ok(total)
}

/// `E F⁴` for a single-order `F = I_p(f)`: the excess plus `3 (p! ‖f‖²)²`.
pub fn exact_fourth_moment(f: &ScalarKernel) -> Result<f64> {
    let var = factorial(f.order()) * f.norm_sq();
    Ok(exact_fourth_excess(f)? + 3.0 * var * var)
}

/// `Σ_r w(r) 𝓘_{r-1}(f_r)` as a `d × m` matrix, entry `(k, i)` pairing
/// isonormal coordinate `k` with ℋ-coordinate `i`.
pub fn weighted_derivative_eval(
    f: &ChaosExpansion,
    xi: &GaussianSample,
    weight: impl Fn(usize) -> f64,
) -> Result<DMatrix<f64>> {
    let trunc = f.truncation();
    check_sample(trunc, xi)?;
    let mut out = DMatrix::zeros(trunc.hdim, trunc.big_hdim);
    for (r, kernel) in f.kernels() {
        let w = weight(r);
        if w == 0.0 {
            continue;
        }
        for (i, g) in kernel.components().iter().enumerate() {
            for (k, slice) in g.slices() {
                out[(k as usize, i)] += w * eval_multiple_integral(&slice, xi)?;
            }
        }
    }
    Ok(out)
}

/// `D_M F = Σ_r r 𝓘_{r-1}(f_r)` at the given coordinates.
pub fn malliavin_derivative_eval(f: &ChaosExpansion, xi: &GaussianSample) -> Result<DMatrix<f64>> {
    weighted_derivative_eval(f, xi, |r| r as f64)
}

/// `D_M(-L⁻¹F) = Σ_r 𝓘_{r-1}(f_r)` at the given coordinates.
pub fn neg_inverse_generator_derivative_eval(f: &ChaosExpansion, xi: &GaussianSample) -> Result<DMatrix<f64>> {
    weighted_derivative_eval(f, xi, |_| 1.0)
}

/// `Γ(F, G) = ⟨D_M F, D_M G⟩_𝔥`, an `m_F × m_G` matrix.
pub fn gamma_pair(f: &ChaosExpansion, g: &ChaosExpansion, xi: &GaussianSample) -> Result<DMatrix<f64>> {
    let a = malliavin_derivative_eval(f, xi)?;
    let b = malliavin_derivative_eval(g, xi)?;
    if a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch { what: "isonormal dimension", expected: a.nrows(), got: b.nrows() });
    }
    Ok(a.transpose() * b)
}

/// One realization of `Γ(F, -L⁻¹F)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaSample {
    pub matrix: OperatorMatrix,
}

/// `Γ(F, -L⁻¹F)[i, j] = Σ_k A[k, i] B[k, j]` with `A = D_M F`, `B = D_M(-L⁻¹F)`.
pub fn gamma_sample(f: &ChaosExpansion, xi: &GaussianSample) -> Result<GammaSample> {
    let a = malliavin_derivative_eval(f, xi)?;
    let b = neg_inverse_generator_derivative_eval(f, xi)?;
    let matrix = OperatorMatrix::new(a.transpose() * b)?;
    Ok(GammaSample { matrix })
}
