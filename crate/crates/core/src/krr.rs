//! Kernel ridge regression with fixed design and fixed-order chaos noise.
//!
//! The RKHS is that of a finite-rank Mercer kernel `k(x, y) = Σ_a μ_a φ_a(x) φ_a(y)`
//! on `[0, 1]`, where the `φ_a` are orthonormal in `L²(0, 1)`. Every RKHS element
//! is written in the orthonormal basis `e_a = √μ_a φ_a`, where `K_x` has
//! coordinates `c(x) = (√μ_a φ_a(x))_a`.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificates::{fixed_chaos_bound, CertificateReport};
use crate::error::{Error, Result};
use crate::operator::{OperatorMatrix, Truncation};
use crate::tensor::{contract, factorial, ChaosExpansion, Index, Kernel, ScalarKernel};

/// Orthonormal basis of `L²(0, 1)` used for the Mercer eigenfunctions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MercerBasis {
    /// `1, √2 cos(2πx), √2 sin(2πx), √2 cos(4πx), …`
    Fourier,
    /// Shifted orthonormal Legendre polynomials `√(2j+1) P_j(2x - 1)`.
    Poly,
}

fn legendre(j: usize, t: f64) -> f64 {
    let (mut p0, mut p1) = (1.0, t);
    if j == 0 {
        return 1.0;
    }
    for k in 1..j {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * t * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

impl MercerBasis {
    /// `φ_j(x)` for 0-based `j`.
    pub fn eval(&self, j: usize, x: f64) -> f64 {
        match self {
            MercerBasis::Fourier => {
                if j == 0 {
                    1.0
                } else {
                    let freq = j.div_ceil(2) as f64;
                    let arg = 2.0 * std::f64::consts::PI * freq * x;
                    std::f64::consts::SQRT_2 * if j % 2 == 1 { arg.cos() } else { arg.sin() }
                }
            }
            MercerBasis::Poly => ((2 * j + 1) as f64).sqrt() * legendre(j, 2.0 * x - 1.0),
        }
    }

    /// `sup_{x∈[0,1]} φ_j(x)²`.
    pub fn sup_sq(&self, j: usize) -> f64 {
        match self {
            MercerBasis::Fourier => {
                if j == 0 {
                    1.0
                } else {
                    2.0
                }
            }
            MercerBasis::Poly => (2 * j + 1) as f64,
        }
    }
}

/// `k(x, y) = Σ_a μ_a φ_a(x) φ_a(y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MercerKernel {
    pub mu: Vec<f64>,
    pub phi: MercerBasis,
}

impl MercerKernel {
    pub fn new(mu: Vec<f64>, phi: MercerBasis) -> Result<Self> {
        if mu.is_empty() {
            return Err(Error::invalid("Mercer kernel needs at least one eigenvalue"));
        }
        if mu.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("Mercer eigenvalues must be positive and finite"));
        }
        Ok(Self { mu, phi })
    }

    pub fn rank(&self) -> usize {
        self.mu.len()
    }

    /// Coordinates of `K_x` in the orthonormal RKHS basis.
    pub fn features(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.rank(), self.mu.iter().enumerate().map(|(a, m)| m.sqrt() * self.phi.eval(a, x)))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.features(x).dot(&self.features(y))
    }

    /// Upper bound on `sup_x k(x, x)`.
    pub fn sup_diag_bound(&self) -> f64 {
        self.mu.iter().enumerate().map(|(a, m)| m * self.phi.sup_sq(a)).sum()
    }

    /// `Γ = ∫₀¹ c(x) c(x)ᵀ dx = diag(μ)`, by `L²` orthonormality of the `φ_a`.
    pub fn population_covariance(&self) -> OperatorMatrix {
        OperatorMatrix::from_diagonal(&self.mu).expect("positive eigenvalues")
    }
}

/// A fixed-design regression problem with order-`p` chaos noise of variance `σ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRRSetup {
    pub design: Vec<f64>,
    pub kernel: MercerKernel,
    pub lambda: f64,
    pub p: usize,
    pub sigma2: f64,
    /// Stored upper bound `C_k >= sup_x k(x, x)`.
    pub c_k: f64,
}

impl KRRSetup {
    pub fn new(design: Vec<f64>, kernel: MercerKernel, lambda: f64, p: usize, sigma2: f64) -> Result<Self> {
        if design.is_empty() {
            return Err(Error::invalid("design must contain at least one point"));
        }
        if design.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::invalid("design points must lie in [0, 1]"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("ridge parameter must be positive"));
        }
        if p < 1 {
            return Err(Error::invalid("noise chaos order must be at least 1"));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::invalid("noise variance must be nonnegative"));
        }
        let c_k = kernel.sup_diag_bound();
        Ok(Self { design, kernel, lambda, p, sigma2, c_k })
    }

    pub fn n(&self) -> usize {
        self.design.len()
    }

    pub fn rank(&self) -> usize {
        self.kernel.rank()
    }

    /// `m × n` matrix whose columns are `c(x_i)`.
    pub fn feature_matrix(&self) -> DMatrix<f64> {
        let cols: Vec<DVector<f64>> = self.design.iter().map(|&x| self.kernel.features(x)).collect();
        DMatrix::from_columns(&cols)
    }
}

/// Midpoint design `x_i = (i - 1/2) / n`.
pub fn midpoint_design(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

/// `Γ_n = (1/n) Σ_i c(x_i) c(x_i)ᵀ`.
pub fn empirical_cov(setup: &KRRSetup) -> OperatorMatrix {
    let c = setup.feature_matrix();
    let g = (&c * c.transpose()) / setup.n() as f64;
    OperatorMatrix::new_symmetric((&g + g.transpose()) * 0.5).expect("Gram matrix is symmetric")
}

/// `(G + λI)^{-1}` for symmetric PSD `G`.
pub fn resolvent(g: &OperatorMatrix, lambda: f64) -> Result<OperatorMatrix> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("ridge parameter must be positive"));
    }
    if !g.is_symmetric() {
        return Err(Error::invalid("resolvent needs a symmetric operator"));
    }
    g.require_psd(1e-12)?;
    let shifted = g.matrix() + DMatrix::identity(g.dim(), g.dim()) * lambda;
    let inv = shifted
        .cholesky()
        .ok_or_else(|| Error::invalid("G + λI is not positive definite"))?
        .inverse();
    OperatorMatrix::new_symmetric((&inv + inv.transpose()) * 0.5)
}

fn sandwich(a: &OperatorMatrix, g: &OperatorMatrix, sigma2: f64) -> OperatorMatrix {
    let m = a.matrix() * g.matrix() * a.matrix() * sigma2;
    OperatorMatrix::new((&m + m.transpose()) * 0.5).expect("finite product")
}

/// `𝒯_{F_n} = σ² A_n Γ_n A_n`.
pub fn fn_covariance(setup: &KRRSetup) -> Result<OperatorMatrix> {
    let g = empirical_cov(setup);
    let a = resolvent(&g, setup.lambda)?;
    Ok(sandwich(&a, &g, setup.sigma2))
}

/// `𝒯_Z = σ² (Γ + λI)^{-1} Γ (Γ + λI)^{-1}`.
pub fn limit_covariance(gamma: &OperatorMatrix, lambda: f64, sigma2: f64) -> Result<OperatorMatrix> {
    let a = resolvent(gamma, lambda)?;
    Ok(sandwich(&a, gamma, sigma2))
}

/// Covariance-gap certificate and the directly computed gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovGapBound {
    /// Ideal-property bound with `‖A_n - A₀‖_op` computed exactly (excludes `σ²`).
    pub bound: f64,
    /// Same bound with `‖A_n - A₀‖_op` replaced by `λ^{-2} ‖Γ_n - Γ‖_{𝒮₁}` (excludes `σ²`).
    pub bound_resolvent_identity: f64,
    /// `‖σ² A_n Γ_n A_n - σ² A₀ Γ A₀‖_{𝒮₁}`.
    pub direct: f64,
    pub resolvent_gap_op: f64,
    pub gamma_gap_s1: f64,
    pub gamma_limit_s1: f64,
    pub c_k: f64,
    pub lambda: f64,
    pub sigma2: f64,
}

impl CovGapBound {
    /// `direct <= σ² · bound + slack`.
    pub fn holds(&self, slack: f64) -> bool {
        self.direct <= self.sigma2 * self.bound + slack
    }
}

pub fn cov_gap_bound(setup: &KRRSetup, gamma: &OperatorMatrix) -> Result<CovGapBound> {
    if gamma.dim() != setup.rank() {
        return Err(Error::DimensionMismatch { what: "limit covariance dim", expected: setup.rank(), got: gamma.dim() });
    }
    let lam = setup.lambda;
    let g_n = empirical_cov(setup);
    let a_n = resolvent(&g_n, lam)?;
    let a_0 = resolvent(gamma, lam)?;
    let resolvent_gap_op = a_n.sub(&a_0)?.op_norm();
    let gamma_gap_s1 = g_n.sub(gamma)?.trace_norm();
    let gamma_limit_s1 = gamma.trace_norm();
    let inv = 1.0 / lam;
    let lead = setup.c_k * inv + gamma_limit_s1 * inv;
    let bound = lead * resolvent_gap_op + inv * inv * gamma_gap_s1;
    let bound_resolvent_identity = lead * inv * inv * gamma_gap_s1 + inv * inv * gamma_gap_s1;
    let direct = sandwich(&a_n, &g_n, setup.sigma2).sub(&sandwich(&a_0, gamma, setup.sigma2))?.trace_norm();
    Ok(CovGapBound {
        bound,
        bound_resolvent_identity,
        direct,
        resolvent_gap_op,
        gamma_gap_s1,
        gamma_limit_s1,
        c_k: setup.c_k,
        lambda: lam,
        sigma2: setup.sigma2,
    })
}

/// `α[j, i] = ⟨A_n K_{x_i} / √n, e_j⟩`, an `m × n` matrix.
pub fn alpha_matrix(setup: &KRRSetup) -> Result<DMatrix<f64>> {
    let a = resolvent(&empirical_cov(setup), setup.lambda)?;
    Ok(a.matrix() * setup.feature_matrix() / (setup.n() as f64).sqrt())
}

/// Noise kernels `g_i = σ · sym(h_{ip} ⊗ … ⊗ h_{ip+p-1})`, so that
/// `I_p(g_i) = σ ξ_{ip} ⋯ ξ_{ip+p-1}` has variance `σ²` and the blocks use
/// disjoint isonormal coordinates.
pub fn default_noise_kernels(n: usize, p: usize, sigma2: f64) -> Result<Vec<ScalarKernel>> {
    let hdim = n * p;
    let sigma = sigma2.sqrt();
    (0..n)
        .map(|i| {
            let idx: Vec<Index> = (i * p..(i + 1) * p).map(|j| j as Index).collect();
            Ok(ScalarKernel::basis_product(hdim, &idx)?.scale(sigma))
        })
        .collect()
}

fn support(g: &ScalarKernel) -> BTreeSet<Index> {
    g.multisets().flat_map(|(k, _)| k.iter().copied()).collect()
}

/// Verifies `g_i ⊗_r g_j = 0` for `i ≠ j` and `r = 0, …, p`. Disjoint supports
/// settle a pair without computing contractions.
pub fn check_noise_orthogonality(g: &[ScalarKernel]) -> Result<()> {
    let supports: Vec<BTreeSet<Index>> = g.iter().map(support).collect();
    for i in 0..g.len() {
        for j in i + 1..g.len() {
            if supports[i].is_disjoint(&supports[j]) {
                continue;
            }
            for r in 1..=g[i].order() {
                if contract(&g[i], &g[j], r)?.norm() > 1e-12 {
                    return Err(Error::invalid(format!("noise kernels {i} and {j} have a nonzero {r}-contraction")));
                }
            }
        }
    }
    Ok(())
}

/// `f_n = Σ_i g_i ⊗ a_{n,i}` with explicit noise kernels.
pub fn build_chaos_kernel_with(setup: &KRRSetup, g: &[ScalarKernel]) -> Result<Kernel> {
    let n = setup.n();
    if g.len() != n {
        return Err(Error::DimensionMismatch { what: "noise kernels", expected: n, got: g.len() });
    }
    let hdim = g[0].hdim();
    for gi in g {
        if gi.order() != setup.p || gi.hdim() != hdim {
            return Err(Error::invalid("noise kernels must share order p and isonormal dimension"));
        }
    }
    check_noise_orthogonality(g)?;
    let alpha = &alpha_matrix(setup)?;
    let m = setup.rank();
    let mut components = Vec::with_capacity(m);
    for j in 0..m {
        let entries = g
            .iter()
            .enumerate()
            .flat_map(|(i, gi)| gi.multisets().map(move |(k, v)| (k.clone(), v * alpha[(j, i)])))
            .collect::<Vec<_>>();
        components.push(ScalarKernel::from_multisets(setup.p, hdim, entries)?);
    }
    Kernel::new(setup.p, Truncation::new(hdim, m)?, components)
}

/// `f_n` with the default disjoint-block noise kernels.
pub fn build_chaos_kernel(setup: &KRRSetup) -> Result<Kernel> {
    build_chaos_kernel_with(setup, &default_noise_kernels(setup.n(), setup.p, setup.sigma2)?)
}

/// Per-component contraction data and the explicit α-bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionSummary {
    /// `Σ_i α⁴_{j,i}` per component.
    pub alpha4_sums: Vec<f64>,
    /// `max_{j,i} |α_{j,i}|`.
    pub alpha_max: f64,
    /// `√C_k / (√n λ)`.
    pub alpha_max_bound: f64,
    /// `(σ²/p!)² C_k² / (n λ⁴)`.
    pub contraction_sq_bound: f64,
    /// `max_{j,r} ‖f_{n,j} ⊗_r f_{n,j}‖²`.
    pub contraction_sq_max: f64,
}

pub fn contraction_summary(setup: &KRRSetup, f: &Kernel) -> Result<ContractionSummary> {
    let alpha = alpha_matrix(setup)?;
    let n = setup.n() as f64;
    let alpha4_sums = (0..alpha.nrows()).map(|j| alpha.row(j).iter().map(|a| a.powi(4)).sum()).collect();
    let alpha_max = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let s = setup.sigma2 / factorial(setup.p);
    let prof = f.contraction_profile()?;
    Ok(ContractionSummary {
        alpha4_sums,
        alpha_max,
        alpha_max_bound: setup.c_k.sqrt() / (n.sqrt() * setup.lambda),
        contraction_sq_bound: s * s * setup.c_k * setup.c_k / (n * setup.lambda.powi(4)),
        contraction_sq_max: prof.max().powi(2),
    })
}

/// Certificate for `F_n` against `N(0, σ² A₀ Γ A₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrrCertificate {
    pub n: usize,
    pub report: CertificateReport,
    /// `R2` at the chosen grid point: the covariance-gap part.
    pub covariance_component: f64,
    /// `R3` at the chosen grid point: the contraction part.
    pub contraction_component: f64,
    pub cov_gap: CovGapBound,
    pub contraction: ContractionSummary,
}

pub fn krr_clt_certificate(setup: &KRRSetup, gamma: &OperatorMatrix, m_grid: &[usize]) -> Result<KrrCertificate> {
    let f = build_chaos_kernel(setup)?;
    let t_z = limit_covariance(gamma, setup.lambda, setup.sigma2)?;
    let report = fixed_chaos_bound(&f, &t_z, m_grid)?;
    Ok(KrrCertificate {
        n: setup.n(),
        covariance_component: report.r2,
        contraction_component: report.r3,
        cov_gap: cov_gap_bound(setup, gamma)?,
        contraction: contraction_summary(setup, &f)?,
        report,
    })
}

/// `F_n` as a chaos expansion.
pub fn krr_expansion(setup: &KRRSetup) -> Result<ChaosExpansion> {
    let f = build_chaos_kernel(setup)?;
    ChaosExpansion::from_kernels(f.truncation(), [f])
}

/// `f̂ = (1/n) A_n S_n* Y` in eigencoordinates.
pub fn estimator_eigen(setup: &KRRSetup, y: &[f64]) -> Result<DVector<f64>> {
    if y.len() != setup.n() {
        return Err(Error::DimensionMismatch { what: "responses", expected: setup.n(), got: y.len() });
    }
    let a = resolvent(&empirical_cov(setup), setup.lambda)?;
    let s_star_y = setup.feature_matrix() * DVector::from_column_slice(y);
    Ok(a.matrix() * s_star_y / setup.n() as f64)
}

/// `f̂ = Σ_i β_i K_{x_i}` with `β = (K + nλI)^{-1} Y`, mapped to eigencoordinates.
pub fn estimator_representer(setup: &KRRSetup, y: &[f64]) -> Result<DVector<f64>> {
    let n = setup.n();
    if y.len() != n {
        return Err(Error::DimensionMismatch { what: "responses", expected: n, got: y.len() });
    }
    let c = setup.feature_matrix();
    let gram = c.transpose() * &c + DMatrix::identity(n, n) * (n as f64 * setup.lambda);
    let beta = gram
        .lu()
        .solve(&DVector::from_column_slice(y))
        .ok_or_else(|| Error::invalid("kernel system is singular"))?;
    Ok(c * beta)
}

/// `√n ‖A_n Γ_n f₀ - (Γ + λI)^{-1} Γ f₀‖` for `f₀` given in eigencoordinates.
pub fn bias_remainder(setup: &KRRSetup, gamma: &OperatorMatrix, f0: &[f64]) -> Result<f64> {
    if f0.len() != setup.rank() {
        return Err(Error::DimensionMismatch { what: "f0 coordinates", expected: setup.rank(), got: f0.len() });
    }
    let f0 = DVector::from_column_slice(f0);
    let g_n = empirical_cov(setup);
    let a_n = resolvent(&g_n, setup.lambda)?;
    let a_0 = resolvent(gamma, setup.lambda)?;
    let diff = a_n.matrix() * g_n.matrix() * &f0 - a_0.matrix() * gamma.matrix() * &f0;
    Ok((setup.n() as f64).sqrt() * diff.norm())
}
