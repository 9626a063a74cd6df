//! Stochastic heat equation on `L²(0, 1)` with Dirichlet boundary conditions,
//! diagonalized in the sine basis `e_k = √2 sin(kπx)`, `λ_k = (kπ)²`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::certificates::{theorem35_bound, CertificateReport, TargetSpec};
use crate::empirics::{Estimate, TestFunctionDictionary};
use crate::error::{Error, Result};
use crate::mc::{run_sharded, McConfig, McReport};
use crate::operator::{OperatorMatrix, Truncation};
use crate::tensor::{ChaosExpansion, Kernel, ScalarKernel};

/// Noise eigenvalue rule `k ↦ q_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum QFamily {
    /// `q_k = k^{-β}`, `β > 1`.
    PowerLaw { beta: f64 },
    /// `q_k = ρ^k`, `0 < ρ < 1`.
    Geometric { rho: f64 },
}

impl QFamily {
    fn validate(&self) -> Result<()> {
        match *self {
            QFamily::PowerLaw { beta } if !(beta > 1.0 && beta.is_finite()) => {
                Err(Error::invalid(format!("power-law exponent must exceed 1, got {beta}")))
            }
            QFamily::Geometric { rho } if !(rho > 0.0 && rho < 1.0) => {
                Err(Error::invalid(format!("geometric ratio must lie in (0, 1), got {rho}")))
            }
            _ => Ok(()),
        }
    }

    /// `q_k` for 1-based `k`.
    pub fn q(&self, k: usize) -> f64 {
        match *self {
            QFamily::PowerLaw { beta } => (k as f64).powf(-beta),
            QFamily::Geometric { rho } => rho.powi(k as i32),
        }
    }

    /// Upper bound on `Σ_{k>K} q_k / (4 λ_k)`.
    pub fn weak_error_remainder(&self, big_k: usize) -> f64 {
        let k = big_k as f64;
        let four_pi2 = 4.0 * PI * PI;
        match *self {
            QFamily::PowerLaw { beta } => {
                if big_k == 0 {
                    // Σ_{k>=1} k^{-β-2} <= 1 + 1/(β+1)
                    (1.0 + 1.0 / (beta + 1.0)) / four_pi2
                } else {
                    k.powf(-beta - 1.0) / ((beta + 1.0) * four_pi2)
                }
            }
            QFamily::Geometric { rho } => rho.powf(k + 1.0) / ((1.0 - rho) * four_pi2 * (k + 1.0).powi(2)),
        }
    }
}

/// Spectral model truncated at `K` modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatModel {
    pub q: QFamily,
    #[serde(rename = "K")]
    pub big_k: usize,
}

impl HeatModel {
    pub fn new(q: QFamily, big_k: usize) -> Result<Self> {
        q.validate()?;
        if big_k == 0 {
            return Err(Error::invalid("spectral truncation K must be positive"));
        }
        Ok(Self { q, big_k })
    }

    /// `λ_k = (kπ)²` for 1-based `k`.
    pub fn lambda(&self, k: usize) -> f64 {
        let x = k as f64 * PI;
        x * x
    }

    /// `q_k / (2λ_k) (1 - e^{-2λ_k t})` for 1-based `k`.
    pub fn mode_variance(&self, k: usize, t: f64) -> f64 {
        let l = self.lambda(k);
        self.q.q(k) / (2.0 * l) * -(-2.0 * l * t).exp_m1()
    }

    fn check_time(t: f64) -> Result<()> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::invalid(format!("time must be finite and nonnegative, got {t}")));
        }
        Ok(())
    }

    fn check_modes(&self, n: usize) -> Result<()> {
        if n > self.big_k {
            return Err(Error::invalid(format!("n = {n} exceeds K = {}", self.big_k)));
        }
        Ok(())
    }
}

/// Covariance of `u(t)` started from zero: `diag q_k/(2λ_k)(1 - e^{-2λ_k t})`.
pub fn covariance_at_time(model: &HeatModel, t: f64) -> Result<OperatorMatrix> {
    HeatModel::check_time(t)?;
    OperatorMatrix::from_diagonal(&(1..=model.big_k).map(|k| model.mode_variance(k, t)).collect::<Vec<_>>())
}

/// Covariance of the `n`-mode Galerkin approximation `P_n u(t)`.
pub fn galerkin_covariance(model: &HeatModel, n: usize, t: f64) -> Result<OperatorMatrix> {
    HeatModel::check_time(t)?;
    model.check_modes(n)?;
    let diag: Vec<f64> =
        (1..=model.big_k).map(|k| if k <= n { model.mode_variance(k, t) } else { 0.0 }).collect();
    OperatorMatrix::from_diagonal(&diag)
}

/// `(1/4) Σ_{k>n} (q_k/λ_k)(1 - e^{-2λ_k T})`, split into the explicit sum over
/// `n < k <= K` and the analytic remainder for `k > K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorBound {
    pub value: f64,
    pub truncated_sum: f64,
    pub remainder: f64,
}

pub fn weak_error_bound(model: &HeatModel, n: usize, t_final: f64) -> Result<WeakErrorBound> {
    HeatModel::check_time(t_final)?;
    model.check_modes(n)?;
    if t_final == 0.0 {
        return Ok(WeakErrorBound { value: 0.0, truncated_sum: 0.0, remainder: 0.0 });
    }
    // summed from the smallest terms up
    let truncated_sum: f64 = (n + 1..=model.big_k)
        .rev()
        .map(|k| {
            let l = model.lambda(k);
            0.25 * model.q.q(k) / l * -(-2.0 * l * t_final).exp_m1()
        })
        .sum();
    let remainder = model.q.weak_error_remainder(model.big_k);
    Ok(WeakErrorBound { value: truncated_sum + remainder, truncated_sum, remainder })
}

/// Covariance of the invariant law, `diag q_k / (2λ_k)`.
pub fn invariant_covariance(model: &HeatModel) -> OperatorMatrix {
    let diag: Vec<f64> = (1..=model.big_k).map(|k| model.q.q(k) / (2.0 * model.lambda(k))).collect();
    OperatorMatrix::from_diagonal(&diag).expect("finite diagonal")
}

/// Deterministic part of `u(t)`: ℋ-component `i` of every kernel scaled by `e^{-λ_{i+1} t}`.
pub fn evolve_expansion(f0: &ChaosExpansion, model: &HeatModel, t: f64) -> Result<ChaosExpansion> {
    HeatModel::check_time(t)?;
    let m = f0.truncation().big_hdim;
    if m > model.big_k {
        return Err(Error::invalid(format!("expansion Hdim {m} exceeds K = {}", model.big_k)));
    }
    let w: Vec<f64> = (1..=m).map(|k| (-model.lambda(k) * t).exp()).collect();
    f0.map_kernels(|_, k| k.scale_components(&w))
}

/// Chaos expansion of `u(t)`: the evolved initial condition on its own
/// isonormal coordinates, plus the stochastic convolution as an independent
/// first-chaos block `√var_k(t) h_{d₀+k} ⊗ e_k` on `K` fresh coordinates.
pub fn solution_expansion(f0: &ChaosExpansion, model: &HeatModel, t: f64) -> Result<ChaosExpansion> {
    let k_modes = model.big_k;
    let padded = f0.pad_hilbert(k_modes)?;
    let d0 = padded.truncation().hdim;
    let evolved = evolve_expansion(&padded, model, t)?.embed_isonormal(d0 + k_modes, 0)?;
    let trunc = Truncation::new(d0 + k_modes, k_modes)?;
    let components = (0..k_modes)
        .map(|k| {
            let sd = model.mode_variance(k + 1, t).sqrt();
            ScalarKernel::from_multisets(1, d0 + k_modes, [(vec![(d0 + k) as u32], sd)])
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = evolved;
    if out.truncation() != trunc {
        return Err(Error::invalid("internal truncation mismatch"));
    }
    out.insert(Kernel::new(1, trunc, components)?)?;
    Ok(out)
}

/// Certificate for `d₂(u(t), u_∞)`: the solution expansion against the
/// invariant Gaussian placed at order 1, with zero targets at higher orders.
pub fn invariant_gap_certificate(
    f0: &ChaosExpansion,
    model: &HeatModel,
    t: f64,
    n_grid: &[usize],
    m_grid: &[usize],
) -> Result<CertificateReport> {
    let u = solution_expansion(f0, model, t)?;
    let targets = TargetSpec::gaussian(invariant_covariance(model))?;
    theorem35_bound(&u, &targets, n_grid, m_grid)
}

/// Exact draw of the mode vector of `u_n(t)` (length `K`, zeros past `n`).
pub fn simulate_modes<R: Rng + ?Sized>(model: &HeatModel, n: usize, t: f64, rng: &mut R) -> Result<Vec<f64>> {
    HeatModel::check_time(t)?;
    model.check_modes(n)?;
    Ok((1..=model.big_k)
        .map(|k| if k <= n { model.mode_variance(k, t).sqrt() * rng.sample::<f64, _>(StandardNormal) } else { 0.0 })
        .collect())
}

/// MC estimate of `max_φ |E φ(u_K(T)) - E φ(u_n(T))|` over a dictionary, with
/// the two solutions coupled through shared mode draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakErrorEstimate {
    pub report: McReport,
    pub per_entry: Vec<Estimate>,
}

pub fn mc_weak_error(
    model: &HeatModel,
    n: usize,
    t_final: f64,
    dict: &TestFunctionDictionary,
    cfg: &McConfig,
) -> Result<WeakErrorEstimate> {
    model.check_modes(n)?;
    if dict.dim != model.big_k {
        return Err(Error::DimensionMismatch { what: "dictionary dim", expected: model.big_k, got: dict.dim });
    }
    let acc = run_sharded(cfg, dict.len(), false, |rng, out| {
        let u = simulate_modes(model, model.big_k, t_final, rng)?;
        let mut un = u.clone();
        un[n..].iter_mut().for_each(|v| *v = 0.0);
        for (slot, h) in out.iter_mut().zip(&dict.entries) {
            *slot = h.eval(&u) - h.eval(&un);
        }
        Ok(())
    })?;
    let per_entry: Vec<Estimate> =
        (0..dict.len()).map(|k| Estimate { value: acc.mean(k).abs(), stderr: acc.stderr(k) }).collect();
    let best = per_entry.iter().enumerate().fold(0, |b, (k, e)| if e.value > per_entry[b].value { k } else { b });
    let report = McReport::new("she_weak_error", cfg, per_entry[best].value, per_entry[best].stderr)
        .with_extra("dictionary_size", dict.len().into())
        .with_extra("argmax_entry", best.into());
    Ok(WeakErrorEstimate { report, per_entry })
}
