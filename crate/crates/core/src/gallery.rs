//! Counterexamples generated as data, each with machine-checked claims.

use serde::{Deserialize, Serialize};

use crate::certificates::gaussian_pair_bound;
use crate::chaos::{exact_covariance, exact_fourth_moment};
use crate::error::{Error, Result};
use crate::operator::{OperatorMatrix, Schatten, Truncation};
use crate::tensor::{ChaosExpansion, Kernel, ScalarKernel};

/// A numerical property with its expected value and the value measured on the
/// generated objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub description: String,
    pub expected: f64,
    pub actual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Claim {
    pub fn new(description: impl Into<String>, expected: f64, actual: f64, tolerance: f64) -> Self {
        let passed = (expected - actual).abs() <= tolerance;
        Self { description: description.into(), expected, actual, tolerance, passed }
    }

    /// A boolean property recorded as 1 = true.
    pub fn holds(description: impl Into<String>, condition: bool) -> Self {
        Self::new(description, 1.0, if condition { 1.0 } else { 0.0 }, 0.0)
    }
}

/// A generated case: named operators and expansions plus claims about them.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleCase {
    pub name: String,
    pub parameters: serde_json::Value,
    pub operators: Vec<(String, OperatorMatrix)>,
    pub expansions: Vec<(String, ChaosExpansion)>,
    pub claims: Vec<Claim>,
}

impl CounterexampleCase {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&Claim> {
        self.claims.iter().filter(|c| !c.passed).collect()
    }
}

/// `E‖Z‖⁴ = (tr T)² + 2 ‖T‖²_{𝒮₂}` for `Z ~ N(0, T)`.
pub fn gaussian_fourth_norm_moment(t: &OperatorMatrix) -> f64 {
    let tr = t.trace();
    tr * tr + 2.0 * t.schatten_norm(Schatten::HILBERT_SCHMIDT).powi(2)
}

/// Two degenerate Gaussians on `ℝ^m`, `T1 = e₁⊗e₁` and `T2 = e₂⊗e₂`, whose
/// norm moments agree while their laws differ.
pub fn degenerate_gaussian_pair(m: usize) -> Result<CounterexampleCase> {
    if m < 2 {
        return Err(Error::invalid("the pair needs dimension at least 2"));
    }
    let t1 = OperatorMatrix::basis_projector(m, 0)?;
    let t2 = OperatorMatrix::basis_projector(m, 1)?;
    let tol = 1e-12;
    let weak4 = |t: &OperatorMatrix| 3.0 * t.get(0, 0).powi(2);
    let claims = vec![
        Claim::new("trace T1", 1.0, t1.trace(), tol),
        Claim::new("trace T2", 1.0, t2.trace(), tol),
        Claim::new("E|Z1|^2", 1.0, t1.trace(), tol),
        Claim::new("E|Z2|^2", 1.0, t2.trace(), tol),
        Claim::new("E|Z1|^4", 3.0, gaussian_fourth_norm_moment(&t1), tol),
        Claim::new("E|Z2|^4", 3.0, gaussian_fourth_norm_moment(&t2), tol),
        Claim::new("S1 distance |T1 - T2|", 2.0, t1.sub(&t2)?.trace_norm(), tol),
        Claim::new("gaussian pair bound", 1.0, gaussian_pair_bound(&t1, &t2)?.value, tol),
        Claim::new("E<Z1,e1>^4", 3.0, weak4(&t1), tol),
        Claim::new("E<Z2,e1>^4", 0.0, weak4(&t2), tol),
    ];
    Ok(CounterexampleCase {
        name: "degenerate_pair".into(),
        parameters: serde_json::json!({ "m": m }),
        operators: vec![("T1".into(), t1), ("T2".into(), t2)],
        expansions: Vec::new(),
        claims,
    })
}

/// Eigenvalues of the limiting covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LambdaSpec {
    /// `λ_k = ratio^k` for `k = 1, 2, …`.
    Geometric { ratio: f64 },
    /// Explicit values, one per ℋ-coordinate.
    Explicit { values: Vec<f64> },
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Geometric { ratio: 0.5 }
    }
}

impl LambdaSpec {
    pub fn values(&self, m: usize) -> Result<Vec<f64>> {
        let vals = match self {
            LambdaSpec::Geometric { ratio } => {
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::invalid("geometric ratio must lie in (0, 1)"));
                }
                (1..=m).map(|k| ratio.powi(k as i32)).collect()
            }
            LambdaSpec::Explicit { values } => {
                if values.len() != m {
                    return Err(Error::DimensionMismatch { what: "lambda values", expected: m, got: values.len() });
                }
                values.clone()
            }
        };
        if vals.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("lambda values must be positive and finite"));
        }
        Ok(vals)
    }
}

/// `s_{n,k} = k^{-γ} / Σ_{j<=n} j^{-γ}` for `k = 1..=n`.
pub fn perturbation_weights(gamma: f64, n: usize) -> Vec<f64> {
    let alpha: Vec<f64> = (1..=n).map(|k| (k as f64).powf(-gamma)).collect();
    let s: f64 = alpha.iter().sum();
    alpha.into_iter().map(|a| a / s).collect()
}

/// Truncation used by [`schatten_gap_sequence`]: `m` coordinates for the
/// limit plus `n` independent coordinates for the perturbation.
pub fn schatten_gap_truncation(m: usize, n: usize) -> Result<Truncation> {
    Truncation::new(m + n, m)
}

/// First-chaos sequence `F_n = Z + Y_n` whose covariance gap tends to zero in
/// every Schatten `p`-norm, `p > 1`, while staying at 1 in trace norm.
///
/// `Z` uses isonormal coordinates `0..m`, `Y_n` uses coordinates `m..m+n`, so
/// the two are independent. Requires `1/p < γ < 1` and `n <= m`.
pub fn schatten_gap_sequence(
    p_schatten: f64,
    gamma: f64,
    n: usize,
    trunc: Truncation,
    lambda: &LambdaSpec,
) -> Result<CounterexampleCase> {
    if !(p_schatten > 1.0 && p_schatten.is_finite()) {
        return Err(Error::invalid("Schatten exponent must be a finite real > 1"));
    }
    let lo = 1.0 - (p_schatten - 1.0) / p_schatten;
    if !(gamma > lo && gamma < 1.0) {
        return Err(Error::invalid(format!("gamma must lie in ({lo}, 1), got {gamma}")));
    }
    let m = trunc.big_hdim;
    if n == 0 || n > m {
        return Err(Error::invalid(format!("need 1 <= n <= Hdim = {m}, got n = {n}")));
    }
    if trunc.hdim < m + n {
        return Err(Error::invalid(format!("isonormal dimension {} is below m + n = {}", trunc.hdim, m + n)));
    }
    let lam = lambda.values(m)?;
    let s = perturbation_weights(gamma, n);

    let mut components = Vec::with_capacity(m);
    for i in 0..m {
        let mut entries = vec![(vec![i as u32], lam[i].sqrt())];
        if i < n {
            entries.push((vec![(m + i) as u32], s[i].sqrt()));
        }
        components.push(ScalarKernel::from_multisets(1, trunc.hdim, entries)?);
    }
    let kernel = Kernel::new(1, trunc, components)?;
    let f = ChaosExpansion::from_kernels(trunc, [kernel.clone()])?;
    let t_z = OperatorMatrix::from_diagonal(&lam)?;
    let t_f = exact_covariance(&f);
    let gap = t_f.sub(&t_z)?;

    let sp_pow: f64 = s.iter().map(|v| v.powf(p_schatten)).sum();
    let fourth_expected = 3.0 * lam[0] * lam[0] + 6.0 * lam[0] * s[0] + 3.0 * s[0] * s[0];
    let fourth_actual = exact_fourth_moment(kernel.component(0)?)?;
    let claims = vec![
        Claim::new("S1 distance |T_F - T_Z|", 1.0, gap.trace_norm(), 1e-12),
        Claim::new(
            "Sp distance to the p-th power",
            sp_pow,
            gap.schatten_norm(Schatten::P(p_schatten)).powf(p_schatten),
            1e-12 * (1.0 + sp_pow),
        ),
        Claim::new("E<F_n,e_1>^4", fourth_expected, fourth_actual, 1e-12 * (1.0 + fourth_expected)),
    ];
    Ok(CounterexampleCase {
        name: format!("schatten_gap_n{n}"),
        parameters: serde_json::json!({
            "p_schatten": p_schatten,
            "gamma": gamma,
            "n": n,
            "hdim": trunc.hdim,
            "Hdim": m,
            "lambda": lambda,
        }),
        operators: vec![("T_Z".into(), t_z), ("T_F".into(), t_f)],
        expansions: vec![("F_n".into(), f)],
        claims,
    })
}

/// Builds the sequence over an increasing `n`-grid and adds the cross-`n`
/// claims: the `𝒮_p` gap and `s_{n,1}` decrease while the `𝒮₁` gap stays at 1.
pub fn schatten_gap_grid(
    p_schatten: f64,
    gamma: f64,
    ns: &[usize],
    m: usize,
    lambda: &LambdaSpec,
) -> Result<(Vec<CounterexampleCase>, Vec<Claim>)> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("n-grid must be strictly increasing"));
    }
    let n_max = *ns.last().ok_or_else(|| Error::invalid("empty n-grid"))?;
    let trunc = schatten_gap_truncation(m, n_max)?;
    let cases =
        ns.iter().map(|&n| schatten_gap_sequence(p_schatten, gamma, n, trunc, lambda)).collect::<Result<Vec<_>>>()?;
    let sp: Vec<f64> = ns.iter().map(|&n| perturbation_weights(gamma, n).iter().map(|v| v.powf(p_schatten)).sum()).collect();
    let s1: Vec<f64> = ns.iter().map(|&n| perturbation_weights(gamma, n)[0]).collect();
    let decreasing = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let pinned = cases.iter().all(|c| c.claims[0].passed);
    let claims = vec![
        Claim::holds("Sp gap strictly decreasing in n", decreasing(&sp)),
        Claim::holds("s_{n,1} strictly decreasing in n", decreasing(&s1)),
        Claim::holds("S1 gap equal to 1 for every n", pinned),
    ];
    Ok((cases, claims))
}
