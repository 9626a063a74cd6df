//! Quantitative fourth-moment certificates: the explicit `d₂` bound built from
//! the six remainder terms, its fixed-chaos specialization, the Gaussian-pair
//! bound and finite-n condition diagnostics.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chaos::exact_covariance;
use crate::error::{Error, Result};
use crate::operator::{OperatorMatrix, Truncation};
use crate::tensor::{ChaosExpansion, ContractionProfile, Kernel, ScalarKernel};

/// Eigenvalue slack allowed for target covariances.
pub const TARGET_PSD_TOL: f64 = 1e-10;

fn big_factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, k| acc * k)
}

fn big_binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::ZERO;
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn big_to_f64(x: &BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// `c_p(r) = p (r-1)! C(p-1, r-1)² √((2p-2r)!)`, for `1 <= r <= p-1`.
pub fn constant_cp(p: usize, r: usize) -> Result<f64> {
    if p < 2 || r < 1 || r >= p {
        return Err(Error::invalid(format!("c_p(r) needs p >= 2 and 1 <= r <= p-1, got p={p}, r={r}")));
    }
    let (p, r) = (p as u64, r as u64);
    let integer = BigUint::from(p) * big_factorial(r - 1) * big_binomial(p - 1, r - 1).pow(2);
    Ok(big_to_f64(&integer) * big_to_f64(&big_factorial(2 * p - 2 * r)).sqrt())
}

/// `c(p, q) = (p!)² C(q-1, p-1)² (q-p)!`, for `1 <= p < q`.
pub fn constant_cpq(p: usize, q: usize) -> Result<f64> {
    if p < 1 || p >= q {
        return Err(Error::invalid(format!("c(p, q) needs 1 <= p < q, got p={p}, q={q}")));
    }
    let (p, q) = (p as u64, q as u64);
    let v = big_factorial(p).pow(2) * big_binomial(q - 1, p - 1).pow(2) * big_factorial(q - p);
    Ok(big_to_f64(&v))
}

/// `c(p, q, χ) = (p²/2) ((χ-1)!)² C(p-1, χ-1)² C(q-1, χ-1)² (p+q-2χ)!`,
/// for `1 <= χ <= min(p, q) - 1`.
pub fn constant_cpqchi(p: usize, q: usize, chi: usize) -> Result<f64> {
    if chi < 1 || chi + 1 > p.min(q) {
        return Err(Error::invalid(format!(
            "c(p, q, chi) needs 1 <= chi <= min(p, q) - 1, got p={p}, q={q}, chi={chi}"
        )));
    }
    let (p, q, c) = (p as u64, q as u64, chi as u64);
    let v = BigUint::from(p * p)
        * big_factorial(c - 1).pow(2)
        * big_binomial(p - 1, c - 1).pow(2)
        * big_binomial(q - 1, c - 1).pow(2)
        * big_factorial(p + q - 2 * c);
    Ok(big_to_f64(&v) / 2.0)
}

/// Per-order Gaussian targets `𝒯_{Z_r}`; the aggregate is their sum.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSpec {
    dim: usize,
    per_order: BTreeMap<usize, OperatorMatrix>,
}

impl TargetSpec {
    pub fn new(dim: usize, per_order: BTreeMap<usize, OperatorMatrix>) -> Result<Self> {
        for (&r, t) in &per_order {
            if r == 0 {
                return Err(Error::invalid("target orders start at 1"));
            }
            if t.dim() != dim {
                return Err(Error::DimensionMismatch { what: "target operator dim", expected: dim, got: t.dim() });
            }
            if !t.is_symmetric() {
                return Err(Error::invalid(format!("target of order {r} is not symmetric")));
            }
            t.require_psd(TARGET_PSD_TOL)?;
        }
        Ok(Self { dim, per_order })
    }

    /// A single target placed at order `r`.
    pub fn single(r: usize, t: OperatorMatrix) -> Result<Self> {
        Self::new(t.dim(), BTreeMap::from([(r, t)]))
    }

    /// The aggregate target placed at order 1 (the usual Gaussian-limit setting).
    pub fn gaussian(t: OperatorMatrix) -> Result<Self> {
        Self::single(1, t)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self, r: usize) -> Option<&OperatorMatrix> {
        self.per_order.get(&r)
    }

    pub fn orders(&self) -> impl Iterator<Item = (usize, &OperatorMatrix)> {
        self.per_order.iter().map(|(r, t)| (*r, t))
    }

    pub fn aggregate(&self) -> OperatorMatrix {
        let mut acc = OperatorMatrix::zeros(self.dim);
        for t in self.per_order.values() {
            acc = acc.add(t).expect("dims checked at construction");
        }
        acc
    }
}

/// Splits a full Gaussian covariance `t` into per-order targets for `f`.
///
/// Orders above the lowest one receive the exact per-order covariance of `f`
/// and the lowest order receives the remainder, provided it is PSD; otherwise
/// all of `t` sits at the lowest order. Any PSD split describes the same
/// Gaussian law, so both choices give valid certificates.
pub fn split_gaussian_target(f: &ChaosExpansion, t: &OperatorMatrix) -> Result<TargetSpec> {
    let m = f.truncation().big_hdim;
    if t.dim() != m {
        return Err(Error::DimensionMismatch { what: "target dim", expected: m, got: t.dim() });
    }
    let orders = f.orders();
    let Some(&low) = orders.first() else {
        return TargetSpec::gaussian(t.clone());
    };
    let mut per_order = BTreeMap::new();
    let mut rest = t.clone();
    for &r in &orders[1..] {
        let c = exact_covariance(&f.single_order(r));
        rest = rest.sub(&c)?;
        per_order.insert(r, c);
    }
    if orders.len() > 1 && rest.is_symmetric() && rest.is_psd(TARGET_PSD_TOL) {
        per_order.insert(low, rest);
        TargetSpec::new(m, per_order)
    } else {
        TargetSpec::single(low, t.clone())
    }
}

/// Per-order quantities of an expansion, computed once and reused across the grid.
#[derive(Debug, Clone)]
pub struct ExpansionSummary {
    pub trunc: Truncation,
    /// `𝒯_{𝓘_r(f_r)}` for each order present.
    pub order_covariances: BTreeMap<usize, OperatorMatrix>,
    /// `‖f_{r,i}‖²` per order.
    pub component_norm_sq: BTreeMap<usize, Vec<f64>>,
    /// `‖f_{r,i} ⊗_k f_{r,i}‖` per order.
    pub profiles: BTreeMap<usize, ContractionProfile>,
    /// `‖𝒯_F‖_{𝒮₁}` of the full expansion.
    pub total_trace_norm: f64,
}

impl ExpansionSummary {
    pub fn new(f: &ChaosExpansion) -> Result<Self> {
        let mut order_covariances = BTreeMap::new();
        let mut component_norm_sq = BTreeMap::new();
        let mut profiles = BTreeMap::new();
        let mut total = OperatorMatrix::zeros(f.truncation().big_hdim);
        for (r, k) in f.kernels() {
            let cov = exact_covariance(&f.single_order(r));
            total = total.add(&cov)?;
            order_covariances.insert(r, cov);
            component_norm_sq.insert(r, k.components().iter().map(ScalarKernel::norm_sq).collect());
            profiles.insert(r, k.contraction_profile()?);
        }
        Ok(Self {
            trunc: f.truncation(),
            order_covariances,
            component_norm_sq,
            profiles,
            total_trace_norm: total.trace_norm(),
        })
    }

    fn norm_sq(&self, r: usize, i: usize) -> f64 {
        self.component_norm_sq.get(&r).map_or(0.0, |v| v[i])
    }

    fn contraction(&self, r: usize, i: usize, k: usize) -> f64 {
        self.profiles.get(&r).map_or(0.0, |p| p.get(i, k))
    }

    /// `Σ_{r>N} Σ_i r! ‖f_{r,i}‖²`.
    pub fn tail_mass(&self, n: usize) -> f64 {
        self.order_covariances.range(n + 1..).map(|(_, c)| c.trace()).sum()
    }

    /// `Σ_{r<=N} Σ_{j>=m} ⟨𝒯_{𝓘_r(f_r)} e_j, e_j⟩` (0-based `j`).
    pub fn coordinate_tail(&self, n: usize, m: usize) -> f64 {
        self.order_covariances.range(..=n).map(|(_, c)| c.tail_trace(m)).sum()
    }

    /// `Σ_{r<=N} Σ_{i<m} ⟨𝒯_{𝓘_r(f_r)} e_i, e_i⟩`.
    pub fn coordinate_head(&self, n: usize, m: usize) -> f64 {
        self.order_covariances.range(..=n).map(|(_, c)| c.head_trace(m)).sum()
    }
}

/// `γ^{(l)}` and `γ^{(l₁,l₂)}` for one pair of ℋ-coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTerms {
    /// `(l, γ^{(l)})` for `l = 1..=N`.
    pub single: Vec<(usize, f64)>,
    /// `(l₁, l₂, γ^{(l₁,l₂)})` over ordered pairs `l₁ ≠ l₂ <= N`.
    pub cross: Vec<(usize, usize, f64)>,
}

impl GammaTerms {
    pub fn total(&self) -> f64 {
        self.single.iter().map(|t| t.1).sum::<f64>() + self.cross.iter().map(|t| t.2).sum::<f64>()
    }
}

fn gamma_single(s: &ExpansionSummary, l: usize, i: usize, j: usize) -> Result<f64> {
    let mut acc = 0.0;
    for chi in 1..l {
        let c = constant_cp(l, chi)?;
        let a = s.contraction(l, i, l - chi);
        let b = s.contraction(l, j, l - chi);
        acc += c * c * (a * a + b * b);
    }
    Ok(0.5 * acc)
}

fn gamma_cross(s: &ExpansionSummary, l1: usize, l2: usize, i: usize, j: usize) -> Result<f64> {
    let mut acc = 0.0;
    // the indicator terms use the contraction norm to the first power
    if l1 < l2 {
        acc += constant_cpq(l1, l2)? * s.norm_sq(l1, i) * s.contraction(l2, j, l2 - l1);
    }
    if l2 < l1 {
        acc += constant_cpq(l2, l1)? * s.norm_sq(l2, j) * s.contraction(l1, i, l1 - l2);
    }
    let (lo, hi) = (l1.min(l2), l1.max(l2));
    for chi in 1..lo {
        let a = s.contraction(l1, i, l1 - chi);
        let b = s.contraction(l2, j, l2 - chi);
        acc += constant_cpqchi(lo, hi, chi)? * (a * a + b * b);
    }
    Ok(acc)
}

fn gamma_terms_from(s: &ExpansionSummary, i: usize, j: usize, n: usize) -> Result<GammaTerms> {
    let m = s.trunc.big_hdim;
    for idx in [i, j] {
        if idx >= m {
            return Err(Error::IndexOutOfRange { index: idx, len: m });
        }
    }
    let mut single = Vec::with_capacity(n);
    let mut cross = Vec::new();
    for l in 1..=n {
        single.push((l, gamma_single(s, l, i, j)?));
        for l2 in 1..=n {
            if l2 != l {
                cross.push((l, l2, gamma_cross(s, l, l2, i, j)?));
            }
        }
    }
    Ok(GammaTerms { single, cross })
}

/// The γ-terms for ℋ-coordinates `i`, `j` (0-based) and orders up to `n`.
pub fn gamma_terms(f: &ChaosExpansion, i: usize, j: usize, n: usize) -> Result<GammaTerms> {
    gamma_terms_from(&ExpansionSummary::new(f)?, i, j, n)
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "R3")]
    pub r3: f64,
    #[serde(rename = "R4")]
    pub r4: f64,
    #[serde(rename = "R5")]
    pub r5: f64,
    #[serde(rename = "R6")]
    pub r6: f64,
    pub bound: f64,
    /// `R5` with the head trace of the order-`≤N` part in place of `‖𝒯_F‖_{𝒮₁}`.
    #[serde(rename = "R5_head_trace")]
    pub r5_head_trace: f64,
}

impl GridRow {
    fn finish(mut self) -> Self {
        self.bound = self.r1 + self.r6 + self.r2 + self.r3 + self.r4 + self.r5;
        self
    }
}

fn r_terms_from(s: &ExpansionSummary, targets: &TargetSpec, n: usize, m_cut: usize) -> Result<GridRow> {
    let m = s.trunc.big_hdim;
    if n < 1 {
        return Err(Error::invalid("N must be at least 1"));
    }
    if m_cut > m {
        return Err(Error::invalid(format!("m_cut {m_cut} exceeds Hdim {m}")));
    }
    if targets.dim() != m {
        return Err(Error::DimensionMismatch { what: "target dim", expected: m, got: targets.dim() });
    }

    let r1 = s.tail_mass(n).max(0.0).sqrt();

    let mut r2 = 0.0;
    for r in 1..=n {
        let diff = match (s.order_covariances.get(&r), targets.order(r)) {
            (Some(c), Some(t)) => c.sub(t)?.trace_norm(),
            (Some(c), None) => c.trace_norm(),
            (None, Some(t)) => t.trace_norm(),
            (None, None) => 0.0,
        };
        r2 += diff;
    }
    r2 *= 0.5;

    let mut gamma_sum = 0.0;
    for i in 0..m_cut {
        for j in 0..m_cut {
            for l in 1..=n {
                gamma_sum += gamma_single(s, l, i, j)?;
                for l2 in 1..=n {
                    if l2 != l {
                        gamma_sum += gamma_cross(s, l, l2, i, j)?;
                    }
                }
            }
        }
    }
    let r3 = (m_cut as f64).sqrt() * n as f64 * gamma_sum.max(0.0).sqrt();

    let tail = s.coordinate_tail(n, m_cut).max(0.0);
    let r4 = (n as f64 + 2.0) / 2.0 * tail;
    let r5 = s.total_trace_norm.sqrt() * ((n as f64 + 3.0) * tail).sqrt();
    let r5_head_trace = s.coordinate_head(n, m_cut).max(0.0).sqrt() * ((n as f64 + 3.0) * tail).sqrt();
    let r6 = 0.5 * targets.orders().filter(|(r, _)| *r > n).map(|(_, t)| t.trace()).sum::<f64>();

    Ok(GridRow { n, m: m_cut, r1, r2, r3, r4, r5, r6, bound: 0.0, r5_head_trace }.finish())
}

/// The six remainder terms at a single `(N, m_cut)`.
pub fn r_terms(f: &ChaosExpansion, targets: &TargetSpec, n: usize, m_cut: usize) -> Result<GridRow> {
    r_terms_from(&ExpansionSummary::new(f)?, targets, n, m_cut)
}

/// Per-order finite-n condition magnitudes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmtDiagnostics {
    pub tol: f64,
    /// `‖𝒯_{𝓘_r(f_r)} - 𝒯_{Z_r}‖_{𝒮₁}` per order.
    pub trace_gaps: BTreeMap<usize, f64>,
    /// `max_{i,k} ‖f_{r,i} ⊗_k f_{r,i}‖` per order.
    pub contraction_max: BTreeMap<usize, f64>,
    /// `Σ_{r>N} Σ_i r! ‖f_{r,i}‖²` for `N = 0..=max order`.
    pub tail_sums: BTreeMap<usize, f64>,
    /// Names of quantities above `tol`.
    pub flagged: Vec<String>,
    /// Minimum eigenvalue of the aggregate target.
    pub target_min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

fn diagnostics_from(s: &ExpansionSummary, targets: &TargetSpec, tol: f64) -> Result<FmtDiagnostics> {
    let mut orders: Vec<usize> = s.order_covariances.keys().copied().collect();
    orders.extend(targets.orders().map(|(r, _)| r));
    orders.sort_unstable();
    orders.dedup();

    let mut trace_gaps = BTreeMap::new();
    let mut flagged = Vec::new();
    for &r in &orders {
        let m = s.trunc.big_hdim;
        let zero = OperatorMatrix::zeros(m);
        let c = s.order_covariances.get(&r).unwrap_or(&zero);
        let t = targets.order(r).unwrap_or(&zero);
        let gap = c.sub(t)?.trace_norm();
        if gap > tol {
            flagged.push(format!("trace_gap[{r}]"));
        }
        trace_gaps.insert(r, gap);
    }
    let mut contraction_max = BTreeMap::new();
    for (&r, prof) in &s.profiles {
        let v = prof.max();
        if v > tol {
            flagged.push(format!("contraction_max[{r}]"));
        }
        contraction_max.insert(r, v);
    }
    let max_order = orders.last().copied().unwrap_or(0);
    let tail_sums = (0..=max_order).map(|n| (n, s.tail_mass(n))).collect();

    let agg = targets.aggregate();
    let min_ev = if agg.dim() == 0 { 0.0 } else { agg.min_eigenvalue() };
    let mut warnings = Vec::new();
    if min_ev <= 0.0 {
        warnings.push(format!(
            "aggregate target is singular at this truncation (min eigenvalue {min_ev:e})"
        ));
    }
    Ok(FmtDiagnostics { tol, trace_gaps, contraction_max, tail_sums, flagged, target_min_eigenvalue: min_ev, warnings })
}

/// Evaluates the fourth-moment-theorem conditions as finite-n magnitudes.
pub fn check_fmt_conditions(f: &ChaosExpansion, targets: &TargetSpec, tol: f64) -> Result<FmtDiagnostics> {
    diagnostics_from(&ExpansionSummary::new(f)?, targets, tol)
}

/// Full output of a certificate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    #[serde(rename = "R1")]
    pub r1: f64,
    #[serde(rename = "R2")]
    pub r2: f64,
    #[serde(rename = "R3")]
    pub r3: f64,
    #[serde(rename = "R4")]
    pub r4: f64,
    #[serde(rename = "R5")]
    pub r5: f64,
    #[serde(rename = "R6")]
    pub r6: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub m: usize,
    pub bound: f64,
    pub grid_table: Vec<GridRow>,
    pub diagnostics: FmtDiagnostics,
}

impl CertificateReport {
    fn from_table(grid_table: Vec<GridRow>, diagnostics: FmtDiagnostics) -> Self {
        // first minimum in grid order wins ties
        let best = grid_table
            .iter()
            .enumerate()
            .fold(0, |b, (k, row)| if row.bound < grid_table[b].bound { k } else { b });
        let row = grid_table[best].clone();
        Self {
            r1: row.r1,
            r2: row.r2,
            r3: row.r3,
            r4: row.r4,
            r5: row.r5,
            r6: row.r6,
            n: row.n,
            m: row.m,
            bound: row.bound,
            grid_table,
            diagnostics,
        }
    }

    /// The row at `(N, m)`, if it was evaluated.
    pub fn row(&self, n: usize, m: usize) -> Option<&GridRow> {
        self.grid_table.iter().find(|r| r.n == n && r.m == m)
    }

    /// Grid table as CSV with columns `N,m,R1..R6,bound`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("N,m,R1,R2,R3,R4,R5,R6,bound\n");
        for r in &self.grid_table {
            out.push_str(&format!(
                "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                r.n, r.m, r.r1, r.r2, r.r3, r.r4, r.r5, r.r6, r.bound
            ));
        }
        out
    }
}

fn evaluate_grid(
    s: &ExpansionSummary,
    targets: &TargetSpec,
    n_grid: &[usize],
    m_grid: &[usize],
) -> Result<Vec<GridRow>> {
    if n_grid.is_empty() || m_grid.is_empty() {
        return Err(Error::invalid("grids must be nonempty"));
    }
    let points: Vec<(usize, usize)> =
        n_grid.iter().flat_map(|&n| m_grid.iter().map(move |&m| (n, m))).collect();
    points.par_iter().map(|&(n, m)| r_terms_from(s, targets, n, m)).collect()
}

/// Minimizes the six-term bound over the Cartesian product of the grids.
pub fn theorem35_bound(
    f: &ChaosExpansion,
    targets: &TargetSpec,
    n_grid: &[usize],
    m_grid: &[usize],
) -> Result<CertificateReport> {
    let s = ExpansionSummary::new(f)?;
    let table = evaluate_grid(&s, targets, n_grid, m_grid)?;
    let diag = diagnostics_from(&s, targets, 0.0)?;
    Ok(CertificateReport::from_table(table, diag))
}

/// Single-order bound for `F = 𝓘_p(f)` against `Z ~ N(0, T_Z)`.
///
/// Cross-order γ-terms and the order-tail terms vanish identically, so this is
/// the general bound with the target at order `p` and `N = p`.
pub fn fixed_chaos_bound(f: &Kernel, t_z: &OperatorMatrix, m_grid: &[usize]) -> Result<CertificateReport> {
    let p = f.order();
    let exp = ChaosExpansion::from_kernels(f.truncation(), [f.clone()])?;
    let targets = TargetSpec::single(p, t_z.clone())?;
    theorem35_bound(&exp, &targets, &[p], m_grid)
}

/// Three-stage selection: the smallest `N` with `R1 + R6 <= ε/3`, then the
/// smallest `m` with `R4 + R5 <= ε/3`. Falls back to the last grid value when
/// no candidate qualifies. The returned report holds the chosen row and the
/// full table.
pub fn staged_bound(
    f: &ChaosExpansion,
    targets: &TargetSpec,
    n_grid: &[usize],
    m_grid: &[usize],
    eps: f64,
) -> Result<CertificateReport> {
    let s = ExpansionSummary::new(f)?;
    let table = evaluate_grid(&s, targets, n_grid, m_grid)?;
    let third = eps / 3.0;
    let n_pick = n_grid
        .iter()
        .copied()
        .find(|&n| table.iter().any(|r| r.n == n && r.r1 + r.r6 <= third))
        .unwrap_or(*n_grid.last().expect("nonempty"));
    let m_pick = m_grid
        .iter()
        .copied()
        .find(|&m| table.iter().any(|r| r.n == n_pick && r.m == m && r.r4 + r.r5 <= third))
        .unwrap_or(*m_grid.last().expect("nonempty"));
    let row = table.iter().find(|r| r.n == n_pick && r.m == m_pick).expect("grid point").clone();
    let diag = diagnostics_from(&s, targets, eps / 3.0)?;
    let mut report = CertificateReport::from_table(vec![row], diag);
    report.grid_table = table;
    Ok(report)
}

/// Bounds for a sequence of expansions sharing one target; `R1` at each `N`
/// is replaced by its supremum over the sequence.
pub fn sequence_bounds(
    seq: &[ChaosExpansion],
    targets: &TargetSpec,
    n_grid: &[usize],
    m_grid: &[usize],
) -> Result<Vec<CertificateReport>> {
    let summaries = seq.iter().map(ExpansionSummary::new).collect::<Result<Vec<_>>>()?;
    let sup_r1 = |n: usize| summaries.iter().map(|s| s.tail_mass(n).max(0.0).sqrt()).fold(0.0, f64::max);
    summaries
        .iter()
        .map(|s| {
            let table = evaluate_grid(s, targets, n_grid, m_grid)?
                .into_iter()
                .map(|row| GridRow { r1: sup_r1(row.n), ..row }.finish())
                .collect();
            Ok(CertificateReport::from_table(table, diagnostics_from(s, targets, 0.0)?))
        })
        .collect()
}

/// `(1/2) ‖T1 - T2‖_{𝒮₁}` with a warning when neither input is nondegenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairBound {
    pub value: f64,
    pub warning: Option<String>,
}

/// Upper bound on `d₂` between two centered Gaussians from their covariances.
pub fn gaussian_pair_bound(t1: &OperatorMatrix, t2: &OperatorMatrix) -> Result<PairBound> {
    if t1.dim() != t2.dim() {
        return Err(Error::DimensionMismatch { what: "covariance dim", expected: t1.dim(), got: t2.dim() });
    }
    for t in [t1, t2] {
        if !t.is_symmetric() {
            return Err(Error::invalid("covariance operator is not symmetric"));
        }
        t.require_psd(TARGET_PSD_TOL)?;
    }
    let value = 0.5 * t1.sub(t2)?.trace_norm();
    let nondegenerate = t1.dim() > 0 && (t1.min_eigenvalue() > 0.0 || t2.min_eigenvalue() > 0.0);
    let warning = (!nondegenerate)
        .then(|| "neither covariance is strictly positive definite at this truncation".to_string());
    Ok(PairBound { value, warning })
}

/// Stacks `K` fixed-chaos components into one expansion on `ℋ ⊗ ℝ^K`:
/// component `i` of block `k` lands at position `k·m + i`.
pub fn flatten_vector_chaos(components: &[Kernel]) -> Result<ChaosExpansion> {
    let first = components.first().ok_or_else(|| Error::invalid("need at least one component"))?;
    let t = first.truncation();
    for c in components {
        if c.truncation() != t {
            return Err(Error::invalid("vector components must share (hdim, Hdim)"));
        }
    }
    let k_total = components.len();
    let m = t.big_hdim;
    let big = Truncation::new(t.hdim, m * k_total)?;
    let mut out = ChaosExpansion::new(big);
    for (k, c) in components.iter().enumerate() {
        let mut block = Kernel::zero(c.order(), big);
        for (i, g) in c.components().iter().enumerate() {
            block.set_component(k * m + i, g.clone())?;
        }
        out.insert(block)?;
    }
    Ok(out)
}
