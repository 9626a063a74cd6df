//! Symmetric tensor kernels over a truncated isonormal space.
//!
//! A [`ScalarKernel`] of order `p` is stored sparsely, one entry per multiset
//! of indices (kept as a sorted tuple); the stored value is the coefficient of
//! every ordered tuple in that multiset's orbit. Norms and inner products
//! weight each entry by its orbit size. [`RawTensor`] holds arbitrary ordered
//! tuples and is what contractions produce.
//!
//! Contraction convention: `f ⊗_r g` pairs the last `r` arguments of `f` with
//! the first `r` arguments of `g`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operator::Truncation;

/// Coordinate index into the truncated isonormal basis (0-based).
pub type Index = u32;

/// Default tolerance above which strict loading rejects an asymmetric raw tensor.
pub const STRICT_ASYMMETRY_TOL: f64 = 1e-9;

/// `n!` as a float.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Binomial coefficient `C(n, k)` as a float; zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64).round()
}

/// Number of distinct orderings of a sorted tuple, `p! / Π_j m_j!`.
pub fn orbit_size(sorted: &[Index]) -> f64 {
    let mut size = factorial(sorted.len());
    for (_, mult) in multiplicities(sorted) {
        size /= factorial(mult as usize);
    }
    size
}

/// Run-length encoding `(index, multiplicity)` of a sorted tuple.
pub fn multiplicities(sorted: &[Index]) -> Vec<(Index, u32)> {
    let mut out: Vec<(Index, u32)> = Vec::new();
    for &j in sorted {
        match out.last_mut() {
            Some((last, count)) if *last == j => *count += 1,
            _ => out.push((j, 1)),
        }
    }
    out
}

fn next_permutation(v: &mut [Index]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// All distinct orderings of a sorted tuple, in lexicographic order.
pub fn orbit(sorted: &[Index]) -> Vec<Vec<Index>> {
    let mut cur = sorted.to_vec();
    let mut out = vec![cur.clone()];
    while next_permutation(&mut cur) {
        out.push(cur.clone());
    }
    out
}

/// A coefficient tensor indexed by ordered tuples, not necessarily symmetric.
/// Order 0 is a scalar stored under the empty tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    order: usize,
    hdim: usize,
    entries: BTreeMap<Vec<Index>, f64>,
}

impl RawTensor {
    pub fn zero(order: usize, hdim: usize) -> Self {
        Self { order, hdim, entries: BTreeMap::new() }
    }

    /// Builds a tensor from ordered-tuple entries; duplicates are summed.
    pub fn from_entries<I>(order: usize, hdim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<Index>, f64)>,
    {
        let mut out = Self::zero(order, hdim);
        for (tuple, value) in entries {
            if tuple.len() != order {
                return Err(Error::invalid(format!(
                    "tuple {tuple:?} has length {} but tensor order is {order}",
                    tuple.len()
                )));
            }
            if let Some(&bad) = tuple.iter().find(|&&j| j as usize >= hdim) {
                return Err(Error::IndexOutOfRange { index: bad as usize, len: hdim });
            }
            if !value.is_finite() {
                return Err(Error::invalid(format!("non-finite coefficient at {tuple:?}")));
            }
            *out.entries.entry(tuple).or_insert(0.0) += value;
        }
        Ok(out)
    }

    /// Dense row-major data with the last index varying fastest.
    pub fn from_dense(order: usize, hdim: usize, data: &[f64]) -> Result<Self> {
        let expected = hdim.pow(order as u32);
        if data.len() != expected {
            return Err(Error::DimensionMismatch { what: "dense tensor data", expected, got: data.len() });
        }
        let mut entries = Vec::new();
        for (flat, &v) in data.iter().enumerate() {
            if v != 0.0 {
                let mut tuple = vec![0 as Index; order];
                let mut rem = flat;
                for slot in tuple.iter_mut().rev() {
                    *slot = (rem % hdim) as Index;
                    rem /= hdim;
                }
                entries.push((tuple, v));
            }
        }
        Self::from_entries(order, hdim, entries)
    }

    pub fn scalar(value: f64) -> Self {
        let mut out = Self::zero(0, 1);
        out.entries.insert(Vec::new(), value);
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn hdim(&self) -> usize {
        self.hdim
    }

    pub fn get(&self, tuple: &[Index]) -> f64 {
        self.entries.get(tuple).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Vec<Index>, &f64)> {
        self.entries.iter()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// Value of an order-0 tensor.
    pub fn as_scalar(&self) -> Option<f64> {
        (self.order == 0).then(|| self.get(&[]))
    }

    pub fn norm_sq(&self) -> f64 {
        self.entries.values().map(|v| v * v).sum()
    }

    /// Frobenius norm; `|value|` for order 0.
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `⟨self, other⟩` over ordered tuples.
    pub fn inner(&self, other: &RawTensor) -> f64 {
        let (small, large) = if self.nnz() <= other.nnz() { (self, other) } else { (other, self) };
        small.entries.iter().map(|(k, v)| v * large.get(k)).sum()
    }

    fn grouped_by_sorted_key(&self) -> BTreeMap<Vec<Index>, Vec<f64>> {
        let mut groups: BTreeMap<Vec<Index>, Vec<f64>> = BTreeMap::new();
        for (tuple, &v) in &self.entries {
            let mut key = tuple.clone();
            key.sort_unstable();
            groups.entry(key).or_default().push(v);
        }
        groups
    }

    /// Largest deviation of an ordered entry from its orbit average
    /// (missing orbit members count as zero).
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for (key, values) in self.grouped_by_sorted_key() {
            let size = orbit_size(&key);
            let avg = values.iter().sum::<f64>() / size;
            for v in &values {
                worst = worst.max((v - avg).abs());
            }
            if (values.len() as f64) < size {
                worst = worst.max(avg.abs());
            }
        }
        worst
    }

    /// Average over argument permutations.
    pub fn symmetrize(&self) -> ScalarKernel {
        let mut coeffs = BTreeMap::new();
        for (key, values) in self.grouped_by_sorted_key() {
            let avg = values.iter().sum::<f64>() / orbit_size(&key);
            if avg != 0.0 {
                coeffs.insert(key, avg);
            }
        }
        ScalarKernel { order: self.order, hdim: self.hdim, coeffs }
    }

    /// Symmetrizes, but refuses inputs whose asymmetry exceeds `tol`.
    pub fn symmetrize_strict(&self, tol: f64) -> Result<ScalarKernel> {
        let asym = self.asymmetry();
        if asym > tol {
            return Err(Error::invalid(format!(
                "kernel asymmetry {asym:e} exceeds strict tolerance {tol:e}"
            )));
        }
        Ok(self.symmetrize())
    }
}

/// Symmetrization of a raw coefficient tensor.
pub fn symmetrize(raw: &RawTensor) -> ScalarKernel {
    raw.symmetrize()
}

/// A fully symmetric kernel of order `p` over `hdim` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarKernel {
    order: usize,
    hdim: usize,
    coeffs: BTreeMap<Vec<Index>, f64>,
}

impl ScalarKernel {
    pub fn zero(order: usize, hdim: usize) -> Self {
        Self { order, hdim, coeffs: BTreeMap::new() }
    }

    /// Builds a kernel from one value per multiset. Keys are sorted on entry
    /// and repeated multisets are summed.
    pub fn from_multisets<I>(order: usize, hdim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<Index>, f64)>,
    {
        let mut out = Self::zero(order, hdim);
        for (mut key, value) in entries {
            if key.len() != order {
                return Err(Error::invalid(format!(
                    "multiset {key:?} has length {} but kernel order is {order}",
                    key.len()
                )));
            }
            if let Some(&bad) = key.iter().find(|&&j| j as usize >= hdim) {
                return Err(Error::IndexOutOfRange { index: bad as usize, len: hdim });
            }
            if !value.is_finite() {
                return Err(Error::invalid(format!("non-finite coefficient at {key:?}")));
            }
            key.sort_unstable();
            *out.coeffs.entry(key).or_insert(0.0) += value;
        }
        out.coeffs.retain(|_, v| *v != 0.0);
        Ok(out)
    }

    /// `symmetrize(h_{j_1} ⊗ … ⊗ h_{j_p})`.
    pub fn basis_product(hdim: usize, indices: &[Index]) -> Result<Self> {
        let mut key = indices.to_vec();
        key.sort_unstable();
        let value = 1.0 / orbit_size(&key);
        Self::from_multisets(indices.len(), hdim, [(key, value)])
    }

    /// The order-0 kernel with the given value.
    pub fn constant(value: f64) -> Self {
        let mut out = Self::zero(0, 1);
        if value != 0.0 {
            out.coeffs.insert(Vec::new(), value);
        }
        out
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn hdim(&self) -> usize {
        self.hdim
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.coeffs.len()
    }

    /// Iterates `(sorted tuple, coefficient)` pairs.
    pub fn multisets(&self) -> impl Iterator<Item = (&Vec<Index>, f64)> {
        self.coeffs.iter().map(|(k, v)| (k, *v))
    }

    /// Coefficient of an ordered tuple (any ordering of the multiset).
    pub fn get(&self, tuple: &[Index]) -> f64 {
        let mut key = tuple.to_vec();
        key.sort_unstable();
        self.coeffs.get(&key).copied().unwrap_or(0.0)
    }

    /// All ordered tuples with their coefficients.
    pub fn ordered_entries(&self) -> Vec<(Vec<Index>, f64)> {
        let mut out = Vec::new();
        for (key, &v) in &self.coeffs {
            for t in orbit(key) {
                out.push((t, v));
            }
        }
        out
    }

    pub fn to_raw(&self) -> RawTensor {
        RawTensor {
            order: self.order,
            hdim: self.hdim,
            entries: self.ordered_entries().into_iter().collect(),
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|(k, v)| v * v * orbit_size(k)).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// `⟨self, other⟩_{𝔥^{⊗p}}`; zero when the orders differ.
    pub fn inner(&self, other: &ScalarKernel) -> f64 {
        if self.order != other.order {
            return 0.0;
        }
        let (small, large) = if self.nnz() <= other.nnz() { (self, other) } else { (other, self) };
        small
            .coeffs
            .iter()
            .filter_map(|(k, v)| large.coeffs.get(k).map(|w| v * w * orbit_size(k)))
            .sum()
    }

    pub fn scale(&self, c: f64) -> Self {
        if c == 0.0 {
            return Self::zero(self.order, self.hdim);
        }
        Self {
            order: self.order,
            hdim: self.hdim,
            coeffs: self.coeffs.iter().map(|(k, v)| (k.clone(), v * c)).collect(),
        }
    }

    /// `self + c · other`.
    pub fn axpy(&self, c: f64, other: &ScalarKernel) -> Result<Self> {
        if self.order != other.order || self.hdim != other.hdim {
            return Err(Error::invalid(format!(
                "cannot add kernels of shape (p={}, d={}) and (p={}, d={})",
                self.order, self.hdim, other.order, other.hdim
            )));
        }
        let mut out = self.clone();
        for (k, v) in &other.coeffs {
            *out.coeffs.entry(k.clone()).or_insert(0.0) += c * v;
        }
        out.coeffs.retain(|_, v| *v != 0.0);
        Ok(out)
    }

    /// Re-homes the kernel in a larger isonormal space, shifting indices by `offset`.
    pub fn embed(&self, new_hdim: usize, offset: usize) -> Result<Self> {
        if self.order > 0 && offset + self.hdim > new_hdim {
            return Err(Error::invalid(format!(
                "cannot embed d={} at offset {offset} into d={new_hdim}",
                self.hdim
            )));
        }
        Ok(Self {
            order: self.order,
            hdim: new_hdim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(k, v)| (k.iter().map(|j| j + offset as Index).collect(), *v))
                .collect(),
        })
    }

    /// The order-(p-1) kernel `f(k, ·, …, ·)`.
    pub fn slice_first(&self, k: Index) -> Result<Self> {
        if self.order == 0 {
            return Err(Error::invalid("cannot slice an order-0 kernel"));
        }
        if k as usize >= self.hdim {
            return Err(Error::IndexOutOfRange { index: k as usize, len: self.hdim });
        }
        let mut coeffs = BTreeMap::new();
        for (key, &v) in &self.coeffs {
            if let Ok(pos) = key.binary_search(&k) {
                let mut rest = key.clone();
                rest.remove(pos);
                coeffs.insert(rest, v);
            }
        }
        Ok(Self { order: self.order - 1, hdim: self.hdim, coeffs })
    }

    /// Every `(k, f(k, ·))` with a nonzero slice.
    pub fn slices(&self) -> Vec<(Index, ScalarKernel)> {
        let mut by_index: BTreeMap<Index, BTreeMap<Vec<Index>, f64>> = BTreeMap::new();
        for (key, &v) in &self.coeffs {
            for (j, _) in multiplicities(key) {
                let pos = key.binary_search(&j).expect("index present");
                let mut rest = key.clone();
                rest.remove(pos);
                by_index.entry(j).or_default().insert(rest, v);
            }
        }
        by_index
            .into_iter()
            .map(|(k, coeffs)| {
                (k, ScalarKernel { order: self.order.saturating_sub(1), hdim: self.hdim, coeffs })
            })
            .collect()
    }
}

/// `f ⊗_r g`, contracting the last `r` arguments of `f` with the first `r` of `g`.
pub fn contract(f: &ScalarKernel, g: &ScalarKernel, r: usize) -> Result<RawTensor> {
    if f.hdim != g.hdim {
        return Err(Error::DimensionMismatch { what: "kernel hdim", expected: f.hdim, got: g.hdim });
    }
    if r > f.order.min(g.order) {
        return Err(Error::invalid(format!(
            "contraction index {r} exceeds min order {}",
            f.order.min(g.order)
        )));
    }
    let out_order = f.order + g.order - 2 * r;
    let split_f = f.order - r;

    let mut f_groups: BTreeMap<Vec<Index>, Vec<(Vec<Index>, f64)>> = BTreeMap::new();
    for (t, v) in f.ordered_entries() {
        f_groups.entry(t[split_f..].to_vec()).or_default().push((t[..split_f].to_vec(), v));
    }
    let mut g_groups: BTreeMap<Vec<Index>, Vec<(Vec<Index>, f64)>> = BTreeMap::new();
    for (t, v) in g.ordered_entries() {
        g_groups.entry(t[..r].to_vec()).or_default().push((t[r..].to_vec(), v));
    }

    let mut out = RawTensor::zero(out_order, f.hdim);
    for (key, left) in &f_groups {
        let Some(right) = g_groups.get(key) else { continue };
        for (a, va) in left {
            for (b, vb) in right {
                let mut idx = Vec::with_capacity(out_order);
                idx.extend_from_slice(a);
                idx.extend_from_slice(b);
                *out.entries.entry(idx).or_insert(0.0) += va * vb;
            }
        }
    }
    out.entries.retain(|_, v| *v != 0.0);
    Ok(out)
}

/// `‖f‖_{𝔥^{⊗p}}` over all ordered tuples.
pub fn kernel_norm(f: &ScalarKernel) -> f64 {
    f.norm()
}

/// An `𝔥^{⊙p} ⊗ ℋ` kernel stored through its ℋ-components `f_i = ⟨f, e_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    order: usize,
    trunc: Truncation,
    components: Vec<ScalarKernel>,
}

impl Kernel {
    pub fn new(order: usize, trunc: Truncation, components: Vec<ScalarKernel>) -> Result<Self> {
        if components.len() != trunc.big_hdim {
            return Err(Error::DimensionMismatch {
                what: "number of kernel components",
                expected: trunc.big_hdim,
                got: components.len(),
            });
        }
        for c in &components {
            if c.order != order || (c.hdim != trunc.hdim && !(order == 0 && c.is_zero())) {
                return Err(Error::invalid(format!(
                    "component of shape (p={}, d={}) does not match kernel (p={order}, d={})",
                    c.order, c.hdim, trunc.hdim
                )));
            }
        }
        Ok(Self { order, trunc, components })
    }

    pub fn zero(order: usize, trunc: Truncation) -> Self {
        Self {
            order,
            trunc,
            components: vec![ScalarKernel::zero(order, trunc.hdim); trunc.big_hdim],
        }
    }

    /// `g ⊗ v` for a scalar kernel `g` and coefficient vector `v ∈ ℝ^m`.
    pub fn product(g: &ScalarKernel, v: &[f64]) -> Result<Self> {
        let trunc = Truncation::new(g.hdim, v.len())?;
        Self::new(g.order, trunc, v.iter().map(|&c| g.scale(c)).collect())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn components(&self) -> &[ScalarKernel] {
        &self.components
    }

    /// `⟨f, e_i⟩_ℋ` (0-based `i`).
    pub fn component(&self, i: usize) -> Result<&ScalarKernel> {
        self.components.get(i).ok_or(Error::IndexOutOfRange { index: i, len: self.components.len() })
    }

    pub fn set_component(&mut self, i: usize, g: ScalarKernel) -> Result<()> {
        if i >= self.components.len() {
            return Err(Error::IndexOutOfRange { index: i, len: self.components.len() });
        }
        if g.order != self.order || g.hdim != self.trunc.hdim {
            return Err(Error::invalid("component shape does not match kernel"));
        }
        self.components[i] = g;
        Ok(())
    }

    /// `‖f‖²_{𝔥^{⊗p} ⊗ ℋ} = Σ_i ‖f_i‖²`.
    pub fn norm_sq(&self) -> f64 {
        self.components.iter().map(ScalarKernel::norm_sq).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(ScalarKernel::is_zero)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            order: self.order,
            trunc: self.trunc,
            components: self.components.iter().map(|g| g.scale(c)).collect(),
        }
    }

    /// Scales component `i` by `weights[i]`.
    pub fn scale_components(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.components.len() {
            return Err(Error::DimensionMismatch {
                what: "component weights",
                expected: self.components.len(),
                got: weights.len(),
            });
        }
        Ok(Self {
            order: self.order,
            trunc: self.trunc,
            components: self.components.iter().zip(weights).map(|(g, &w)| g.scale(w)).collect(),
        })
    }

    /// Applies a linear map on the ℋ side: component `j` of the result is
    /// `Σ_i u[(j, i)] f_i`. `u` is `m' × m`.
    pub fn map_hilbert(&self, u: &DMatrix<f64>) -> Result<Self> {
        if u.ncols() != self.components.len() {
            return Err(Error::DimensionMismatch {
                what: "hilbert map columns",
                expected: self.components.len(),
                got: u.ncols(),
            });
        }
        let trunc = Truncation::new(self.trunc.hdim, u.nrows())?;
        let mut components = Vec::with_capacity(u.nrows());
        for j in 0..u.nrows() {
            let mut acc = ScalarKernel::zero(self.order, self.trunc.hdim);
            for (i, g) in self.components.iter().enumerate() {
                let w = u[(j, i)];
                if w != 0.0 && !g.is_zero() {
                    acc = acc.axpy(w, g)?;
                }
            }
            components.push(acc);
        }
        Self::new(self.order, trunc, components)
    }

    pub fn axpy(&self, c: f64, other: &Kernel) -> Result<Self> {
        if self.order != other.order || self.trunc != other.trunc {
            return Err(Error::invalid("cannot add kernels with different order or truncation"));
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.axpy(c, b))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { order: self.order, trunc: self.trunc, components })
    }

    /// Moves the kernel into an isonormal space of dimension `new_hdim`, with its
    /// coordinates starting at `offset`.
    pub fn embed_isonormal(&self, new_hdim: usize, offset: usize) -> Result<Self> {
        let trunc = Truncation::new(new_hdim, self.trunc.big_hdim)?;
        let components =
            self.components.iter().map(|g| g.embed(new_hdim, offset)).collect::<Result<Vec<_>>>()?;
        Self::new(self.order, trunc, components)
    }

    /// Zero-pads the ℋ side to dimension `new_m >= m`.
    pub fn pad_hilbert(&self, new_m: usize) -> Result<Self> {
        if new_m < self.components.len() {
            return Err(Error::invalid(format!(
                "cannot pad Hdim {} down to {new_m}",
                self.components.len()
            )));
        }
        let mut components = self.components.clone();
        components.resize(new_m, ScalarKernel::zero(self.order, self.trunc.hdim));
        Self::new(self.order, Truncation::new(self.trunc.hdim, new_m)?, components)
    }

    /// `‖f_i ⊗_r f_i‖` for every component `i` and `r = 1, …, p-1`.
    pub fn contraction_profile(&self) -> Result<ContractionProfile> {
        let mut norms = Vec::with_capacity(self.components.len());
        for g in &self.components {
            let mut row = Vec::with_capacity(self.order.saturating_sub(1));
            for r in 1..self.order {
                row.push(if g.is_zero() { 0.0 } else { contract(g, g, r)?.norm() });
            }
            norms.push(row);
        }
        Ok(ContractionProfile { order: self.order, norms })
    }
}

/// Table of self-contraction norms, `norms[i][r - 1] = ‖f_i ⊗_r f_i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionProfile {
    pub order: usize,
    pub norms: Vec<Vec<f64>>,
}

impl ContractionProfile {
    /// `‖f_i ⊗_r f_i‖`, zero outside `1 <= r <= p-1`.
    pub fn get(&self, i: usize, r: usize) -> f64 {
        if r == 0 || r >= self.order {
            return 0.0;
        }
        self.norms.get(i).map_or(0.0, |row| row[r - 1])
    }

    /// `(i, r, norm)` triples.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.norms
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(k, &v)| (i, k + 1, v)))
    }

    pub fn is_empty(&self) -> bool {
        self.order < 2 || self.norms.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.entries().map(|(_, _, v)| v).fold(0.0, f64::max)
    }
}

/// `F = Σ_r 𝓘_r(f_r)` with finitely many orders, all on one truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChaosExpansion {
    trunc: Truncation,
    kernels: BTreeMap<usize, Kernel>,
}

impl ChaosExpansion {
    pub fn new(trunc: Truncation) -> Self {
        Self { trunc, kernels: BTreeMap::new() }
    }

    pub fn from_kernels(trunc: Truncation, kernels: impl IntoIterator<Item = Kernel>) -> Result<Self> {
        let mut out = Self::new(trunc);
        for k in kernels {
            out.insert(k)?;
        }
        Ok(out)
    }

    /// Adds a kernel; a second kernel of an existing order is summed in.
    pub fn insert(&mut self, kernel: Kernel) -> Result<()> {
        if kernel.order == 0 {
            return Err(Error::invalid("chaos expansions are centered: order 0 is not allowed"));
        }
        if kernel.trunc != self.trunc {
            return Err(Error::invalid(format!(
                "kernel truncation (d={}, m={}) does not match expansion (d={}, m={})",
                kernel.trunc.hdim, kernel.trunc.big_hdim, self.trunc.hdim, self.trunc.big_hdim
            )));
        }
        match self.kernels.remove(&kernel.order) {
            Some(existing) => {
                let sum = existing.axpy(1.0, &kernel)?;
                self.kernels.insert(kernel.order, sum);
            }
            None => {
                self.kernels.insert(kernel.order, kernel);
            }
        }
        Ok(())
    }

    pub fn truncation(&self) -> Truncation {
        self.trunc
    }

    pub fn kernel(&self, order: usize) -> Option<&Kernel> {
        self.kernels.get(&order)
    }

    pub fn kernels(&self) -> impl Iterator<Item = (usize, &Kernel)> {
        self.kernels.iter().map(|(r, k)| (*r, k))
    }

    pub fn orders(&self) -> Vec<usize> {
        self.kernels.keys().copied().collect()
    }

    pub fn max_order(&self) -> usize {
        self.kernels.keys().next_back().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.values().all(Kernel::is_zero)
    }

    /// Applies `w(r)` to each order-`r` kernel.
    pub fn scale_orders(&self, w: impl Fn(usize) -> f64) -> Self {
        Self {
            trunc: self.trunc,
            kernels: self.kernels.iter().map(|(&r, k)| (r, k.scale(w(r)))).collect(),
        }
    }

    /// `-L⁻¹F = Σ_r (1/r) 𝓘_r(f_r)`.
    pub fn neg_pseudo_inverse_generator(&self) -> Self {
        self.scale_orders(|r| 1.0 / r as f64)
    }

    /// `-LF = Σ_r r 𝓘_r(f_r)`.
    pub fn neg_generator(&self) -> Self {
        self.scale_orders(|r| r as f64)
    }

    /// The orders `r <= n` only.
    pub fn truncate_orders(&self, n: usize) -> Self {
        Self {
            trunc: self.trunc,
            kernels: self.kernels.range(..=n).map(|(&r, k)| (r, k.clone())).collect(),
        }
    }

    /// Keeps only order `r`.
    pub fn single_order(&self, r: usize) -> Self {
        Self {
            trunc: self.trunc,
            kernels: self.kernels.get(&r).map(|k| (r, k.clone())).into_iter().collect(),
        }
    }

    pub fn map_kernels(&self, f: impl Fn(usize, &Kernel) -> Result<Kernel>) -> Result<Self> {
        let mut out = None;
        for (&r, k) in &self.kernels {
            let mapped = f(r, k)?;
            let exp = out.get_or_insert_with(|| Self::new(mapped.trunc));
            exp.insert(mapped)?;
        }
        Ok(out.unwrap_or_else(|| Self::new(self.trunc)))
    }

    /// Moves every kernel into a larger isonormal space at `offset`.
    pub fn embed_isonormal(&self, new_hdim: usize, offset: usize) -> Result<Self> {
        let trunc = Truncation::new(new_hdim, self.trunc.big_hdim)?;
        let mut out = Self::new(trunc);
        for k in self.kernels.values() {
            out.insert(k.embed_isonormal(new_hdim, offset)?)?;
        }
        Ok(out)
    }

    pub fn pad_hilbert(&self, new_m: usize) -> Result<Self> {
        let trunc = Truncation::new(self.trunc.hdim, new_m)?;
        let mut out = Self::new(trunc);
        for k in self.kernels.values() {
            out.insert(k.pad_hilbert(new_m)?)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_raw(rng: &mut ChaCha8Rng, order: usize, hdim: usize) -> RawTensor {
        let data: Vec<f64> = (0..hdim.pow(order as u32)).map(|_| rng.random_range(-1.0..1.0)).collect();
        RawTensor::from_dense(order, hdim, &data).unwrap()
    }

    #[test]
    fn orbit_counts() {
        assert_eq!(orbit_size(&[0, 0, 1]), 3.0);
        assert_eq!(orbit(&[0, 0, 1]).len(), 3);
        assert_eq!(orbit_size(&[0, 1, 2]), 6.0);
        assert_eq!(orbit(&[0, 1, 2, 3]).len(), 24);
        assert_eq!(orbit(&[]).len(), 1);
    }

    #[test]
    fn symmetrize_simple_product() {
        let raw = RawTensor::from_entries(2, 2, [(vec![0, 1], 1.0)]).unwrap();
        let s = raw.symmetrize();
        assert_eq!(s.get(&[0, 1]), 0.5);
        assert_eq!(s.get(&[1, 0]), 0.5);
        // idempotent
        assert_eq!(s.to_raw().symmetrize(), s);
    }

    #[test]
    fn symmetrize_order_three_enumerates_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = random_raw(&mut rng, 3, 3);
        let s = raw.symmetrize();
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        for a in 0..3u32 {
            for b in 0..3u32 {
                for c in 0..3u32 {
                    let t = [a, b, c];
                    let oracle: f64 =
                        perms.iter().map(|p| raw.get(&[t[p[0]], t[p[1]], t[p[2]]])).sum::<f64>() / 6.0;
                    assert!((s.get(&t) - oracle).abs() < 1e-14);
                }
            }
        }
        assert!(s.norm() <= raw.norm() + 1e-12);
    }

    #[test]
    fn strict_symmetrization_rejects_asymmetric() {
        let raw = RawTensor::from_entries(2, 2, [(vec![0, 1], 1.0)]).unwrap();
        assert!(raw.symmetrize_strict(STRICT_ASYMMETRY_TOL).is_err());
        let sym = RawTensor::from_entries(2, 2, [(vec![0, 1], 1.0), (vec![1, 0], 1.0)]).unwrap();
        assert!(sym.symmetrize_strict(STRICT_ASYMMETRY_TOL).is_ok());
    }

    #[test]
    fn contraction_examples() {
        let h11 = ScalarKernel::basis_product(2, &[0, 0]).unwrap();
        let c = contract(&h11, &h11, 1).unwrap();
        assert_eq!(c.get(&[0, 0]), 1.0);
        assert_eq!(c.norm_sq(), 1.0);

        let s = 1.0 / 2f64.sqrt();
        let f = ScalarKernel::from_multisets(2, 2, [(vec![0, 1], s)]).unwrap();
        assert!((f.norm() - 1.0).abs() < 1e-15);
        let c = contract(&f, &f, 1).unwrap();
        assert!((c.get(&[0, 0]) - 0.5).abs() < 1e-15);
        assert!((c.get(&[1, 1]) - 0.5).abs() < 1e-15);
        assert_eq!(c.get(&[0, 1]), 0.0);
        assert!((c.norm_sq() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn full_contraction_is_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_raw(&mut rng, 3, 3).symmetrize();
        let g = random_raw(&mut rng, 3, 3).symmetrize();
        let c = contract(&f, &g, 3).unwrap();
        assert_eq!(c.order(), 0);
        assert!((c.as_scalar().unwrap() - f.inner(&g)).abs() < 1e-12);
        assert!((f.norm() - contract(&f, &f, 3).unwrap().as_scalar().unwrap().sqrt()).abs() < 1e-12);
        assert!(contract(&f, &g, 4).is_err());
    }

    #[test]
    fn contraction_r0_is_tensor_product() {
        let a = ScalarKernel::basis_product(2, &[0]).unwrap();
        let b = ScalarKernel::basis_product(2, &[1]).unwrap();
        let c = contract(&a, &b, 0).unwrap();
        assert_eq!(c.get(&[0, 1]), 1.0);
        assert_eq!(c.get(&[1, 0]), 0.0);
    }

    #[test]
    fn slicing() {
        let f = ScalarKernel::from_multisets(3, 3, [(vec![0, 1, 1], 2.0), (vec![2, 2, 2], 1.0)]).unwrap();
        let s1 = f.slice_first(1).unwrap();
        assert_eq!(s1.get(&[0, 1]), 2.0);
        assert_eq!(s1.get(&[1, 1]), 0.0);
        let s0 = f.slice_first(0).unwrap();
        assert_eq!(s0.get(&[1, 1]), 2.0);
        let all = f.slices();
        assert_eq!(all.len(), 3);
        for (k, s) in all {
            assert_eq!(s, f.slice_first(k).unwrap());
        }
    }

    #[test]
    fn components_and_parseval() {
        let g = ScalarKernel::basis_product(2, &[0, 1]).unwrap();
        let f = Kernel::product(&g, &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(f.component(2).unwrap(), &g);
        assert!(f.component(0).unwrap().is_zero());
        assert!(f.component(3).is_err());
        assert!((f.norm_sq() - g.norm_sq()).abs() < 1e-15);
    }

    #[test]
    fn profile_examples() {
        let t = Truncation::new(1, 1).unwrap();
        let lin = Kernel::new(1, t, vec![ScalarKernel::basis_product(1, &[0]).unwrap()]).unwrap();
        assert!(lin.contraction_profile().unwrap().is_empty());
        let quad = Kernel::new(2, t, vec![ScalarKernel::basis_product(1, &[0, 0]).unwrap()]).unwrap();
        let prof = quad.contraction_profile().unwrap();
        assert_eq!(prof.entries().collect::<Vec<_>>(), vec![(0, 1, 1.0)]);
        let scaled = quad.scale(3.0).contraction_profile().unwrap();
        assert!((scaled.get(0, 1) - 9.0).abs() < 1e-14);
    }

    #[test]
    fn expansion_rejects_order_zero_and_mismatch() {
        let t = Truncation::new(2, 2).unwrap();
        let mut e = ChaosExpansion::new(t);
        assert!(e.insert(Kernel::zero(0, t)).is_err());
        let other = Truncation::new(3, 2).unwrap();
        assert!(e.insert(Kernel::zero(1, other)).is_err());
        e.insert(Kernel::zero(2, t)).unwrap();
        assert!(e.is_empty());
        assert_eq!(e.orders(), vec![2]);
    }
}
