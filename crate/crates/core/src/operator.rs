//! Dense operators on a truncated Hilbert space.
//!
//! An [`OperatorMatrix`] stores `⟨T e_j, e_i⟩` at `(i, j)` for an orthonormal
//! basis `e_0, …, e_{m-1}`. Singular values come from the symmetric
//! eigensolver when the matrix is symmetric (they are `|λ_i|`) and from a
//! one-sided SVD otherwise; diagonal matrices short-circuit both.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance used for symmetry detection.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative singular-value threshold used when counting numerical rank.
pub const RANK_TOL: f64 = 1e-8;

/// Dimensions of the truncated isonormal space and of the truncated target space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    /// Dimension `d` of the truncated isonormal space.
    pub hdim: usize,
    /// Dimension `m` of the truncated Hilbert space.
    #[serde(rename = "Hdim")]
    pub big_hdim: usize,
}

impl Truncation {
    pub fn new(hdim: usize, big_hdim: usize) -> Result<Self> {
        if hdim == 0 || big_hdim == 0 {
            return Err(Error::invalid(format!(
                "truncation dimensions must be positive (hdim={hdim}, Hdim={big_hdim})"
            )));
        }
        Ok(Self { hdim, big_hdim })
    }
}

/// Schatten exponent. `p = ∞` is the operator norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schatten {
    P(f64),
    Inf,
}

impl Schatten {
    pub const TRACE: Schatten = Schatten::P(1.0);
    pub const HILBERT_SCHMIDT: Schatten = Schatten::P(2.0);

    pub fn from_f64(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Schatten::Inf)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Schatten::P(p))
        } else {
            Err(Error::invalid(format!("Schatten exponent must be >= 1, got {p}")))
        }
    }
}

/// The four pieces `(P A P, Q A P, P A Q, Q A Q)` of a block split, with
/// `P` the projection onto the first `m` coordinates and `Q = I - P`.
#[derive(Debug, Clone)]
pub struct BlockSplit {
    pub head: OperatorMatrix,
    pub lower: OperatorMatrix,
    pub upper: OperatorMatrix,
    pub tail: OperatorMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<f64>,
}

impl OperatorMatrix {
    /// Wraps a square matrix, rejecting non-finite entries.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::invalid(format!(
                "operator matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() == 0 {
            return Err(Error::invalid("operator matrix must have positive dimension"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("operator matrix has non-finite entries"));
        }
        Ok(Self { entries })
    }

    /// Like [`OperatorMatrix::new`] but additionally requires symmetry within [`SYMMETRY_TOL`].
    pub fn new_symmetric(entries: DMatrix<f64>) -> Result<Self> {
        let op = Self::new(entries)?;
        let asym = op.asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(Error::invalid(format!(
                "operator flagged symmetric has asymmetry {asym:e}"
            )));
        }
        Ok(op)
    }

    pub fn from_row_major(dim: usize, data: &[f64]) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                what: "row-major entries",
                expected: dim * dim,
                got: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, data))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        Self { entries: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        Self { entries: DMatrix::identity(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// The rank-one operator `u ⊗ v : h ↦ ⟨h, v⟩ u`.
    pub fn rank_one(u: &[f64], v: &[f64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                what: "rank-one factors",
                expected: u.len(),
                got: v.len(),
            });
        }
        let u = DVector::from_column_slice(u);
        let v = DVector::from_column_slice(v);
        Self::new(&u * v.transpose())
    }

    /// `e_i ⊗ e_i` in dimension `dim` (0-based `i`).
    pub fn basis_projector(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::IndexOutOfRange { index: i, len: dim });
        }
        let mut op = Self::zeros(dim);
        op.entries[(i, i)] = 1.0;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.entries.diagonal().iter().copied().collect()
    }

    /// Row-major copy of the entries.
    pub fn to_row_major(&self) -> Vec<f64> {
        let m = self.dim();
        let mut out = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                out.push(self.entries[(i, j)]);
            }
        }
        out
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in (i + 1)..m {
                worst = worst.max((self.entries[(i, j)] - self.entries[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry() <= SYMMETRY_TOL
    }

    pub fn is_diagonal(&self) -> bool {
        let m = self.dim();
        (0..m).all(|j| (0..m).all(|i| i == j || self.entries[(i, j)] == 0.0))
    }

    pub fn transpose(&self) -> Self {
        Self { entries: self.entries.transpose() }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { entries: &self.entries * c }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self { entries: &self.entries + &other.entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self { entries: &self.entries - &other.entries })
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self { entries: &self.entries * &other.entries })
    }

    /// `U A Uᵀ` for a square `U` of matching dimension.
    pub fn conjugate(&self, u: &DMatrix<f64>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "conjugating matrix",
                expected: self.dim(),
                got: u.nrows(),
            });
        }
        Self::new(u * &self.entries * u.transpose())
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                what: "operator dimension",
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    /// Algebraic trace `Σ_i A_ii`.
    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    /// Sum of the trailing diagonal entries `Σ_{i >= m} A_ii`.
    pub fn tail_trace(&self, m: usize) -> f64 {
        (m..self.dim()).map(|i| self.entries[(i, i)]).sum()
    }

    /// Sum of the leading diagonal entries `Σ_{i < m} A_ii`.
    pub fn head_trace(&self, m: usize) -> f64 {
        (0..m.min(self.dim())).map(|i| self.entries[(i, i)]).sum()
    }

    /// Singular values in decreasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = if self.is_diagonal() {
            self.entries.diagonal().iter().map(|v| v.abs()).collect()
        } else if self.is_symmetric() {
            let sym = symmetrized(&self.entries);
            SymmetricEigen::new(sym).eigenvalues.iter().map(|v| v.abs()).collect()
        } else {
            self.entries.clone().svd(false, false).singular_values.iter().copied().collect()
        };
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Eigenvalues of the symmetric part, ascending.
    pub fn symmetric_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = if self.is_diagonal() {
            self.entries.diagonal().iter().copied().collect()
        } else {
            SymmetricEigen::new(symmetrized(&self.entries)).eigenvalues.iter().copied().collect()
        };
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.symmetric_eigenvalues()[0]
    }

    /// Checks symmetry and `λ_min >= -tol · max(1, ‖A‖_op)`.
    pub fn is_psd(&self, tol: f64) -> bool {
        if !self.is_symmetric() {
            return false;
        }
        let ev = self.symmetric_eigenvalues();
        let scale = ev.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        ev[0] >= -tol * scale
    }

    pub fn require_psd(&self, tol: f64) -> Result<()> {
        if !self.is_symmetric() {
            return Err(Error::invalid(format!(
                "operator is not symmetric (asymmetry {:e})",
                self.asymmetry()
            )));
        }
        if !self.is_psd(tol) {
            return Err(Error::NotPositiveSemidefinite { min_eigenvalue: self.min_eigenvalue() });
        }
        Ok(())
    }

    /// `(Σ s_i^p)^{1/p}`, or `s_1` for `p = ∞`.
    pub fn schatten_norm(&self, p: Schatten) -> f64 {
        let s = self.singular_values();
        match p {
            Schatten::Inf => s.first().copied().unwrap_or(0.0),
            Schatten::P(p) if p == 1.0 => s.iter().sum(),
            Schatten::P(p) if p == 2.0 => s.iter().map(|v| v * v).sum::<f64>().sqrt(),
            Schatten::P(p) => {
                let top = s.first().copied().unwrap_or(0.0);
                if top == 0.0 {
                    return 0.0;
                }
                // scale by s_1 to keep s^p in range for large p
                top * s.iter().map(|v| (v / top).powf(p)).sum::<f64>().powf(1.0 / p)
            }
        }
    }

    pub fn trace_norm(&self) -> f64 {
        self.schatten_norm(Schatten::TRACE)
    }

    pub fn op_norm(&self) -> f64 {
        self.schatten_norm(Schatten::Inf)
    }

    /// Splits along the first `m` coordinates.
    pub fn block_decompose(&self, m: usize) -> Result<BlockSplit> {
        let dim = self.dim();
        if m > dim {
            return Err(Error::invalid(format!("block cut {m} exceeds dimension {dim}")));
        }
        let mut head = DMatrix::zeros(dim, dim);
        let mut lower = DMatrix::zeros(dim, dim);
        let mut upper = DMatrix::zeros(dim, dim);
        let mut tail = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            for i in 0..dim {
                let v = self.entries[(i, j)];
                match (i < m, j < m) {
                    (true, true) => head[(i, j)] = v,
                    (false, true) => lower[(i, j)] = v,
                    (true, false) => upper[(i, j)] = v,
                    (false, false) => tail[(i, j)] = v,
                }
            }
        }
        Ok(BlockSplit {
            head: Self { entries: head },
            lower: Self { entries: lower },
            upper: Self { entries: upper },
            tail: Self { entries: tail },
        })
    }

    /// Numerical rank with singular values above `RANK_TOL · max(1, s_1)`.
    pub fn numerical_rank(&self) -> usize {
        let s = self.singular_values();
        let cut = RANK_TOL * s.first().copied().unwrap_or(0.0).max(1.0);
        s.iter().filter(|v| **v > cut).count()
    }

    /// `√r · ‖A‖_{S₂}`, which dominates `‖A‖_{S₁}` whenever `rank(A) <= r`.
    pub fn finite_rank_s1_bound(&self, r: usize) -> Result<f64> {
        let rank = self.numerical_rank();
        if rank > r {
            return Err(Error::RankViolation { rank, asserted: r });
        }
        Ok((r as f64).sqrt() * self.schatten_norm(Schatten::HILBERT_SCHMIDT))
    }
}

fn symmetrized(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

#[derive(Serialize, Deserialize)]
struct OperatorWire {
    dim: usize,
    entries: Vec<f64>,
}

impl Serialize for OperatorMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorWire { dim: self.dim(), entries: self.to_row_major() }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for OperatorMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = OperatorWire::deserialize(deserializer)?;
        OperatorMatrix::from_row_major(wire.dim, &wire.entries).map_err(serde::de::Error::custom)
    }
}
