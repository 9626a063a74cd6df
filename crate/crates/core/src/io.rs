//! JSON file formats. Indices are 1-based on disk and 0-based in memory.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::certificates::TargetSpec;
use crate::error::{Error, Result};
use crate::operator::{OperatorMatrix, Truncation};
use crate::tensor::{ChaosExpansion, Index, Kernel, RawTensor, ScalarKernel, STRICT_ASYMMETRY_TOL};

/// `[i, [j1, …, jp], value]`, all indices 1-based.
pub type CoeffEntry = (usize, Vec<usize>, f64);

/// On-disk vector-valued kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelFile {
    pub p: usize,
    pub hdim: usize,
    #[serde(rename = "Hdim")]
    pub big_hdim: usize,
    pub coeffs: Vec<CoeffEntry>,
}

/// On-disk chaos expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionFile {
    pub hdim: usize,
    #[serde(rename = "Hdim")]
    pub big_hdim: usize,
    pub orders: Vec<KernelFile>,
}

/// Per-order target file `{"orders": {"r": operator, …}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetFile {
    pub orders: BTreeMap<usize, OperatorMatrix>,
}

/// How load-time symmetrization treats asymmetric input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Symmetry {
    /// Average over permutations.
    #[default]
    Symmetrize,
    /// Reject inputs whose asymmetry exceeds [`STRICT_ASYMMETRY_TOL`].
    Strict,
}

fn to_zero_based(j: usize, len: usize) -> Result<usize> {
    if j == 0 || j > len {
        return Err(Error::invalid(format!("index {j} outside 1..={len}")));
    }
    Ok(j - 1)
}

impl KernelFile {
    pub fn from_kernel(k: &Kernel) -> Self {
        let t = k.truncation();
        let coeffs = k
            .components()
            .iter()
            .enumerate()
            .flat_map(|(i, g)| {
                g.ordered_entries()
                    .into_iter()
                    .map(move |(tuple, v)| (i + 1, tuple.iter().map(|&j| j as usize + 1).collect(), v))
            })
            .collect();
        Self { p: k.order(), hdim: t.hdim, big_hdim: t.big_hdim, coeffs }
    }

    pub fn to_kernel(&self, symmetry: Symmetry) -> Result<Kernel> {
        if self.p == 0 {
            return Err(Error::invalid("kernel order must be positive"));
        }
        let trunc = Truncation::new(self.hdim, self.big_hdim)?;
        let mut raw: Vec<Vec<(Vec<Index>, f64)>> = vec![Vec::new(); self.big_hdim];
        for (i, tuple, v) in &self.coeffs {
            let i = to_zero_based(*i, self.big_hdim)?;
            let tuple = tuple
                .iter()
                .map(|&j| to_zero_based(j, self.hdim).map(|j| j as Index))
                .collect::<Result<Vec<_>>>()?;
            raw[i].push((tuple, *v));
        }
        let components = raw
            .into_iter()
            .map(|entries| {
                let t = RawTensor::from_entries(self.p, self.hdim, entries)?;
                match symmetry {
                    Symmetry::Symmetrize => Ok(t.symmetrize()),
                    Symmetry::Strict => t.symmetrize_strict(STRICT_ASYMMETRY_TOL),
                }
            })
            .collect::<Result<Vec<ScalarKernel>>>()?;
        Kernel::new(self.p, trunc, components)
    }
}

impl ExpansionFile {
    pub fn from_expansion(f: &ChaosExpansion) -> Self {
        let t = f.truncation();
        Self { hdim: t.hdim, big_hdim: t.big_hdim, orders: f.kernels().map(|(_, k)| KernelFile::from_kernel(k)).collect() }
    }

    pub fn to_expansion(&self, symmetry: Symmetry) -> Result<ChaosExpansion> {
        let trunc = Truncation::new(self.hdim, self.big_hdim)?;
        let mut out = ChaosExpansion::new(trunc);
        for k in &self.orders {
            if (k.hdim, k.big_hdim) != (self.hdim, self.big_hdim) {
                return Err(Error::DimensionMismatch { what: "kernel truncation in expansion", expected: self.hdim, got: k.hdim });
            }
            out.insert(k.to_kernel(symmetry)?)?;
        }
        Ok(out)
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes through a temporary file in the destination directory and renames,
/// so readers never observe partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_kernel(path: &Path, symmetry: Symmetry) -> Result<Kernel> {
    read_json::<KernelFile>(path)?.to_kernel(symmetry)
}

pub fn write_kernel(path: &Path, k: &Kernel) -> Result<()> {
    write_json(path, &KernelFile::from_kernel(k))
}

/// Reads an expansion file; a bare kernel file is accepted as a one-order expansion.
pub fn read_expansion(path: &Path, symmetry: Symmetry) -> Result<ChaosExpansion> {
    expansion_from_value(read_json(path)?, symmetry)
}

/// Parses expansion or bare kernel JSON held in memory.
pub fn parse_expansion(json: &str, symmetry: Symmetry) -> Result<ChaosExpansion> {
    expansion_from_value(serde_json::from_str(json)?, symmetry)
}

fn expansion_from_value(value: serde_json::Value, symmetry: Symmetry) -> Result<ChaosExpansion> {
    if value.get("orders").is_some() {
        serde_json::from_value::<ExpansionFile>(value)?.to_expansion(symmetry)
    } else {
        let k = serde_json::from_value::<KernelFile>(value)?.to_kernel(symmetry)?;
        ChaosExpansion::from_kernels(k.truncation(), [k])
    }
}

pub fn write_expansion(path: &Path, f: &ChaosExpansion) -> Result<()> {
    write_json(path, &ExpansionFile::from_expansion(f))
}

pub fn read_operator(path: &Path) -> Result<OperatorMatrix> {
    read_json(path)
}

pub fn write_operator(path: &Path, t: &OperatorMatrix) -> Result<()> {
    write_json(path, t)
}

/// A target file is either one operator (the full Gaussian covariance) or a
/// per-order map.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetInput {
    Aggregate(OperatorMatrix),
    PerOrder(TargetSpec),
}

pub fn read_target(path: &Path) -> Result<TargetInput> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("orders").is_some() {
        let file: TargetFile = serde_json::from_value(value)?;
        let dim = file
            .orders
            .values()
            .next()
            .map(|t| t.dim())
            .ok_or_else(|| Error::invalid("target file has no orders"))?;
        Ok(TargetInput::PerOrder(TargetSpec::new(dim, file.orders)?))
    } else {
        Ok(TargetInput::Aggregate(serde_json::from_value(value)?))
    }
}

/// One column of reals, one value per line; blank lines and a non-numeric
/// header line are skipped.
pub fn read_column_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let cell = line.split(',').next().unwrap_or("").trim();
        if cell.is_empty() {
            continue;
        }
        match cell.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if k == 0 => continue,
            Err(_) => return Err(Error::invalid(format!("line {}: cannot parse {cell:?}", k + 1))),
        }
    }
    Ok(out)
}
