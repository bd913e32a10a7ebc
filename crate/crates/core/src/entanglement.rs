//! Concurrence, partial transposes and bipartition negativities.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

pub use crate::density::hermitian_eigenvalues;
use crate::density::{basis_mask, hermitian_eigen, DensityMatrix};
use crate::{Error, Result};

/// Negative partial-transpose eigenvalues above this are treated as zero.
pub const NEGATIVITY_CLIP: f64 = 1e-12;

/// An unordered split of the qubits into a subset and its complement,
/// stored as the side that contains qubit 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bipartition {
    mask: usize,
    n_qubits: usize,
}

impl Bipartition {
    /// `mask` has bit `k` set when qubit `k` is in the subset. Either side of
    /// the split may be given.
    pub fn new(mask: usize, n_qubits: usize) -> Result<Self> {
        let full = (1usize << n_qubits) - 1;
        if n_qubits < 2 || mask == 0 || mask & full == full || mask & !full != 0 {
            return Err(Error::InvalidInput(format!(
                "mask {mask:#b} is not a proper nonempty subset of {n_qubits} qubits"
            )));
        }
        let mask = if mask & 1 == 1 { mask } else { full & !mask };
        Ok(Bipartition { mask, n_qubits })
    }

    pub fn from_qubits(qubits: &[usize], n_qubits: usize) -> Result<Self> {
        let mask = qubits.iter().try_fold(0usize, |m, &q| {
            if q < n_qubits {
                Ok(m | 1 << q)
            } else {
                Err(Error::InvalidInput(format!("qubit {q} out of range")))
            }
        })?;
        Self::new(mask, n_qubits)
    }

    pub fn mask(&self) -> usize {
        self.mask
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn subset(&self) -> Vec<usize> {
        (0..self.n_qubits).filter(|&k| self.mask >> k & 1 == 1).collect()
    }

    pub fn complement_mask(&self) -> usize {
        ((1usize << self.n_qubits) - 1) & !self.mask
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }
}

/// All `2^(n-1) - 1` inequivalent bipartitions of `n` qubits.
pub fn bipartitions(n_qubits: usize) -> Vec<Bipartition> {
    if n_qubits < 2 {
        return Vec::new();
    }
    let rest = (1usize << (n_qubits - 1)) - 1;
    (0..rest)
        .map(|others| Bipartition {
            mask: 1 | others << 1,
            n_qubits,
        })
        .collect()
}


fn transpose_qubits(m: &DMatrix<Complex64>, mask: usize) -> DMatrix<Complex64> {
    let dim = m.nrows();
    DMatrix::from_fn(dim, dim, |i, j| {
        // swap the masked bits between row and column index
        let src_row = (i & !mask) | (j & mask);
        let src_col = (j & !mask) | (i & mask);
        m[(src_row, src_col)]
    })
}

/// `ρ^{T_A}`: transpose over the qubits in `part`'s subset.
pub fn partial_transpose(rho: &DensityMatrix, part: &Bipartition) -> Result<DMatrix<Complex64>> {
    if part.n_qubits() != rho.n_qubits() {
        return Err(Error::dimension(rho.n_qubits(), part.n_qubits()));
    }
    Ok(transpose_qubits(rho.matrix(), basis_mask(part.mask(), rho.n_qubits())))
}

/// `(‖ρ^{T_A}‖₁ - 1) / 2`, computed as the magnitude of the negative part of
/// the spectrum.
pub fn negativity(rho: &DensityMatrix, part: &Bipartition) -> Result<f64> {
    let pt = partial_transpose(rho, part)?;
    Ok(hermitian_eigenvalues(&pt)
        .into_iter()
        .filter(|&e| e <= -NEGATIVITY_CLIP)
        .map(f64::abs)
        .sum())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NegativitySummary {
    /// Keyed by the canonical bipartition mask.
    pub per_partition: BTreeMap<usize, f64>,
    pub average: f64,
    pub minimum: f64,
}

impl NegativitySummary {
    /// Flat record: one `mask value` line per bipartition.
    pub fn to_record(&self) -> String {
        let mut out = String::new();
        for (mask, v) in &self.per_partition {
            writeln!(out, "{mask} {v:e}").unwrap();
        }
        out
    }
}

pub fn negativity_summary(rho: &DensityMatrix) -> Result<NegativitySummary> {
    let n = rho.n_qubits();
    if n < 2 {
        return Err(Error::InvalidInput("negativity needs at least 2 qubits".into()));
    }
    let per_partition = bipartitions(n)
        .iter()
        .map(|part| Ok((part.mask(), negativity(rho, part)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    let average = per_partition.values().sum::<f64>() / per_partition.len() as f64;
    let minimum = per_partition.values().copied().fold(f64::INFINITY, f64::min);
    Ok(NegativitySummary {
        per_partition,
        average,
        minimum,
    })
}

/// Two-qubit concurrence `max(0, λ1 - λ2 - λ3 - λ4)`, with `λ_i` the
/// decreasing square roots of the eigenvalues of `ρ (Y⊗Y) ρ* (Y⊗Y)`.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits() != 2 {
        return Err(Error::dimension(2, rho.n_qubits()));
    }
    // λ_i are the singular values of √ρ √ρ̃, where ρ̃ = (Y⊗Y) ρ* (Y⊗Y)
    let (values, vectors) = hermitian_eigen(rho.matrix());
    let sqrt_diag = DMatrix::from_fn(4, 4, |i, j| {
        Complex64::new(if i == j { values[i].max(0.0).sqrt() } else { 0.0 }, 0.0)
    });
    let sqrt_rho = &vectors * sqrt_diag * vectors.adjoint();
    // (Y⊗Y) is antidiagonal with entries (-1, 1, 1, -1)
    let yy_sign = [-1.0, 1.0, 1.0, -1.0];
    let sqrt_flipped =
        DMatrix::from_fn(4, 4, |i, j| sqrt_rho[(3 - i, 3 - j)].conj() * yy_sign[i] * yy_sign[j]);
    let mut lambdas: Vec<f64> = (&sqrt_rho * sqrt_flipped).singular_values().iter().copied().collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    Ok((lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]).max(0.0))
}
