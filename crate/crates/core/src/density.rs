//! Probe density matrices.
//!
//! Basis states are indexed by bit strings with qubit 0 as the most
//! significant bit, so `|s_0 s_1 ... s_{N-1}>` has index `Σ s_k 2^(N-1-k)`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

pub const MAX_QUBITS: usize = 10;

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_FLOOR: f64 = -1e-10;

// Partial transposes of the structured probe states are extremely sparse and
// degenerate; dense symmetric QR (both nalgebra 0.35 and faer) can fail on
// them outright. The matrix is split into the connected components of its
// nonzero pattern and each block is solved on its own, by faer with nalgebra
// as fallback.
fn blocks(m: &DMatrix<Complex64>) -> Vec<Vec<usize>> {
    let n = m.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for j in 0..n {
        for i in j + 1..n {
            if m[(i, j)] != Complex64::new(0.0, 0.0) {
                let (a, b) = (root(&mut parent, i), root(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = root(&mut parent, i);
        groups[r].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn dense_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if n == 1 {
        return (vec![m[(0, 0)].re], DMatrix::identity(1, 1));
    }
    let fm = faer::Mat::from_fn(n, n, |i, j| faer::c64::new(m[(i, j)].re, m[(i, j)].im));
    if let Ok(eig) = fm.self_adjoint_eigen(faer::Side::Lower) {
        let (s, u) = (eig.S(), eig.U());
        let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
        if values.iter().all(|v| v.is_finite()) {
            let vectors = DMatrix::from_fn(n, n, |i, j| Complex64::new(u[(i, j)].re, u[(i, j)].im));
            return (values, vectors);
        }
    }
    let eig = m.clone().symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    assert!(
        values.iter().all(|v| v.is_finite()),
        "Hermitian eigensolver failed on a {n}x{n} block"
    );
    (values, eig.eigenvectors)
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors as
/// columns. The lower triangle is read.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    let mut pairs: Vec<(f64, Vec<(usize, Complex64)>)> = Vec::with_capacity(n);
    for idx in blocks(m) {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
        let (values, vectors) = dense_eigen(&sub);
        for (k, v) in values.into_iter().enumerate() {
            pairs.push((v, idx.iter().enumerate().map(|(i, &row)| (row, vectors[(i, k)])).collect()));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, (_, entries)) in pairs.iter().enumerate() {
        for &(row, z) in entries {
            vectors[(row, col)] = z;
        }
    }
    (pairs.into_iter().map(|p| p.0).collect(), vectors)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Value of qubit `k` in basis index `s` of an `n`-qubit register.
#[inline]
pub fn bit(s: usize, k: usize, n: usize) -> usize {
    (s >> (n - 1 - k)) & 1
}

/// Basis-index mask selecting the qubits listed in `qubit_mask`, where bit `k`
/// of `qubit_mask` refers to qubit `k`.
pub fn basis_mask(qubit_mask: usize, n: usize) -> usize {
    (0..n)
        .filter(|&k| qubit_mask >> k & 1 == 1)
        .fold(0, |m, k| m | 1 << (n - 1 - k))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    data: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Wraps `matrix`, checking Hermiticity, unit trace and positivity.
    pub fn new(matrix: DMatrix<Complex64>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(matrix)?;
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps `matrix` checking only its shape.
    pub fn from_matrix_unchecked(matrix: DMatrix<Complex64>) -> Result<Self> {
        let dim = matrix.nrows();
        if dim != matrix.ncols() {
            return Err(Error::dimension(dim, matrix.ncols()));
        }
        if !dim.is_power_of_two() || dim < 2 {
            return Err(Error::InvalidInput(format!(
                "dimension {dim} is not 2^n for n >= 1"
            )));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "{n_qubits} qubits exceeds the limit of {MAX_QUBITS}"
            )));
        }
        Ok(DensityMatrix {
            n_qubits,
            data: matrix,
        })
    }

    /// `|psi><psi|` for a normalized state vector.
    pub fn from_pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "state vector has squared norm {norm}"
            )));
        }
        let dim = psi.len();
        let m = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
        Self::from_matrix_unchecked(m)
    }

    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        let m = DMatrix::from_diagonal_element(dim, dim, Complex64::new(1.0 / dim as f64, 0.0));
        Self::from_matrix_unchecked(m)
    }

    /// Tensor product `self ⊗ other`, with `self` holding the leading qubits.
    pub fn kron(&self, other: &DensityMatrix) -> Result<Self> {
        Self::from_matrix_unchecked(self.data.kronecker(&other.data))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.data
    }

    pub fn get(&self, s: usize, s_prime: usize) -> Complex64 {
        self.data[(s, s_prime)]
    }

    pub fn trace(&self) -> Complex64 {
        self.data.trace()
    }

    pub fn purity(&self) -> f64 {
        // tr(ρ²) = Σ |ρ_ij|² for Hermitian ρ
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.data)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_distance(&self, other: &DensityMatrix) -> f64 {
        max_entry_distance(&self.data, &other.data)
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_entry_distance(&self.data, &self.data.adjoint())
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvalidInput(format!(
                "matrix is not Hermitian (max |ρ - ρ†| = {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > TRACE_TOL {
            return Err(Error::InvalidInput(format!("trace is {tr}, expected 1")));
        }
        let min_ev = self.eigenvalues()[0];
        if min_ev < EIGEN_FLOOR {
            return Err(Error::InvalidInput(format!(
                "matrix has negative eigenvalue {min_ev:e}"
            )));
        }
        Ok(())
    }

    /// Row-major text form: one matrix row per line, entries `re,im`
    /// separated by single spaces, printed with round-trip precision.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                if j > 0 {
                    out.push(' ');
                }
                let z = self.data[(i, j)];
                write!(out, "{:e},{:e}", z.re, z.im).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let rows: Vec<Vec<Complex64>> = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|line| line.split_whitespace().map(parse_complex).collect())
            .collect::<Result<_>>()?;
        let dim = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::dimension(dim, bad.len()));
        }
        let m = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        Self::from_matrix_unchecked(m)
    }
}

fn parse_complex(token: &str) -> Result<Complex64> {
    let (re, im) = token
        .split_once(',')
        .ok_or_else(|| Error::Parse(format!("expected `re,im`, found `{token}`")))?;
    let parse = |s: &str| {
        s.parse::<f64>()
            .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
    };
    Ok(Complex64::new(parse(re)?, parse(im)?))
}

pub(crate) fn max_entry_distance(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
