//! The decoherence channel as a Choi state.
//!
//! Each environment particle `l` contributes the state
//! `E^(l) = ½ Σ_b ⊗_k |χ_k^b><χ_k^b|`, an even mixture over the particle's
//! two `|+>` branches `b`, where `|χ_k^b> = (1 ⊗ u_k^b)|φ+>` and `u_k^b` is
//! the diagonal phase the coupling imprints on probe `k`. The channel's Choi
//! state is the entrywise (Hadamard) product of all `E^(l)` in the
//! computational basis, renormalized to unit trace. Rewritten in the tensor
//! Bell basis `|φ_k> = (1 ⊗ σ_k)|Φ>` it yields the coefficients of
//! `ρ -> Σ λ_kl σ_k ρ σ_l`, which only involve identity and `σz` factors.
//!
//! The doubled space `A' ⊗ A` is ordered pair by pair: qubit `k` and its
//! reference copy `k'` form the base-4 digit `2 a'_k + a_k` at position `k`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::decoherence::HamiltonianConvention;
use crate::density::{bit, DensityMatrix};
use crate::entanglement::hermitian_eigenvalues;
use crate::history::InteractionHistory;
use crate::{Error, Result};

/// Largest probe count for which the `4^N`-dimensional Choi state is built.
pub const MAX_MAP_QUBITS: usize = 6;

/// Bell-basis coefficients outside the {1, σz} sector must stay below this.
pub const LEAKAGE_TOL: f64 = 1e-12;

/// A channel `ρ -> Σ_{a,b} λ_ab Z^a ρ Z^b`, where `a`, `b` range over
/// Z-strings. A Z-string uses the basis-index bit convention: qubit `k`
/// carries `σz` when bit `k` of `a` (counted from the most significant end)
/// is set.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliDiagonalMap {
    n_qubits: usize,
    coefficients: DMatrix<Complex64>,
}

fn walsh(dim: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(dim, dim, |s, a| {
        Complex64::new(if (s & a).count_ones() % 2 == 0 { 1.0 } else { -1.0 }, 0.0)
    })
}

impl PauliDiagonalMap {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// `λ_ab` for Z-strings `a`, `b`.
    pub fn coefficient(&self, a: usize, b: usize) -> Complex64 {
        self.coefficients[(a, b)]
    }

    pub fn coefficients(&self) -> &DMatrix<Complex64> {
        &self.coefficients
    }

    /// Multipliers `C_ss' = Σ_ab λ_ab (-1)^{a·s + b·s'}`.
    pub fn coherence_table(&self) -> DMatrix<Complex64> {
        let h = walsh(1 << self.n_qubits);
        &h * &self.coefficients * &h
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != self.n_qubits {
            return Err(Error::dimension(self.n_qubits, rho.n_qubits()));
        }
        DensityMatrix::from_matrix_unchecked(rho.matrix().component_mul(&self.coherence_table()))
    }

    /// Spectrum of the Choi state. The coefficient matrix is the Choi state
    /// written in the Bell basis and restricted to its support.
    pub fn choi_eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.coefficients)
    }

    /// Sparse text form: one `k l re im` line per nonzero coefficient, with
    /// `k` and `l` written as strings over `0` (identity) and `3` (σz).
    pub fn to_sparse_text(&self) -> String {
        let n = self.n_qubits;
        let label = |a: usize| -> String {
            (0..n).map(|k| if bit(a, k, n) == 1 { '3' } else { '0' }).collect()
        };
        let mut out = String::new();
        let dim = 1 << n;
        for a in 0..dim {
            for b in 0..dim {
                let z = self.coefficients[(a, b)];
                if z != Complex64::new(0.0, 0.0) {
                    writeln!(out, "{} {} {:e} {:e}", label(a), label(b), z.re, z.im).unwrap();
                }
            }
        }
        out
    }

    pub fn from_sparse_text(text: &str, n_qubits: usize) -> Result<Self> {
        let dim = 1usize << n_qubits;
        let parse_label = |s: &str| -> Result<usize> {
            if s.len() != n_qubits {
                return Err(Error::dimension(n_qubits, s.len()));
            }
            s.chars().try_fold(0usize, |acc, ch| match ch {
                '0' => Ok(acc << 1),
                '3' => Ok(acc << 1 | 1),
                other => Err(Error::Parse(format!("Pauli label `{other}` is not 0 or 3"))),
            })
        };
        let parse_f = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("`{s}`: {e}")));
        let mut coefficients = DMatrix::zeros(dim, dim);
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let [k, l, re, im] = fields[..] else {
                return Err(Error::Parse(format!("expected 4 fields in `{line}`")));
            };
            coefficients[(parse_label(k)?, parse_label(l)?)] = Complex64::new(parse_f(re)?, parse_f(im)?);
        }
        Ok(PauliDiagonalMap {
            n_qubits,
            coefficients,
        })
    }
}

/// Amplitudes of `⊗_k (1 ⊗ u_k^b)|φ+>` (times `2^{N/2}`) for every
/// computational basis state `s` of `A`, i.e. on the entries `|s s>` of the
/// doubled space.
fn branch_phases(history: &InteractionHistory, env: usize, branch: usize, convention: HamiltonianConvention) -> Vec<Complex64> {
    let n = history.n_probe();
    (0..1usize << n)
        .map(|s| {
            let angle: f64 = (0..n)
                .map(|k| history.get(k, env) * convention.pair_phase(bit(s, k, n), branch))
                .sum();
            Complex64::from_polar(1.0, angle)
        })
        .collect()
}

/// Maps a basis index `s` of `A` to the doubled-space index of `|s>_{A'}|s>_A`.
fn doubled_index(s: usize, n: usize) -> usize {
    (0..n).fold(0, |acc, k| acc * 4 + 3 * bit(s, k, n))
}

/// The single-particle state `2^N E^(l)` as a dense `4^N x 4^N` matrix.
fn particle_state(history: &InteractionHistory, env: usize, convention: HamiltonianConvention) -> DMatrix<Complex64> {
    let n = history.n_probe();
    let dim = 1usize << (2 * n);
    let mut e = DMatrix::zeros(dim, dim);
    let branches = [
        branch_phases(history, env, 0, convention),
        branch_phases(history, env, 1, convention),
    ];
    for s in 0..1usize << n {
        for sp in 0..1usize << n {
            let v: Complex64 = branches.iter().map(|b| b[s] * b[sp].conj()).sum::<Complex64>() * 0.5;
            e[(doubled_index(s, n), doubled_index(sp, n))] = v;
        }
    }
    e
}

fn maximally_entangled(n: usize) -> DMatrix<Complex64> {
    let dim = 1usize << (2 * n);
    let mut e = DMatrix::zeros(dim, dim);
    for s in 0..1usize << n {
        for sp in 0..1usize << n {
            e[(doubled_index(s, n), doubled_index(sp, n))] = Complex64::new(1.0, 0.0);
        }
    }
    e
}

/// Normalized Choi state `E_t` in the computational basis of `A' ⊗ A`.
pub fn choi_state(history: &InteractionHistory, convention: HamiltonianConvention) -> Result<DMatrix<Complex64>> {
    let n = history.n_probe();
    if n == 0 || n > MAX_MAP_QUBITS {
        return Err(Error::InvalidInput(format!(
            "map state needs 1..={MAX_MAP_QUBITS} probes, got {n}"
        )));
    }
    let mut acc = if history.n_env() == 0 {
        maximally_entangled(n)
    } else {
        particle_state(history, 0, convention)
    };
    // Hadamard products only shrink the support, so later factors need only
    // be evaluated where the running product is nonzero.
    let support: Vec<(usize, usize)> = (0..acc.nrows())
        .flat_map(|i| (0..acc.ncols()).map(move |j| (i, j)))
        .filter(|&(i, j)| acc[(i, j)] != Complex64::new(0.0, 0.0))
        .collect();
    for env in 1..history.n_env() {
        let e = particle_state(history, env, convention);
        for &(i, j) in &support {
            acc[(i, j)] *= e[(i, j)];
        }
    }
    let trace = acc.trace();
    Ok(acc / trace)
}

/// Bell basis of one qubit pair: column `k` is `(1 ⊗ σ_k)|φ+>`.
fn bell_basis() -> DMatrix<Complex64> {
    let (o, h, i) = (
        Complex64::new(0.0, 0.0),
        Complex64::new(FRAC_1_SQRT_2, 0.0),
        Complex64::new(0.0, FRAC_1_SQRT_2),
    );
    DMatrix::from_row_slice(4, 4, &[h, o, o, h, o, h, i, o, o, h, -i, o, h, o, o, -h])
}

/// `(U on slot k) * m` if `left`, else `m * (U on slot k)`, for the
/// pair-major doubled space of `n` qubits.
fn apply_on_slot(m: &mut DMatrix<Complex64>, u: &DMatrix<Complex64>, slot: usize, n: usize, left: bool) {
    let stride = 1usize << (2 * (n - 1 - slot));
    let dim = m.nrows();
    let mut buf = [Complex64::new(0.0, 0.0); 4];
    for base in 0..dim {
        if !(base / stride).is_multiple_of(4) {
            continue;
        }
        for other in 0..dim {
            for (d, slot_val) in buf.iter_mut().enumerate() {
                let idx = base + d * stride;
                *slot_val = if left { m[(idx, other)] } else { m[(other, idx)] };
            }
            for d in 0..4 {
                let idx = base + d * stride;
                let v: Complex64 = if left {
                    (0..4).map(|e| u[(d, e)] * buf[e]).sum()
                } else {
                    (0..4).map(|e| buf[e] * u[(e, d)]).sum()
                };
                if left {
                    m[(idx, other)] = v;
                } else {
                    m[(other, idx)] = v;
                }
            }
        }
    }
}

/// All `λ_kl = <φ_k|E|φ_l>` for Pauli strings `k`, `l` over `{0,1,2,3}`,
/// indexed pair-major in base 4.
pub fn bell_coefficients(choi: &DMatrix<Complex64>, n: usize) -> DMatrix<Complex64> {
    let b = bell_basis();
    let b_dag = b.adjoint();
    let mut m = choi.clone();
    for slot in 0..n {
        apply_on_slot(&mut m, &b_dag, slot, n, true);
        apply_on_slot(&mut m, &b, slot, n, false);
    }
    m
}

/// Builds the channel from the Hadamard product of single-particle Choi
/// states and reads off its Bell-basis coefficients, checking that nothing
/// leaks outside the identity/σz sector.
pub fn build_map_state(history: &InteractionHistory, convention: HamiltonianConvention) -> Result<PauliDiagonalMap> {
    let n = history.n_probe();
    let lambda = bell_coefficients(&choi_state(history, convention)?, n);
    let dim4 = lambda.nrows();
    // digits 0 or 3 in every slot
    let z_sector = |idx: usize| (0..n).all(|k| matches!((idx >> (2 * k)) & 3, 0 | 3));
    let mut leakage: f64 = 0.0;
    for i in 0..dim4 {
        for j in 0..dim4 {
            if !(z_sector(i) && z_sector(j)) {
                leakage = leakage.max(lambda[(i, j)].norm());
            }
        }
    }
    if leakage > LEAKAGE_TOL {
        return Err(Error::Consistency(format!(
            "map has weight {leakage:e} outside the identity/Z sector"
        )));
    }
    // Z-string a (bit k from the top = qubit k) <-> base-4 index with digit 3
    let to_base4 = |a: usize| -> usize { (0..n).fold(0, |acc, k| acc * 4 + 3 * bit(a, k, n)) };
    let dim = 1usize << n;
    let coefficients = DMatrix::from_fn(dim, dim, |a, b| lambda[(to_base4(a), to_base4(b))]);
    Ok(PauliDiagonalMap {
        n_qubits: n,
        coefficients,
    })
}
