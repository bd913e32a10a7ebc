//! Probe decoherence for a given interaction history.
//!
//! All probe/environment couplings are diagonal in the computational basis
//! and the environment starts in `|+>^N_B`, so the reduced probe state only
//! has its coherences rescaled: `ρ_ss'(t) = C_ss'(t) ρ_ss'(0)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{bit, DensityMatrix};
use crate::history::InteractionHistory;
use crate::{Error, Result};

/// Form of the pairwise coupling `H_kl`.
///
/// * `Projector11`: `H = |11><11|`, evolved as `exp(+iφ H)`. This is the
///   sign for which the coherence factor reads
///   `exp(i/2 Σ_l x_l) Π_l cos(x_l/2)` with `x_l = (s - s')·Γ_l`.
/// * `IsingZZ`: `H = σz ⊗ σz`, evolved as `exp(-iφ H)`, giving the real
///   factor `Π_l cos(2 x_l)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HamiltonianConvention {
    #[default]
    Projector11,
    #[serde(rename = "ising_zz")]
    IsingZZ,
}

impl HamiltonianConvention {
    /// Phase, per unit interaction phase, that the coupling imprints on the
    /// basis state where the two coupled spins take values `a` and `b`.
    #[inline]
    pub fn pair_phase(self, a: usize, b: usize) -> f64 {
        match self {
            HamiltonianConvention::Projector11 => (a & b) as f64,
            HamiltonianConvention::IsingZZ => {
                let za = 1.0 - 2.0 * a as f64;
                let zb = 1.0 - 2.0 * b as f64;
                -za * zb
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HamiltonianConvention::Projector11 => "projector11",
            HamiltonianConvention::IsingZZ => "ising_zz",
        }
    }
}

impl std::str::FromStr for HamiltonianConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "projector11" => Ok(HamiltonianConvention::Projector11),
            "ising_zz" => Ok(HamiltonianConvention::IsingZZ),
            other => Err(Error::InvalidInput(format!("unknown convention `{other}`"))),
        }
    }
}

/// Above this many factors, cosine products are accumulated as a log
/// magnitude plus a sign.
const LOG_PRODUCT_THRESHOLD: usize = 1000;
const CHUNK: usize = 32;

/// `Π cos(scale * x)` over `xs`.
fn cos_product(xs: &[f64], scale: f64) -> f64 {
    if xs.len() <= LOG_PRODUCT_THRESHOLD {
        return xs.iter().map(|&x| (scale * x).cos()).product();
    }
    let mut log_mag = 0.0;
    let mut negative = false;
    for chunk in xs.chunks(CHUNK) {
        let mut prod: f64 = chunk.iter().map(|&x| (scale * x).cos()).product();
        if prod == 0.0 || !prod.is_normal() {
            // exact zero or underflow inside the chunk: redo it term by term
            prod = 1.0;
            for &x in chunk {
                let c = (scale * x).cos();
                if c == 0.0 {
                    return 0.0;
                }
                log_mag += c.abs().ln();
                negative ^= c < 0.0;
            }
            continue;
        }
        log_mag += prod.abs().ln();
        negative ^= prod < 0.0;
    }
    let mag = log_mag.exp();
    if negative {
        -mag
    } else {
        mag
    }
}

/// Evaluates coherence factors for one history, reusing a scratch buffer.
struct FactorKernel<'a> {
    history: &'a InteractionHistory,
    convention: HamiltonianConvention,
    scratch: Vec<f64>,
}

impl<'a> FactorKernel<'a> {
    fn new(history: &'a InteractionHistory, convention: HamiltonianConvention) -> Self {
        FactorKernel {
            history,
            convention,
            scratch: vec![0.0; history.n_env()],
        }
    }

    /// Factor for the basis pair `(s, s')` of an `n`-qubit register.
    fn factor(&mut self, s: usize, s_prime: usize) -> Complex64 {
        let n = self.history.n_probe();
        let x = &mut self.scratch;
        x.iter_mut().for_each(|v| *v = 0.0);
        let mut any = false;
        for k in 0..n {
            let d = bit(s, k, n) as f64 - bit(s_prime, k, n) as f64;
            if d != 0.0 {
                any = true;
                for (xl, g) in x.iter_mut().zip(self.history.row(k)) {
                    *xl += d * g;
                }
            }
        }
        if !any {
            return Complex64::new(1.0, 0.0);
        }
        match self.convention {
            HamiltonianConvention::Projector11 => {
                let mag = cos_product(x, 0.5);
                let phase = 0.5 * x.iter().sum::<f64>();
                Complex64::from_polar(1.0, phase) * mag
            }
            HamiltonianConvention::IsingZZ => Complex64::new(cos_product(x, 2.0), 0.0),
        }
    }
}

fn bits_to_index(bits: &[u8]) -> Result<usize> {
    bits.iter().try_fold(0usize, |acc, &b| match b {
        0 | 1 => Ok(acc << 1 | b as usize),
        other => Err(Error::InvalidInput(format!("bit value {other} is not 0 or 1"))),
    })
}

/// Coherence factor `C_ss'` for bit strings `s`, `s'` (qubit 0 first).
pub fn coherence_factor(
    history: &InteractionHistory,
    s: &[u8],
    s_prime: &[u8],
    convention: HamiltonianConvention,
) -> Result<Complex64> {
    let n = history.n_probe();
    for v in [s, s_prime] {
        if v.len() != n {
            return Err(Error::dimension(n, v.len()));
        }
    }
    Ok(coherence_factor_index(history, bits_to_index(s)?, bits_to_index(s_prime)?, convention))
}

/// Coherence factor for basis indices `s`, `s'`.
pub fn coherence_factor_index(
    history: &InteractionHistory,
    s: usize,
    s_prime: usize,
    convention: HamiltonianConvention,
) -> Complex64 {
    FactorKernel::new(history, convention).factor(s, s_prime)
}

/// Full table of multipliers `C_ss'` for the history's probe count.
///
/// Factors depend only on the difference `s - s'`, and flipping its sign
/// conjugates them, so each distinct difference is evaluated once.
pub fn coherence_table(history: &InteractionHistory, convention: HamiltonianConvention) -> DMatrix<Complex64> {
    let n = history.n_probe();
    let dim = 1usize << n;
    let mut kernel = FactorKernel::new(history, convention);
    // keyed by (s & !s', !s & s')
    let mut cache: Vec<Option<Complex64>> = vec![None; dim * dim];
    let mut table = DMatrix::from_element(dim, dim, Complex64::new(1.0, 0.0));
    for s in 0..dim {
        for sp in 0..dim {
            if s == sp {
                continue;
            }
            let (plus, minus) = (s & !sp, !s & sp);
            let key = plus * dim + minus;
            let c = match cache[key] {
                Some(c) => c,
                None => {
                    let c = kernel.factor(s, sp);
                    cache[key] = Some(c);
                    cache[minus * dim + plus] = Some(c.conj());
                    c
                }
            };
            table[(s, sp)] = c;
        }
    }
    table
}

/// `ρ(t)` with every entry of `rho0` scaled by its coherence factor.
pub fn apply_decoherence(
    rho0: &DensityMatrix,
    history: &InteractionHistory,
    convention: HamiltonianConvention,
) -> Result<DensityMatrix> {
    if history.n_probe() != rho0.n_qubits() {
        return Err(Error::dimension(rho0.n_qubits(), history.n_probe()));
    }
    let table = coherence_table(history, convention);
    DensityMatrix::from_matrix_unchecked(rho0.matrix().component_mul(&table))
}

/// Coefficients of a single-qubit phase map
/// `ρ -> λ00 ρ + λ11 ZρZ + λ01 (ρZ - Zρ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingleQubitMapCoeffs {
    pub lambda00: f64,
    pub lambda11: f64,
    pub lambda01: Complex64,
    pub r: f64,
    pub gamma_phase: f64,
}

impl SingleQubitMapCoeffs {
    pub fn from_r_gamma(r: f64, gamma_phase: f64) -> Self {
        SingleQubitMapCoeffs {
            lambda00: (1.0 + r * gamma_phase.cos()) / 2.0,
            lambda11: (1.0 - r * gamma_phase.cos()) / 2.0,
            lambda01: Complex64::new(0.0, r * gamma_phase.sin() / 2.0),
            r,
            gamma_phase,
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.n_qubits() != 1 {
            return Err(Error::dimension(1, rho.n_qubits()));
        }
        let z = pauli_z();
        let m = rho.matrix();
        let out = m * Complex64::from(self.lambda00)
            + &z * m * &z * Complex64::from(self.lambda11)
            + (m * &z - &z * m) * self.lambda01;
        DensityMatrix::from_matrix_unchecked(out)
    }

    /// Choi matrix `(1 ⊗ E)|Φ><Φ|` with `|Φ> = (|00> + |11>)/√2`.
    pub fn choi(&self) -> DMatrix<Complex64> {
        let mut choi = DMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                let mut unit = DMatrix::zeros(2, 2);
                unit[(i, j)] = Complex64::new(1.0, 0.0);
                let image = self
                    .apply(&DensityMatrix::from_matrix_unchecked(unit).unwrap())
                    .unwrap()
                    .into_matrix();
                for a in 0..2 {
                    for b in 0..2 {
                        choi[(2 * i + a, 2 * j + b)] = image[(a, b)] * 0.5;
                    }
                }
            }
        }
        choi
    }
}

pub(crate) fn pauli_z() -> DMatrix<Complex64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::new(1.0, 0.0),
        Complex64::new(-1.0, 0.0),
    ]))
}

/// Map coefficients for a single probe with phases `φ_1l`.
///
/// Under `Projector11`, `r = Π cos(φ/2)` and `γ = Σ φ/2`. Under `IsingZZ`
/// the coherence factor is the real `Π cos(2φ)`, i.e. `r = Π cos(2φ)` and
/// `γ = 0`.
pub fn single_qubit_map(phases: &[f64], convention: HamiltonianConvention) -> SingleQubitMapCoeffs {
    match convention {
        HamiltonianConvention::Projector11 => {
            SingleQubitMapCoeffs::from_r_gamma(cos_product(phases, 0.5), 0.5 * phases.iter().sum::<f64>())
        }
        HamiltonianConvention::IsingZZ => SingleQubitMapCoeffs::from_r_gamma(cos_product(phases, 2.0), 0.0),
    }
}

/// `p_k = (1 + Π_l cos(2 φ_kl)) / 2`.
pub fn dephasing_prob(phases: &[f64]) -> f64 {
    0.5 * (1.0 + cos_product(phases, 2.0))
}

/// Applies `⊗_k [p_k ρ + (1 - p_k) Z_k ρ Z_k]`.
pub fn product_dephasing_apply(rho0: &DensityMatrix, p: &[f64]) -> Result<DensityMatrix> {
    let n = rho0.n_qubits();
    if p.len() != n {
        return Err(Error::dimension(n, p.len()));
    }
    if let Some(bad) = p.iter().find(|&&pk| !(0.0..=1.0).contains(&pk)) {
        return Err(Error::InvalidInput(format!("dephasing probability {bad} outside [0, 1]")));
    }
    let contrast: Vec<f64> = p.iter().map(|pk| 2.0 * pk - 1.0).collect();
    let dim = rho0.dim();
    let out = DMatrix::from_fn(dim, dim, |s, sp| {
        let flips = s ^ sp;
        let factor: f64 = (0..n)
            .filter(|&k| bit(flips, k, n) == 1)
            .map(|k| contrast[k])
            .product();
        rho0.get(s, sp) * factor
    });
    DensityMatrix::from_matrix_unchecked(out)
}

/// Applies the probe-probe couplings `exp(±i φ_kk' H_kk')` for all pairs
/// `k < k'`; `gamma_aa` must be symmetric with zero diagonal.
pub fn apply_intra_probe_phases(
    rho: &DensityMatrix,
    gamma_aa: &[Vec<f64>],
    convention: HamiltonianConvention,
) -> Result<DensityMatrix> {
    let n = rho.n_qubits();
    if gamma_aa.len() != n {
        return Err(Error::dimension(n, gamma_aa.len()));
    }
    for (k, row) in gamma_aa.iter().enumerate() {
        if row.len() != n {
            return Err(Error::dimension(n, row.len()));
        }
        if row[k] != 0.0 {
            return Err(Error::InvalidInput(format!("nonzero diagonal phase at probe {k}")));
        }
        for (j, &v) in row.iter().enumerate() {
            if (v - gamma_aa[j][k]).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("phase matrix not symmetric at ({k}, {j})")));
            }
        }
    }
    let dim = rho.dim();
    let phase: Vec<f64> = (0..dim)
        .map(|s| {
            let mut total = 0.0;
            for (k, row) in gamma_aa.iter().enumerate() {
                for (j, &g) in row.iter().enumerate().skip(k + 1) {
                    total += g * convention.pair_phase(bit(s, k, n), bit(s, j, n));
                }
            }
            total
        })
        .collect();
    let out = DMatrix::from_fn(dim, dim, |s, sp| {
        rho.get(s, sp) * Complex64::from_polar(1.0, phase[s] - phase[sp])
    });
    DensityMatrix::from_matrix_unchecked(out)
}
