//! Brute-force reference: evolve the joint probe + environment state vector
//! under every pairwise coupling, then trace out the environment.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::decoherence::HamiltonianConvention;
use crate::density::{hermitian_eigen, DensityMatrix};
use crate::history::InteractionHistory;
use crate::{Error, Result};

pub const MAX_TOTAL_QUBITS: usize = 14;

#[derive(Clone, Debug)]
pub enum ProbeInput {
    Pure(Vec<Complex64>),
    Mixed(DensityMatrix),
}

#[derive(Clone, Debug)]
pub struct FullStateSpec {
    pub gamma: InteractionHistory,
    pub convention: HamiltonianConvention,
    pub probe_state: ProbeInput,
}

/// Dense state of `n_probe` probe qubits followed by `n_env` environment
/// qubits (probe bits are the most significant).
#[derive(Clone, Debug)]
pub struct JointState {
    n_probe: usize,
    n_env: usize,
    amps: Vec<Complex64>,
}

impl JointState {
    /// `|probe> ⊗ |+>^n_env`.
    pub fn with_plus_environment(probe: &[Complex64], n_env: usize) -> Result<Self> {
        if !probe.len().is_power_of_two() || probe.len() < 2 {
            return Err(Error::InvalidInput(format!("probe vector length {} is not 2^n", probe.len())));
        }
        let n_probe = probe.len().trailing_zeros() as usize;
        if n_probe + n_env > MAX_TOTAL_QUBITS {
            return Err(Error::InvalidInput(format!(
                "{} qubits exceeds the oracle limit of {MAX_TOTAL_QUBITS}",
                n_probe + n_env
            )));
        }
        let env_dim = 1usize << n_env;
        let env_amp = 1.0 / (env_dim as f64).sqrt();
        let amps = probe
            .iter()
            .flat_map(|&a| std::iter::repeat_n(a * env_amp, env_dim))
            .collect();
        Ok(JointState { n_probe, n_env, amps })
    }

    fn total(&self) -> usize {
        self.n_probe + self.n_env
    }

    /// Applies `exp(i φ θ(a, b))` where `a`, `b` are the values of joint
    /// qubits `q1`, `q2` and `θ` is the convention's pair phase.
    fn apply_pair(&mut self, q1: usize, q2: usize, phase: f64, convention: HamiltonianConvention) {
        if phase == 0.0 {
            return;
        }
        let n = self.total();
        let (m1, m2) = (1usize << (n - 1 - q1), 1usize << (n - 1 - q2));
        let table: [[Complex64; 2]; 2] = std::array::from_fn(|a| {
            std::array::from_fn(|b| Complex64::from_polar(1.0, phase * convention.pair_phase(a, b)))
        });
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            let a = usize::from(idx & m1 != 0);
            let b = usize::from(idx & m2 != 0);
            *amp *= table[a][b];
        }
    }

    /// Coupling between probe `k` and environment particle `l`.
    pub fn couple_probe_env(&mut self, k: usize, l: usize, phase: f64, convention: HamiltonianConvention) {
        self.apply_pair(k, self.n_probe + l, phase, convention);
    }

    /// Coupling between environment particles `l1` and `l2`.
    pub fn couple_env_env(&mut self, l1: usize, l2: usize, phase: f64, convention: HamiltonianConvention) {
        self.apply_pair(self.n_probe + l1, self.n_probe + l2, phase, convention);
    }

    /// Unnormalized reduced probe matrix `tr_B |ψ><ψ|`.
    pub fn reduced_probe(&self) -> DMatrix<Complex64> {
        let dim = 1usize << self.n_probe;
        let env_dim = 1usize << self.n_env;
        DMatrix::from_fn(dim, dim, |s, sp| {
            let a = &self.amps[s * env_dim..(s + 1) * env_dim];
            let b = &self.amps[sp * env_dim..(sp + 1) * env_dim];
            a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
        })
    }
}

fn evolve_pure(psi: &[Complex64], gamma: &InteractionHistory, convention: HamiltonianConvention) -> Result<DMatrix<Complex64>> {
    let mut joint = JointState::with_plus_environment(psi, gamma.n_env())?;
    if joint.n_probe != gamma.n_probe() {
        return Err(Error::dimension(gamma.n_probe(), joint.n_probe));
    }
    for k in 0..gamma.n_probe() {
        for l in 0..gamma.n_env() {
            joint.couple_probe_env(k, l, gamma.get(k, l), convention);
        }
    }
    Ok(joint.reduced_probe())
}

/// `tr_B [U |ψ_A>|+>^N_B]` with `U` the product of all probe/environment
/// couplings. Mixed probe inputs are evolved eigenvector by eigenvector.
pub fn full_evolve_and_trace(spec: &FullStateSpec) -> Result<DensityMatrix> {
    let gamma = &spec.gamma;
    if gamma.n_probe() + gamma.n_env() > MAX_TOTAL_QUBITS {
        return Err(Error::InvalidInput(format!(
            "{} probe + {} environment qubits exceeds the oracle limit of {MAX_TOTAL_QUBITS}",
            gamma.n_probe(),
            gamma.n_env()
        )));
    }
    if let Some(bad) = gamma.as_slice().iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite phase {bad}")));
    }
    let out = match &spec.probe_state {
        ProbeInput::Pure(psi) => evolve_pure(psi, gamma, spec.convention)?,
        ProbeInput::Mixed(rho) => {
            if rho.n_qubits() != gamma.n_probe() {
                return Err(Error::dimension(gamma.n_probe(), rho.n_qubits()));
            }
            let (values, vectors) = hermitian_eigen(rho.matrix());
            let dim = rho.dim();
            let mut acc = DMatrix::zeros(dim, dim);
            for (i, &w) in values.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                let v: Vec<Complex64> = vectors.column(i).iter().copied().collect();
                acc += evolve_pure(&v, gamma, spec.convention)? * Complex64::new(w, 0.0);
            }
            acc
        }
    };
    DensityMatrix::from_matrix_unchecked(out)
}
