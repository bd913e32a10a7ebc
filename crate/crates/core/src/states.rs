//! Named probe states.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{bit, DensityMatrix, MAX_QUBITS};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    /// `(|00> + |11>)/√2`
    BellPhiPlus,
    /// `(|01> + |10>)/√2`
    BellPsiPlus,
    /// `(|+0> + |-1>)/√2`
    TwoQubitCluster,
    /// `(|0...0> + |1...1>)/√2`
    Ghz,
    /// `(|0>|+...+> + |1>|-...->)/√2`
    GhzPrime,
    /// `(|+>|0...0> + |->|1...1>)/√2`
    GhzDoublePrime,
    /// Equal superposition of all single-excitation states.
    W,
    /// `|+>^N` followed by controlled-Z on every neighbouring pair of an
    /// open chain.
    LinearCluster,
}

impl StateFamily {
    pub const ALL: [StateFamily; 8] = [
        StateFamily::BellPhiPlus,
        StateFamily::BellPsiPlus,
        StateFamily::TwoQubitCluster,
        StateFamily::Ghz,
        StateFamily::GhzPrime,
        StateFamily::GhzDoublePrime,
        StateFamily::W,
        StateFamily::LinearCluster,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StateFamily::BellPhiPlus => "bell_phi_plus",
            StateFamily::BellPsiPlus => "bell_psi_plus",
            StateFamily::TwoQubitCluster => "two_qubit_cluster",
            StateFamily::Ghz => "ghz",
            StateFamily::GhzPrime => "ghz_prime",
            StateFamily::GhzDoublePrime => "ghz_double_prime",
            StateFamily::W => "w",
            StateFamily::LinearCluster => "linear_cluster",
        }
    }

    fn two_qubit_only(self) -> bool {
        matches!(
            self,
            StateFamily::BellPhiPlus | StateFamily::BellPsiPlus | StateFamily::TwoQubitCluster
        )
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StateFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown state family `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub family: StateFamily,
    pub n_qubits: usize,
}

impl StateSpec {
    pub fn new(family: StateFamily, n_qubits: usize) -> Self {
        StateSpec { family, n_qubits }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        if n == 0 || n > MAX_QUBITS {
            return Err(Error::config("state.n_qubits", format!("{n} is outside 1..={MAX_QUBITS}")));
        }
        if self.family.two_qubit_only() && n != 2 {
            return Err(Error::config(
                "state.n_qubits",
                format!("{} requires 2 qubits, got {n}", self.family),
            ));
        }
        Ok(())
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn kron(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

fn kron_power(v: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..n).fold(vec![c(1.0)], |acc, _| kron(&acc, v))
}

fn superpose(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    a.iter().zip(b).map(|(x, y)| (x + y) * FRAC_1_SQRT_2).collect()
}

/// Normalized state vector of the requested family.
pub fn state_vector(spec: &StateSpec) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let n = spec.n_qubits;
    let dim = 1usize << n;
    let zero = [c(1.0), c(0.0)];
    let one = [c(0.0), c(1.0)];
    let plus = [c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)];
    let minus = [c(FRAC_1_SQRT_2), c(-FRAC_1_SQRT_2)];
    let basis = |index: usize| {
        let mut v = vec![c(0.0); dim];
        v[index] = c(1.0);
        v
    };
    let psi = match spec.family {
        StateFamily::BellPhiPlus | StateFamily::Ghz => superpose(&basis(0), &basis(dim - 1)),
        StateFamily::BellPsiPlus => superpose(&basis(0b01), &basis(0b10)),
        StateFamily::TwoQubitCluster => superpose(&kron(&plus, &zero), &kron(&minus, &one)),
        StateFamily::GhzPrime => superpose(
            &kron(&zero, &kron_power(&plus, n - 1)),
            &kron(&one, &kron_power(&minus, n - 1)),
        ),
        StateFamily::GhzDoublePrime => superpose(
            &kron(&plus, &kron_power(&zero, n - 1)),
            &kron(&minus, &kron_power(&one, n - 1)),
        ),
        StateFamily::W => {
            let amp = c(1.0 / (n as f64).sqrt());
            (0..dim)
                .map(|s| if s.count_ones() == 1 { amp } else { c(0.0) })
                .collect()
        }
        StateFamily::LinearCluster => {
            let amp = 1.0 / (dim as f64).sqrt();
            (0..dim)
                .map(|s| {
                    let links = (0..n - 1).filter(|&k| bit(s, k, n) & bit(s, k + 1, n) == 1).count();
                    c(if links % 2 == 0 { amp } else { -amp })
                })
                .collect()
        }
    };
    Ok(psi)
}

pub fn make_state(spec: &StateSpec) -> Result<DensityMatrix> {
    DensityMatrix::from_pure(&state_vector(spec)?)
}
