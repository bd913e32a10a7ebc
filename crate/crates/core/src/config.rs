//! Run configuration files.
//!
//! A configuration is a TOML document with `[gas]`, `[state]`, `[run]` and
//! an optional `[sweep]` section. Keys mirror the field names of the structs
//! below; unknown keys are rejected and every error names the offending key.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::decoherence::HamiltonianConvention;
use crate::kinematics::GasConfig;
use crate::states::{StateFamily, StateSpec};
use crate::{Error, Result};

pub const DEFAULT_REALIZATIONS: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservableKind {
    /// Coherence factors for the pairs listed in `run.coherences`.
    Coherence,
    /// Two-qubit concurrence.
    Concurrence,
    /// Average and minimum negativity over all bipartitions.
    NegativitySummary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunOptions {
    #[serde(default)]
    pub convention: HamiltonianConvention,
    pub observables: Vec<ObservableKind>,
    /// Basis-state pairs `[s, s']` written as bit strings, qubit 0 first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub coherences: Vec<[String; 2]>,
    #[serde(default = "default_realizations")]
    pub realizations: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
}

fn default_realizations() -> u64 {
    DEFAULT_REALIZATIONS
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Column separation of consecutive probes, measured from the first
    /// probe site along the long axis.
    ProbeDistance,
    ProbeSpeed,
    G0,
    Eta,
    /// Lattice side length.
    M,
    NEnv,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 6] = [
        SweepParameter::ProbeDistance,
        SweepParameter::ProbeSpeed,
        SweepParameter::G0,
        SweepParameter::Eta,
        SweepParameter::M,
        SweepParameter::NEnv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::ProbeDistance => "probe_distance",
            SweepParameter::ProbeSpeed => "probe_speed",
            SweepParameter::G0 => "g0",
            SweepParameter::Eta => "eta",
            SweepParameter::M => "m",
            SweepParameter::NEnv => "n_env",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepParameter::ProbeDistance | SweepParameter::M | SweepParameter::NEnv)
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepParameter::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown sweep parameter `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub gas: GasConfig,
    pub state: StateSpec,
    pub run: RunOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Sweep>,
}

/// Parses a bit string such as `"0110"` into a basis index, qubit 0 being
/// the most significant bit.
pub fn parse_bits(bits: &str, n_qubits: usize) -> Result<usize> {
    if bits.len() != n_qubits {
        return Err(Error::InvalidInput(format!(
            "bit string `{bits}` has length {}, expected {n_qubits}",
            bits.len()
        )));
    }
    bits.chars().try_fold(0usize, |acc, ch| match ch {
        '0' => Ok(acc << 1),
        '1' => Ok((acc << 1) | 1),
        _ => Err(Error::InvalidInput(format!("`{bits}` is not a bit string"))),
    })
}

impl RunSpec {
    /// A single-point run with no sweep and no observables selected yet.
    pub fn new(gas: GasConfig, family: StateFamily, convention: HamiltonianConvention) -> Self {
        let n = gas.n_probe();
        RunSpec {
            gas,
            state: StateSpec::new(family, n),
            run: RunOptions {
                convention,
                observables: Vec::new(),
                coherences: Vec::new(),
                realizations: DEFAULT_REALIZATIONS,
                master_seed: 0,
                output_path: None,
            },
            sweep: None,
        }
    }

    /// Number of sweep points (1 without a sweep).
    pub fn n_points(&self) -> usize {
        self.sweep.as_ref().map_or(1, |s| s.values.len())
    }

    /// The swept parameter name and value for a sweep point, or `("none", 0)`.
    pub fn sweep_point(&self, index: usize) -> (&'static str, f64) {
        match &self.sweep {
            Some(s) => (s.parameter.name(), s.values[index]),
            None => ("none", 0.0),
        }
    }

    /// Gas configuration for sweep point `index`.
    pub fn gas_for(&self, index: usize) -> Result<GasConfig> {
        let mut gas = self.gas.clone();
        let Some(sweep) = &self.sweep else {
            return Ok(gas);
        };
        let key = "sweep.values";
        let v = *sweep
            .values
            .get(index)
            .ok_or_else(|| Error::config(key, format!("no sweep point {index}")))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::config(key, format!("{v} must be finite and >= 0")));
        }
        if sweep.parameter.integral() && v.fract() != 0.0 {
            return Err(Error::config(key, format!("{} requires integers, got {v}", sweep.parameter)));
        }
        let n = v as usize;
        match sweep.parameter {
            SweepParameter::ProbeDistance => {
                let Some(&[row, col0]) = gas.probe_sites.first() else {
                    return Err(Error::config("gas.probe_sites", "a distance sweep needs probe sites"));
                };
                let cols = gas.cols();
                for (k, site) in gas.probe_sites.iter_mut().enumerate() {
                    *site = [row, (col0 + k * n) % cols];
                }
            }
            SweepParameter::ProbeSpeed => gas.probe_speed = v,
            SweepParameter::G0 => gas.g0 = v,
            SweepParameter::Eta => gas.eta = v,
            SweepParameter::M => gas.m = n,
            SweepParameter::NEnv => gas.n_env = n,
        }
        Ok(gas)
    }

    /// Basis-index pairs for the requested coherences.
    pub fn coherence_pairs(&self) -> Result<Vec<(usize, usize)>> {
        let n = self.state.n_qubits;
        self.run
            .coherences
            .iter()
            .map(|[a, b]| {
                let wrap = |e: Error| Error::config("run.coherences", e.to_string());
                Ok((parse_bits(a, n).map_err(wrap)?, parse_bits(b, n).map_err(wrap)?))
            })
            .collect()
    }

    pub fn has(&self, kind: ObservableKind) -> bool {
        self.run.observables.contains(&kind)
    }

    /// Validates every invariant; all configuration errors surface here,
    /// before any simulation runs.
    pub fn validate(&self) -> Result<()> {
        self.state.validate()?;
        let n_a = self.state.n_qubits;
        if self.gas.n_probe() != n_a {
            return Err(Error::config(
                "gas.probe_sites",
                format!("{} probe sites for a {n_a}-qubit state", self.gas.n_probe()),
            ));
        }
        if self.run.observables.is_empty() {
            return Err(Error::config("run.observables", "at least one observable is required"));
        }
        if self.has(ObservableKind::Concurrence) && n_a != 2 {
            return Err(Error::config("run.observables", format!("concurrence needs 2 qubits, not {n_a}")));
        }
        if self.has(ObservableKind::NegativitySummary) && n_a < 2 {
            return Err(Error::config("run.observables", "negativity needs at least 2 qubits"));
        }
        if self.has(ObservableKind::Coherence) && self.run.coherences.is_empty() {
            return Err(Error::config("run.coherences", "coherence observable selected but no pairs given"));
        }
        self.coherence_pairs()?;
        if self.run.realizations == 0 {
            return Err(Error::config("run.realizations", "must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::config("sweep.values", "empty sweep"));
            }
        }
        for i in 0..self.n_points() {
            self.gas_for(i)?.validate()?;
        }
        Ok(())
    }

    /// Canonical TOML text; parsing it back yields an equal `RunSpec`.
    pub fn to_canonical_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config_str(text: &str) -> Result<RunSpec> {
    let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
    let mut spec: RunSpec = serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        Error::config(key, e.into_inner().message().trim().to_string())
    })?;
    if spec.gas.dt.is_none() {
        spec.gas.dt = Some(spec.gas.step());
    }
    spec.validate()?;
    Ok(spec)
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<RunSpec> {
    parse_config_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Boundary;

    const MINIMAL: &str = r#"
[gas]
m = 10
n_env = 20
eta = 2.0
g0 = 0.5
duration = 1.0
probe_sites = [[0, 0], [0, 3]]

[state]
family = "bell_phi_plus"
n_qubits = 2

[run]
observables = ["concurrence"]
"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let spec = parse_config_str(MINIMAL).unwrap();
        assert_eq!(spec.gas.dt, Some(0.05));
        assert_eq!(spec.gas.boundary, Boundary::Periodic);
        assert_eq!(spec.run.realizations, DEFAULT_REALIZATIONS);
        assert_eq!(spec.run.convention, HamiltonianConvention::Projector11);
        assert!(spec.sweep.is_none());
    }

    fn key_of(err: Error) -> String {
        match err {
            Error::Config { key, .. } => key,
            other => panic!("expected a configuration error, got {other}"),
        }
    }

    #[test]
    fn negative_eta_names_the_key() {
        let text = MINIMAL.replace("eta = 2.0", "eta = -1.0");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "gas.eta");
    }

    #[test]
    fn unknown_and_ill_typed_keys_are_reported() {
        let text = MINIMAL.replace("g0 = 0.5", "g0 = 0.5\nspeed = 3");
        let err = parse_config_str(&text).unwrap_err();
        assert!(err.to_string().contains("speed"), "{err}");

        let text = MINIMAL.replace("n_env = 20", "n_env = \"many\"");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "gas.n_env");

        let text = MINIMAL.replace("family = \"bell_phi_plus\"", "family = \"bell\"");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "state.family");

        let text = MINIMAL.replace("observables = [\"concurrence\"]", "");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "run");
    }

    #[test]
    fn semantic_checks() {
        let text = MINIMAL.replace("[\"concurrence\"]", "[]");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "run.observables");

        let text = MINIMAL.replace("[[0, 0], [0, 3]]", "[[0, 0], [0, 3], [1, 1]]");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "gas.probe_sites");

        let text = MINIMAL
            .replace("[[0, 0], [0, 3]]", "[[0, 0], [0, 3], [1, 1]]")
            .replace("\"bell_phi_plus\"\nn_qubits = 2", "\"ghz\"\nn_qubits = 3");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "run.observables");

        let text = MINIMAL.replace("[\"concurrence\"]", "[\"coherence\"]\ncoherences = [[\"00\", \"1\"]]");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "run.coherences");

        let text = format!("{MINIMAL}\n[sweep]\nparameter = \"m\"\nvalues = [10, 12.5]\n");
        assert_eq!(key_of(parse_config_str(&text).unwrap_err()), "sweep.values");
    }

    #[test]
    fn canonical_round_trip() {
        let text = format!(
            "{}\n[sweep]\nparameter = \"probe_distance\"\nvalues = [1, 2, 4]\n",
            MINIMAL.replace(
                "[\"concurrence\"]",
                "[\"coherence\", \"concurrence\"]\ncoherences = [[\"00\", \"11\"]]\nconvention = \"ising_zz\"\nmaster_seed = 77\noutput_path = \"out.csv\""
            )
        );
        let spec = parse_config_str(&text).unwrap();
        let again = parse_config_str(&spec.to_canonical_string().unwrap()).unwrap();
        assert_eq!(spec, again);
        assert_eq!(again.coherence_pairs().unwrap(), vec![(0, 3)]);
    }

    #[test]
    fn distance_sweep_places_probes_along_a_row() {
        let text = format!("{MINIMAL}\n[sweep]\nparameter = \"probe_distance\"\nvalues = [1, 4]\n");
        let spec = parse_config_str(&text).unwrap();
        assert_eq!(spec.gas_for(0).unwrap().probe_sites, vec![[0, 0], [0, 1]]);
        assert_eq!(spec.gas_for(1).unwrap().probe_sites, vec![[0, 0], [0, 4]]);
        assert_eq!(spec.sweep_point(1), ("probe_distance", 4.0));
    }

    #[test]
    fn bit_strings() {
        assert_eq!(parse_bits("0110", 4).unwrap(), 6);
        assert_eq!(parse_bits("1", 1).unwrap(), 1);
        assert!(parse_bits("012", 3).is_err());
        assert!(parse_bits("01", 3).is_err());
    }
}
