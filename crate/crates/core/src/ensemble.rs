//! Monte Carlo ensembles over collision histories and their CSV output.
//!
//! Realization `i` of sweep point `j` draws its randomness from stream
//! `(j << 40) | i` of the master seed, so every realization is reproducible
//! on its own. Realizations are evaluated in parallel in fixed-size blocks
//! and folded strictly in index order, which makes the output independent
//! of the number of worker threads.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::config::{ObservableKind, RunSpec};
use crate::decoherence::{apply_decoherence, coherence_factor_index, HamiltonianConvention};
use crate::density::DensityMatrix;
use crate::entanglement::{concurrence, negativity_summary};
use crate::history::InteractionHistory;
use crate::kinematics::{simulate_with, stream_rng, GasConfig};
use crate::states::make_state;
use crate::{Complex64, Error, Result};

pub const CSV_HEADER: &str = "sweep_param,sweep_value,time,observable,mean,stderr,realizations";

const BLOCK: u64 = 64;
const MAX_JACKKNIFE_GROUPS: u64 = 16;

/// Random stream for one realization.
pub fn stream_id(sweep_index: usize, realization: u64) -> u64 {
    ((sweep_index as u64) << 40) | realization
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleRow {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub time: f64,
    pub observable: String,
    pub mean: f64,
    pub stderr: f64,
    pub realizations: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnsembleResult {
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleResult {
    /// Rows for one observable, in output order.
    pub fn series<'a>(&'a self, observable: &'a str) -> impl Iterator<Item = &'a EnsembleRow> + 'a {
        self.rows.iter().filter(move |r| r.observable == observable)
    }

    /// The row for `observable` at a given sweep value and time, if any.
    pub fn find(&self, observable: &str, sweep_value: f64, time: f64) -> Option<&EnsembleRow> {
        self.rows
            .iter()
            .find(|r| r.observable == observable && r.sweep_value == sweep_value && (r.time - time).abs() < 1e-9)
    }
}

/// Running mean and sample variance (Welford).
#[derive(Clone, Copy, Debug, Default)]
pub struct MeanAccumulator {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation divided by `sqrt(n)`; zero for `n < 2`.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = (self.m2 / (self.n - 1) as f64).max(0.0);
        (var / self.n as f64).sqrt()
    }
}

/// Jackknife standard error of a statistic over `groups` leave-one-out
/// replicates around the full-sample value.
fn jackknife_stderr(replicates: &[f64]) -> f64 {
    let g = replicates.len();
    if g < 2 {
        return 0.0;
    }
    let mean = replicates.iter().sum::<f64>() / g as f64;
    let ss: f64 = replicates.iter().map(|x| (x - mean).powi(2)).sum();
    ((g - 1) as f64 / g as f64 * ss).sqrt()
}

/// What one realization contributes at one snapshot.
struct Snapshot {
    coherences: Vec<Complex64>,
    concurrence: Option<f64>,
    negativity: Option<(f64, f64)>,
    rho: Option<DMatrix<Complex64>>,
}

struct Plan {
    pairs: Vec<(usize, usize)>,
    labels: Vec<String>,
    concurrence: bool,
    negativity: bool,
    convention: HamiltonianConvention,
    rho0: DensityMatrix,
}

impl Plan {
    fn new(spec: &RunSpec) -> Result<Self> {
        let coherence = spec.has(ObservableKind::Coherence);
        Ok(Plan {
            pairs: if coherence { spec.coherence_pairs()? } else { Vec::new() },
            labels: if coherence {
                spec.run.coherences.iter().map(|[a, b]| format!("{a}|{b}")).collect()
            } else {
                Vec::new()
            },
            concurrence: spec.has(ObservableKind::Concurrence),
            negativity: spec.has(ObservableKind::NegativitySummary),
            convention: spec.run.convention,
            rho0: make_state(&spec.state)?,
        })
    }

    fn needs_state(&self) -> bool {
        self.concurrence || self.negativity
    }

    fn evaluate(&self, history: &InteractionHistory) -> Result<Snapshot> {
        let coherences: Vec<Complex64> = self
            .pairs
            .iter()
            .map(|&(s, sp)| coherence_factor_index(history, s, sp, self.convention))
            .collect();
        if coherences.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coherence factor".into()));
        }
        if !self.needs_state() {
            return Ok(Snapshot {
                coherences,
                concurrence: None,
                negativity: None,
                rho: None,
            });
        }
        let rho = apply_decoherence(&self.rho0, history, self.convention)?;
        let concurrence = if self.concurrence { Some(concurrence(&rho)?) } else { None };
        let negativity = if self.negativity {
            let s = negativity_summary(&rho)?;
            Some((s.average, s.minimum))
        } else {
            None
        };
        Ok(Snapshot {
            coherences,
            concurrence,
            negativity,
            rho: Some(rho.into_matrix()),
        })
    }

    fn realize(&self, gas: &GasConfig, master_seed: u64, sweep_index: usize, i: u64) -> Result<Vec<Snapshot>> {
        let mut rng = stream_rng(master_seed, stream_id(sweep_index, i));
        let mut out = Vec::new();
        simulate_with(gas, &mut rng, |h| {
            out.push(self.evaluate(h)?);
            Ok(())
        })
        .map_err(|e| Error::Realization {
            sweep_index,
            realization: i,
            message: e.to_string(),
        })?;
        Ok(out)
    }
}

/// Accumulated statistics for one sweep point and one snapshot time.
struct TimeAccumulator {
    coherence_abs: Vec<MeanAccumulator>,
    coherence_values: Vec<Vec<Complex64>>,
    concurrence: MeanAccumulator,
    negativity_avg: MeanAccumulator,
    negativity_min: MeanAccumulator,
    group_sums: Vec<DMatrix<Complex64>>,
}

impl TimeAccumulator {
    fn new(n_pairs: usize, groups: usize, dim: usize) -> Self {
        TimeAccumulator {
            coherence_abs: vec![MeanAccumulator::default(); n_pairs],
            coherence_values: vec![Vec::new(); n_pairs],
            concurrence: MeanAccumulator::default(),
            negativity_avg: MeanAccumulator::default(),
            negativity_min: MeanAccumulator::default(),
            group_sums: vec![DMatrix::zeros(dim, dim); groups],
        }
    }

    fn push(&mut self, group: usize, snap: Snapshot) {
        for (k, c) in snap.coherences.into_iter().enumerate() {
            self.coherence_abs[k].push(c.norm());
            self.coherence_values[k].push(c);
        }
        if let Some(c) = snap.concurrence {
            self.concurrence.push(c);
        }
        if let Some((avg, min)) = snap.negativity {
            self.negativity_avg.push(avg);
            self.negativity_min.push(min);
        }
        if let Some(rho) = snap.rho {
            self.group_sums[group] += rho;
        }
    }
}

/// `|mean C|` and its standard error, from the spread of the samples
/// projected onto the direction of the mean.
fn averaged_coherence(values: &[Complex64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<Complex64>() / n;
    let modulus = mean.norm();
    if values.len() < 2 {
        return (modulus, 0.0);
    }
    let dir = if modulus > 0.0 { mean.conj() / modulus } else { Complex64::new(1.0, 0.0) };
    let mut acc = MeanAccumulator::default();
    for c in values {
        acc.push((c * dir).re);
    }
    (modulus, acc.stderr())
}

/// Runs the full ensemble described by `spec`.
pub fn run_ensemble(spec: &RunSpec) -> Result<EnsembleResult> {
    spec.validate()?;
    let plan = Plan::new(spec)?;
    let gases = (0..spec.n_points()).map(|j| spec.gas_for(j)).collect::<Result<Vec<_>>>()?;
    let r = spec.run.realizations;
    let groups = r.min(MAX_JACKKNIFE_GROUPS);
    let dim = if plan.needs_state() { plan.rho0.dim() } else { 0 };

    let mut result = EnsembleResult::default();
    for (j, gas) in gases.iter().enumerate() {
        let times = gas.snapshots();
        let mut acc: Vec<TimeAccumulator> = times
            .iter()
            .map(|_| TimeAccumulator::new(plan.pairs.len(), groups as usize, dim))
            .collect();
        let mut start = 0;
        while start < r {
            let end = (start + BLOCK).min(r);
            let block: Vec<Result<Vec<Snapshot>>> = (start..end)
                .into_par_iter()
                .map(|i| plan.realize(gas, spec.run.master_seed, j, i))
                .collect();
            for (i, snaps) in (start..end).zip(block) {
                let snaps = snaps?;
                if snaps.len() != times.len() {
                    return Err(Error::Realization {
                        sweep_index: j,
                        realization: i,
                        message: format!("expected {} snapshots, got {}", times.len(), snaps.len()),
                    });
                }
                let group = (i * groups / r) as usize;
                for (slot, snap) in acc.iter_mut().zip(snaps) {
                    slot.push(group, snap);
                }
            }
            start = end;
        }

        let (param, value) = spec.sweep_point(j);
        for (&time, slot) in times.iter().zip(&acc) {
            let mut row = |observable: String, mean: f64, stderr: f64| {
                result.rows.push(EnsembleRow {
                    sweep_param: param.to_string(),
                    sweep_value: value,
                    time,
                    observable,
                    mean,
                    stderr,
                    realizations: r,
                });
            };
            for (k, label) in plan.labels.iter().enumerate() {
                let a = &slot.coherence_abs[k];
                row(format!("coherence[{label}]"), a.mean(), a.stderr());
                let (m, e) = averaged_coherence(&slot.coherence_values[k]);
                row(format!("avg_state_coherence[{label}]"), m, e);
            }
            if plan.concurrence {
                row("concurrence".into(), slot.concurrence.mean(), slot.concurrence.stderr());
            }
            if plan.negativity {
                row("negativity_avg".into(), slot.negativity_avg.mean(), slot.negativity_avg.stderr());
                row("negativity_min".into(), slot.negativity_min.mean(), slot.negativity_min.stderr());
            }
            if plan.needs_state() {
                for (name, value, err) in averaged_state_observables(&plan, slot, r, groups)? {
                    row(name.to_string(), value, err);
                }
            }
        }
    }
    Ok(result)
}

/// Entanglement of the ensemble-averaged state, with grouped jackknife
/// errors.
fn averaged_state_observables(
    plan: &Plan,
    slot: &TimeAccumulator,
    r: u64,
    groups: u64,
) -> Result<Vec<(&'static str, f64, f64)>> {
    let total = slot
        .group_sums
        .iter()
        .fold(DMatrix::zeros(plan.rho0.dim(), plan.rho0.dim()), |acc, g| acc + g);
    let measure = |sum: &DMatrix<Complex64>, count: u64| -> Result<Vec<f64>> {
        let rho = DensityMatrix::from_matrix_unchecked(sum / Complex64::new(count as f64, 0.0))?;
        let mut out = Vec::new();
        if plan.concurrence {
            out.push(concurrence(&rho)?);
        }
        if plan.negativity {
            let s = negativity_summary(&rho)?;
            out.extend([s.average, s.minimum]);
        }
        Ok(out)
    };
    let full = measure(&total, r)?;
    let mut replicates: Vec<Vec<f64>> = vec![Vec::new(); full.len()];
    if groups >= 2 {
        for g in 0..groups {
            // realization i belongs to group i * groups / r
            let size = ((g + 1) * r).div_ceil(groups) - (g * r).div_ceil(groups);
            let values = measure(&(&total - &slot.group_sums[g as usize]), r - size)?;
            for (rep, v) in replicates.iter_mut().zip(values) {
                rep.push(v);
            }
        }
    }
    let mut names = Vec::new();
    if plan.concurrence {
        names.push("avg_state_concurrence");
    }
    if plan.negativity {
        names.extend(["avg_state_negativity_avg", "avg_state_negativity_min"]);
    }
    Ok(names
        .into_iter()
        .zip(full)
        .zip(replicates)
        .map(|((name, v), rep)| (name, v, jackknife_stderr(&rep)))
        .collect())
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV text of `result`: a header line, then one line per row.
pub fn format_results(result: &EnsembleResult) -> String {
    let mut out = String::with_capacity(64 * (result.rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.sweep_param,
            fmt_float(r.sweep_value),
            fmt_float(r.time),
            r.observable,
            fmt_float(r.mean),
            fmt_float(r.stderr),
            r.realizations
        );
    }
    out
}

pub fn write_results(result: &EnsembleResult, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, format_results(result))?;
    Ok(())
}

pub fn parse_results(text: &str) -> Result<EnsembleResult> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
    }
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let bad = |what: &str| Error::Parse(format!("line {}: {what}", n + 2));
        let fields: Vec<&str> = line.split(',').collect();
        let [param, value, time, observable, mean, stderr, count] = fields[..] else {
            return Err(bad("expected 7 fields"));
        };
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad("invalid number"));
        rows.push(EnsembleRow {
            sweep_param: param.to_string(),
            sweep_value: float(value)?,
            time: float(time)?,
            observable: observable.to_string(),
            mean: float(mean)?,
            stderr: float(stderr)?,
            realizations: count.parse().map_err(|_| bad("invalid realization count"))?,
        });
    }
    Ok(EnsembleResult { rows })
}

pub fn read_results(path: impl AsRef<Path>) -> Result<EnsembleResult> {
    parse_results(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::GasConfig;
    use crate::states::StateFamily;

    fn small_spec(g0: f64, realizations: u64) -> RunSpec {
        let mut gas = GasConfig::new(6, 8, 1.0, g0, 1.0);
        gas.probe_sites = vec![[0, 0], [3, 3]];
        gas.snapshot_times = vec![0.0, 0.5, 1.0];
        let mut spec = RunSpec::new(gas, StateFamily::BellPhiPlus, HamiltonianConvention::Projector11);
        spec.run.observables = vec![
            ObservableKind::Coherence,
            ObservableKind::Concurrence,
            ObservableKind::NegativitySummary,
        ];
        spec.run.coherences = vec![["00".into(), "11".into()], ["01".into(), "10".into()]];
        spec.run.realizations = realizations;
        spec.run.master_seed = 5;
        spec
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs = [0.3, 1.7, -2.0, 4.5, 0.0, 0.25];
        let mut acc = MeanAccumulator::default();
        xs.iter().for_each(|&x| acc.push(x));
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((acc.mean() - mean).abs() < 1e-15);
        assert!((acc.stderr() - (var / n).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_have_zero_error() {
        let mut acc = MeanAccumulator::default();
        acc.push(0.123456789);
        acc.push(0.123456789);
        assert_eq!(acc.stderr(), 0.0);
        assert_eq!(averaged_coherence(&[Complex64::new(0.3, 0.4); 2]), (0.5, 0.0));
    }

    #[test]
    fn no_coupling_keeps_every_coherence_at_one() {
        let spec = small_spec(0.0, 1);
        let result = run_ensemble(&spec).unwrap();
        let mut seen = 0;
        for row in &result.rows {
            if row.observable.contains("coherence") {
                assert_eq!(row.mean, 1.0, "{row:?}");
                assert_eq!(row.stderr, 0.0);
                seen += 1;
            }
            assert_eq!(row.realizations, 1);
        }
        assert_eq!(seen, 3 * 4);
    }

    #[test]
    fn unchanged_states_have_zero_jackknife_error() {
        // 37 realizations do not split evenly into the jackknife groups
        let result = run_ensemble(&small_spec(0.8, 37)).unwrap();
        for name in ["avg_state_concurrence", "avg_state_negativity_avg", "avg_state_negativity_min"] {
            let row = result.find(name, 0.0, 0.0).unwrap();
            assert!(row.stderr < 1e-14, "{row:?}");
        }
    }

    #[test]
    fn output_layout() {
        let result = run_ensemble(&small_spec(0.8, 3)).unwrap();
        let names: Vec<&str> = result.rows[..9].iter().map(|r| r.observable.as_str()).collect();
        assert_eq!(
            names,
            [
                "coherence[00|11]",
                "avg_state_coherence[00|11]",
                "coherence[01|10]",
                "avg_state_coherence[01|10]",
                "concurrence",
                "negativity_avg",
                "negativity_min",
                "avg_state_concurrence",
                "avg_state_negativity_avg",
            ]
        );
        assert_eq!(result.rows.len(), 3 * 10);
        assert!(result.rows.iter().all(|r| r.sweep_param == "none" && r.sweep_value == 0.0));
        let t0 = result.find("concurrence", 0.0, 0.0).unwrap();
        assert!((t0.mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn averaged_state_equals_direct_average() {
        let spec = small_spec(0.8, 5);
        let result = run_ensemble(&spec).unwrap();
        let plan = Plan::new(&spec).unwrap();
        let gas = spec.gas_for(0).unwrap();
        let mut sum = DMatrix::<Complex64>::zeros(4, 4);
        for i in 0..5 {
            sum += plan.realize(&gas, 5, 0, i).unwrap().pop().unwrap().rho.unwrap();
        }
        let rho = DensityMatrix::new(sum / Complex64::new(5.0, 0.0)).unwrap();
        let row = result.find("avg_state_concurrence", 0.0, 1.0).unwrap();
        assert!((row.mean - concurrence(&rho).unwrap()).abs() < 1e-12);
        let row = result.find("avg_state_coherence[00|11]", 0.0, 1.0).unwrap();
        assert!((row.mean - 2.0 * rho.get(0, 3).norm()).abs() < 1e-12);
    }

    #[test]
    fn csv_shapes_and_round_trip() {
        assert_eq!(format_results(&EnsembleResult::default()), format!("{CSV_HEADER}\n"));
        let row = EnsembleRow {
            sweep_param: "g0".into(),
            sweep_value: 0.1,
            time: 1.0 / 3.0,
            observable: "coherence[00|11]".into(),
            mean: std::f64::consts::PI,
            stderr: 1e-300,
            realizations: 7,
        };
        let one = EnsembleResult { rows: vec![row] };
        let text = format_results(&one);
        let lines: Vec<&str> = text.split_terminator('\n').collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("g0,1.0000000000000001e-1,"), "{}", lines[1]);
        assert!(lines[1].ends_with(",7"));
        assert_eq!(parse_results(&text).unwrap(), one);
    }

    #[test]
    fn file_round_trip() {
        let result = run_ensemble(&small_spec(0.8, 2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_results(&result, &path).unwrap();
        assert_eq!(read_results(&path).unwrap(), result);
    }
}
