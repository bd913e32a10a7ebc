//! Classical lattice-gas kinematics.
//!
//! Environment particles hop between nearest-neighbour sites of a rectangular
//! lattice with single occupancy. Probes either sit on fixed sites (and block
//! them) or sweep along the long axis at constant speed. Each step the
//! interaction phases of every probe/particle contact are added to an
//! [`InteractionHistory`].

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::history::InteractionHistory;
use crate::{Error, Result};

/// Random stream used for one trajectory.
pub type StreamRng = ChaCha8Rng;

/// Independent random stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub const DEFAULT_CROSSING_PHASE: f64 = 0.1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    #[default]
    Periodic,
    /// Hops off the lattice are rejected; neighbourhoods do not wrap.
    Reflecting,
}

fn default_crossing_phase() -> f64 {
    DEFAULT_CROSSING_PHASE
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

/// Parameters of one lattice-gas trajectory.
///
/// The lattice has `m` rows and `m_long` columns (square when `m_long` is
/// unset). Probe sites are `[row, col]` pairs; moving probes travel along
/// the column axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasConfig {
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_long: Option<usize>,
    pub n_env: usize,
    pub eta: f64,
    pub g0: f64,
    /// Integration step. Defaults to `0.1 / eta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    pub duration: f64,
    /// Times at which Γ is recorded. Empty means "only at `duration`".
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub probe_sites: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub probe_speed: f64,
    #[serde(default = "default_crossing_phase")]
    pub crossing_phase: f64,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub seed: u64,
}

impl GasConfig {
    /// A square `m x m` gas with static probes and default settings.
    pub fn new(m: usize, n_env: usize, eta: f64, g0: f64, duration: f64) -> Self {
        GasConfig {
            m,
            m_long: None,
            n_env,
            eta,
            g0,
            dt: None,
            duration,
            snapshot_times: Vec::new(),
            probe_sites: Vec::new(),
            probe_speed: 0.0,
            crossing_phase: DEFAULT_CROSSING_PHASE,
            boundary: Boundary::Periodic,
            seed: 0,
        }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.m_long.unwrap_or(self.m)
    }

    pub fn n_sites(&self) -> usize {
        self.rows() * self.cols()
    }

    pub fn n_probe(&self) -> usize {
        self.probe_sites.len()
    }

    pub fn moving_probes(&self) -> bool {
        self.probe_speed > 0.0
    }

    /// Effective time step, falling back to `0.1 / eta`.
    pub fn step(&self) -> f64 {
        match self.dt {
            Some(dt) => dt,
            None if self.eta > 0.0 => 0.1 / self.eta,
            None => 0.1,
        }
    }

    pub fn n_steps(&self) -> u64 {
        (self.duration / self.step()).round() as u64
    }

    /// Snapshot times, defaulting to the end of the run.
    pub fn snapshots(&self) -> Vec<f64> {
        if self.snapshot_times.is_empty() {
            vec![self.duration]
        } else {
            self.snapshot_times.clone()
        }
    }

    /// Checks every invariant, reporting the offending key relative to the
    /// `[gas]` section.
    pub fn validate(&self) -> Result<()> {
        let err = |key: &str, msg: String| Err(Error::config(format!("gas.{key}"), msg));
        if self.m == 0 || self.m_long == Some(0) {
            return err("m", "lattice dimensions must be positive".into());
        }
        for (key, v) in [
            ("eta", self.eta),
            ("g0", self.g0),
            ("duration", self.duration),
            ("probe_speed", self.probe_speed),
        ] {
            if !v.is_finite() || v < 0.0 {
                return err(key, format!("must be finite and >= 0, got {v}"));
            }
        }
        if !self.crossing_phase.is_finite() {
            return err("crossing_phase", "must be finite".into());
        }
        let dt = self.step();
        if !dt.is_finite() || dt <= 0.0 {
            return err("dt", format!("must be finite and > 0, got {dt}"));
        }
        if self.eta * dt > 1.0 {
            return err("dt", format!("hop probability eta*dt = {} exceeds 1", self.eta * dt));
        }
        let n_sites = self.n_sites();
        if self.n_env + self.n_probe() > n_sites {
            return err(
                "n_env",
                format!(
                    "{} particles and {} probes do not fit on {} sites",
                    self.n_env,
                    self.n_probe(),
                    n_sites
                ),
            );
        }
        if self.n_env >= u32::MAX as usize - 1 {
            return err("n_env", "too many particles".into());
        }
        for (i, &[r, c]) in self.probe_sites.iter().enumerate() {
            if r >= self.rows() || c >= self.cols() {
                return err("probe_sites", format!("probe {i} at [{r}, {c}] is off the lattice"));
            }
            if self.probe_sites[..i].contains(&[r, c]) {
                return err("probe_sites", format!("probe {i} shares site [{r}, {c}]"));
            }
        }
        let tol = 1e-9 * dt;
        let mut prev = f64::NEG_INFINITY;
        for &t in &self.snapshot_times {
            if !t.is_finite() || t < 0.0 || t > self.duration + tol {
                return err("snapshot_times", format!("{t} is outside [0, duration]"));
            }
            if t < prev {
                return err("snapshot_times", "times must be sorted".into());
            }
            prev = t;
        }
        Ok(())
    }
}

const EMPTY: u32 = u32::MAX;
const PROBE: u32 = u32::MAX - 1;

/// Positions of environment particles and probes at one instant.
#[derive(Clone, Debug)]
pub struct LatticeState {
    rows: usize,
    cols: usize,
    boundary: Boundary,
    occupancy: Vec<u32>,
    env_positions: Vec<usize>,
    /// `(row, col)`; the column is continuous for moving probes.
    probe_start: Vec<(usize, f64)>,
    probe_positions: Vec<(usize, f64)>,
    moving: bool,
    step: u64,
    time: f64,
    /// `(probe, site)` for every site a moving probe entered in the last step.
    crossings: Vec<(usize, usize)>,
    movers: Vec<u32>,
}

impl LatticeState {
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn n_env(&self) -> usize {
        self.env_positions.len()
    }

    /// `(row, col)` of environment particle `id`.
    pub fn env_position(&self, id: usize) -> (usize, usize) {
        let site = self.env_positions[id];
        (site / self.cols, site % self.cols)
    }

    pub fn probe_positions(&self) -> &[(usize, f64)] {
        &self.probe_positions
    }

    /// Environment particle on `(row, col)`, if any.
    pub fn occupant(&self, row: usize, col: usize) -> Option<usize> {
        self.occupant_of_site(row * self.cols + col)
    }

    fn occupant_of_site(&self, site: usize) -> Option<usize> {
        match self.occupancy[site] {
            EMPTY | PROBE => None,
            id => Some(id as usize),
        }
    }

    pub fn crossings(&self) -> &[(usize, usize)] {
        &self.crossings
    }

    /// Verifies that occupancy and particle positions agree and that no
    /// site is doubly occupied.
    pub fn check_consistency(&self) -> Result<()> {
        let mut seen = vec![false; self.occupancy.len()];
        for (id, &site) in self.env_positions.iter().enumerate() {
            if seen[site] {
                return Err(Error::Consistency(format!("site {site} doubly occupied")));
            }
            seen[site] = true;
            if self.occupancy[site] != id as u32 {
                return Err(Error::Consistency(format!(
                    "particle {id} at site {site} missing from occupancy grid"
                )));
            }
        }
        let listed = self
            .occupancy
            .iter()
            .filter(|&&o| o != EMPTY && o != PROBE)
            .count();
        if listed != self.env_positions.len() {
            return Err(Error::Consistency(format!(
                "occupancy grid lists {listed} particles, expected {}",
                self.env_positions.len()
            )));
        }
        Ok(())
    }

    fn neighbor(&self, site: usize, dir: u8) -> Option<usize> {
        let (r, c) = (site / self.cols, site % self.cols);
        let (r, c) = match (self.boundary, dir) {
            (Boundary::Periodic, 0) => ((r + self.rows - 1) % self.rows, c),
            (Boundary::Periodic, 1) => ((r + 1) % self.rows, c),
            (Boundary::Periodic, 2) => (r, (c + self.cols - 1) % self.cols),
            (Boundary::Periodic, _) => (r, (c + 1) % self.cols),
            (Boundary::Reflecting, 0) => (r.checked_sub(1)?, c),
            (Boundary::Reflecting, 1) => (r + 1, c),
            (Boundary::Reflecting, 2) => (r, c.checked_sub(1)?),
            (Boundary::Reflecting, _) => (r, c + 1),
        };
        (r < self.rows && c < self.cols).then_some(r * self.cols + c)
    }

    /// Distinct nearest-neighbour sites of `site`.
    fn neighborhood(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        let mut sites = [usize::MAX; 4];
        let mut n = 0;
        for dir in 0..4 {
            if let Some(t) = self.neighbor(site, dir) {
                if t != site && !sites[..n].contains(&t) {
                    sites[n] = t;
                    n += 1;
                }
            }
        }
        sites.into_iter().take(n)
    }
}

/// Places probes on their sites and `n_env` particles uniformly at random on
/// the remaining free sites.
pub fn init_lattice<R: Rng + ?Sized>(config: &GasConfig, rng: &mut R) -> Result<LatticeState> {
    config.validate()?;
    let (rows, cols) = (config.rows(), config.cols());
    let mut occupancy = vec![EMPTY; rows * cols];
    let moving = config.moving_probes();
    let probe_sites: Vec<usize> = config.probe_sites.iter().map(|&[r, c]| r * cols + c).collect();
    if !moving {
        for &site in &probe_sites {
            occupancy[site] = PROBE;
        }
    }
    let free: Vec<usize> = (0..rows * cols).filter(|&s| occupancy[s] == EMPTY).collect();
    let env_positions: Vec<usize> = index::sample(rng, free.len(), config.n_env)
        .into_iter()
        .map(|i| free[i])
        .collect();
    for (id, &site) in env_positions.iter().enumerate() {
        occupancy[site] = id as u32;
    }
    let probe_start: Vec<(usize, f64)> = config
        .probe_sites
        .iter()
        .map(|&[r, c]| (r, c as f64))
        .collect();
    Ok(LatticeState {
        rows,
        cols,
        boundary: config.boundary,
        occupancy,
        probe_positions: probe_start.clone(),
        probe_start,
        moving,
        step: 0,
        time: 0.0,
        crossings: Vec::new(),
        movers: Vec::new(),
        env_positions,
    })
}

/// Advances the gas by one time step.
///
/// Each particle attempts, with probability `eta * dt`, a hop to a uniformly
/// chosen nearest neighbour, rejected if the target is occupied or
/// (reflecting boundary) off the lattice. Attempts are made in a uniformly
/// random order. Moving probes then advance by `probe_speed * dt` columns,
/// recording every site they enter.
pub fn hop_step<R: Rng + ?Sized>(state: &mut LatticeState, config: &GasConfig, rng: &mut R) {
    let dt = config.step();
    let p_hop = config.eta * dt;
    if p_hop > 0.0 {
        // Picking the movers first and shuffling only them gives the same
        // distribution as visiting every particle in random order.
        let mut movers = std::mem::take(&mut state.movers);
        select_movers(state.env_positions.len(), p_hop, rng, &mut movers);
        movers.shuffle(rng);
        for &id in &movers {
            let dir: u8 = rng.random_range(0..4);
            let from = state.env_positions[id as usize];
            if let Some(to) = state.neighbor(from, dir) {
                if state.occupancy[to] == EMPTY {
                    state.occupancy[from] = EMPTY;
                    state.occupancy[to] = id;
                    state.env_positions[id as usize] = to;
                }
            }
        }
        state.movers = movers;
    }

    state.step += 1;
    state.time = state.step as f64 * dt;

    state.crossings.clear();
    if state.moving {
        let travelled = config.probe_speed * state.time;
        let prev_travelled = config.probe_speed * (state.step - 1) as f64 * dt;
        for (k, &(row, col0)) in state.probe_start.iter().enumerate() {
            let (x_old, x_new) = (col0 + prev_travelled, col0 + travelled);
            // moving probes wrap along the long axis regardless of boundary
            for cell in (x_old.floor() as u64 + 1)..=(x_new.floor() as u64) {
                let col = (cell % state.cols as u64) as usize;
                state.crossings.push((k, row * state.cols + col));
            }
            state.probe_positions[k] = (row, x_new % state.cols as f64);
        }
    }

    #[cfg(test)]
    state.check_consistency().expect("lattice invariant violated");
}

/// Fills `out` with the ids in `0..n` that are independently selected with
/// probability `p`, skipping ahead by geometrically distributed gaps.
fn select_movers<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R, out: &mut Vec<u32>) {
    out.clear();
    if p >= 1.0 {
        out.extend(0..n as u32);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut i = 0usize;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap >= (n - i) as f64 {
            return;
        }
        i += gap as usize;
        out.push(i as u32);
        i += 1;
    }
}

/// Adds this step's interaction phases to `history`.
///
/// Static probes gain `g0 * dt` from every particle on a nearest-neighbour
/// site; moving probes gain `crossing_phase` from the occupant of every site
/// they entered.
pub fn accumulate_phases(state: &LatticeState, history: &mut InteractionHistory, config: &GasConfig) {
    if state.moving {
        for &(k, site) in &state.crossings {
            if let Some(l) = state.occupant_of_site(site) {
                history.add(k, l, config.crossing_phase);
            }
        }
    } else if config.g0 != 0.0 {
        let phase = config.g0 * config.step();
        for (k, &(row, col)) in state.probe_positions.iter().enumerate() {
            let site = row * state.cols + col as usize;
            for nb in state.neighborhood(site) {
                if let Some(l) = state.occupant_of_site(nb) {
                    history.add(k, l, phase);
                }
            }
        }
    }
    history.set_time(state.time);
}

/// Runs one trajectory, handing each requested snapshot to `on_snapshot` in
/// time order.
pub fn simulate_with<R, F>(config: &GasConfig, rng: &mut R, mut on_snapshot: F) -> Result<()>
where
    R: Rng + ?Sized,
    F: FnMut(&InteractionHistory) -> Result<()>,
{
    let mut state = init_lattice(config, rng)?;
    let mut history = InteractionHistory::zeros(config.n_probe(), config.n_env, 0.0);
    let dt = config.step();
    let snapshots = config.snapshots();
    let mut pending = snapshots.iter().map(|&t| ((t / dt).round() as u64, t)).peekable();
    let mut emit = |history: &mut InteractionHistory, step: u64| -> Result<()> {
        while let Some((_, t)) = pending.next_if(|&(s, _)| s <= step) {
            let time = history.time();
            history.set_time(t);
            on_snapshot(history)?;
            history.set_time(time);
        }
        Ok(())
    };
    emit(&mut history, 0)?;
    for step in 1..=config.n_steps() {
        hop_step(&mut state, config, rng);
        accumulate_phases(&state, &mut history, config);
        emit(&mut history, step)?;
    }
    emit(&mut history, u64::MAX)
}

/// Runs one trajectory on stream 0 of `config.seed` and returns every
/// snapshot.
pub fn simulate(config: &GasConfig) -> Result<Vec<InteractionHistory>> {
    let mut rng = stream_rng(config.seed, 0);
    let mut out = Vec::new();
    simulate_with(config, &mut rng, |h| {
        out.push(h.clone());
        Ok(())
    })?;
    Ok(out)
}
