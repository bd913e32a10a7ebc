//! The interaction history: accumulated probe/environment phases.

use std::fmt::Write as _;
use std::io::{Read, Write};

use crate::{Error, Result};

/// `N_A x N_B` matrix of accumulated phases `φ_kl` between probe `k` and
/// environment particle `l`, stored row-major, together with the time at
/// which it was recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionHistory {
    n_probe: usize,
    n_env: usize,
    time: f64,
    gamma: Vec<f64>,
}

impl InteractionHistory {
    pub fn zeros(n_probe: usize, n_env: usize, time: f64) -> Self {
        InteractionHistory {
            n_probe,
            n_env,
            time,
            gamma: vec![0.0; n_probe * n_env],
        }
    }

    pub fn from_row_major(n_probe: usize, n_env: usize, gamma: Vec<f64>, time: f64) -> Result<Self> {
        if gamma.len() != n_probe * n_env {
            return Err(Error::dimension(n_probe * n_env, gamma.len()));
        }
        if let Some(bad) = gamma.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite phase {bad}")));
        }
        Ok(InteractionHistory {
            n_probe,
            n_env,
            time,
            gamma,
        })
    }

    /// Builds a history from one row of phases per probe.
    pub fn from_rows(rows: &[Vec<f64>], time: f64) -> Result<Self> {
        let n_env = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_env) {
            return Err(Error::dimension(n_env, bad.len()));
        }
        Self::from_row_major(rows.len(), n_env, rows.concat(), time)
    }

    pub fn n_probe(&self) -> usize {
        self.n_probe
    }

    pub fn n_env(&self) -> usize {
        self.n_env
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn set_time(&mut self, time: f64) {
        self.time = time;
    }

    pub fn get(&self, probe: usize, env: usize) -> f64 {
        self.gamma[probe * self.n_env + env]
    }

    pub fn add(&mut self, probe: usize, env: usize, phase: f64) {
        self.gamma[probe * self.n_env + env] += phase;
    }

    /// Phases of probe `probe` with every environment particle.
    pub fn row(&self, probe: usize) -> &[f64] {
        &self.gamma[probe * self.n_env..(probe + 1) * self.n_env]
    }

    /// The vector `Γ_l` of phases between environment particle `env` and
    /// each probe.
    pub fn column(&self, env: usize) -> Vec<f64> {
        (0..self.n_probe).map(|k| self.get(k, env)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.gamma
    }

    /// Entrywise sum of two histories of equal shape; keeps `self.time`.
    pub fn sum(&self, other: &InteractionHistory) -> Result<Self> {
        if (self.n_probe, self.n_env) != (other.n_probe, other.n_env) {
            return Err(Error::dimension(self.gamma.len(), other.gamma.len()));
        }
        let gamma = self.gamma.iter().zip(&other.gamma).map(|(a, b)| a + b).collect();
        Ok(InteractionHistory { gamma, ..*self })
    }

    /// Text form: header line `N_A N_B time`, then one line per probe row.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {:e}\n", self.n_probe, self.n_env, self.time);
        for k in 0..self.n_probe {
            let row = self.row(k);
            for (l, v) in row.iter().enumerate() {
                if l > 0 {
                    out.push(' ');
                }
                write!(out, "{v:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("history text ends before {what}")))
        };
        let n_probe: usize = parse(next("N_A")?)?;
        let n_env: usize = parse(next("N_B")?)?;
        let time: f64 = parse(next("time")?)?;
        let gamma = (0..n_probe * n_env)
            .map(|_| parse(next("entries")?))
            .collect::<Result<Vec<f64>>>()?;
        if tokens.next().is_some() {
            return Err(Error::Parse("trailing data after history entries".into()));
        }
        Self::from_row_major(n_probe, n_env, gamma, time)
    }

    /// Binary form: little-endian `u64 N_A`, `u64 N_B`, `f64 time`, then the
    /// row-major `f64` entries.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.n_probe as u64).to_le_bytes())?;
        w.write_all(&(self.n_env as u64).to_le_bytes())?;
        w.write_all(&self.time.to_le_bytes())?;
        for v in &self.gamma {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut read_word = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)?;
            Ok(word)
        };
        let n_probe = u64::from_le_bytes(read_word(&mut r)?) as usize;
        let n_env = u64::from_le_bytes(read_word(&mut r)?) as usize;
        let time = f64::from_le_bytes(read_word(&mut r)?);
        let len = n_probe
            .checked_mul(n_env)
            .ok_or_else(|| Error::Parse("history header overflows".into()))?;
        let mut gamma = Vec::with_capacity(len.min(1 << 24));
        for _ in 0..len {
            gamma.push(f64::from_le_bytes(read_word(&mut r)?));
        }
        Self::from_row_major(n_probe, n_env, gamma, time)
    }
}

fn parse<T: std::str::FromStr>(token: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    token
        .parse()
        .map_err(|e| Error::Parse(format!("`{token}`: {e}")))
}
