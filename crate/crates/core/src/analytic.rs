//! Closed-form reference models: Markovian and Gaussian decay, analytic
//! negativities under independent dephasing, and the finite-lattice revival
//! model with its single-parameter fit.

use num_complex::Complex64;

use crate::{Error, Result};

/// Exponential and Gaussian decay times for a per-collision phase
/// `delta_phi` and collision interval `delta_t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayScales {
    pub tau_e: f64,
    pub tau_g: f64,
    pub delta_phi: f64,
    pub delta_t: f64,
}

impl DecayScales {
    pub fn new(delta_phi: f64, delta_t: f64) -> Self {
        DecayScales {
            tau_e: 8.0 * delta_t / (delta_phi * delta_phi),
            tau_g: 2.0 * delta_t / delta_phi,
            delta_phi,
            delta_t,
        }
    }
}

/// `|ν e^{iδ/2} cos(δ/2) + (1 - ν)|^{2s}`: the `|00><11|` coherence of two
/// probes that each meet a fresh environment particle with probability `ν`
/// per step.
pub fn markov_coherence(nu: f64, delta_phi: f64, steps: u64) -> f64 {
    let per_step = Complex64::from_polar(1.0, delta_phi / 2.0) * (delta_phi / 2.0).cos() * nu
        + Complex64::new(1.0 - nu, 0.0);
    per_step.norm().powf(2.0 * steps as f64)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayComparison {
    /// `cos(δ/2)^k` with `k = t / δt` distinct partners.
    pub exp_value: f64,
    /// `cos(k δ/2)` for `k` repeated collisions with one partner.
    pub gauss_value: f64,
    /// `exp(-t / τ_e)`
    pub exp_approx: f64,
    /// `exp(-t² / (2 τ_g²))`
    pub gauss_approx: f64,
    /// Set when `k δ > π` and `gauss_value` was clamped to zero.
    pub gauss_clamped: bool,
    pub scales: DecayScales,
}

pub fn exponential_vs_gaussian(delta_phi: f64, delta_t: f64, t: f64) -> DecayComparison {
    let scales = DecayScales::new(delta_phi, delta_t);
    let k = t / delta_t;
    let half = k * delta_phi / 2.0;
    let gauss_clamped = half > std::f64::consts::FRAC_PI_2;
    DecayComparison {
        exp_value: (delta_phi / 2.0).cos().powf(k),
        gauss_value: if gauss_clamped { 0.0 } else { half.cos() },
        exp_approx: (-t / scales.tau_e).exp(),
        gauss_approx: (-t * t / (2.0 * scales.tau_g * scales.tau_g)).exp(),
        gauss_clamped,
        scales,
    }
}

/// Average negativity `½|2p-1|^N` of a dephased standard GHZ state.
pub fn ghz_avg_negativity(p: f64, n_qubits: usize) -> f64 {
    0.5 * (2.0 * p - 1.0).abs().powi(n_qubits as i32)
}

fn n_bipartitions(n_qubits: usize) -> f64 {
    ((1u64 << (n_qubits - 1)) - 1) as f64
}

/// `(average, minimum)` negativity of the dephased `|+>|0..0> + |->|1..1>`
/// state. The minimum is `¼ max{0, x + x^{N-1} + x^N - 1}` with
/// `x = |2p-1|`; every other bipartition has `½ x^{N-1}`.
pub fn ghz_dp_negativities(p: f64, n_qubits: usize) -> (f64, f64) {
    let x = (2.0 * p - 1.0).abs();
    let n = n_qubits as i32;
    let min = 0.25 * (x + x.powi(n - 1) + x.powi(n) - 1.0).max(0.0);
    let bulk = 0.5 * x.powi(n - 1);
    let parts = n_bipartitions(n_qubits);
    let avg = (min + (parts - 1.0) * bulk) / parts;
    (avg, min)
}

/// Contrast `x = |2p-1|` at which the `|Ψ''>` minimum negativity vanishes:
/// the root of `x + x^{N-1} + x^N = 1` in `(0, 1)`.
pub fn ghz_dp_disentangling_contrast(n_qubits: usize) -> f64 {
    let n = n_qubits as i32;
    let f = |x: f64| x + x.powi(n - 1) + x.powi(n) - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Average negativity of a dephased W state,
/// `|2p-1|² / (N (2^N - 2)) Σ_{a=1}^{N-1} C(N,a) √(a(N-a))`.
pub fn w_avg_negativity(p: f64, n_qubits: usize) -> f64 {
    let n = n_qubits;
    let x2 = (2.0 * p - 1.0).powi(2);
    let sum: f64 = (1..n)
        .map(|a| binomial(n, a) * ((a * (n - a)) as f64).sqrt())
        .sum();
    x2 / (n as f64 * ((1u64 << n) - 2) as f64) * sum
}

/// Long-time description of a finite lattice: each environment particle
/// meets a given probe `n = 4 s / M²` times on average after `s` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevivalModel {
    pub m: usize,
    pub steps: f64,
    pub delta_phi: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub alpha_double_prime: f64,
    pub n_probe: usize,
    pub n_env: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RevivalFamily {
    Ghz,
    W,
}

impl RevivalModel {
    pub fn mean_collisions(&self) -> f64 {
        4.0 * self.steps / (self.m * self.m) as f64
    }

    pub fn with_steps(self, steps: f64) -> Self {
        RevivalModel { steps, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.steps < 0.0 {
            return Err(Error::InvalidInput("revival model needs m > 0 and steps >= 0".into()));
        }
        if [self.alpha, self.alpha_prime, self.alpha_double_prime]
            .iter()
            .any(|a| a.is_nan() || *a < 0.0)
        {
            return Err(Error::InvalidInput("variance coefficients must be >= 0".into()));
        }
        Ok(())
    }

    /// Step count of the first GHZ revival peak of `|C|`, where
    /// `2 N_A n δ = π` and every per-particle cosine returns to `-1`.
    pub fn first_ghz_revival_steps(&self) -> f64 {
        let n = std::f64::consts::FRAC_PI_2 / (self.n_probe as f64 * self.delta_phi);
        n * (self.m * self.m) as f64 / 4.0
    }
}

/// Decay factor of the GHZ `|0..0><1..1|` coherence or of a W coherence
/// `|w_i><w_j|`, raised to the number of environment particles.
pub fn revival_coherence(model: &RevivalModel, family: RevivalFamily) -> f64 {
    let n = model.mean_collisions();
    let d = model.delta_phi;
    let na = model.n_probe as f64;
    let per_particle = match family {
        RevivalFamily::Ghz => (2.0 * na * n * d).cos() * (-8.0 * model.alpha_prime * na * n * d * d).exp(),
        RevivalFamily::W => (-8.0 * model.alpha_double_prime * 2.0 * n * d * d).exp(),
    };
    per_particle.powi(model.n_env as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RevivalFit {
    /// Fitted `α'` (GHZ) or `α''` (W).
    pub alpha: f64,
    /// `‖model - data‖₂ / ‖data‖₂` at the fitted value.
    pub relative_residual: f64,
}

fn with_alpha(model: &RevivalModel, family: RevivalFamily, alpha: f64) -> RevivalModel {
    match family {
        RevivalFamily::Ghz => RevivalModel {
            alpha_prime: alpha,
            ..*model
        },
        RevivalFamily::W => RevivalModel {
            alpha_double_prime: alpha,
            ..*model
        },
    }
}

/// Least-squares fit of the single variance coefficient to `(steps, |C|)`
/// data; the model enters through its magnitude. A log-spaced scan brackets the minimum, then golden-section search
/// refines it.
pub fn fit_revival_alpha(model: &RevivalModel, family: RevivalFamily, data: &[(f64, f64)]) -> Result<RevivalFit> {
    if data.is_empty() {
        return Err(Error::InvalidInput("no data to fit".into()));
    }
    let sse = |alpha: f64| -> f64 {
        let m = with_alpha(model, family, alpha);
        data.iter()
            .map(|&(s, y)| (revival_coherence(&m.with_steps(s), family).abs() - y).powi(2))
            .sum()
    };
    let mut grid: Vec<f64> = vec![0.0];
    grid.extend((0..=140).map(|i| 10f64.powf(-4.0 + i as f64 * 0.05)));
    let best = (0..grid.len())
        .min_by(|&a, &b| sse(grid[a]).total_cmp(&sse(grid[b])))
        .unwrap();
    let mut lo = grid[best.saturating_sub(1)];
    let mut hi = grid[(best + 1).min(grid.len() - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (sse(a), sse(b));
    for _ in 0..100 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = sse(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = sse(b);
        }
    }
    let alpha = 0.5 * (lo + hi);
    let norm: f64 = data.iter().map(|&(_, y)| y * y).sum();
    Ok(RevivalFit {
        alpha,
        relative_residual: (sse(alpha) / norm).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn decay_scales_are_exact() {
        let s = DecayScales::new(0.1, 2.0);
        assert_eq!(s.tau_e, 8.0 * 2.0 / (0.1 * 0.1));
        assert_eq!(s.tau_g, 2.0 * 2.0 / 0.1);
    }

    #[test]
    fn markov_coherence_examples() {
        for s in [0, 1, 10, 1000] {
            assert_eq!(markov_coherence(0.0, 0.3, s), 1.0);
        }
        assert_abs_diff_eq!(markov_coherence(1.0, PI, 1), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(markov_coherence(1.0, PI, 7), 0.0, epsilon = 1e-15);
        // |e^{i 0.05} cos 0.05|^200 = cos(0.05)^200
        let v = markov_coherence(1.0, 0.1, 100);
        assert_abs_diff_eq!(v, 0.05f64.cos().powi(200), epsilon = 1e-14);
        assert_abs_diff_eq!(v, (-0.25f64).exp(), epsilon = 1e-4);
        let mut prev = 1.0;
        for s in 0..50 {
            let c = markov_coherence(0.3, 0.4, s);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn exponential_and_gaussian_branches() {
        let at0 = exponential_vs_gaussian(0.1, 1.0, 0.0);
        assert_eq!((at0.exp_value, at0.gauss_value), (1.0, 1.0));
        let at100 = exponential_vs_gaussian(0.1, 1.0, 100.0);
        assert_abs_diff_eq!(at100.exp_value, 0.05f64.cos().powi(100), epsilon = 1e-15);
        assert_abs_diff_eq!(at100.exp_value, 0.8825, epsilon = 5e-5);
        assert!(at100.gauss_clamped && at100.gauss_value == 0.0);
        let late = exponential_vs_gaussian(0.1, 1.0, 30.0);
        assert!(!late.gauss_clamped);
        assert_abs_diff_eq!(late.gauss_value, 1.5f64.cos(), epsilon = 1e-15);
        let clamped = exponential_vs_gaussian(0.1, 1.0, 40.0 * PI);
        assert!(clamped.gauss_clamped && clamped.gauss_value == 0.0);
        for d in [0.05, 0.02, 0.01] {
            let tau = DecayScales::new(d, 1.0).tau_e;
            let r = exponential_vs_gaussian(d, 1.0, tau);
            let rel = (r.exp_value - (-1f64).exp()).abs() / (-1f64).exp();
            assert!(rel < d * d, "δ={d}: rel {rel}");
        }
    }

    #[test]
    fn ghz_negativity_examples() {
        assert_eq!(ghz_avg_negativity(1.0, 4), 0.5);
        assert_eq!(ghz_avg_negativity(0.5, 4), 0.0);
        assert_eq!(ghz_avg_negativity(0.75, 6), 0.0078125);
        assert_eq!(ghz_avg_negativity(0.75, 4), 0.03125);
    }

    #[test]
    fn ghz_dp_examples() {
        let (avg, min) = ghz_dp_negativities(1.0, 4);
        assert_abs_diff_eq!(avg, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(min, 0.5, epsilon = 1e-15);
        assert_eq!(ghz_dp_negativities(0.5, 4), (0.0, 0.0));
        let x = ghz_dp_disentangling_contrast(4);
        assert_abs_diff_eq!(x + x.powi(3) + x.powi(4), 1.0, epsilon = 1e-14);
        let p = (1.0 + x) / 2.0;
        assert_abs_diff_eq!(ghz_dp_negativities(p, 4).1, 0.0, epsilon = 1e-14);
        assert!(ghz_dp_negativities(p + 1e-3, 4).1 > 0.0);
        assert_eq!(ghz_dp_negativities(p - 1e-3, 4).1, 0.0);
    }

    #[test]
    fn w_negativity_examples() {
        assert_abs_diff_eq!(w_avg_negativity(1.0, 2), 0.5, epsilon = 1e-15);
        assert_eq!(w_avg_negativity(0.5, 5), 0.0);
        // depends on p only through (2p-1)²
        assert_abs_diff_eq!(w_avg_negativity(0.8, 4), w_avg_negativity(0.2, 4), epsilon = 1e-15);
        assert_abs_diff_eq!(w_avg_negativity(0.8, 4), 0.36 * w_avg_negativity(1.0, 4), epsilon = 1e-15);
    }

    fn model() -> RevivalModel {
        RevivalModel {
            m: 20,
            steps: 0.0,
            delta_phi: 8e-4,
            alpha: 0.0,
            alpha_prime: 0.5,
            alpha_double_prime: 0.5,
            n_probe: 4,
            n_env: 25,
        }
    }

    #[test]
    fn revival_model_examples() {
        let flat = RevivalModel { delta_phi: 0.0, steps: 1e5, ..model() };
        assert_eq!(revival_coherence(&flat, RevivalFamily::Ghz), 1.0);
        assert_eq!(revival_coherence(&flat, RevivalFamily::W), 1.0);

        let m = model();
        let s_peak = m.first_ghz_revival_steps();
        let at_peak = m.with_steps(s_peak);
        assert_abs_diff_eq!(2.0 * 4.0 * at_peak.mean_collisions() * m.delta_phi, PI, epsilon = 1e-12);
        let envelope = (-8.0 * m.alpha_prime * 4.0 * at_peak.mean_collisions() * m.delta_phi.powi(2)).exp();
        // 25 factors of -envelope
        assert_abs_diff_eq!(
            revival_coherence(&at_peak, RevivalFamily::Ghz),
            -envelope.powi(25),
            epsilon = 1e-12
        );
        let before = revival_coherence(&m.with_steps(0.9 * s_peak), RevivalFamily::Ghz).abs();
        let after = revival_coherence(&m.with_steps(1.1 * s_peak), RevivalFamily::Ghz).abs();
        assert!(before < envelope.powi(25) && after < envelope.powi(25));
        // W decays monotonically
        let mut prev = 1.0;
        for i in 0..100 {
            let v = revival_coherence(&m.with_steps(i as f64 * 1000.0), RevivalFamily::W);
            assert!(v <= prev);
            prev = v;
        }
        assert!(RevivalModel { alpha: -1.0, ..m }.validate().is_err());
    }

    #[test]
    fn fit_recovers_a_known_alpha() {
        let m = RevivalModel { alpha_prime: 2.5, ..model() };
        let data: Vec<(f64, f64)> = (0..200)
            .map(|i| {
                let s = i as f64 * 300.0;
                (s, revival_coherence(&m.with_steps(s), RevivalFamily::Ghz).abs())
            })
            .collect();
        let fit = fit_revival_alpha(&RevivalModel { alpha_prime: 0.0, ..m }, RevivalFamily::Ghz, &data).unwrap();
        assert_abs_diff_eq!(fit.alpha, 2.5, epsilon = 1e-6);
        assert!(fit.relative_residual < 1e-8);
    }
}
