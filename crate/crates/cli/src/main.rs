use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::Rng;
use spingas_core::analytic::{
    exponential_vs_gaussian, fit_revival_alpha, ghz_avg_negativity, ghz_dp_disentangling_contrast,
    ghz_dp_negativities, markov_coherence, revival_coherence, w_avg_negativity, RevivalFamily, RevivalModel,
};
use spingas_core::config::parse_config;
use spingas_core::decoherence::{apply_decoherence, HamiltonianConvention};
use spingas_core::density::DensityMatrix;
use spingas_core::ensemble::{format_results, run_ensemble, write_results};
use spingas_core::history::InteractionHistory;
use spingas_core::kinematics::stream_rng;
use spingas_core::oracle::{full_evolve_and_trace, FullStateSpec, ProbeInput, MAX_TOTAL_QUBITS};
use spingas_core::states::{make_state, StateFamily, StateSpec};
use spingas_core::Complex64;

#[derive(Parser)]
#[command(name = "spingas", version, about = "Decoherence of probe qubits in a lattice spin gas")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo ensemble described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `run.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `run.realizations`.
        #[arg(long)]
        realizations: Option<u64>,
        /// Overrides `run.output_path`; without either, CSV goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Compare the closed-form evolution against brute-force evolution of
    /// probe plus environment on random interaction histories.
    OracleCheck {
        /// Largest total number of probe and environment qubits.
        #[arg(long, default_value_t = 10)]
        max_qubits: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-10)]
        tolerance: f64,
    },
    /// Evaluate a closed-form model.
    Analytic {
        /// One of: markov, decay, ghz-avg, ghz-dp, w-avg, revival, revival-fit.
        #[arg(long)]
        model: String,
        /// Comma-separated `key=value` pairs.
        #[arg(long, default_value = "")]
        params: String,
    },
    /// Write the density matrix of a probe state.
    States {
        #[arg(long)]
        family: StateFamily,
        #[arg(long)]
        n: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            realizations,
            out,
            threads,
        } => {
            let mut spec = parse_config(&config).with_context(|| format!("reading {}", config.display()))?;
            if let Some(seed) = seed {
                spec.run.master_seed = seed;
            }
            if let Some(r) = realizations {
                spec.run.realizations = r;
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()?;
            let result = pool.install(|| run_ensemble(&spec))?;
            match out.or(spec.run.output_path) {
                Some(path) => write_results(&result, &path).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{}", format_results(&result)),
            }
        }
        Command::OracleCheck {
            max_qubits,
            trials,
            seed,
            tolerance,
        } => return oracle_check(max_qubits, trials, seed, tolerance),
        Command::Analytic { model, params } => analytic(&model, &parse_params(&params)?)?,
        Command::States { family, n, out } => {
            let text = make_state(&StateSpec::new(family, n))?.to_text();
            match out {
                Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn random_probe<R: Rng>(n: usize, rng: &mut R) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..1 << n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

fn oracle_check(max_qubits: usize, trials: usize, seed: u64, tolerance: f64) -> Result<ExitCode> {
    if !(2..=MAX_TOTAL_QUBITS).contains(&max_qubits) {
        bail!("--max-qubits must lie in 2..={MAX_TOTAL_QUBITS}");
    }
    let mut rng = stream_rng(seed, 0);
    let mut worst = 0.0f64;
    for n_a in 1..=3.min(max_qubits - 1) {
        for n_b in 1..=(max_qubits - n_a) {
            for convention in [HamiltonianConvention::Projector11, HamiltonianConvention::IsingZZ] {
                let mut case_worst = 0.0f64;
                for _ in 0..trials {
                    let gamma: Vec<f64> = (0..n_a * n_b)
                        .map(|_| rng.random::<f64>() * std::f64::consts::TAU)
                        .collect();
                    let history = InteractionHistory::from_row_major(n_a, n_b, gamma, 0.0)?;
                    let psi = random_probe(n_a, &mut rng);
                    let rho0 = DensityMatrix::from_pure(&psi)?;
                    let fast = apply_decoherence(&rho0, &history, convention)?;
                    let slow = full_evolve_and_trace(&FullStateSpec {
                        gamma: history,
                        convention,
                        probe_state: ProbeInput::Pure(psi),
                    })?;
                    case_worst = case_worst.max(fast.max_distance(&slow));
                }
                println!("N_A={n_a} N_B={n_b} {}: max distance {case_worst:.3e}", convention.name());
                worst = worst.max(case_worst);
            }
        }
    }
    let ok = worst <= tolerance;
    println!("{} max distance {worst:.3e} (tolerance {tolerance:e})", if ok { "PASS" } else { "FAIL" });
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn parse_params(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').with_context(|| format!("`{item}` is not key=value"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("`{v}` is not a number"))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

struct Params<'a> {
    map: &'a BTreeMap<String, f64>,
    allowed: &'static [&'static str],
}

impl Params<'_> {
    fn get(&self, key: &str) -> Result<f64> {
        self.map.get(key).copied().with_context(|| format!("missing parameter `{key}`"))
    }

    fn or(&self, key: &str, default: f64) -> f64 {
        self.map.get(key).copied().unwrap_or(default)
    }

    fn count(&self, key: &str) -> Result<usize> {
        let v = self.get(key)?;
        if v < 0.0 || v.fract() != 0.0 {
            bail!("parameter `{key}` must be a non-negative integer, got {v}");
        }
        Ok(v as usize)
    }

    fn check(&self) -> Result<()> {
        if let Some(k) = self.map.keys().find(|k| !self.allowed.contains(&k.as_str())) {
            bail!("unknown parameter `{k}`; expected one of {:?}", self.allowed);
        }
        Ok(())
    }
}

fn revival_model(p: &Params) -> Result<RevivalModel> {
    let model = RevivalModel {
        m: p.count("m")?,
        steps: p.or("steps", 0.0),
        delta_phi: p.get("delta")?,
        alpha: p.or("alpha", 0.0),
        alpha_prime: p.or("alpha_prime", 0.0),
        alpha_double_prime: p.or("alpha_double_prime", 0.0),
        n_probe: p.count("n_probe")?,
        n_env: p.count("n_env")?,
    };
    model.validate()?;
    Ok(model)
}

fn probability(p: &Params) -> Result<(f64, usize)> {
    let prob = p.get("p")?;
    if !(0.0..=1.0).contains(&prob) {
        bail!("p must lie in [0, 1]");
    }
    let n = p.count("n")?;
    if n < 2 {
        bail!("n must be at least 2");
    }
    Ok((prob, n))
}

fn analytic(model: &str, map: &BTreeMap<String, f64>) -> Result<()> {
    let allowed: &'static [&'static str] = match model {
        "markov" => &["nu", "delta", "steps"],
        "decay" => &["delta", "dt", "t"],
        "ghz-avg" | "ghz-dp" | "w-avg" => &["p", "n"],
        "revival" | "revival-fit" => &[
            "m",
            "steps",
            "delta",
            "alpha",
            "alpha_prime",
            "alpha_double_prime",
            "n_probe",
            "n_env",
        ],
        other => bail!("unknown model `{other}`"),
    };
    let p = Params { map, allowed };
    p.check()?;
    match model {
        "markov" => {
            let v = markov_coherence(p.get("nu")?, p.get("delta")?, p.count("steps")? as u64);
            println!("coherence={v:.16e}");
        }
        "decay" => {
            let r = exponential_vs_gaussian(p.get("delta")?, p.get("dt")?, p.get("t")?);
            println!("tau_e={:.16e}", r.scales.tau_e);
            println!("tau_g={:.16e}", r.scales.tau_g);
            println!("exp_value={:.16e}", r.exp_value);
            println!("gauss_value={:.16e}", r.gauss_value);
            println!("exp_approx={:.16e}", r.exp_approx);
            println!("gauss_approx={:.16e}", r.gauss_approx);
            println!("gauss_clamped={}", r.gauss_clamped);
        }
        "ghz-avg" => {
            let (prob, n) = probability(&p)?;
            println!("negativity_avg={:.16e}", ghz_avg_negativity(prob, n));
        }
        "ghz-dp" => {
            let (prob, n) = probability(&p)?;
            let (avg, min) = ghz_dp_negativities(prob, n);
            println!("negativity_avg={avg:.16e}");
            println!("negativity_min={min:.16e}");
            println!("disentangling_contrast={:.16e}", ghz_dp_disentangling_contrast(n));
        }
        "w-avg" => {
            let (prob, n) = probability(&p)?;
            println!("negativity_avg={:.16e}", w_avg_negativity(prob, n));
        }
        "revival" => {
            let m = revival_model(&p)?;
            println!("mean_collisions={:.16e}", m.mean_collisions());
            println!("ghz={:.16e}", revival_coherence(&m, RevivalFamily::Ghz));
            println!("w={:.16e}", revival_coherence(&m, RevivalFamily::W));
            println!("first_ghz_revival_steps={:.16e}", m.first_ghz_revival_steps());
        }
        _ => {
            // revival-fit: reads `steps value` pairs from stdin
            let m = revival_model(&p)?;
            let mut data = Vec::new();
            for line in std::io::stdin().lines() {
                let line = line?;
                let mut it = line.split_whitespace().map(str::parse::<f64>);
                match (it.next(), it.next()) {
                    (Some(s), Some(v)) => data.push((s?, v?)),
                    (None, _) => continue,
                    _ => bail!("expected `steps value` per line, got `{line}`"),
                }
            }
            let fit = fit_revival_alpha(&m, RevivalFamily::Ghz, &data)?;
            println!("alpha_prime={:.16e}", fit.alpha);
            println!("relative_residual={:.16e}", fit.relative_residual);
        }
    }
    Ok(())
}
