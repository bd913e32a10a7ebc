use std::f64::consts::TAU;

use nalgebra::DMatrix;
use proptest::prelude::*;
use spingas_core::decoherence::{apply_decoherence, product_dephasing_apply, HamiltonianConvention};
use spingas_core::density::{hermitian_eigen, DensityMatrix};
use spingas_core::entanglement::{bipartitions, hermitian_eigenvalues, negativity, negativity_summary};
use spingas_core::history::InteractionHistory;
use spingas_core::mapstate::build_map_state;
use spingas_core::oracle::{full_evolve_and_trace, FullStateSpec, JointState, ProbeInput};
use spingas_core::states::{make_state, StateFamily, StateSpec};
use spingas_core::Complex64;

fn convention() -> impl Strategy<Value = HamiltonianConvention> {
    prop_oneof![Just(HamiltonianConvention::Projector11), Just(HamiltonianConvention::IsingZZ)]
}

fn history(n_a: usize, n_b: usize) -> impl Strategy<Value = InteractionHistory> {
    prop::collection::vec(0.0..TAU, n_a * n_b)
        .prop_map(move |g| InteractionHistory::from_row_major(n_a, n_b, g, 0.0).unwrap())
}

fn random_mixed(n: usize) -> impl Strategy<Value = DensityMatrix> {
    let dim = 1usize << n;
    prop::collection::vec(-1.0..1.0f64, 2 * dim * dim).prop_map(move |v| {
        let g = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(v[2 * (i * dim + j)], v[2 * (i * dim + j) + 1]));
        let m = &g * g.adjoint();
        let tr = m.trace();
        DensityMatrix::new(m / tr).unwrap()
    })
}

fn random_pure(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec(-1.0..1.0f64, 2 << n).prop_map(|v| {
        let psi: Vec<Complex64> = v.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        let norm = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        psi.into_iter().map(|c| c / norm).collect()
    })
}

/// `exp(-i a Z/2) exp(-i b Y/2) exp(-i c Z/2)`.
fn su2(a: f64, b: f64, c: f64) -> DMatrix<Complex64> {
    let rz = |t: f64| {
        DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::from_polar(1.0, -t / 2.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::from_polar(1.0, t / 2.0)],
        )
    };
    let (cb, sb) = ((b / 2.0).cos(), (b / 2.0).sin());
    let ry = DMatrix::from_row_slice(
        2,
        2,
        &[Complex64::new(cb, 0.0), Complex64::new(-sb, 0.0), Complex64::new(sb, 0.0), Complex64::new(cb, 0.0)],
    );
    rz(a) * ry * rz(c)
}

fn local_unitary(angles: &[f64]) -> DMatrix<Complex64> {
    angles
        .chunks(3)
        .fold(DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)), |acc, a| acc.kronecker(&su2(a[0], a[1], a[2])))
}

/// Negativity with the transposition taken over exactly the qubits in
/// `qubit_mask` (bit k set for qubit k), no canonicalization.
fn negativity_over(rho: &DensityMatrix, qubit_mask: usize) -> f64 {
    let n = rho.n_qubits();
    let dim = rho.dim();
    let basis: usize = (0..n).filter(|k| qubit_mask >> k & 1 == 1).map(|k| 1 << (n - 1 - k)).sum();
    let m = rho.matrix();
    let pt = DMatrix::from_fn(dim, dim, |i, j| m[((i & !basis) | (j & basis), (j & !basis) | (i & basis))]);
    hermitian_eigenvalues(&pt).into_iter().filter(|&e| e < 0.0).map(f64::abs).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoherence_keeps_a_valid_state(
        (rho, gamma) in (1usize..=4, 1usize..=30).prop_flat_map(|(a, b)| (random_mixed(a), history(a, b))),
        conv in convention(),
    ) {
        let out = apply_decoherence(&rho, &gamma, conv).unwrap();
        prop_assert!((out.trace().re - 1.0).abs() <= 1e-12);
        prop_assert!(out.trace().im.abs() <= 1e-12);
        prop_assert!(out.hermiticity_error() <= 1e-12);
        prop_assert!(out.eigenvalues()[0] >= -1e-10);
        for s in 0..rho.dim() {
            prop_assert_eq!(out.get(s, s), rho.get(s, s));
        }
    }

    #[test]
    fn phases_add_before_the_trace(
        (psi, g1, g2) in (1usize..=3, 1usize..=5)
            .prop_flat_map(|(a, b)| (random_pure(a), history(a, b), history(a, b))),
        conv in convention(),
    ) {
        let mut joint = JointState::with_plus_environment(&psi, g1.n_env()).unwrap();
        for g in [&g1, &g2] {
            for k in 0..g.n_probe() {
                for l in 0..g.n_env() {
                    joint.couple_probe_env(k, l, g.get(k, l), conv);
                }
            }
        }
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let closed = apply_decoherence(&rho0, &g1.sum(&g2).unwrap(), conv).unwrap();
        let diff = (joint.reduced_probe() - closed.matrix()).camax();
        prop_assert!(diff <= 1e-12, "{}", diff);
    }

    #[test]
    fn disjoint_environments_compose(
        (rho, g1, g2) in (1usize..=3, 1usize..=12, 1usize..=12)
            .prop_flat_map(|(a, b1, b2)| (random_mixed(a), history(a, b1), history(a, b2))),
        conv in convention(),
    ) {
        let rows: Vec<Vec<f64>> = (0..g1.n_probe())
            .map(|k| g1.row(k).iter().chain(g2.row(k)).copied().collect())
            .collect();
        let joint = InteractionHistory::from_rows(&rows, 0.0).unwrap();
        let both = apply_decoherence(&rho, &joint, conv).unwrap();
        let seq = apply_decoherence(&apply_decoherence(&rho, &g1, conv).unwrap(), &g2, conv).unwrap();
        prop_assert!(both.max_distance(&seq) <= 1e-12);
    }

    #[test]
    fn closed_form_matches_brute_force(
        (psi, gamma) in (1usize..=3, 1usize..=6).prop_flat_map(|(a, b)| (random_pure(a), history(a, b))),
        conv in convention(),
    ) {
        let rho0 = DensityMatrix::from_pure(&psi).unwrap();
        let fast = apply_decoherence(&rho0, &gamma, conv).unwrap();
        let slow = full_evolve_and_trace(&FullStateSpec { gamma, convention: conv, probe_state: ProbeInput::Pure(psi) }).unwrap();
        prop_assert!(fast.max_distance(&slow) <= 1e-10);
    }

    #[test]
    fn mixed_inputs_match_brute_force(
        (rho, gamma) in (1usize..=2, 1usize..=5).prop_flat_map(|(a, b)| (random_mixed(a), history(a, b))),
        conv in convention(),
    ) {
        let fast = apply_decoherence(&rho, &gamma, conv).unwrap();
        let slow = full_evolve_and_trace(&FullStateSpec { gamma, convention: conv, probe_state: ProbeInput::Mixed(rho) }).unwrap();
        prop_assert!(fast.max_distance(&slow) <= 1e-10);
    }

    #[test]
    fn gate_order_is_irrelevant(
        (psi, gamma, order) in (1usize..=3, 1usize..=6).prop_flat_map(|(a, b)| {
            let pairs: Vec<(usize, usize)> = (0..a).flat_map(|k| (0..b).map(move |l| (k, l))).collect();
            (random_pure(a), history(a, b), Just(pairs).prop_shuffle())
        }),
        conv in convention(),
    ) {
        let run = |pairs: &[(usize, usize)]| {
            let mut joint = JointState::with_plus_environment(&psi, gamma.n_env()).unwrap();
            for &(k, l) in pairs {
                joint.couple_probe_env(k, l, gamma.get(k, l), conv);
            }
            joint.reduced_probe()
        };
        let mut sorted = order.clone();
        sorted.sort();
        let diff = (run(&sorted) - run(&order)).camax();
        prop_assert!(diff <= 1e-13, "{}", diff);
    }

    #[test]
    fn environment_internal_gates_do_not_matter(
        (psi, gamma, env_phases) in (1usize..=3, 2usize..=6).prop_flat_map(|(a, b)| {
            (random_pure(a), history(a, b), prop::collection::vec(0.0..TAU, b * b))
        }),
        conv in convention(),
    ) {
        let n_b = gamma.n_env();
        let mut plain = JointState::with_plus_environment(&psi, n_b).unwrap();
        let mut tangled = plain.clone();
        for l1 in 0..n_b {
            for l2 in l1 + 1..n_b {
                tangled.couple_env_env(l1, l2, env_phases[l1 * n_b + l2], conv);
            }
        }
        for joint in [&mut plain, &mut tangled] {
            for k in 0..gamma.n_probe() {
                for l in 0..n_b {
                    joint.couple_probe_env(k, l, gamma.get(k, l), conv);
                }
            }
        }
        let diff = (plain.reduced_probe() - tangled.reduced_probe()).camax();
        prop_assert!(diff <= 1e-12, "{}", diff);
    }

    #[test]
    fn map_state_is_completely_positive(
        gamma in (1usize..=3, 1usize..=6).prop_flat_map(|(a, b)| history(a, b)),
        conv in convention(),
    ) {
        let map = build_map_state(&gamma, conv).unwrap();
        prop_assert!(map.choi_eigenvalues().iter().all(|&e| e >= -1e-12));
        let table = map.coherence_table();
        for s in 0..table.nrows() {
            prop_assert!((table[(s, s)] - Complex64::new(1.0, 0.0)).norm() <= 1e-12);
            for sp in 0..table.ncols() {
                prop_assert!(table[(s, sp)].norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn negativity_of_a_split_equals_that_of_its_complement(rho in (2usize..=4).prop_flat_map(random_mixed)) {
        let n = rho.n_qubits();
        let full = (1usize << n) - 1;
        for part in bipartitions(n) {
            let subset_mask: usize = part.subset().iter().map(|&k| 1 << k).sum();
            let direct = negativity(&rho, &part).unwrap();
            let a = negativity_over(&rho, subset_mask);
            let b = negativity_over(&rho, full & !subset_mask);
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((direct - a).abs() <= 1e-12);
        }
    }

    #[test]
    fn negativity_is_local_unitary_invariant(
        (rho, angles) in (2usize..=4).prop_flat_map(|n| (random_mixed(n), prop::collection::vec(0.0..TAU, 3 * n))),
    ) {
        let u = local_unitary(&angles);
        let rotated = DensityMatrix::new(&u * rho.matrix() * u.adjoint()).unwrap();
        let before = negativity_summary(&rho).unwrap();
        let after = negativity_summary(&rotated).unwrap();
        for (mask, v) in &before.per_partition {
            prop_assert!((v - after.per_partition[mask]).abs() <= 1e-10);
        }
    }

    #[test]
    fn product_states_are_not_entangled(psis in (2usize..=4).prop_flat_map(|n| prop::collection::vec(random_pure(1), n))) {
        let rho = psis
            .iter()
            .map(|p| DensityMatrix::from_pure(p).unwrap())
            .reduce(|a, b| a.kron(&b).unwrap())
            .unwrap();
        prop_assert!(negativity_summary(&rho).unwrap().average <= 1e-12);
    }

    #[test]
    fn sparse_hermitian_spectra_reconstruct(
        dim in 2usize..=32,
        entries in prop::collection::vec((0usize..32, 0usize..32, -1.0..1.0f64, -1.0..1.0f64, 0u8..3), 0..40),
    ) {
        // few nonzeros; the ±1 entries produce exact degeneracies
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (i, j, re, im, scale) in entries {
            let (i, j) = (i % dim, j % dim);
            let z = if scale == 0 { Complex64::new(re.signum(), 0.0) } else { Complex64::new(re, im) };
            let z = if i == j { Complex64::new(z.re, 0.0) } else { z };
            m[(i, j)] += z;
            if i != j {
                m[(j, i)] += z.conj();
            }
        }
        let (values, vectors) = hermitian_eigen(&m);
        prop_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        let diag = DMatrix::from_fn(dim, dim, |i, j| Complex64::new(if i == j { values[i] } else { 0.0 }, 0.0));
        let rebuilt = &vectors * diag * vectors.adjoint();
        prop_assert!((rebuilt - &m).camax() < 1e-12);
        let gram = vectors.adjoint() * &vectors - DMatrix::identity(dim, dim);
        prop_assert!(gram.camax() < 1e-12);
    }

    #[test]
    fn dephasing_preserves_the_partition_ordering(
        family in prop_oneof![Just(StateFamily::Ghz), Just(StateFamily::W)],
        n in 3usize..=5,
        p1 in 0.5..1.0f64,
        p2 in 0.5..1.0f64,
    ) {
        let (hi, lo) = if p1 >= p2 { (p1, p2) } else { (p2, p1) };
        let rho0 = make_state(&StateSpec::new(family, n)).unwrap();
        let at = |p: f64| negativity_summary(&product_dephasing_apply(&rho0, &vec![p; n]).unwrap()).unwrap().per_partition;
        let (start, strong, weak) = (at(1.0), at(hi), at(lo));
        for (a, na) in &start {
            prop_assert!(weak[a] <= strong[a] + 1e-12);
            for (b, nb) in &start {
                if na > nb {
                    prop_assert!(strong[a] >= strong[b] - 1e-12);
                    prop_assert!(weak[a] >= weak[b] - 1e-12);
                }
            }
        }
    }
}

#[test]
fn ghz_variants_are_maximally_entangled_across_every_split() {
    for family in [StateFamily::Ghz, StateFamily::GhzPrime, StateFamily::GhzDoublePrime] {
        for n in 2..=6 {
            let rho = make_state(&StateSpec::new(family, n)).unwrap();
            assert!((rho.purity() - 1.0).abs() < 1e-12);
            for (mask, v) in negativity_summary(&rho).unwrap().per_partition {
                assert!((v - 0.5).abs() < 1e-12, "{family} n={n} mask={mask}: {v}");
            }
        }
    }
}

#[test]
fn w_state_single_qubit_marginals_coincide() {
    for n in 2..=6 {
        let rho = make_state(&StateSpec::new(StateFamily::W, n)).unwrap();
        let marginal = |k: usize| {
            let mut m = [[Complex64::new(0.0, 0.0); 2]; 2];
            for s in 0..rho.dim() {
                for sp in 0..rho.dim() {
                    let rest = !(1usize << (n - 1 - k));
                    if s & rest == sp & rest {
                        m[(s >> (n - 1 - k)) & 1][(sp >> (n - 1 - k)) & 1] += rho.get(s, sp);
                    }
                }
            }
            m
        };
        let first = marginal(0);
        assert!((first[1][1].re - 1.0 / n as f64).abs() < 1e-12);
        for k in 1..n {
            let mk = marginal(k);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((mk[i][j] - first[i][j]).norm() < 1e-12);
                }
            }
        }
    }
}
