mod common;

use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use pst_core::dynamics::{
    evolve, occupation_probabilities, subspace_leakage, trace_probabilities, transfer_fidelity, uniform_grid,
    StateVector, TimeSeries, TraceTargets,
};
use pst_core::fock_basis::{Basis, BasisSpec, DoubleOccupancy, Statistics};
use pst_core::inverse_design::{chain_problem, ObjectiveKind, DEFAULT_SEED};
use pst_core::lattice_model::{
    apply_centrosymmetry, build_hamiltonian, commutator_residual, decoupling_margin, nn_pst_chain, ModelParams,
    ANY_LABEL,
};
use pst_core::permutation_targets::mirror_permutation;
use pst_core::presets;
use pst_core::spectral_synthesis::HermitianOperator;

fn less_block(m: usize) -> (Basis, Vec<usize>) {
    let b = Basis::new(BasisSpec::distinguishable(m, &["mu", "nu"]).hard_core()).unwrap();
    let less = b.partition(("mu", "nu")).unwrap().less;
    (b, less)
}

fn local(basis: &Basis, block: &[usize], ket: &str) -> usize {
    let g = basis.parse_state(ket).unwrap();
    block.iter().position(|&x| x == g).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> StateVector {
    StateVector::normalized((0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matrix_elements_match_ladder_oracle(seed in any::<u64>(), m in 1usize..=4, kind in 0usize..5) {
        let spec = match kind {
            0 => BasisSpec::new(m, 2, &["mu"]),
            1 => BasisSpec::new(m, 2, &["mu", "nu"]).with_statistics(Statistics::Fermion),
            2 => BasisSpec::distinguishable(m, &["mu", "nu"]),
            3 => BasisSpec::new(m, 2, &["mu", "nu"]),
            _ => BasisSpec::new(m, 2, &["mu", "nu"]).with_double_occupancy(DoubleOccupancy::Forbidden),
        };
        let Ok(basis) = Basis::new(spec.clone()) else { return Ok(()) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::new(m, 1.0);
        for s in 1..=m {
            for l in &spec.labels {
                p.set_epsilon(s, l, rng.gen_range(-2.0..2.0));
            }
        }
        for i in 1..=m {
            for k in i..=m {
                for a in &spec.labels {
                    for b in &spec.labels {
                        p.set_interaction(i, k, a, b, rng.gen_range(-3.0..3.0));
                    }
                }
                if k > i {
                    p.set_coupling(i, k, rng.gen_range(-2.0..2.0));
                }
            }
        }
        let h = build_hamiltonian(&p, &basis, None).unwrap();
        prop_assert!(h.matrix().hermiticity_defect() < 1e-12);
        let o = common::second_quantization_oracle(&p, &basis);
        prop_assert!(h.matrix().sub(&o).max_abs() < 1e-12);
        for s in basis.states() {
            prop_assert_eq!(s.total(), 2);
        }
    }

    #[test]
    fn centrosymmetric_models_commute_with_the_mirror(
        m in 2usize..=7,
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = ModelParams::new(m, 1.0);
        for i in 1..=m {
            for k in (i + 1)..=m {
                if i + k <= m + 1 {
                    p.set_coupling(i, k, rng.gen_range(-3.0..3.0));
                }
            }
        }
        let w = rng.gen_range(0.0..1.0);
        let sym = apply_centrosymmetry(&p).unwrap().with_nn_interaction(w);
        let (basis, less) = less_block(m);
        let h = build_hamiltonian(&sym, &basis, Some(&less)).unwrap();
        let target = mirror_permutation(&basis, &less).unwrap();
        prop_assert!(commutator_residual(&h, &target).unwrap() < 1e-10);
    }

    #[test]
    fn evolution_invariants(seed in any::<u64>(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (basis, less) = less_block(5);
        let mut p = ModelParams::new(5, 1.0).with_nn_interaction(rng.gen_range(0.0..1.0));
        for i in 1..5 {
            p.set_coupling(i, i + 1, rng.gen_range(0.5..4.0));
        }
        p.set_coupling(1, 3, rng.gen_range(0.0..1.0));
        let h = build_hamiltonian(&p, &basis, Some(&less)).unwrap();
        let psi0 = random_state(&mut rng, less.len());

        let a = evolve(&h, &psi0, t1).unwrap();
        prop_assert!((a.norm() - 1.0).abs() < 1e-10);
        let ab = evolve(&h, &a, t2).unwrap();
        let direct = evolve(&h, &psi0, t1 + t2).unwrap();
        let diff = ab.amplitudes().iter().zip(direct.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff < 1e-9);

        let energy = |s: &StateVector| {
            let hv = h.matrix().matvec(s.amplitudes());
            pst_core::linalg::inner(s.amplitudes(), &hv).re
        };
        prop_assert!((energy(&psi0) - energy(&a)).abs() < 1e-9);

        let occ = occupation_probabilities(&a, &basis, &less).unwrap();
        prop_assert!((occ.iter().sum::<f64>() - 2.0).abs() < 1e-9);
        prop_assert!(occ.iter().all(|&x| (-1e-9..=1.0 + 1e-9).contains(&x)));
    }
}

#[test]
fn nn_chain_spectrum_is_equally_spaced() {
    for m in 2..=8 {
        let p = nn_pst_chain(m, 0.7).unwrap();
        let basis = Basis::new(BasisSpec::new(m, 1, &["mu"])).unwrap();
        let h = build_hamiltonian(&p, &basis, None).unwrap();
        let e = h.eigenvalues().unwrap();
        for w in e.windows(2) {
            assert!((w[1] - w[0] - PI / 0.7).abs() < 1e-9);
        }
    }
}

#[test]
fn nn_chain_transfers_one_and_two_excitations() {
    let p = nn_pst_chain(5, 1.0).unwrap();
    let single = Basis::new(BasisSpec::new(5, 1, &["mu"])).unwrap();
    let h1 = build_hamiltonian(&p, &single, None).unwrap();
    let f = transfer_fidelity(&h1, &StateVector::basis_state(5, 0).unwrap(), &StateVector::basis_state(5, 4).unwrap(), 1.0)
        .unwrap();
    assert!(f > 1.0 - 1e-9);

    let (basis, less) = less_block(5);
    let h2 = build_hamiltonian(&p, &basis, Some(&less)).unwrap();
    let from = local(&basis, &less, "1,mu;2,nu");
    let to = local(&basis, &less, "4,mu;5,nu");
    let f = transfer_fidelity(&h2, &StateVector::basis_state(10, from).unwrap(), &StateVector::basis_state(10, to).unwrap(), 1.0)
        .unwrap();
    assert!(f > 1.0 - 1e-9);
    let u1 = h1.propagator(1.0).unwrap();
    let amp = common::ordered_pair_amplitude(&u1, (1, 2), (4, 5));
    let u2 = h2.propagator(1.0).unwrap();
    assert!((amp - u2[(to, from)]).norm() < 1e-12);
}

#[test]
fn published_first_row_traces() {
    let row = presets::chain_table().unwrap().rows[0];
    let (basis, less) = less_block(5);
    let p = chain_problem(ObjectiveKind::PropagatorMatch, 1, DEFAULT_SEED).unwrap();
    let h = p.hamiltonian(&[row.w, row.j12, row.j23]).unwrap();
    for (from, to) in [("1,mu;2,nu", "4,mu;5,nu"), ("1,mu;4,nu", "2,mu;5,nu")] {
        let f = transfer_fidelity(
            &h,
            &StateVector::basis_state(10, local(&basis, &less, from)).unwrap(),
            &StateVector::basis_state(10, local(&basis, &less, to)).unwrap(),
            1.0,
        )
        .unwrap();
        assert!(f >= 0.999, "{from} -> {to}: {f}");
    }
}

#[test]
fn occupation_trace_is_deterministic_csv() {
    let (basis, less) = less_block(5);
    let h = build_hamiltonian(&nn_pst_chain(5, 1.0).unwrap(), &basis, Some(&less)).unwrap();
    let psi0 = StateVector::basis_state(10, 0).unwrap();
    let grid = uniform_grid(1.0, 11).unwrap();
    let targets = TraceTargets::Sites { basis: &basis, block: &less };
    let a = trace_probabilities(&h, &psi0, &targets, &grid).unwrap();
    let b = trace_probabilities(&h, &psi0, &targets, &grid).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
    let csv = a.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,site1,site2,site3,site4,site5");
    assert_eq!(lines.next().unwrap(), "0,1,1,0,0,0");
    assert_eq!(csv.lines().count(), 12);
    for k in 0..grid.len() {
        assert!((a.row(k).iter().sum::<f64>() - 2.0).abs() < 1e-9);
    }
    let back: TimeSeries = serde_json::from_str(&a.to_json()).unwrap();
    assert_eq!(back, a);
}

#[test]
fn leakage_examples() {
    let basis = Basis::new(BasisSpec::distinguishable(5, &["mu", "nu"])).unwrap();
    let less = basis.partition(("mu", "nu")).unwrap().less;
    let psi0 = StateVector::basis_state(basis.len(), basis.parse_state("1,mu;2,nu").unwrap()).unwrap();
    let grid = uniform_grid(1.0, 201).unwrap();
    let run = |u: f64| {
        let mut p = nn_pst_chain(5, 1.0).unwrap();
        p.set_interaction(1, 1, ANY_LABEL, ANY_LABEL, 0.0);
        for s in 1..=5 {
            p.set_interaction(s, s, "mu", "nu", u);
        }
        let h = build_hamiltonian(&p, &basis, None).unwrap();
        let margin = decoupling_margin(&p, &basis, 0.1).unwrap();
        let ts = subspace_leakage(&h, &psi0, &less, &grid).unwrap();
        (ts.values[0].iter().copied().fold(0.0, f64::max), margin)
    };
    let jmax = PI / 2.0 * 6f64.sqrt();
    let (strong, margin) = run(100.0 * jmax);
    assert!(strong <= 0.05, "{strong}");
    assert!(margin.ok);
    let (free, margin) = run(0.0);
    assert!(free > 0.1);
    assert!(margin.ratio.is_infinite() && !margin.ok);

    let outside = StateVector::basis_state(basis.len(), basis.parse_state("2,mu;1,nu").unwrap()).unwrap();
    let h = HermitianOperator::zeros(basis.len());
    assert!(subspace_leakage(&h, &outside, &less, &grid).is_err());
}

#[test]
fn not_normalized_input_is_rejected() {
    let h = HermitianOperator::zeros(2);
    let v: Result<StateVector, _> = serde_json::from_str("[[1.0, 0.0], [0.5, 0.0]]");
    assert!(v.is_err());
    let good: StateVector = serde_json::from_str("[[0.6, 0.0], [0.0, 0.8]]").unwrap();
    assert!(evolve(&h, &good, 1.0).is_ok());
}
