use feedsim::compiler::{compile, pauli_rotation, pauli_rotation_operator, schedule_parallel, InteractionGraph};
use feedsim::emission::BeamSplitterOutcome;
use feedsim::feedback::{realize_v, realize_v_kl};
use feedsim::pauli::{conjugation_unitary, frame_conjugate_direction};
use feedsim::statevec::{computational_projectors, exact_evolution, fidelity, hermitian_exp, rank_one_projector};
use feedsim::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn axis(i: u8) -> PauliAxis {
    [PauliAxis::I, PauliAxis::X, PauliAxis::Y, PauliAxis::Z][i as usize % 4]
}

fn pauli_strategy(n: usize) -> impl Strategy<Value = PauliString> {
    (prop::collection::vec(0u8..4, n), 0u8..4)
        .prop_map(|(axes, ph)| PauliString::new(axes.into_iter().map(axis).collect(), ph))
}

fn all_paulis(n: usize) -> Vec<PauliString> {
    (0..4usize.pow(n as u32))
        .map(|mut code| {
            let axes = (0..n)
                .map(|_| {
                    let a = axis((code % 4) as u8);
                    code /= 4;
                    a
                })
                .collect();
            PauliString::new(axes, 0)
        })
        .collect()
}

fn random_unitary(dim: usize, rng: &mut ChaCha8Rng) -> DenseOperator {
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for r in 0..dim {
        for c in 0..=r {
            let z = Complex64::new(
                rng.random::<f64>() - 0.5,
                if r == c { 0.0 } else { rng.random::<f64>() - 0.5 },
            );
            m[(r, c)] = z;
            m[(c, r)] = z.conj();
        }
    }
    hermitian_exp(m, 3.0)
}

fn random_hamiltonian(n: usize, terms: usize, rng: &mut ChaCha8Rng) -> HamiltonianSpec {
    let nontrivial = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];
    let terms = (0..terms)
        .map(|_| {
            let a = rng.random_range(0..n);
            let b = (a + rng.random_range(1..n)) % n;
            let k = nontrivial[rng.random_range(0..3)];
            let l = nontrivial[rng.random_range(0..3)];
            PairTerm::new((a, b), (k, l), rng.random_range(-1.0..1.0))
        })
        .collect();
    HamiltonianSpec::new(n, terms).unwrap()
}

#[test]
fn commutes_matches_dense_exhaustively() {
    for n in 1..=3 {
        let all = all_paulis(n);
        let dense: Vec<DenseOperator> = all.iter().map(PauliString::to_dense).collect();
        for (p, dp) in all.iter().zip(&dense) {
            for (q, dq) in all.iter().zip(&dense) {
                let comm = dp.mul(dq).max_abs_diff(&dq.mul(dp)) < 1e-12;
                assert_eq!(p.commutes(q).unwrap(), comm, "{p} {q}");
            }
        }
    }
}

#[test]
fn conjugation_maps_x_to_axis() {
    let x = PauliAxis::X.matrix();
    for k in PauliAxis::NON_TRIVIAL {
        let u = conjugation_unitary(k).unwrap();
        let xd = DenseOperator::from_rows(2, &[x[0][0], x[0][1], x[1][0], x[1][1]]).unwrap();
        let conj = u.mul(&xd).mul(&u.adjoint());
        let target = PauliString::single(1, 0, k).to_dense();
        assert!(conj.max_abs_diff(&target) <= 1e-12, "{k:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn multiplication_is_associative(p in pauli_strategy(3), q in pauli_strategy(3), r in pauli_strategy(3)) {
        let left = p.multiply(&q).unwrap().multiply(&r).unwrap();
        let right = p.multiply(&q.multiply(&r).unwrap()).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn squares_are_real_identity(p in pauli_strategy(4)) {
        let sq = p.multiply(&p).unwrap();
        prop_assert!(sq.is_identity_up_to_phase());
        prop_assert!(sq.phase_power() == 0 || sq.phase_power() == 2);
    }

    #[test]
    fn multiply_agrees_with_dense(p in pauli_strategy(2), q in pauli_strategy(2)) {
        let prod = p.multiply(&q).unwrap().to_dense();
        prop_assert!(prod.max_abs_diff(&p.to_dense().mul(&q.to_dense())) < 1e-12);
    }

    #[test]
    fn frame_direction_is_conjugation_sign(f in pauli_strategy(2), t in pauli_strategy(2), theta in -3.0f64..3.0) {
        prop_assume!(!t.is_identity_up_to_phase());
        let t = t.without_phase();
        let frame = ErrorFrame::from_pauli(f.clone());
        let s = frame_conjugate_direction(&frame, &t).unwrap() as f64;
        let fd = f.to_dense();
        let lhs = fd.mul(&pauli_rotation_operator(&t, theta));
        let rhs = pauli_rotation_operator(&t, s * theta).mul(&fd);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn operations_preserve_norm(seed in any::<u64>(), ops in prop::collection::vec(0u8..3, 1..25)) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = StateVector::random_data(RegisterLayout::data_only(4), &mut rng);
        for op in ops {
            let q0 = rng.random_range(0..4);
            let q1 = (q0 + rng.random_range(1..4)) % 4;
            match op {
                0 => s.apply_local(q0, &random_unitary(2, &mut rng)).unwrap(),
                1 => s.apply_two_qubit((q0, q1), &random_unitary(4, &mut rng)).unwrap(),
                _ => {
                    s.measure_computational(q0, &mut rng).unwrap();
                }
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn outcome_probabilities_sum_to_one(seed in any::<u64>(), q0 in 0usize..4, q1 in 0usize..4) {
        prop_assume!(q0 != q1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = StateVector::random_data(RegisterLayout::data_only(4), &mut rng);
        let p: f64 = s.outcome_probabilities(&[q0, q1], &computational_projectors(2)).unwrap().iter().sum();
        prop_assert!((p - 1.0).abs() <= 1e-10);
        let bell: Vec<DenseOperator> = BeamSplitterOutcome::ALL.iter().map(|o| rank_one_projector(&o.vector())).collect();
        let p: f64 = s.outcome_probabilities(&[q0, q1], &bell).unwrap().iter().sum();
        prop_assert!((p - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn two_qubit_product_equals_locals(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_unitary(2, &mut rng);
        let b = random_unitary(2, &mut rng);
        let s0 = StateVector::random_data(RegisterLayout::data_only(3), &mut rng);
        let mut joint = s0.clone();
        joint.apply_two_qubit((2, 0), &a.tensor(&b)).unwrap();
        let mut local = s0;
        local.apply_local(2, &a).unwrap();
        local.apply_local(0, &b).unwrap();
        let diff = joint.amplitudes().iter().zip(local.amplitudes()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(diff <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evolution_composes(seed in any::<u64>(), n in 2usize..=4, s in -1.0f64..1.0, t in -1.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hamiltonian(n, 3, &mut rng);
        let composed = exact_evolution(&h, s).unwrap().mul(&exact_evolution(&h, t).unwrap());
        prop_assert!(composed.max_abs_diff(&exact_evolution(&h, s + t).unwrap()) <= 1e-8);
    }

    #[test]
    fn realize_v_is_exact_on_embedded_states(seed in any::<u64>(), n in 2usize..=4, t in -1.5f64..1.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.random_range(0..n);
        let b = (a + rng.random_range(1..n)) % n;
        let mut s = StateVector::random_data(RegisterLayout::protocol(n, false), &mut rng);
        let before = s.data_state().unwrap();
        let mut frame = ErrorFrame::identity(n);
        realize_v(&mut s, (a, b), t, &EpsilonPolicy::default(), &mut frame, &mut rng).unwrap();
        let xx = PauliString::two_site(n, (a, b), (PauliAxis::X, PauliAxis::X));
        let oracle = pauli_rotation(&before, &xx, t).unwrap();
        let mut out = s.data_state().unwrap();
        out.apply_pauli(&frame.byproduct).unwrap();
        prop_assert!(fidelity(&out, &oracle).unwrap() >= 1.0 - 1e-9);
        for (q, ax) in frame.byproduct.axes().iter().enumerate() {
            prop_assert!(*ax == PauliAxis::I || ((q == a || q == b) && *ax == PauliAxis::X));
        }
    }

    #[test]
    fn realize_v_kl_frame_stays_on_dressed_axes(seed in any::<u64>(), k in 1u8..4, l in 1u8..4, t in -1.5f64..1.5) {
        let (k, l) = (axis(k), axis(l));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = StateVector::random_data(RegisterLayout::protocol(2, false), &mut rng);
        let before = s.data_state().unwrap();
        let mut frame = ErrorFrame::identity(2);
        realize_v_kl(&mut s, (0, 1), k, l, t, &EpsilonPolicy::default(), &mut frame, &mut rng).unwrap();
        let p = PauliString::two_site(2, (0, 1), (k, l));
        let mut out = s.data_state().unwrap();
        out.apply_pauli(&frame.byproduct).unwrap();
        prop_assert!(fidelity(&out, &pauli_rotation(&before, &p, t).unwrap()).unwrap() >= 1.0 - 1e-9);
        prop_assert!([PauliAxis::I, k].contains(&frame.byproduct.axis(0)));
        prop_assert!([PauliAxis::I, l].contains(&frame.byproduct.axis(1)));
    }

    #[test]
    fn plans_are_valid(seed in any::<u64>(), n in 2usize..=5, terms in 0usize..6, steps in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hamiltonian(n, terms, &mut rng);
        let plan = compile(&h, 0.7, steps).unwrap();
        prop_assert!(plan.validate(&h).is_ok());
        prop_assert_eq!(plan.rotation_count(), terms * steps);
        let chain = HamiltonianSpec::chain(n, &[(PauliAxis::X, PauliAxis::X, 1.0)]);
        let layered = schedule_parallel(&compile(&chain, 0.7, steps).unwrap(), &InteractionGraph::path(n)).unwrap();
        prop_assert!(layered.validate(&chain).is_ok());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn first_order_convergence(seed in any::<u64>(), terms in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hamiltonian(3, terms, &mut rng);
        let exact = exact_evolution(&h, 0.5).unwrap();
        let err = |n| compile(&h, 0.5, n).unwrap().noiseless_unitary().operator_norm_diff(&exact);
        let (e8, e16, e32) = (err(8), err(16), err(32));
        prop_assume!(e8 > 1e-9);
        prop_assert!((1.5..=2.5).contains(&(e8 / e16)), "{e8} {e16}");
        prop_assert!((1.5..=2.5).contains(&(e16 / e32)), "{e16} {e32}");
    }

    #[test]
    fn layered_and_serial_both_converge(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let per_bond = [
            (PauliAxis::X, PauliAxis::X, rng.random_range(-1.0..1.0)),
            (PauliAxis::Z, PauliAxis::Y, rng.random_range(-1.0..1.0)),
        ];
        let h = HamiltonianSpec::chain(4, &per_bond);
        let exact = exact_evolution(&h, 0.5).unwrap();
        let psi = StateVector::random_data(RegisterLayout::data_only(4), &mut rng);
        let target = exact.apply(&psi).unwrap();
        let infid = |n, layered: bool| {
            let mut plan = compile(&h, 0.5, n).unwrap();
            if layered {
                plan = schedule_parallel(&plan, &InteractionGraph::path(4)).unwrap();
            }
            1.0 - fidelity(&plan.apply_noiseless(&psi).unwrap(), &target).unwrap()
        };
        for layered in [false, true] {
            prop_assert!(infid(32, layered) <= infid(4, layered) + 1e-12);
            prop_assert!(infid(32, layered) < 1e-3);
        }
    }
}
