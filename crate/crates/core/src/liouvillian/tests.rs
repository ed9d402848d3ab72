use super::*;
use crate::config::CoherentWeight;
use crate::couplings::build_couplings;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn literal(n: usize, d: f64, l: usize, rabi: f64) -> ChainConfig {
    ChainConfig::new(n, d, l, rabi).with_weight(CoherentWeight::Single)
}

fn expect(rho: &DensityMatrix, op: &DMatrix<Complex64>) -> Complex64 {
    (rho.matrix() * op).trace()
}

#[test]
fn atom_one_is_the_most_significant_factor() {
    let s1 = lowering(3, 1);
    let s3 = lowering(3, 3);
    // |e g g> = index 0b100 lowers to the ground state
    assert_eq!(s1[(0b000, 0b100)], ONE);
    assert_eq!(s3[(0b000, 0b001)], ONE);
    assert_eq!(s1[(0b000, 0b001)], ZERO);
    assert_eq!(excitation_bit(3, 1), 0b100);
    assert_eq!(excitation_bit(3, 3), 0b001);
    let nonzero = s1.iter().filter(|z| **z != ZERO).count();
    assert_eq!(nonzero, 4);
    assert_eq!(raising(3, 2), lowering(3, 2).adjoint());
}

#[test]
fn single_atom_drive_hamiltonian() {
    let cfg = literal(1, 0.25, 1, 0.02);
    let h = build_hamiltonian(&cfg, &build_couplings(&cfg).unwrap()).unwrap();
    let expected = DMatrix::from_row_slice(2, 2, &[ZERO, ONE * 0.01, ONE * 0.01, ZERO]);
    assert!((h.matrix() - expected).camax() < 1e-15);

    let doubled = build_hamiltonian(
        &cfg.with_weight(CoherentWeight::Double),
        &build_couplings(&cfg).unwrap(),
    )
    .unwrap();
    assert!((doubled.matrix() - h.matrix() * Complex64::from(2.0)).camax() < 1e-15);
}

#[test]
fn two_atom_exchange_spectrum() {
    let cfg = literal(2, 0.25, 1, 0.0);
    let cpl = build_couplings(&cfg).unwrap();
    let h = build_hamiltonian(&cfg, &cpl).unwrap();
    assert!(h.hermiticity_error() < 1e-12);
    let mut ev: Vec<f64> = h
        .matrix()
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    let w12 = 3.0 / (std::f64::consts::PI.powi(2));
    assert!((cpl.omega[(0, 1)] - w12).abs() < 1e-12);
    let expected = [-w12, 0.0, 0.0, w12];
    for (a, b) in ev.iter().zip(expected) {
        assert!((a - b).abs() < 1e-12, "{ev:?}");
    }
}

#[test]
fn hamiltonian_vanishes_without_drive_or_shifts() {
    let cfg = literal(3, 0.3, 2, 0.0);
    let mut cpl = build_couplings(&cfg).unwrap();
    cpl.omega.fill(0.0);
    let h = build_hamiltonian(&cfg, &cpl).unwrap();
    assert_eq!(h.matrix().camax(), 0.0);
}

#[test]
fn hamiltonian_is_hermitian_for_driven_chains() {
    for l in 1..=4 {
        let cfg = ChainConfig::new(4, 0.2, l, 1.3);
        let h = build_hamiltonian(&cfg, &build_couplings(&cfg).unwrap()).unwrap();
        assert!(h.hermiticity_error() < 1e-12);
    }
}

#[test]
fn generator_preserves_trace_on_every_basis_element() {
    for cfg in [
        ChainConfig::new(2, 0.25, 1, 0.7),
        ChainConfig::new(3, 0.4, 2, 0.02),
    ] {
        let (_, _, l) = generator_for(&cfg).unwrap();
        let d = l.hilbert_dim();
        for col in 0..d * d {
            let t: Complex64 = (0..d).map(|a| l.matrix()[(a * d + a, col)]).sum();
            assert!(t.norm() < 1e-13);
        }
    }
}

#[test]
fn generator_preserves_trace_and_hermiticity_of_random_states() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = ChainConfig::new(3, 0.25, 1, 0.5);
    let (_, _, l) = generator_for(&cfg).unwrap();
    let d = l.hilbert_dim();
    for _ in 0..10 {
        let a = DMatrix::from_fn(d, d, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let rho = &a + a.adjoint();
        let out = l.apply(&rho);
        assert!(out.trace().norm() < 1e-12);
        assert!((&out - out.adjoint()).camax() < 1e-12);
    }
}

#[test]
fn generator_commutes_with_adjoint_on_basis() {
    let cfg = ChainConfig::new(2, 0.3, 2, 0.4);
    let (_, _, l) = generator_for(&cfg).unwrap();
    let d = l.hilbert_dim();
    for a in 0..d {
        for b in 0..d {
            let mut e = DMatrix::<Complex64>::zeros(d, d);
            e[(a, b)] = ONE;
            let lhs = l.apply(&e.adjoint()).adjoint();
            let rhs = l.apply(&e);
            assert!((lhs - rhs).camax() < 1e-14);
        }
    }
}

#[test]
fn single_atom_decays_at_gamma() {
    let cfg = literal(1, 0.25, 1, 0.0);
    let (_, _, l) = generator_for(&cfg).unwrap();
    let excited = DensityMatrix::basis_state(1, 1);
    let rate = l.apply(excited.matrix())[(1, 1)];
    assert_relative_eq!(rate.re, -1.0, max_relative = 1e-14);
    let ss = steady_state(&l).unwrap();
    assert!(ss.rho.max_abs_diff(&DensityMatrix::ground(1)) < 1e-14);
    assert_eq!(ss.kernel_dimension, 1);
}

#[test]
fn two_atom_super_and_subradiant_rates() {
    let cfg = literal(2, 0.25, 1, 0.0);
    let (cpl, _, l) = generator_for(&cfg).unwrap();
    let g12 = cpl.gamma[(0, 1)];
    // one-excitation states |eg> = index 2, |ge> = index 1
    let mut sym = DVector::<Complex64>::zeros(4);
    sym[1] = Complex64::from(FRAC_1_SQRT_2);
    sym[2] = Complex64::from(FRAC_1_SQRT_2);
    let mut anti = sym.clone();
    anti[1] = -anti[1];
    for (state, expected) in [(sym, 1.0 + g12), (anti, 1.0 - g12)] {
        let rho = DensityMatrix::pure(&state);
        let out = l.apply(rho.matrix());
        let rate = (state.adjoint() * out * &state)[(0, 0)];
        assert_relative_eq!(-rate.re, expected, max_relative = 1e-12);
    }
    assert!((1.0 + g12 - 1.56791).abs() < 1e-5);
    assert!((1.0 - g12 - 0.43209).abs() < 1e-5);
    // both rates are also eigenvalues of the generator
    let ev = l.hermitian_representation().complex_eigenvalues();
    for expected in [1.0 + g12, 1.0 - g12] {
        assert!(ev
            .iter()
            .any(|z| (z.re + expected).abs() < 1e-9 && z.im.abs() < 1e-9));
    }
}

#[test]
fn spectrum_is_dissipative() {
    for cfg in [
        ChainConfig::new(1, 0.25, 1, 0.3),
        ChainConfig::new(2, 0.1, 2, 2.0),
        ChainConfig::new(3, 0.25, 1, 0.02),
        ChainConfig::new(3, 0.6, 2, 5.0),
    ] {
        let (_, _, l) = generator_for(&cfg).unwrap();
        let ev = l.hermitian_representation().complex_eigenvalues();
        let max_re = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        assert!(max_re <= 1e-10, "{cfg:?}: {max_re}");
    }
}

#[test]
fn hermitian_coordinates_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 8;
    let a = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let h = &a + a.adjoint();
    let back = from_hermitian_coordinates(&hermitian_coordinates(&h), d);
    assert!((back - &h).camax() < 1e-15);
    // the basis is orthonormal: Frobenius norms agree
    assert_relative_eq!(
        hermitian_coordinates(&h).norm(),
        h.norm(),
        max_relative = 1e-14
    );
}

#[test]
fn undriven_chains_relax_to_ground() {
    for n in 1..=4 {
        let (_, _, l) = generator_for(&ChainConfig::new(n, 0.25, 1, 0.0)).unwrap();
        let ss = steady_state(&l).unwrap();
        assert!(
            ss.rho.max_abs_diff(&DensityMatrix::ground(n)) < 1e-13,
            "n = {n}"
        );
    }
}

#[test]
fn single_atom_bloch_steady_state() {
    for (weight, drive) in [
        (CoherentWeight::Single, 0.02),
        (CoherentWeight::Double, 0.04),
    ] {
        let cfg = ChainConfig::new(1, 0.25, 1, 0.02).with_weight(weight);
        let (_, _, l) = generator_for(&cfg).unwrap();
        let ss = steady_state(&l).unwrap();
        let pop = ss.rho.matrix()[(1, 1)].re;
        let expected = (drive * drive / 4.0) / (drive * drive / 2.0 + 0.25);
        assert_relative_eq!(pop, expected, max_relative = 1e-12);
    }
    let cfg = literal(1, 0.25, 1, 0.02);
    let pop = steady_state(&generator_for(&cfg).unwrap().2)
        .unwrap()
        .rho
        .matrix()[(1, 1)]
        .re;
    assert!((pop - 3.997e-4).abs() < 2e-7);
}

#[test]
fn two_atom_reference_coherence() {
    let cfg = ChainConfig::new(2, 0.25, 1, 0.02);
    let (_, _, l) = generator_for(&cfg).unwrap();
    let ss = steady_state(&l).unwrap();
    let c12 = expect(&ss.rho, &(raising(2, 1) * lowering(2, 2)));
    assert!((c12.re / -1.34e-4 - 1.0).abs() < 0.1, "{c12}");
    assert!((c12.im / -2.97e-4 - 1.0).abs() < 0.1, "{c12}");
}

#[test]
fn steady_state_satisfies_state_invariants() {
    let cfg = ChainConfig::new(3, 0.25, 2, 0.02);
    let ss = steady_state(&generator_for(&cfg).unwrap().2).unwrap();
    let c = ss.rho.checks();
    assert!(c.passes(1e-12, 1e-12, -1e-10), "{c:?}");
    assert!(ss.residual <= RESIDUAL_TOLERANCE);
}

#[test]
fn degenerate_kernel_is_reported() {
    // gamma_12 = 1 leaves the antisymmetric state perfectly dark
    let cpl = CouplingMatrices {
        gamma: DMatrix::from_element(2, 2, 1.0),
        omega: DMatrix::zeros(2, 2),
    };
    let h = Hamiltonian(DMatrix::zeros(4, 4));
    let l = build_generator(&h, &cpl);
    match steady_state(&l) {
        Err(Error::DegenerateKernel { dimension }) => assert!(dimension >= 2),
        other => panic!("expected degenerate kernel, got {other:?}"),
    }
}

#[test]
fn mirrored_drive_mirrors_the_state() {
    for n in [2, 3, 4] {
        let cfg = ChainConfig::new(n, 0.25, 1, 0.02);
        let left = steady_state(&generator_for(&cfg).unwrap().2).unwrap().rho;
        let right = steady_state(&generator_for(&cfg.mirrored()).unwrap().2)
            .unwrap()
            .rho;
        assert!(left.mirrored().max_abs_diff(&right) < 1e-13, "n = {n}");
    }
}

#[test]
fn ground_is_a_fixed_point_without_drive() {
    let (_, _, l) = generator_for(&ChainConfig::new(2, 0.3, 1, 0.0)).unwrap();
    let out = evolve(&DensityMatrix::ground(2), &l, 3.0, DEFAULT_DT).unwrap();
    assert_eq!(out.max_abs_diff(&DensityMatrix::ground(2)), 0.0);
}

#[test]
fn excited_atom_decays_exponentially() {
    let (_, _, l) = generator_for(&literal(1, 0.25, 1, 0.0)).unwrap();
    let out = evolve(&DensityMatrix::basis_state(1, 1), &l, 1.0, DEFAULT_DT).unwrap();
    assert!((out.matrix()[(1, 1)].re - (-1.0f64).exp()).abs() < 1e-6);
}

#[test]
fn steady_state_is_a_fixed_point_of_evolution() {
    let (_, _, l) = generator_for(&ChainConfig::new(3, 0.25, 1, 0.02)).unwrap();
    let ss = steady_state(&l).unwrap().rho;
    let out = evolve(&ss, &l, 10.0, DEFAULT_DT).unwrap();
    assert!(out.max_abs_diff(&ss) <= 1e-8);
    let c = out.checks();
    assert!(c.passes(1e-8, 1e-8, -1e-8), "{c:?}");
}

#[test]
fn evolution_from_ground_reaches_steady_state() {
    // The slowest subradiant mode of this chain relaxes at ~0.08 gamma, so
    // agreement at 1e-6 needs a few hundred decay times.
    let (_, _, l) = generator_for(&ChainConfig::new(3, 0.25, 1, 0.02)).unwrap();
    let ss = steady_state(&l).unwrap().rho;
    let out = evolve(&DensityMatrix::ground(3), &l, 400.0, DEFAULT_DT).unwrap();
    assert!(out.max_abs_diff(&ss) <= 1e-6, "{}", out.max_abs_diff(&ss));
}

#[test]
fn evolve_rejects_bad_steps_and_detects_blow_up() {
    let (_, _, l) = generator_for(&ChainConfig::new(2, 0.25, 1, 1.0)).unwrap();
    let g = DensityMatrix::ground(2);
    assert!(matches!(
        evolve(&g, &l, 0.0, 0.01),
        Err(Error::InvalidTimeStep { .. })
    ));
    assert!(matches!(
        evolve(&g, &l, 1.0, -0.1),
        Err(Error::InvalidTimeStep { .. })
    ));
    assert!(matches!(
        evolve(&g, &l, 5000.0, 50.0),
        Err(Error::UnstableIntegration { .. })
    ));
}

#[test]
fn text_dump_round_trips() {
    let ss = steady_state(
        &generator_for(&ChainConfig::new(2, 0.25, 1, 0.02))
            .unwrap()
            .2,
    )
    .unwrap()
    .rho;
    let text = ss.to_text();
    assert!(text.starts_with("# dim 4\n"));
    assert_eq!(text.lines().count(), 5);
    let back = DensityMatrix::from_text(&text).unwrap();
    assert_eq!(back, ss);
    assert!(DensityMatrix::from_text("1,0 0,0\n").is_err());
}
