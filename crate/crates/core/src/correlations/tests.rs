use super::*;
use crate::liouvillian::{generator_for, lowering, raising, steady_state};
use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::TAU;

fn random_state(n: usize, seed: u64) -> DensityMatrix {
    let d = 1 << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(d, d, |_, _| {
        Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    DensityMatrix::from_matrix(rho / tr)
}

fn stationary(cfg: &ChainConfig) -> AtomicCorrelations {
    let (_, _, generator) = generator_for(cfg).unwrap();
    expectations(&steady_state(&generator).unwrap().rho)
}

fn trace_with(rho: &DensityMatrix, op: &DMatrix<Complex64>) -> Complex64 {
    (rho.matrix() * op).trace()
}

#[test]
fn expectations_match_operator_traces() {
    for n in 1..=3 {
        let rho = random_state(n, 7 + n as u64);
        let corr = expectations(&rho);
        for i in 1..=n {
            for j in 1..=n {
                let op = raising(n, i) * lowering(n, j);
                assert!((corr.first(i, j) - trace_with(&rho, &op)).norm() < 1e-14);
                for k in 1..=n {
                    for l in 1..=n {
                        let op = raising(n, i) * raising(n, j) * lowering(n, k) * lowering(n, l);
                        let expected = trace_with(&rho, &op);
                        assert!(
                            (corr.second(i, j, k, l) - expected).norm() < 1e-14,
                            "{i}{j}{k}{l}"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn two_atom_reference_coherence() {
    let corr = stationary(&ChainConfig::new(2, 0.25, 1, 0.02));
    let c = corr.first(1, 2);
    assert_relative_eq!(c.re, -1.386e-4, max_relative = 0.01);
    assert_relative_eq!(c.im, -2.967e-4, max_relative = 0.01);
    let p = pair_coherence(&corr, 1, 2).unwrap();
    assert!((p.psi / PI + 0.639).abs() < 2e-3, "psi/pi = {}", p.psi / PI);
    assert!(p.defined && p.v > 0.0 && p.v <= 1.0 + 1e-12);
}

#[test]
fn two_atom_first_order_closed_form() {
    let cfg = ChainConfig::new(2, 0.25, 1, 0.02);
    let corr = stationary(&cfg);
    let p = pair_coherence(&corr, 1, 2).unwrap();
    let total = corr.population(1) + corr.population(2);
    for k in 0..720 {
        let theta = 2.0 * PI * k as f64 / 720.0;
        let kd = WAVE_NUMBER * cfg.spacing_over_lambda * theta.cos();
        let closed = total * (1.0 + p.v * (kd - p.psi).cos());
        let got = g1_angular(&corr, &cfg, theta).unwrap();
        assert!((got - closed).abs() <= 1e-10 * total, "theta {theta}");
    }
}

#[test]
fn two_atom_second_order_closed_form() {
    let cfg = ChainConfig::new(2, 0.25, 1, 0.02);
    let corr = stationary(&cfg);
    let g = corr.second(1, 2, 1, 2).re;
    for k in 0..720 {
        let t1 = 2.0 * PI * k as f64 / 720.0;
        let t2 = 2.0 * PI * ((k * 7) % 720) as f64 / 720.0;
        let kd = WAVE_NUMBER * cfg.spacing_over_lambda;
        let closed = 2.0 * g * (1.0 + (kd * (t1.cos() - t2.cos())).cos());
        let got = g2_angular(&corr, &cfg, t1, t2).unwrap();
        assert!((got - closed).abs() <= 1e-10 * 4.0 * g.abs());
    }
}

#[test]
fn pairwise_first_order_form_for_three_atoms() {
    let cfg = ChainConfig::new(3, 0.25, 1, 0.02);
    let corr = stationary(&cfg);
    let scale: f64 = (1..=3).map(|i| corr.population(i)).sum();
    for k in 0..720 {
        let theta = 2.0 * PI * k as f64 / 720.0;
        let mut closed = scale;
        for i in 1..=3 {
            for j in (i + 1)..=3 {
                let c = corr.first(i, j);
                let offset = cfg.atom_position(j) - cfg.atom_position(i);
                closed += 2.0
                    * c.norm()
                    * (WAVE_NUMBER * offset * theta.cos() - coherence_phase(c)).cos();
            }
        }
        let got = g1_angular(&corr, &cfg, theta).unwrap();
        assert!((got - closed).abs() <= 1e-10 * scale);
    }
}

#[test]
fn three_atom_pair_decomposition_reproduces_g2() {
    for l in 1..=3 {
        let cfg = ChainConfig::new(3, 0.25, l, 0.02);
        let corr = stationary(&cfg);
        let coh = second_order_coherences(&corr, &cfg);
        let terms = coh.sigma.expect("three atoms");
        let scale: f64 = terms.iter().map(|t| t.weight).sum();
        for k in 0..720 {
            let theta = 2.0 * PI * k as f64 / 720.0;
            let sum: f64 = terms
                .iter()
                .map(|t| {
                    t.weight
                        * (0.5
                            + t.sigma.unwrap()
                                * (WAVE_NUMBER * t.offset * theta.cos() - t.phi).cos())
                })
                .sum();
            let g2 = g2_angular(&corr, &cfg, theta, theta).unwrap();
            assert!(
                (g2 / 4.0 - sum).abs() <= 1e-10 * scale,
                "l={l} theta={theta}"
            );
        }
    }
}

#[test]
fn sigma_terms_only_for_three_atoms() {
    let cfg = ChainConfig::new(2, 0.25, 1, 0.02);
    let coh = second_order_coherences(&stationary(&cfg), &cfg);
    assert!(coh.sigma.is_none());
    assert_eq!(coh.eta.len(), 1);
    let cfg = ChainConfig::new(4, 0.25, 1, 0.02);
    assert_eq!(
        second_order_coherences(&stationary(&cfg), &cfg).eta.len(),
        6
    );
}

#[test]
fn eta_matches_definition() {
    let cfg = ChainConfig::new(3, 0.25, 2, 0.02);
    let corr = stationary(&cfg);
    let coh = second_order_coherences(&corr, &cfg);
    for e in coh.eta {
        let pops = corr.population(e.i) + corr.population(e.j);
        let expected = 4.0 * corr.second(e.i, e.j, e.i, e.j).re / (pops * pops);
        assert_relative_eq!(e.eta.unwrap(), expected, max_relative = 1e-14);
    }
}

#[test]
fn ground_state_has_undefined_normalisation() {
    let cfg = ChainConfig::new(2, 0.25, 1, 0.0);
    let corr = expectations(&DensityMatrix::ground(2));
    assert_eq!(g2_normalized(&corr, &cfg, 0.3).unwrap(), None);
    let p = pair_coherence(&corr, 1, 2).unwrap();
    assert!(!p.defined);
    let scan = AngularScan::compute(&corr, &cfg, 36);
    assert!(scan.g2_norm.iter().all(Option::is_none));
}

#[test]
fn pair_coherence_rejects_bad_indices() {
    let corr = expectations(&DensityMatrix::ground(2));
    assert!(matches!(
        pair_coherence(&corr, 0, 1),
        Err(Error::AtomIndexOutOfRange { .. })
    ));
    assert!(matches!(
        pair_coherence(&corr, 1, 3),
        Err(Error::AtomIndexOutOfRange { .. })
    ));
    assert!(pair_coherence(&corr, 2, 2).is_err());
}

#[test]
fn phase_edge_cases() {
    assert_eq!(coherence_phase(Complex64::new(1.0, 0.0)), 0.0);
    assert_eq!(coherence_phase(Complex64::new(-1.0, 0.0)), PI);
    assert_eq!(coherence_phase(Complex64::new(0.0, 2.0)), PI / 2.0);
    assert_eq!(coherence_phase(Complex64::new(0.0, -2.0)), -PI / 2.0);
    assert_relative_eq!(
        coherence_phase(Complex64::new(-1.0, -1.0)),
        -0.75 * PI,
        max_relative = 1e-15
    );
}

#[test]
fn c2_is_g2_minus_g1_squared() {
    let cfg = ChainConfig::new(3, 0.25, 1, 0.02);
    let corr = stationary(&cfg);
    for theta in [0.1, 1.2, 2.9] {
        let g1 = g1_angular(&corr, &cfg, theta).unwrap();
        let g2 = g2_angular(&corr, &cfg, theta, theta).unwrap();
        assert_eq!(c2(&corr, &cfg, theta).unwrap(), g2 - g1 * g1);
        assert_relative_eq!(
            g2_normalized(&corr, &cfg, theta).unwrap().unwrap(),
            g2 / (g1 * g1),
            max_relative = 1e-14
        );
    }
}

#[test]
fn fast_scan_matches_direct_sums() {
    for (n, l) in [(2, 1), (3, 2), (4, 1)] {
        let cfg = ChainConfig::new(n, 0.25, l, 0.02);
        let corr = stationary(&cfg);
        let scan = AngularScan::compute(&corr, &cfg, 720);
        let g1_scale = scan.g1_over_u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let g2_scale = scan.g2_over_u2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (k, &theta) in scan.theta.iter().enumerate() {
            let g1 = g1_angular(&corr, &cfg, theta).unwrap();
            let g2 = g2_angular(&corr, &cfg, theta, theta).unwrap();
            assert!((scan.g1_over_u[k] - g1).abs() <= 1e-10 * g1_scale);
            assert!((scan.g2_over_u2[k] - g2).abs() <= 1e-10 * g2_scale);
        }
    }
}

#[test]
fn scan_grid_is_uniform() {
    let cfg = ChainConfig::new(2, 0.25, 1, 0.02);
    let scan = AngularScan::compute(&expectations(&DensityMatrix::ground(2)), &cfg, 8);
    assert_eq!(scan.len(), 8);
    assert_relative_eq!(scan.theta_deg()[3], 135.0, max_relative = 1e-14);
}

#[test]
fn mirrored_drive_reflects_the_pattern() {
    for (n, d) in [(2, 0.25), (3, 0.2), (4, 0.35)] {
        let cfg = ChainConfig::new(n, d, 1, 0.02);
        let a = stationary(&cfg);
        let b = stationary(&cfg.mirrored());
        let scale = g1_angular(&a, &cfg, 0.0).unwrap().abs().max(1e-12);
        for k in 0..90 {
            let theta = PI * k as f64 / 90.0;
            let lhs = g1_angular(&a, &cfg, theta).unwrap();
            let rhs = g1_angular(&b, &cfg, PI - theta).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * scale);
            let lhs = g2_angular(&a, &cfg, theta, theta).unwrap();
            let rhs = g2_angular(&b, &cfg, PI - theta, PI - theta).unwrap();
            assert!((lhs - rhs).abs() < 1e-8 * scale * scale);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phase_agrees_with_atan2(re in -10.0f64..10.0, im in -10.0f64..10.0) {
        prop_assume!(re != 0.0 || im != 0.0);
        let got = coherence_phase(Complex64::new(re, im));
        let expected = im.atan2(re);
        // atan2 returns -pi for (-x, -0.0); the quadrant rules put the negative real axis at +pi
        if im == 0.0 && re < 0.0 {
            prop_assert_eq!(got, PI);
        } else {
            prop_assert!((got - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn patterns_are_symmetric_about_the_axis(seed in 0u64..1000, theta in 0.0f64..PI, d in 0.05f64..1.0) {
        let n = 2 + (seed % 2) as usize;
        let cfg = ChainConfig::new(n, d, 1, 0.02);
        let corr = expectations(&random_state(n, seed));
        let a = g1_angular(&corr, &cfg, theta).unwrap();
        let b = g1_angular(&corr, &cfg, 2.0 * PI - theta).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        let a = g2_angular(&corr, &cfg, theta, theta).unwrap();
        let b = g2_angular(&corr, &cfg, 2.0 * PI - theta, 2.0 * PI - theta).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn second_order_is_symmetric_in_detectors(seed in 0u64..1000, t1 in 0.0f64..TAU, t2 in 0.0f64..TAU) {
        let cfg = ChainConfig::new(3, 0.3, 1, 0.02);
        let corr = expectations(&random_state(3, seed));
        let a = g2_angular(&corr, &cfg, t1, t2).unwrap();
        let b = g2_angular(&corr, &cfg, t2, t1).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn correlations_of_physical_states_are_non_negative(seed in 0u64..1000, theta in 0.0f64..TAU) {
        let cfg = ChainConfig::new(3, 0.25, 1, 0.02);
        let corr = expectations(&random_state(3, seed));
        prop_assert!(g1_angular(&corr, &cfg, theta).unwrap() >= -1e-12);
        prop_assert!(g2_angular(&corr, &cfg, theta, theta).unwrap() >= -1e-12);
        for i in 1..=3 {
            for j in (i + 1)..=3 {
                let p = pair_coherence(&corr, i, j).unwrap();
                prop_assert!(p.v <= 1.0 + 1e-12);
            }
        }
    }
}
