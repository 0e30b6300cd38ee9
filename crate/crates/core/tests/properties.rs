use std::f64::consts::PI;

use proptest::prelude::*;
use rydgate::analytic::{alpha_adiabatic, cubic_energies};
use rydgate::design::Axis;
use rydgate::gate::{cartan_factors, cz_fidelity, cz_fidelity_trace, entangling_power, unitary_diagonal, wrap_phase};
use rydgate::noise::{quadratic_fit, sample_errors, CurveSample, Histogram, NoiseSpec, TRUNCATION_SIGMAS};
use rydgate::output::number;
use rydgate::propagator::{propagate, StateVector};
use rydgate::{HamiltonianKind, SystemParams};

fn kind() -> impl Strategy<Value = HamiltonianKind> {
    prop_oneof![
        Just(HamiltonianKind::SingleRotating),
        Just(HamiltonianKind::TripleRotating),
        Just(HamiltonianKind::FullRwa)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_preserves_norm(o in 0.0..30.0f64, w in -40.0..40.0f64, v in 0.0..100.0f64, k in kind(), i in 0usize..9) {
        let s = SystemParams::gaussian(o, w, v);
        let tol = 1e-10;
        let psi = propagate(&s, k, &StateVector::basis(k, i % k.dim()).unwrap(), tol).unwrap();
        prop_assert!((psi.norm() - 1.0).abs() <= 10.0 * tol, "drift {}", psi.norm() - 1.0);
    }
}

proptest! {
    #[test]
    fn fidelity_forms_agree(a in -20.0..20.0f64, b in -20.0..20.0f64) {
        let f = cz_fidelity(a, b);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((f - cz_fidelity_trace(&unitary_diagonal(a, b))).abs() < 1e-12);
    }

    #[test]
    fn entangling_power_is_bounded(a in -20.0..20.0f64, b in -20.0..20.0f64) {
        let p = entangling_power(a, b);
        prop_assert!(p <= 2.0 / 9.0 + 1e-15 && p >= 0.0);
        // controlled phase 2a - b
        prop_assert!((p - (1.0 - (2.0 * a - b).cos()) / 9.0).abs() < 1e-13);
    }

    #[test]
    fn cartan_factors_reassemble(a in -20.0..20.0f64, b in -20.0..20.0f64) {
        let u = unitary_diagonal(a, b);
        let r = cartan_factors(a, b).reassemble();
        for (x, y) in u.iter().zip(&r) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn wrapped_phase_is_principal(x in -100.0..100.0f64) {
        let y = wrap_phase(x);
        prop_assert!(y > -PI && y <= PI);
        let turns = (x - y) / (2.0 * PI);
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn cubic_roots_match_invariants(o in 0.0..50.0f64, w in -50.0..50.0f64, v in 0.0..150.0f64) {
        let (e, _, _) = cubic_energies(o, w, v).unwrap();
        let scale = 1.0 + o.abs() + w.abs() + v.abs();
        // trace and determinant of the three-level matrix
        prop_assert!((e.iter().sum::<f64>() - (v - 3.0 * w)).abs() < 1e-10 * scale);
        let det = -0.5 * o * o * (v - 2.0 * w);
        let prod = e[0] * e[1] * e[2];
        prop_assert!((prod - det).abs() < 1e-9 * scale.powi(3), "{prod} vs {det}");
    }

    #[test]
    fn alpha_sign_opposes_modulation(o in 0.1..20.0f64, w in 1.0..40.0f64, flip in any::<bool>()) {
        let w = if flip { -w } else { w };
        let a = alpha_adiabatic(&SystemParams::gaussian(o, w, 0.0)).unwrap();
        prop_assert!(a * w < 0.0);
    }

    #[test]
    fn numbers_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(number(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }

    #[test]
    fn histogram_counts_finite_samples(data in prop::collection::vec(prop_oneof![Just(f64::NAN), -1.0..1.0f64], 1..200), bins in 1usize..30) {
        let h = Histogram::of(&data, bins);
        let finite = data.iter().filter(|x| x.is_finite()).count();
        prop_assert_eq!(h.counts.iter().sum::<usize>(), finite);
        prop_assert!(h.edges.windows(2).all(|p| p[0] <= p[1]));
    }

    #[test]
    fn error_draws_are_reproducible_and_truncated(seed in any::<u64>(), index in 0u64..10_000, s in 0.0..0.1f64) {
        let spec = NoiseSpec { sigma_omega0: s, sigma_v: 2.0 * s, sigma_omega_e: 0.0, samples: 1, seed };
        let a = sample_errors(&spec, index);
        prop_assert_eq!(a, sample_errors(&spec, index));
        prop_assert!(a[0].abs() <= TRUNCATION_SIGMAS * s && a[1].abs() <= TRUNCATION_SIGMAS * 2.0 * s);
        prop_assert_eq!(a[2], 0.0);
    }

    #[test]
    fn quadratic_fit_recovers_curvature(beta in 0.1..50.0f64, n in 3usize..30) {
        let samples: Vec<CurveSample> = (0..n)
            .map(|i| {
                let x = -0.02 + 0.04 * i as f64 / (n - 1) as f64;
                CurveSample { x, fidelity: 1.0 - beta * x * x, leakage: 0.0, error: None }
            })
            .collect();
        let fit = quadratic_fit(&samples);
        prop_assert!((fit.beta - beta).abs() < 1e-9 * beta);
        prop_assert!(fit.r_squared > 1.0 - 1e-12);
    }

    #[test]
    fn linspace_hits_endpoints(lo in -100.0..0.0f64, span in 0.1..100.0f64, n in 2usize..200) {
        let a = Axis::linspace("x", lo, lo + span, n).unwrap();
        prop_assert_eq!(a.len(), n);
        prop_assert_eq!(a.values[0], lo);
        prop_assert_eq!(*a.values.last().unwrap(), lo + span);
    }
}
