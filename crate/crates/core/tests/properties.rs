use coldjc::analytic::{self, AnalyticPropagator, SqueezeParameter};
use coldjc::coupling::{CouplingKind, CouplingSpec, ShapeParams, Sign};
use coldjc::dynamics::{self, DecomposedPropagator, ScenarioParams};
use coldjc::hilbert::{self, Slot, SpaceDims};
use coldjc::linalg;
use coldjc::observables::{
    self, Direction, FieldState, InitialStateSpec, QGrid, Quantity, UnitSystem,
};
use coldjc::C64;
use proptest::prelude::*;

fn arb_coupling() -> impl Strategy<Value = CouplingSpec> {
    prop_oneof![
        (0.2f64..1.5, 0.0f64..1.5, any::<bool>()).prop_map(
            |(g0, l, plus)| CouplingSpec::quadratic(
                g0,
                l,
                if plus { Sign::Plus } else { Sign::Minus }
            )
        ),
        (0.2f64..1.5, 0.5f64..2.0).prop_map(|(g0, w)| CouplingSpec::shape(
            CouplingKind::Sech2,
            g0,
            ShapeParams {
                width: w,
                wavenumber: 1.0
            }
        )),
        (0.2f64..1.5, 0.5f64..2.0).prop_map(|(g0, k)| CouplingSpec::shape(
            CouplingKind::Sinusoidal,
            g0,
            ShapeParams {
                width: 1.0,
                wavenumber: k
            }
        )),
    ]
}

fn arb_initial(n_field: usize) -> impl Strategy<Value = InitialStateSpec> {
    (
        -0.4f64..0.4,
        -0.4f64..0.4,
        0..n_field - 1,
        0.0f64..std::f64::consts::FRAC_PI_2,
    )
        .prop_map(|(z, p, n, theta)| InitialStateSpec {
            c_e: C64::new(theta.cos(), 0.0),
            c_g: C64::new(0.0, theta.sin()),
            beta: InitialStateSpec::beta_from(z, p),
            field: FieldState::Fock(n),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn decomposed_tracks_oracle_and_conserves(
        coupling in arb_coupling(),
        delta in -0.5f64..0.5,
        spec in arb_initial(4),
        t in 0.0f64..2.0,
    ) {
        let dims = SpaceDims::new(16, 4).unwrap();
        let s = ScenarioParams::new(coupling, dims, delta, vec![0.0, t]);
        let psi0 = observables::initial_state(&spec, &dims).unwrap();
        let h = dynamics::build_interaction_hamiltonian(&s).unwrap();
        let oracle = dynamics::propagate_oracle(&h, &psi0, &s.times).unwrap();
        let decomposed = DecomposedPropagator::new(&s).unwrap().propagate(&psi0, &s.times).unwrap();
        let e0 = observables::excitation_number(&psi0, &dims).unwrap();
        for (a, b) in oracle.iter().zip(&decomposed) {
            prop_assert!(linalg::inner(a.view(), b.view()).norm_sqr() > 1.0 - 1e-10);
            prop_assert!((linalg::norm(b) - 1.0).abs() < 1e-10);
            prop_assert!((observables::excitation_number(b, &dims).unwrap() - e0).abs() < 1e-10);
        }
    }

    #[test]
    fn analytic_inversion_matches_decomposed_at_short_times(
        lambda in 0.0f64..1.0,
        plus in any::<bool>(),
        spec in arb_initial(3),
        t in 0.0f64..0.8,
    ) {
        let dims = SpaceDims::new(32, 3).unwrap();
        let sign = if plus { Sign::Plus } else { Sign::Minus };
        let s = ScenarioParams::new(CouplingSpec::quadratic(1.0, lambda, sign), dims, 0.0, vec![t]);
        let psi0 = observables::initial_state(&spec, &dims).unwrap();
        let a = AnalyticPropagator::new(&s).unwrap().propagate(&psi0, &s.times).unwrap();
        let d = DecomposedPropagator::new(&s).unwrap().propagate(&psi0, &s.times).unwrap();
        let sa = observables::atomic_inversion(&a[0], &dims).unwrap();
        let sd = observables::atomic_inversion(&d[0], &dims).unwrap();
        prop_assert!((sa - sd).abs() < 1e-8, "{sa} vs {sd}");
    }

    #[test]
    fn squeeze_inverse_is_negated_parameter(xi in -0.3f64..0.3, phase in 0.0f64..std::f64::consts::TAU) {
        let z = C64::from_polar(xi, phase);
        let s = analytic::squeeze_operator(SqueezeParameter::new(z).unwrap(), 48).unwrap();
        let inv = analytic::squeeze_operator(SqueezeParameter::new(-z).unwrap(), 48).unwrap();
        prop_assert!(linalg::leading_block_deviation(&s.dot(&inv), &linalg::identity(48), 12) < 1e-9);
        prop_assert!(linalg::leading_block_deviation(&linalg::dagger(&s), &inv, 12) < 1e-9);
    }

    #[test]
    fn coherent_position_expectation(re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let beta = C64::new(re, im);
        let dims = SpaceDims::new(40, 3).unwrap();
        let spec = InitialStateSpec::excited(beta, FieldState::Fock(0));
        let psi = observables::initial_state(&spec, &dims).unwrap();
        prop_assert!((observables::mean_position(&psi, &dims).unwrap() - 2f64.sqrt() * re).abs() < 1e-10);
        prop_assert!((observables::mean_momentum(&psi, &dims).unwrap() - 2f64.sqrt() * im).abs() < 1e-10);
    }

    #[test]
    fn husimi_is_a_distribution(re in -1.0f64..1.0, im in -1.0f64..1.0) {
        let alpha = C64::new(re, im);
        let field = hilbert::coherent_state(alpha, 24).vector;
        let dims = SpaceDims::new(8, 24).unwrap();
        let spin = ndarray::arr1(&[C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let cm = hilbert::fock_state(0, 8).unwrap();
        let psi = hilbert::product_state(&spin, &cm, &field);
        let rho = observables::reduce_density(&psi, Slot::Field, &dims).unwrap();
        let q = observables::husimi_q(&rho, &QGrid::for_amplitude(alpha.norm())).unwrap();
        prop_assert!(q.values.iter().all(|&v| v >= 0.0));
        prop_assert!((q.riemann_sum() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn unit_conversion_round_trips(x in 1e-3f64..10.0, which in 0usize..4) {
        let q = [Quantity::Length, Quantity::Momentum, Quantity::Time, Quantity::Temperature][which];
        let u = UnitSystem::default();
        let phys = observables::convert_units(x, q, Direction::ToPhysical, &u).unwrap();
        let back = observables::convert_units(phys, q, Direction::ToScaled, &u).unwrap();
        prop_assert!(((back - x) / x).abs() < 1e-12);
    }
}
