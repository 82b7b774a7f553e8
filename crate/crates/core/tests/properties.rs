use lohe_core::diagnostics::{dissipation, order_parameter, variance};
use lohe_core::dynamics::{random_ensemble, rhs, step};
use lohe_core::reshape::{cubic_fast, dematricize, matricize, plan};
use lohe_core::rng::{scenario_rng, standard_complex_tensor};
use lohe_core::tensor::{contract_cubic, frobenius_inner};
use lohe_core::{CouplingIndex, CouplingSet, MultiShape, SimParams};
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..=3, 0..=3)
}

fn couplings(rank: usize, kappas: &[f64]) -> CouplingSet {
    CouplingIndex::all(rank)
        .zip(kappas.iter().cycle())
        .fold(CouplingSet::new(rank), |c, (i, &k)| c.with(i, k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matricize_round_trips(d in dims(), mask in any::<u32>(), seed in any::<u64>()) {
        let s = MultiShape::new(d).unwrap();
        let i = CouplingIndex::from_mask(s.rank(), mask & ((1u32 << s.rank()) - 1)).unwrap();
        let t = standard_complex_tensor(&s, &mut scenario_rng(seed));
        let p = plan(&s, i).unwrap();
        prop_assert_eq!(dematricize(&matricize(&t, &p).unwrap(), &p).unwrap(), t);
    }

    #[test]
    fn fast_cubic_matches_naive(d in dims(), mask in any::<u32>(), seed in any::<u64>()) {
        let s = MultiShape::new(d).unwrap();
        let i = CouplingIndex::from_mask(s.rank(), mask & ((1u32 << s.rank()) - 1)).unwrap();
        let mut rng = scenario_rng(seed);
        let (a, b, c) = (
            standard_complex_tensor(&s, &mut rng),
            standard_complex_tensor(&s, &mut rng),
            standard_complex_tensor(&s, &mut rng),
        );
        let diff = cubic_fast(&a, &b, &c, i).unwrap().max_abs_diff(&contract_cubic(&a, &b, &c, i).unwrap()).unwrap();
        prop_assert!(diff < 1e-11);
    }

    #[test]
    fn rhs_is_tangent_to_the_sphere(
        d in dims(),
        n in 1usize..6,
        kappas in prop::collection::vec(-1.0f64..1.0, 1..8),
        seed in any::<u64>(),
    ) {
        let s = MultiShape::new(d).unwrap();
        let state = random_ensemble(&s, n, seed).unwrap();
        let p = SimParams::new(couplings(s.rank(), &kappas));
        for (t, dt) in state.tensors().iter().zip(rhs(&state, &p).unwrap()) {
            prop_assert!(frobenius_inner(t, &dt).unwrap().re.abs() < 1e-12);
        }
    }

    #[test]
    fn variance_identity_and_step_monotonicity(
        d in dims(),
        n in 2usize..6,
        kappas in prop::collection::vec(0.0f64..1.0, 1..8),
        seed in any::<u64>(),
    ) {
        let s = MultiShape::new(d).unwrap();
        let state = random_ensemble(&s, n, seed).unwrap();
        let r = order_parameter(&state);
        prop_assert!((variance(&state) - (1.0 - r * r)).abs() < 1e-12);
        let c = couplings(s.rank(), &kappas);
        prop_assert!(dissipation(&state, &c).unwrap().total <= 0.0);
        let next = step(&state, &SimParams::new(c).with_dt(1e-3)).unwrap();
        prop_assert!(variance(&next) <= variance(&state) + 1e-12);
    }
}
