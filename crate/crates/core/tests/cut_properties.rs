use num_rational::Rational64;
use proptest::prelude::*;
use rwde_core::accel::NeighborhoodSet;
use rwde_core::cuts::{box_kappa_lambda, kappa, kappa_lambda, min_radius_for};
use rwde_core::Weights;

/// Weights `k/20` with `k ∈ 1..=40`, exact in rational arithmetic.
fn weights_strategy(d: usize) -> impl Strategy<Value = Weights<Rational64>> {
    prop::collection::vec(1i64..=40, 2 * d)
        .prop_map(move |ks| Weights::new(d, ks.into_iter().map(|k| Rational64::new(k, 20)).collect()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn box_formula_matches_enumeration_in_the_plane(w in weights_strategy(2)) {
        for r in 1..=2 {
            let brute = kappa_lambda(&w, &NeighborhoodSet::boxed(2, r).unwrap()).unwrap();
            prop_assert_eq!(brute.value, box_kappa_lambda(&w, r));
        }
    }

    #[test]
    fn box_formula_matches_enumeration_in_space(w in weights_strategy(3)) {
        let brute = kappa_lambda(&w, &NeighborhoodSet::boxed(3, 1).unwrap()).unwrap();
        prop_assert_eq!(brute.value, box_kappa_lambda(&w, 1));
    }

    #[test]
    fn singleton_cut_is_the_total_weight(w in weights_strategy(3)) {
        let cut = kappa_lambda(&w, &NeighborhoodSet::singleton(3)).unwrap();
        prop_assert_eq!(cut.value, *w.alpha0());
        prop_assert_eq!(cut.cut_edges.len(), 6);
    }

    #[test]
    fn unit_box_recovers_kappa(w in weights_strategy(3)) {
        prop_assert_eq!(box_kappa_lambda(&w, 1), kappa(&w));
        prop_assert_eq!(box_kappa_lambda(&w, 0), *w.alpha0());
    }

    #[test]
    fn minimal_radius_is_minimal(w in weights_strategy(3), t in 1i64..=60) {
        let target = Rational64::new(t, 10);
        let r = min_radius_for(&w, &target).unwrap();
        prop_assert!(box_kappa_lambda(&w, r) > target);
        if r > 0 {
            prop_assert!(box_kappa_lambda(&w, r - 1) <= target);
        }
    }
}
