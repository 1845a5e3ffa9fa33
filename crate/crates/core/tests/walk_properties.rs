use proptest::prelude::*;
use rwde_core::accel::{GammaMethod, NeighborhoodSet};
use rwde_core::walk::*;
use rwde_core::{rng, LatticeEnvironment, Site, Weights};

fn weights_strategy() -> impl Strategy<Value = Weights<f64>> {
    (2usize..=3)
        .prop_flat_map(|d| prop::collection::vec(0.05f64..3.0, 2 * d).prop_map(move |a| Weights::new(d, a).unwrap()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn discrete_steps_are_nearest_neighbour_and_replayable(w in weights_strategy(), seed in any::<u64>(), n in 1u64..2000) {
        let env = LatticeEnvironment::new(w.clone(), seed);
        let mut a = rng::stream(seed, &[1]);
        let mut b = rng::stream(seed, &[1]);
        let t = run_discrete(&env, n, Site::ORIGIN, &mut a).unwrap();
        prop_assert_eq!(t.steps() as u64, n);
        prop_assert!(t.positions.windows(2).all(|p| p[0].is_neighbor(&p[1])));
        let fresh = LatticeEnvironment::new(w, seed);
        prop_assert_eq!(run_discrete(&fresh, n, Site::ORIGIN, &mut b).unwrap(), t);
    }

    #[test]
    fn hitting_times_are_first_passages(w in weights_strategy(), seed in any::<u64>()) {
        let env = LatticeEnvironment::new(w, seed);
        let t = run_discrete(&env, 3000, Site::ORIGIN, &mut rng::stream(seed, &[2])).unwrap();
        let proj: Vec<i64> = t.projections(0).collect();
        let levels = [1u64, 2, 4, 8, 16];
        let rec = hitting_times(&t, 0, &levels);
        let mut previous = 0;
        for (level, hit) in levels.iter().zip(&rec.steps) {
            match hit {
                Some(k) => {
                    let k = *k as usize;
                    prop_assert!(proj[k] >= *level as i64);
                    prop_assert!(proj[..k].iter().all(|&p| p < *level as i64));
                    prop_assert!(k >= previous);
                    previous = k;
                }
                None => prop_assert!(proj.iter().all(|&p| p < *level as i64)),
            }
        }
    }

    #[test]
    fn renewals_are_never_undercut(steps in prop::collection::vec(prop::bool::weighted(0.7), 1..400)) {
        let mut proj = vec![0i64];
        for up in steps {
            let last = *proj.last().unwrap();
            proj.push(if up { last + 1 } else { last - 1 });
        }
        let r = renewals_from_projections(&proj, 0.1);
        for (&i, &level) in r.indices.iter().zip(&r.levels) {
            let i = i as usize;
            prop_assert_eq!(proj[i], level);
            prop_assert!(proj[..i].iter().all(|&p| p < level));
            prop_assert!(proj[i..].iter().all(|&p| p >= level));
        }
        prop_assert!(r.levels.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(r.confirmed_gaps().iter().all(|&g| g >= 1));
    }

    #[test]
    fn singleton_clock_is_the_time_change(w in weights_strategy(), seed in any::<u64>(), horizon in 1.0f64..200.0) {
        let env = LatticeEnvironment::new(w.clone(), seed);
        let lambda = NeighborhoodSet::singleton(w.d());
        let mut cache = GammaCache::new(&env, &lambda, GammaMethod::default());
        let t = run_accelerated(&env, &mut cache, horizon, Site::ORIGIN, &mut WalkStreams::new(seed)).unwrap();
        let times = t.jump_times.as_ref().unwrap();
        let a = t.a_values.as_ref().unwrap();
        prop_assert!(times.windows(2).all(|s| s[0] < s[1]));
        prop_assert!(times[times.len() - 2] < horizon && *times.last().unwrap() >= horizon);
        for (s, v) in times.iter().zip(a) {
            prop_assert!((s - v).abs() <= 1e-9 * s.max(1.0));
        }
        let mid = horizon / 2.0;
        prop_assert!((time_change_a(&t, mid).unwrap() - mid).abs() <= 1e-9 * horizon);
    }

    #[test]
    fn excursions_bound_displacement(w in weights_strategy(), seed in any::<u64>()) {
        let env = LatticeEnvironment::new(w.clone(), seed);
        let lambda = NeighborhoodSet::pair(w.d()).unwrap();
        let mut cache = GammaCache::new(&env, &lambda, GammaMethod::default());
        let t = run_accelerated(&env, &mut cache, 30.0, Site::ORIGIN, &mut WalkStreams::new(seed)).unwrap();
        for n in 0..29 {
            let start = t.position_at(n as f64).unwrap().coord(0);
            let end = t.position_at(n as f64 + 1.0).unwrap().coord(0);
            let d = excursion_max(&t, 0, n as f64).unwrap();
            prop_assert!(d >= (end - start).abs() as f64);
        }
    }
}

#[test]
fn theta_tail_log_slope_approaches_minus_kappa() {
    let w = Weights::new(2, vec![1.0; 4]).unwrap();
    let kappa = 6.0;
    let slope = |n: f64| (ln_theta_tail(&w, 0, 10.0 * n) - ln_theta_tail(&w, 0, n)) / 10f64.ln();
    assert!((slope(1e5) + kappa).abs() < 0.01, "slope {}", slope(1e5));
    assert!((slope(1e5) + kappa).abs() < (slope(1e2) + kappa).abs());
}

#[test]
fn theta_exit_times_see_a_straight_walk_leave_at_once() {
    let d = 2;
    let positions: Vec<Site> = (0..10).map(|k| Site::new(&[k, 0]).unwrap()).collect();
    let t = Trajectory {
        d,
        positions,
        jump_times: None,
        exp_draws: None,
        gamma_values: None,
        a_values: None,
    };
    assert_eq!(exit_time_from(&t, 0, 0), Some(2));
    assert!(theta_exit_times(&t, 0).iter().take(4).all(|x| *x == Some(2)));
}
