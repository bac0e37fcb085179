use proptest::prelude::*;

use roughpd::controlled::{path_seminorm, rho_control, ControlledPath};
use roughpd::functional::{smoothed_running_max, HShape, PathFunctional, RunningMax, StoppedPath};
use roughpd::integral::rough_integrate;
use roughpd::io::{read_path_csv, write_path_csv};
use roughpd::lift::{smooth_lift, BrownianSpec};
use roughpd::oracle::{pvar_bruteforce, OracleConfig};
use roughpd::path::{
    p_variation_exact, p_variation_greedy, uniform_grid, vp_control, ControlTable, DiscretePath,
    IntervalControl,
};

fn path_strategy(max_len: usize, d: usize) -> impl Strategy<Value = DiscretePath> {
    (2..=max_len).prop_flat_map(move |n| {
        prop::collection::vec(-3.0f64..3.0, n * d)
            .prop_map(move |v| DiscretePath::new(uniform_grid(n - 1, 1.0), v, d).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dp_equals_enumeration(path in path_strategy(12, 2), p in 1.0f64..3.0) {
        let hi = path.len() - 1;
        let brute = pvar_bruteforce(&path, p, 0.0, 1.0, &OracleConfig::default()).unwrap();
        prop_assert_eq!(path.pvar_sum(p, 0, hi), brute);
    }

    #[test]
    fn greedy_is_a_lower_bound(path in path_strategy(40, 1), p in 1.0f64..3.0) {
        let exact = p_variation_exact(&path, p, 0.0, 1.0).unwrap();
        let greedy = p_variation_greedy(&path, p, 0.0, 1.0).unwrap();
        prop_assert!(greedy <= exact * (1.0 + 1e-12));
    }

    #[test]
    fn monotone_closed_form(steps in prop::collection::vec(0.0f64..1.0, 1..20), p in 1.0f64..3.0) {
        let mut values = vec![0.0];
        for s in &steps {
            values.push(values.last().unwrap() + s);
        }
        let path = DiscretePath::scalar(uniform_grid(steps.len(), 1.0), values.clone()).unwrap();
        prop_assert_eq!(p_variation_exact(&path, p, 0.0, 1.0).unwrap(), *values.last().unwrap());
    }

    #[test]
    fn vp_superadditive(path in path_strategy(24, 2), p in 1.0f64..3.0) {
        let vp = vp_control(&path, p).unwrap();
        let table = ControlTable::new(&vp, 0, path.len() - 1);
        prop_assert!(table.superadditivity_gap() <= 1e-12 * (1.0 + table.get(0, path.len() - 1)));
    }

    #[test]
    fn brownian_lifts_are_chen_consistent(seed in any::<u64>(), n in 2usize..200, d in 1usize..4) {
        let rp = BrownianSpec::new(seed, n).dim(d).build().unwrap();
        prop_assert!(rp.chen_defect() <= 1e-12);
    }

    #[test]
    fn remainder_scales_linearly(seed in 0u64..1000, lambda in -4.0f64..4.0) {
        let rp = BrownianSpec::new(seed, 32).build().unwrap();
        let x = rp.base();
        let y: Vec<f64> = x.values().iter().map(|v| v.sin()).collect();
        let yp: Vec<f64> = x.values().iter().map(|v| v.cos()).collect();
        let make = |s: f64| {
            ControlledPath::new(
                DiscretePath::scalar(x.times().to_vec(), y.iter().map(|v| s * v).collect()).unwrap(),
                DiscretePath::scalar(x.times().to_vec(), yp.iter().map(|v| s * v).collect()).unwrap(),
                &rp,
            )
            .unwrap()
        };
        let (one, scaled) = (make(1.0), make(lambda));
        for (a, b) in [(0, 32), (3, 17), (10, 11)] {
            let r1 = one.remainder_idx(&rp, a, b)[0];
            let r2 = scaled.remainder_idx(&rp, a, b)[0];
            prop_assert!((r2 - lambda * r1).abs() <= 1e-14 * (1.0 + r2.abs()));
        }
    }

    #[test]
    fn controlled_triangle_inequality(seed in 0u64..1000) {
        let rp = BrownianSpec::new(seed, 48).p(2.2).build().unwrap();
        let x = rp.base();
        let y = DiscretePath::scalar(x.times().to_vec(), x.values().iter().map(|v| v.sin()).collect()).unwrap();
        let yp = DiscretePath::scalar(x.times().to_vec(), x.values().iter().map(|v| v.cos()).collect()).unwrap();
        let cp = ControlledPath::new(y.clone(), yp.clone(), &rp).unwrap();
        for (a, b) in [(0, 48), (5, 30), (20, 24)] {
            let lhs = p_variation_exact(&y, 2.2, x.time(a), x.time(b)).unwrap();
            let sup = yp.sup_norm_on(a, b);
            let rhs = sup * p_variation_exact(x, 2.2, x.time(a), x.time(b)).unwrap()
                + cp.remainder_var_idx(&rp, a, b);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn bridging_inequality(seed in 0u64..1000) {
        let p = 2.1;
        let rp = BrownianSpec::new(seed, 40).p(p).build().unwrap();
        let rho = rho_control(&rp);
        let w = rp.base();
        let semi = path_seminorm(w, &rho, 1.0 / p);
        prop_assert!(semi <= 1.0 + 1e-12);
        let lhs = p_variation_exact(w, p, 0.0, 1.0).unwrap();
        prop_assert!(lhs <= semi * rho.between(0, 40).powf(1.0 / p) * (1.0 + 1e-12));
    }

    #[test]
    fn functionals_are_non_anticipative(seed in 0u64..1000, k in 1usize..30, shift in -2.0f64..2.0) {
        let x = BrownianSpec::new(seed, 32).build().unwrap().base().clone();
        let mut values = x.values().to_vec();
        for v in values.iter_mut().skip(k + 1) {
            *v += shift;
        }
        let changed = DiscretePath::new(x.times().to_vec(), values, 1).unwrap();
        let smax = smoothed_running_max(0.3, HShape::Quintic).unwrap();
        for f in [&smax as &dyn PathFunctional, &RunningMax] {
            let a = f.evaluate(&StoppedPath::new(&x, k));
            let b = f.evaluate(&StoppedPath::new(&changed, k));
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn integrals_are_additive(seed in 0u64..1000, mid in 1usize..63) {
        let rp = BrownianSpec::new(seed, 64).build().unwrap();
        let x = rp.base();
        let y = DiscretePath::scalar(x.times().to_vec(), x.values().iter().map(|v| v.exp()).collect()).unwrap();
        let cp = ControlledPath::new(y.clone(), y, &rp).unwrap();
        let t = x.time(mid);
        let whole = rough_integrate(&cp, &rp, 0.0, 1.0).unwrap().total()[0];
        let split = rough_integrate(&cp, &rp, 0.0, t).unwrap().total()[0]
            + rough_integrate(&cp, &rp, t, 1.0).unwrap().total()[0];
        prop_assert!((whole - split).abs() <= 1e-13 * (1.0 + whole.abs()));
    }

    #[test]
    fn smooth_lift_is_geometric(path in path_strategy(20, 3)) {
        let rp = smooth_lift(&path, 2.5).unwrap();
        prop_assert!(rp.geometric_defect() <= 1e-12);
        prop_assert!(rp.chen_defect() <= 1e-12);
    }

    #[test]
    fn csv_round_trip(path in path_strategy(20, 2)) {
        let mut buf = Vec::new();
        write_path_csv(&path, &mut buf, &[]).unwrap();
        prop_assert_eq!(read_path_csv(buf.as_slice()).unwrap(), path);
    }
}
