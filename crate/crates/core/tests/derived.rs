//! Worked examples checked against independent references computed here.

use std::sync::Arc;

use roughpd::controlled::{controlled_norm, holder_seminorm, rho_control, ControlledPath};
use roughpd::functional::{
    discrete_time_functional, functional_remainder, integral_functional, regularity_report,
    smoothed_running_max, Constant, Endpoint, HShape, PathFunctional, PhiFn, PsiFn, ReportConfig,
    RunningMax, StoppedPath,
};
use roughpd::integral::{integrate_functional, rough_integrate};
use roughpd::lift::{smooth_lift, BrownianSpec, RoughPath};
use roughpd::oracle::{
    euler_level2, euler_plain, fd_derivative_check, refine_linear, rs_integral, OracleConfig,
};
use roughpd::path::{
    p_variation_exact, p_variation_greedy, piecewise_linear_approx, vp_control, DiscretePath,
    IntervalControl,
};
use roughpd::rde::{solve, RdeProblem, SolveOptions};
use roughpd::stats::loglog_slope;
use roughpd::Error;

fn linear(n: usize) -> DiscretePath {
    DiscretePath::sample(n, 1.0, 1, |t| vec![t]).unwrap()
}

#[test]
fn zigzag_variation() {
    let z = DiscretePath::scalar(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
    let s2 = 2f64.sqrt();
    assert!((p_variation_exact(&z, 2.0, 0.0, 1.0).unwrap() - s2).abs() < 1e-15);
    assert!((p_variation_greedy(&z, 2.0, 0.0, 1.0).unwrap() - s2).abs() < 1e-15);
    assert!((vp_control(&z, 2.0).unwrap().between(0, 2) - 2.0).abs() < 1e-15);
}

#[test]
fn approximation_error_rate() {
    let p = 2.1;
    let rp = BrownianSpec::new(0, 1024).p(p).build().unwrap();
    let x = rp.base();
    let sup_error = |n: usize| {
        let a = piecewise_linear_approx(x, p, n, 0.0, 1.0).unwrap();
        (0..x.len())
            .map(|k| (a.path.point(k)[0] - x.point(k)[0]).abs())
            .fold(0.0, f64::max)
    };
    let ratio = sup_error(64) / sup_error(16);
    let predicted = 4f64.powf(-1.0 / p);
    assert!(
        ratio <= 4.0 * predicted && ratio >= predicted / 4.0,
        "ratio {ratio}"
    );
    assert_eq!(
        piecewise_linear_approx(x, p, 1024, 0.0, 1.0).unwrap().path,
        *x
    );
}

#[test]
fn chen_chaining_is_associative() {
    let rp = BrownianSpec::new(17, 64).dim(3).build().unwrap();
    let (x, d) = (rp.base(), 3);
    let via = |u: usize| {
        let mut m = rp.second_level(0, u);
        let right = rp.second_level(u, 64);
        let (a, b) = (x.increment(0, u), x.increment(u, 64));
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] += right[i * d + j] + a[i] * b[j];
            }
        }
        m
    };
    for (u, v) in [(5, 40), (1, 63), (20, 21)] {
        let gap = via(u)
            .iter()
            .zip(via(v))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 1e-12, "{gap}");
    }
}

#[test]
fn brownian_chen_and_corruption() {
    let mut rp = BrownianSpec::new(42, 256).build().unwrap();
    assert!(rp.chen_defect() <= 1e-12);
    rp.block_mut(100)[0] += 1.0;
    assert!(rp.chen_defect() >= 1.0);
}

fn levy_area_variance(refinement: usize) -> f64 {
    let areas: Vec<f64> = (0..200u64)
        .map(|seed| {
            let rp = BrownianSpec::new(seed, 512)
                .dim(2)
                .refinement(refinement)
                .build()
                .unwrap();
            let xx = rp.second_level(0, 512);
            0.5 * (xx[1] - xx[2])
        })
        .collect();
    let mean = areas.iter().sum::<f64>() / areas.len() as f64;
    areas.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (areas.len() - 1) as f64
}

#[test]
fn levy_area_variance_matches_fine_oracle() {
    let coarse = levy_area_variance(16);
    let fine = levy_area_variance(256);
    assert!((coarse / fine - 1.0).abs() <= 0.25, "{coarse} vs {fine}");
    // Var of the Levy area on [0, T] is T^2 / 4.
    assert!((fine / 0.25 - 1.0).abs() <= 0.25, "{fine}");
}

#[test]
fn two_dimensional_linear_lift() {
    let x = DiscretePath::sample(1, 1.0, 2, |t| vec![t, 2.0 * t]).unwrap();
    let rp = smooth_lift(&x, 2.1).unwrap();
    assert_eq!(rp.second_level(0, 1), vec![0.5, 1.0, 1.0, 2.0]);
}

#[test]
fn remainder_variation_matches_enumeration() {
    let x = linear(8);
    let rp = smooth_lift(&x, 2.0).unwrap();
    let y = DiscretePath::sample(8, 1.0, 1, |t| vec![t * t]).unwrap();
    let yp = DiscretePath::sample(8, 1.0, 1, |t| vec![2.0 * t]).unwrap();
    let cp = ControlledPath::new(y, yp, &rp)
        .unwrap()
        .with_q(4.0 / 3.0)
        .unwrap();
    let q = 4.0 / 3.0;
    let t = x.times();
    // R_{a,b} = (t_b - t_a)^2; enumerate every sub-partition of 0..=8.
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << 7) {
        let mut nodes = vec![0usize];
        nodes.extend((1..8).filter(|k| mask & (1 << (k - 1)) != 0));
        nodes.push(8);
        let s: f64 = nodes
            .windows(2)
            .map(|w| ((t[w[1]] - t[w[0]]).powi(2)).powf(q))
            .sum();
        best = best.max(s);
    }
    let dp = cp.remainder_var_idx(&rp, 0, 8);
    assert!(
        (dp - best.powf(1.0 / q)).abs() <= 1e-14,
        "{dp} vs {}",
        best.powf(1.0 / q)
    );
    let norm = controlled_norm(&cp, &rp).unwrap();
    assert!((norm.remainder_var - dp).abs() == 0.0);
}

#[test]
fn rho_of_linear_path() {
    let rp = smooth_lift(&linear(16), 2.0).unwrap();
    assert!((rho_control(&rp).between(0, 16) - 2.5).abs() < 1e-14);
}

#[test]
fn set_a_membership_of_trivial_candidate_is_finite() {
    let rp = BrownianSpec::new(2, 64).build().unwrap();
    let (b, sigma, xi) = (0.3, 0.7, 1.0);
    let x = rp.base();
    let y = DiscretePath::new(
        x.times().to_vec(),
        (0..x.len())
            .map(|k| xi + b * x.time(k) + sigma * (x.point(k)[0] - x.point(0)[0]))
            .collect(),
        1,
    )
    .unwrap();
    let shifted = DiscretePath::new(
        x.times().to_vec(),
        (0..x.len())
            .map(|k| y.point(k)[0] - b * x.time(k))
            .collect(),
        1,
    )
    .unwrap();
    let yp = DiscretePath::new(x.times().to_vec(), vec![sigma; x.len()], 1).unwrap();
    let cp = ControlledPath::new(shifted, yp, &rp).unwrap();
    let r = 0.5 * (2.1 + 1.0 + 2f64.sqrt());
    let v = holder_seminorm(&cp, &rp, &rho_control(&rp), 1.0 / r, (r + 1.0) / (r * r)).unwrap();
    assert!(v.is_finite() && v < 1e-12, "{v}");
}

#[test]
fn product_functional_vertical_matches_finite_differences() {
    let phi: PhiFn = Arc::new(|_, a| vec![a[0] * a[1]]);
    let grad: PhiFn = Arc::new(|_, a| vec![a[1], a[0]]);
    let f = discrete_time_functional(vec![0.25, 0.75], 1, 1, phi)
        .unwrap()
        .with_gradient(grad);
    let x = BrownianSpec::new(4, 64).build().unwrap().base().clone();
    let probes: Vec<StoppedPath> = [3, 16, 30, 48, 60]
        .iter()
        .map(|&k| StoppedPath::new(&x, k))
        .collect();
    let r = fd_derivative_check(&f, &probes, &OracleConfig::default()).unwrap();
    assert!(r.vertical_discrepancy <= 1e-7, "{r:?}");
}

#[test]
fn squared_terminal_integral_functional() {
    let psi: PsiFn = Arc::new(|_, _, y| vec![y[0] * y[0]]);
    let grad: PsiFn = Arc::new(|_, _, y| vec![2.0 * y[0]]);
    let f = integral_functional(1, 1, psi).with_gradient(grad);
    let x = linear(32);
    for k in [0, 7, 32] {
        let s = StoppedPath::new(&x, k);
        let t = x.time(k);
        assert!((f.evaluate(&s)[0] - t.powi(3)).abs() < 1e-14);
        assert!((f.vertical(&s).unwrap()[0] - 2.0 * t * t).abs() < 1e-14);
    }
    let r = fd_derivative_check(&f, &[StoppedPath::new(&x, 20)], &OracleConfig::default()).unwrap();
    assert!(r.vertical_slope.is_none() || (r.vertical_slope.unwrap() - 2.0).abs() < 0.3);
}

#[test]
fn running_integral_remainder() {
    let psi: PsiFn = Arc::new(|_, xs, _| xs.terminal());
    let zero: PsiFn = Arc::new(|_, _, _| vec![0.0]);
    let f = integral_functional(1, 1, psi).with_gradient(zero);
    let x = linear(16);
    let (t, s) = (0.25, 0.8125);
    let r = functional_remainder(&f, &x, t, s).unwrap()[0];
    assert!((r - (s * s - t * t) / 2.0).abs() < 1e-15);
}

#[test]
fn regularity_flags() {
    let probes: Vec<DiscretePath> = (0..4)
        .map(|s| {
            BrownianSpec::new(30 + s, 64)
                .build()
                .unwrap()
                .base()
                .clone()
        })
        .collect();
    let smax = smoothed_running_max(0.25, HShape::Quintic).unwrap();
    let r = regularity_report(&smax, &probes, &ReportConfig::default()).unwrap();
    assert_eq!(r.flags.value, Some(true));
    assert_eq!(r.flags.gradient, Some(true));
    assert_eq!(r.flags.hessian, Some(true));
    assert!(r.flags.vertically_differentiable);
    assert_eq!(r.flags.remainder_scaling, Some(true));
    let raw = regularity_report(&RunningMax, &probes, &ReportConfig::default()).unwrap();
    assert!(!raw.flags.vertically_differentiable);
}

#[test]
fn square_integral_against_riemann_stieltjes() {
    let x = linear(64);
    let rp = smooth_lift(&x, 2.1).unwrap();
    let y = DiscretePath::sample(64, 1.0, 1, |t| vec![t * t]).unwrap();
    let yp = DiscretePath::sample(64, 1.0, 1, |t| vec![2.0 * t]).unwrap();
    let z = rough_integrate(&ControlledPath::new(y, yp, &rp).unwrap(), &rp, 0.0, 1.0).unwrap();
    let fine = refine_linear(&x, 64).unwrap();
    let f = DiscretePath::new(
        fine.times().to_vec(),
        fine.values().iter().map(|v| v * v).collect(),
        1,
    )
    .unwrap();
    let reference = rs_integral(&f, &fine).unwrap()[0];
    assert!((z.total()[0] - 1.0 / 3.0).abs() <= 1e-6);
    assert!((reference - 1.0 / 3.0).abs() <= 1e-6);
}

/// `sum F(t_k) X_{k,k+1} + grad F(t_k) XX_{k,k+1}` on the refined lift.
fn compensated_sum(f: &dyn PathFunctional, rp: &RoughPath) -> f64 {
    let x = rp.base();
    let mut total = 0.0;
    for k in 0..x.len() - 1 {
        let s = StoppedPath::new(x, k);
        let dx = x.point(k + 1)[0] - x.point(k)[0];
        total += f.evaluate(&s)[0] * dx + f.vertical(&s).unwrap()[0] * rp.block(k)[0];
    }
    total
}

#[test]
fn smoothed_max_integral_against_fine_grid() {
    let rp = BrownianSpec::new(11, 256).build().unwrap();
    let f = smoothed_running_max(0.25, HShape::Quintic).unwrap();
    let z = integrate_functional(&f, &rp, 0.0, 1.0).unwrap().total()[0];
    let reference = compensated_sum(&f, &rp.refine(16).unwrap());
    assert!(
        (z - reference).abs() <= 1e-3 * reference.abs(),
        "{z} vs {reference}"
    );
}

#[test]
fn chain_rule_error_shrinks() {
    let err = |n: usize| {
        let x = DiscretePath::sample(n, 1.0, 1, |t| vec![(4.0 * t).sin()]).unwrap();
        let rp = smooth_lift(&x, 2.1).unwrap();
        let y = DiscretePath::scalar(
            x.times().to_vec(),
            x.values().iter().map(|v| 5.0 * v.powi(4)).collect(),
        )
        .unwrap();
        let yp = DiscretePath::scalar(
            x.times().to_vec(),
            x.values().iter().map(|v| 20.0 * v.powi(3)).collect(),
        )
        .unwrap();
        let z = rough_integrate(&ControlledPath::new(y, yp, &rp).unwrap(), &rp, 0.0, 1.0).unwrap();
        (z.total()[0] - (x.point(n)[0].powi(5) - x.point(0)[0].powi(5))).abs()
    };
    let (a, b, c) = (err(8), err(16), err(32));
    assert!(b < a && c < b, "{a} {b} {c}");
}

struct SinEndpoint;

impl PathFunctional for SinEndpoint {
    fn id(&self) -> String {
        "sin".into()
    }
    fn input_dim(&self) -> usize {
        1
    }
    fn output_dim(&self) -> usize {
        1
    }
    fn evaluate(&self, x: &StoppedPath) -> Vec<f64> {
        vec![x.terminal()[0].sin()]
    }
    fn vertical(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![x.terminal()[0].cos()])
    }
}

fn zero() -> Arc<Constant> {
    Arc::new(Constant::new(vec![0.0], 1))
}

#[test]
fn markovian_reduction_matches_closed_form() {
    // dY = sin(Y) dX along a geometric scalar path: tan(Y/2) = tan(xi/2) e^{X - X_0}.
    let rp = BrownianSpec::new(6, 256).build().unwrap();
    let xi = 1.0;
    let problem =
        RdeProblem::with_start(zero(), Arc::new(SinEndpoint), rp.clone(), vec![xi]).unwrap();
    let sol = solve(&problem, &SolveOptions::default()).unwrap();
    let x0 = rp.base().point(0)[0];
    let worst = (0..rp.len())
        .map(|k| {
            let exact = 2.0 * ((xi / 2.0).tan() * (rp.base().point(k)[0] - x0).exp()).atan();
            (sol.solution.y().point(k)[0] - exact).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst <= 1e-4, "{worst}");
}

fn exp_problem(n: usize) -> RdeProblem {
    let rp = smooth_lift(&linear(n), 2.1).unwrap();
    RdeProblem::with_start(zero(), Arc::new(Endpoint::identity(1)), rp, vec![1.0]).unwrap()
}

#[test]
fn exponential_error_decays() {
    let ns = [4usize, 8, 16, 32];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| {
            let sol = solve(&exp_problem(n), &SolveOptions::new(1e-14, 100)).unwrap();
            (sol.solution.y().point(n)[0] - std::f64::consts::E).abs()
        })
        .collect();
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let slope = loglog_slope(&h, &errs).unwrap();
    assert!(slope >= 1.0, "{errs:?} slope {slope}");
}

#[test]
fn euler_exact_for_additive_noise() {
    let rp = BrownianSpec::new(8, 32).build().unwrap();
    let problem = RdeProblem::with_start(
        zero(),
        Arc::new(Constant::new(vec![0.5], 1)),
        rp.clone(),
        vec![1.0],
    )
    .unwrap();
    let y = euler_level2(&problem, 256).unwrap();
    let x = rp.base();
    for k in 0..x.len() {
        let expected = 1.0 + 0.5 * (x.point(k)[0] - x.point(0)[0]);
        assert!((y.point(8 * k)[0] - expected).abs() < 1e-13);
    }
}

#[test]
fn euler_order_on_exponential() {
    let problem = exp_problem(8);
    let ns = [64usize, 128, 256, 512];
    let errs: Vec<f64> = ns
        .iter()
        .map(|&n| (euler_level2(&problem, n).unwrap().point(n)[0] - std::f64::consts::E).abs())
        .collect();
    let h: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    assert!(loglog_slope(&h, &errs).unwrap() >= 1.0, "{errs:?}");
}

#[test]
fn euler_self_convergence_for_smoothed_max() {
    let rp = BrownianSpec::new(3, 64).build().unwrap();
    let sigma = Arc::new(smoothed_running_max(0.5, HShape::Quintic).unwrap());
    let problem = RdeProblem::with_start(zero(), sigma, rp, vec![1.0]).unwrap();
    let ns = [256usize, 512, 1024, 2048];
    let paths: Vec<DiscretePath> = ns
        .iter()
        .map(|&n| euler_level2(&problem, n).unwrap())
        .collect();
    let plain: Vec<DiscretePath> = ns
        .iter()
        .map(|&n| euler_plain(&problem, n).unwrap())
        .collect();
    let gap = |ps: &[DiscretePath], i: usize| {
        let step = ns[i + 1] / 64;
        let coarse = ns[i] / 64;
        (0..=64)
            .map(|k| (ps[i + 1].point(k * step)[0] - ps[i].point(k * coarse)[0]).abs())
            .fold(0.0, f64::max)
    };
    let h: Vec<f64> = ns[..3].iter().map(|&n| 1.0 / n as f64).collect();
    let level2: Vec<f64> = (0..3).map(|i| gap(&paths, i)).collect();
    let slope = loglog_slope(&h, &level2).unwrap();
    assert!(slope >= 2.0 / 2.1 - 0.1, "{level2:?} slope {slope}");
    let first: Vec<f64> = (0..3).map(|i| gap(&plain, i)).collect();
    assert!(first[2] > level2[2], "{first:?} vs {level2:?}");
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let rp = BrownianSpec::new(3, 64).build().unwrap();
    let sigma = Arc::new(smoothed_running_max(0.5, HShape::Quintic).unwrap());
    let problem = RdeProblem::with_start(zero(), sigma, rp, vec![1.0]).unwrap();
    let err = solve(&problem, &SolveOptions::new(1e-30, 2)).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    match err {
        Error::NonConvergence(nc) => assert!(nc.iterations >= 1 && !nc.distances.is_empty()),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn accepted_windows_contract() {
    let rp = BrownianSpec::new(3, 256).build().unwrap();
    let sigma = Arc::new(smoothed_running_max(0.5, HShape::Quintic).unwrap());
    let smax = RdeProblem::with_start(zero(), sigma, rp, vec![1.0]).unwrap();
    for problem in [exp_problem(512), smax] {
        let sol = solve(&problem, &SolveOptions::default()).unwrap();
        for w in &sol.windows {
            for pair in w.distances.windows(2).skip(1) {
                assert!(pair[1] <= pair[0], "{:?}", w.distances);
            }
        }
        assert!(sol.remainder_var.is_finite());
    }
}
