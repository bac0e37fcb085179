//! Acceptance criteria C1-C11. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::sync::Arc;
use std::time::Instant;

use roughpd::controlled::{rho_control, ControlledPath};
use roughpd::functional::{
    discrete_time_functional, functional_remainder_idx, integral_functional, remainder_scaling,
    smoothed_running_max, Constant, Endpoint, HShape, PathFunctional, PhiFn, PsiFn, StoppedPath,
};
use roughpd::integral::{
    compose_controlled, integrate_functional, rough_integrate, rough_integrate_with, Compensation,
    IntegralOptions,
};
use roughpd::lift::{smooth_lift, BrownianSpec, RoughPath, CHEN_TOLERANCE};
use roughpd::oracle::{euler_level2, fd_derivative_check, pvar_bruteforce, OracleConfig};
use roughpd::path::{p_variation_exact, uniform_grid, vp_control, ControlTable, DiscretePath};
use roughpd::rde::{
    picard_iterates, solve, verify_solution, RdeProblem, RdeSolution, SolveOptions,
};
use roughpd::rng::CounterRng;
use roughpd::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_walk(seed: u64, n: usize, d: usize) -> DiscretePath {
    let rng = CounterRng::new(seed);
    let mut values = vec![0.0; (n + 1) * d];
    for k in 1..=n {
        for j in 0..d {
            values[k * d + j] =
                values[(k - 1) * d + j] + rng.normal((k * d + j) as u64) / (n as f64).sqrt();
        }
    }
    DiscretePath::new(uniform_grid(n, 1.0), values, d).unwrap()
}

fn c1_chen() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..20u64 {
        let mut paths: Vec<RoughPath> = Vec::new();
        for (n, d) in [(1024, 1), (512, 2), (256, 3)] {
            paths.push(BrownianSpec::new(seed, n).dim(d).build().unwrap());
            paths.push(smooth_lift(&random_walk(seed, n, d), 2.1).unwrap());
        }
        paths.push(
            BrownianSpec::new(seed, 128)
                .dim(2)
                .build()
                .unwrap()
                .refine(8)
                .unwrap(),
        );
        paths.push(
            BrownianSpec::new(seed, 1024)
                .dim(2)
                .build()
                .unwrap()
                .restrict(100, 900)
                .unwrap(),
        );
        for rp in &paths {
            worst = worst.max(rp.chen_defect());
            count += 1;
        }
    }
    outcome(
        worst <= CHEN_TOLERANCE,
        format!("{count} lifts, max chen_defect {worst:.2e}"),
    )
}

fn c2_pvar() -> Outcome {
    let config = OracleConfig::default();
    let ps = [1.0, 1.5, 2.0, 2.1, 2.5, 3.0];
    let mut mismatches = 0;
    for case in 0..500u64 {
        let rng = CounterRng::new(1000 + case);
        let len = 2 + (rng.bits(0) % 11) as usize;
        let d = 1 + (rng.bits(1) % 3) as usize;
        let times: Vec<f64> = (0..len).map(|k| k as f64).collect();
        let values = (0..len * d).map(|c| rng.normal(10 + c as u64)).collect();
        let path = DiscretePath::new(times, values, d).unwrap();
        let p = ps[case as usize % ps.len()];
        let dp = path.pvar_sum(p, 0, len - 1);
        let brute = pvar_bruteforce(&path, p, 0.0, (len - 1) as f64, &config).unwrap();
        if dp != brute {
            mismatches += 1;
        }
    }
    let mut monotone_ok = true;
    let up = DiscretePath::scalar(
        (0..9).map(f64::from).collect(),
        vec![0.0, 0.1, 0.15, 0.4, 0.41, 0.9, 1.3, 1.31, 2.0],
    )
    .unwrap();
    for p in [2.0, 2.2, 2.4] {
        monotone_ok &= p_variation_exact(&up, p, 0.0, 8.0).unwrap() == 2.0;
    }
    outcome(
        mismatches == 0 && monotone_ok,
        format!(
            "500 paths, {mismatches} DP/enumeration mismatches, monotone closed form {monotone_ok}"
        ),
    )
}

fn c3_superadditivity() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for seed in 0..20u64 {
        let rp = BrownianSpec::new(seed, 64).dim(2).build().unwrap();
        let vp = vp_control(rp.base(), 2.1).unwrap();
        worst = worst.max(ControlTable::new(&vp, 0, 64).superadditivity_gap());
        let rho = rho_control(&rp);
        worst = worst.max(ControlTable::new(&rho, 0, 64).superadditivity_gap());
    }
    outcome(
        worst <= 1e-12,
        format!("max w(t,u) + w(u,s) - w(t,s) = {worst:.2e}"),
    )
}

fn poly_integrand(rp: &RoughPath, f1: fn(f64) -> f64, f2: fn(f64) -> f64) -> ControlledPath {
    let x = rp.base();
    let y = DiscretePath::scalar(
        x.times().to_vec(),
        x.values().iter().map(|&v| f1(v)).collect(),
    )
    .unwrap();
    let yp = DiscretePath::scalar(
        x.times().to_vec(),
        x.values().iter().map(|&v| f2(v)).collect(),
    )
    .unwrap();
    ControlledPath::new(y, yp, rp).unwrap()
}

fn c4_calculus() -> Outcome {
    let x = DiscretePath::sample(64, 1.0, 1, |t| vec![(5.0 * t).sin() + 0.5 * t * t]).unwrap();
    let rp = smooth_lift(&x, 2.1).unwrap();
    let (x0, x1) = (x.point(0)[0], x.point(64)[0]);
    let square = poly_integrand(&rp, |v| 2.0 * v, |_| 2.0);
    let cube = poly_integrand(&rp, |v| 3.0 * v * v, |v| 6.0 * v);
    let textbook = IntegralOptions {
        compensation: Compensation::SecondOrder,
        defects: false,
    };
    let e_sq_textbook = (rough_integrate_with(&square, &rp, 0.0, 1.0, &textbook)
        .unwrap()
        .total()[0]
        - (x1 * x1 - x0 * x0))
        .abs();
    let e_sq =
        (rough_integrate(&square, &rp, 0.0, 1.0).unwrap().total()[0] - (x1 * x1 - x0 * x0)).abs();
    let e_cube = (rough_integrate(&cube, &rp, 0.0, 1.0).unwrap().total()[0]
        - (x1.powi(3) - x0.powi(3)))
    .abs();
    let smooth_ok = e_sq_textbook <= 1e-12 && e_sq <= 1e-8 && e_cube <= 1e-8;

    let mut min_slope = f64::INFINITY;
    for seed in 0..5u64 {
        let rp = BrownianSpec::new(seed, 1024).build().unwrap();
        let cube = poly_integrand(&rp, |v| 3.0 * v * v, |v| 6.0 * v);
        let r = rough_integrate(&cube, &rp, 0.0, 1.0).unwrap();
        min_slope = min_slope.min(r.defect_slope.unwrap_or(f64::NEG_INFINITY));
    }
    outcome(
        smooth_ok && min_slope >= 1.0 - 0.15,
        format!(
            "smooth errors x^2 textbook {e_sq_textbook:.1e}, x^2 {e_sq:.1e}, x^3 {e_cube:.1e}; \
             Brownian min defect slope {min_slope:.3} (need >= 0.85)"
        ),
    )
}

fn c5_functional_lift() -> Outcome {
    let p = 2.1;
    let target = (1.0 + 1.0 / p) / p - 0.15;
    let f = smoothed_running_max(0.25, HShape::Quintic).unwrap();
    let mut min_slope = f64::INFINITY;
    for seed in 0..10u64 {
        let rp = BrownianSpec::new(seed, 256).p(p).build().unwrap();
        let s = remainder_scaling(&f, rp.base(), p)
            .unwrap()
            .slope
            .unwrap_or(f64::NEG_INFINITY);
        min_slope = min_slope.min(s);
    }

    // R^{F(Y)}_{ts} = calR^F_{ts}(Y) + grad F(t, Y_t) R^Y_{ts} on every grid pair.
    let rp = BrownianSpec::new(5, 64).p(p).build().unwrap();
    let x = rp.base();
    let identity = ControlledPath::identity(&rp).unwrap();
    let y = DiscretePath::scalar(
        x.times().to_vec(),
        x.values().iter().map(|v| v.sin()).collect(),
    )
    .unwrap();
    let yp = DiscretePath::scalar(
        x.times().to_vec(),
        x.values().iter().map(|v| v.cos()).collect(),
    )
    .unwrap();
    let curved = ControlledPath::new(y, yp, &rp).unwrap();
    let mut worst: f64 = 0.0;
    for cp in [&identity, &curved] {
        let composed = compose_controlled(&f, cp).unwrap();
        for a in 0..x.len() {
            let grad = f.vertical(&StoppedPath::new(cp.y(), a)).unwrap()[0];
            for b in a..x.len() {
                let lhs = composed.remainder_idx(&rp, a, b)[0];
                let ry = cp.y().point(b)[0]
                    - cp.y().point(a)[0]
                    - cp.y_prime().point(a)[0] * (x.point(b)[0] - x.point(a)[0]);
                let rhs = functional_remainder_idx(&f, cp.y(), a, b).unwrap()[0] + grad * ry;
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    outcome(
        min_slope >= target && worst <= 1e-12,
        format!("min remainder slope {min_slope:.3} (need >= {target:.3}); decomposition gap {worst:.1e}"),
    )
}

fn c6_derivatives() -> Outcome {
    let config = OracleConfig::default();
    let paths: Vec<DiscretePath> = (0..4)
        .map(|s| {
            BrownianSpec::new(20 + s, 64)
                .build()
                .unwrap()
                .base()
                .clone()
        })
        .collect();
    let probes: Vec<StoppedPath> = paths
        .iter()
        .flat_map(|p| [5, 19, 32, 45, 63].map(|k| StoppedPath::new(p, k)))
        .collect();

    let smax = smoothed_running_max(0.25, HShape::Quintic).unwrap();
    let phi: PhiFn = Arc::new(|t, a| vec![a[0].sin() * a[1].cos() + t * a[0]]);
    let grad: PhiFn = Arc::new(|t, a| vec![a[0].cos() * a[1].cos() + t, -a[0].sin() * a[1].sin()]);
    let hess: PhiFn = Arc::new(|_, a| {
        let (s0, c0, s1, c1) = (a[0].sin(), a[0].cos(), a[1].sin(), a[1].cos());
        vec![-s0 * c1, -c0 * s1, -c0 * s1, -s0 * c1]
    });
    let dt: PhiFn = Arc::new(|_, a| vec![a[0]]);
    let discrete = discrete_time_functional(vec![0.3, 0.7], 1, 1, phi)
        .unwrap()
        .with_gradient(grad)
        .with_hessian(hess)
        .with_time_derivative(dt);
    let psi: PsiFn = Arc::new(|_, xs, y| vec![xs.terminal()[0] * y[0].sin()]);
    let psi_grad: PsiFn = Arc::new(|_, xs, y| vec![xs.terminal()[0] * y[0].cos()]);
    let psi_hess: PsiFn = Arc::new(|_, xs, y| vec![-xs.terminal()[0] * y[0].sin()]);
    let integral = integral_functional(1, 1, psi)
        .with_gradient(psi_grad)
        .with_hessian(psi_hess);

    let mut ok = true;
    let mut details = Vec::new();
    for (name, f) in [
        ("smax", &smax as &dyn PathFunctional),
        ("discrete", &discrete),
        ("integral", &integral),
    ] {
        let r = fd_derivative_check(f, &probes, &config).unwrap();
        let slope_ok = r.vertical_slope.map_or(false, |s| (s - 2.0).abs() <= 0.3);
        let horizontal_ok = r.horizontal_discrepancy.map_or(true, |h| h <= 1e-6);
        ok &= r.vertical_discrepancy <= 1e-6 && slope_ok && horizontal_ok;
        details.push(format!(
            "{name}: vertical {:.1e}, slope {}, horizontal {}",
            r.vertical_discrepancy,
            r.vertical_slope.map_or("n/a".into(), |s| format!("{s:.2}")),
            r.horizontal_discrepancy
                .map_or("n/a".into(), |h| format!("{h:.1e}")),
        ));
    }
    let mut boundary: f64 = 0.0;
    for eps in [0.1, 0.25, 0.5, 1.0] {
        let m = smoothed_running_max(eps, HShape::Quintic).unwrap();
        let l = 2.0 * eps;
        for v in [
            m.h(0.0),
            m.h1(0.0),
            m.h2(0.0),
            m.h(l) - eps,
            m.h1(l) - 1.0,
            m.h2(l),
        ] {
            boundary = boundary.max(v.abs());
        }
    }
    ok &= boundary <= 1e-12;
    details.push(format!("quintic boundary {boundary:.1e}"));
    outcome(ok, details.join("; "))
}

fn exponential_problem(n: usize) -> RdeProblem {
    let x = DiscretePath::sample(n, 1.0, 1, |t| vec![t]).unwrap();
    let rp = smooth_lift(&x, 2.1).unwrap();
    RdeProblem::with_start(
        Arc::new(Constant::new(vec![0.0], 1)),
        Arc::new(Endpoint::identity(1)),
        rp,
        vec![1.0],
    )
    .unwrap()
}

fn smax_problem() -> RdeProblem {
    let rp = BrownianSpec::new(3, 256).build().unwrap();
    RdeProblem::with_start(
        Arc::new(Constant::new(vec![0.0], 1)),
        Arc::new(smoothed_running_max(0.5, HShape::Quintic).unwrap()),
        rp,
        vec![1.0],
    )
    .unwrap()
}

fn history_problem() -> RdeProblem {
    let rp = BrownianSpec::new(9, 128).build().unwrap();
    let prefix: Vec<f64> = rp.times()[..=32].to_vec();
    let xi = DiscretePath::new(
        prefix.clone(),
        prefix.iter().map(|t| 1.0 + (3.0 * t).sin()).collect(),
        1,
    )
    .unwrap();
    RdeProblem::new(
        Arc::new(Constant::new(vec![0.3], 1)),
        Arc::new(smoothed_running_max(0.25, HShape::Quintic).unwrap()),
        rp,
        xi,
    )
    .unwrap()
}

fn c7_exponential(sol: &RdeSolution, problem: &RdeProblem) -> Outcome {
    let n = 512;
    let err = (sol.solution.y().point(n)[0] - std::f64::consts::E).abs();
    let iterates = picard_iterates(problem, 6).unwrap();
    let dt = 1.0 / n as f64;
    let grid_error = std::f64::consts::E * dt.powi(4) / 720.0;
    let tol = 10.0 * grid_error.max(1e-12);
    let mut worst: f64 = 0.0;
    for (k, it) in iterates.iter().enumerate() {
        for (u, &t) in problem.driver().times().iter().enumerate() {
            let mut taylor = 0.0;
            let mut term = 1.0;
            for j in 0..=k {
                if j > 0 {
                    term *= t / j as f64;
                }
                taylor += term;
            }
            worst = worst.max((it.y().point(u)[0] - taylor).abs());
        }
    }
    outcome(
        err <= 1e-6 && worst <= tol,
        format!("|Y(1) - e| = {err:.1e}; Picard vs Taylor max gap {worst:.1e} (tol {tol:.1e})"),
    )
}

fn c8_cross_check(sol: &RdeSolution, problem: &RdeProblem) -> Outcome {
    let fine = euler_level2(problem, 8192).unwrap();
    let m = 8192 / 256;
    let scale = (0..=256)
        .map(|u| fine.point(u * m)[0].abs())
        .fold(0.0, f64::max);
    let err = (0..=256)
        .map(|u| (sol.solution.y().point(u)[0] - fine.point(u * m)[0]).abs())
        .fold(0.0, f64::max)
        / scale;
    let again = solve(problem, &SolveOptions::default()).unwrap();
    let same = again.solution.y() == sol.solution.y()
        && again.solution.y_prime() == sol.solution.y_prime();
    outcome(
        err <= 5e-3 && same,
        format!("relative sup error {err:.2e} (need <= 5e-3); rerun identical {same}"),
    )
}

fn c9_verification(cases: &[(&str, &RdeProblem, &RdeSolution)], tol: f64) -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for (name, problem, sol) in cases {
        let r = verify_solution(problem, &sol.solution, tol).unwrap();
        ok &= r.passed;
        details.push(format!(
            "{name}: defect {:.1e}, Y' gap {:.1e}, history {}",
            r.controlled_defect, r.derivative_defect, r.history_ok
        ));
    }
    outcome(ok, details.join("; "))
}

fn c10_set_a(cases: &[(&str, &RdeSolution)]) -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    for (name, sol) in cases {
        let worst = sol
            .windows
            .iter()
            .map(|w| w.set_a_seminorm)
            .fold(0.0, f64::max);
        ok &= sol.windows.iter().all(|w| w.set_a_ok) && worst <= 1.0;
        details.push(format!(
            "{name}: {} windows, max seminorm {worst:.3}",
            sol.windows.len()
        ));
    }
    outcome(ok, details.join("; "))
}

fn c11_guards() -> Outcome {
    let rp = BrownianSpec::new(1, 64)
        .build()
        .unwrap()
        .with_p(2.5)
        .unwrap();
    let f = smoothed_running_max(0.25, HShape::Quintic).unwrap();
    let integral = integrate_functional(&f, &rp, 0.0, 1.0);
    let integral_code = integral.as_ref().err().map(Error::exit_code);
    let problem = exponential_problem(16).with_p(2.5).unwrap();
    let solved = solve(&problem, &SolveOptions::default());
    let solve_code = solved.as_ref().err().map(Error::exit_code);
    let guards_ok = matches!(integral, Err(Error::Guard(_)))
        && matches!(solved, Err(Error::Guard(_)))
        && integral_code == Some(2)
        && solve_code == Some(2);

    let mut detected = 0;
    let trials = 10;
    for seed in 0..trials {
        let mut rp = BrownianSpec::new(seed, 256).dim(2).build().unwrap();
        let k = (seed as usize * 37) % 256;
        rp.block_mut(k)[1] += 1e-6;
        if rp.chen_defect() >= CHEN_TOLERANCE {
            detected += 1;
        }
    }
    outcome(
        guards_ok && detected == trials,
        format!(
            "p = 2.5 rejected with exit code {integral_code:?}/{solve_code:?}; \
             {detected}/{trials} corrupted lifts detected"
        ),
    )
}

fn main() {
    let start = Instant::now();
    let tol = SolveOptions::default().tol;
    let exp_problem = exponential_problem(512);
    let exp_sol = solve(&exp_problem, &SolveOptions::default()).unwrap();
    let smax = smax_problem();
    let smax_sol = solve(&smax, &SolveOptions::default()).unwrap();
    let hist = history_problem();
    let hist_sol = solve(&hist, &SolveOptions::default()).unwrap();

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("C1 Chen consistency", Box::new(c1_chen)),
        ("C2 p-variation exactness", Box::new(c2_pvar)),
        ("C3 superadditivity", Box::new(c3_superadditivity)),
        ("C4 rough-integral calculus", Box::new(c4_calculus)),
        ("C5 functional lift", Box::new(c5_functional_lift)),
        ("C6 derivative correctness", Box::new(c6_derivatives)),
        (
            "C7 exponential fixture",
            Box::new(|| c7_exponential(&exp_sol, &exp_problem)),
        ),
        (
            "C8 path-dependent cross-check",
            Box::new(|| c8_cross_check(&smax_sol, &smax)),
        ),
        (
            "C9 solution verification",
            Box::new(|| {
                c9_verification(
                    &[
                        ("exp", &exp_problem, &exp_sol),
                        ("smax", &smax, &smax_sol),
                        ("history", &hist, &hist_sol),
                    ],
                    tol,
                )
            }),
        ),
        (
            "C10 set-A echo",
            Box::new(|| c10_set_a(&[("exp", &exp_sol), ("smax", &smax_sol)])),
        ),
        ("C11 guards", Box::new(c11_guards)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "acceptance: {failed} failing, {:.1}s total",
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
