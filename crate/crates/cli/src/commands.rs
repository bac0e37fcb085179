//! The six subcommands.

use std::sync::Arc;

use serde::Serialize;

use roughpd::functional::{
    parse_functional, regularity_report, remainder_scaling, ReportConfig, StoppedPath,
};
use roughpd::integral::{check_functional_p, integrate_functional_with, IntegralOptions};
use roughpd::lift::{smooth_lift, BrownianSpec};
use roughpd::oracle::{euler_level2, fd_derivative_check, pvar_bruteforce, FdReport};
use roughpd::path::{p_variation_exact, p_variation_greedy, DiscretePath};
use roughpd::rde::{solve as solve_rde, NonConvergence, SolveOptions, WindowReport};
use roughpd::stats::loglog_slope;
use roughpd::{Error, PathFunctional, RdeProblem, RoughPath};

use crate::config::{load_input_path, DriverSpec, ExperimentConfig};
use crate::error::{CliError, CliResult};
use crate::Sink;

/// Above this many intervals `pvar` reports the greedy bound only.
pub const EXACT_PVAR_LIMIT: usize = 4096;

/// Relative sup error allowed between the solver and the fine Euler scheme.
pub const EULER_TOLERANCE: f64 = 5e-3;

const PROBE_INTERVALS: usize = 64;
const STOPS_PER_PROBE: usize = 8;
const DEFAULT_PROBES: usize = 3;
const DEFAULT_SMAX: &str = "smax:eps=0.25:quintic";

/// Shortest round-trip rendering.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn csv(comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut s = String::new();
    for c in comments {
        s.push_str("# ");
        s.push_str(c);
        s.push('\n');
    }
    s.push_str(&header.join(","));
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s.into_bytes()
}

fn provenance(command: &str, config: &ExperimentConfig) -> CliResult<Vec<String>> {
    Ok(vec![
        format!("roughpd {command} {}", env!("CARGO_PKG_VERSION")),
        format!("config-sha256 {}", config.hash(command)?),
    ])
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    config: &'a ExperimentConfig,
    result: T,
}

fn json<T: Serialize>(command: &str, config: &ExperimentConfig, result: T) -> CliResult<Vec<u8>> {
    let env = Envelope {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config_sha256: config.hash(command)?,
        config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&env).map_err(Error::from)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn path_rows(path: &DiscretePath) -> Vec<Vec<String>> {
    (0..path.len())
        .map(|k| {
            let mut row = vec![num(path.time(k))];
            row.extend(path.point(k).iter().map(|v| num(*v)));
            row
        })
        .collect()
}

fn column_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

fn span(config: &ExperimentConfig, times: &[f64]) -> [f64; 2] {
    config
        .interval
        .unwrap_or([times[0], times[times.len() - 1]])
}

fn functional(id: &str, k: usize, m: usize) -> CliResult<Arc<dyn PathFunctional>> {
    Ok(Arc::from(parse_functional(id, k, m)?))
}

fn brownian_probes(config: &ExperimentConfig) -> CliResult<Vec<DiscretePath>> {
    let seed = config.seed.unwrap_or(0);
    let count = config.probes.unwrap_or(DEFAULT_PROBES);
    if count == 0 {
        return Err(CliError::Usage("probes must be positive".into()));
    }
    (0..count as u64)
        .map(|i| {
            Ok(BrownianSpec::new(seed + i, PROBE_INTERVALS)
                .p(config.p())
                .build()?
                .base()
                .clone())
        })
        .collect()
}

fn driver(config: &ExperimentConfig) -> CliResult<RoughPath> {
    let spec = ExperimentConfig::require(&config.driver, "driver")?;
    DriverSpec::parse_strict(spec)?.build(config.p())
}

fn problem(config: &ExperimentConfig) -> CliResult<RdeProblem> {
    let rp = driver(config)?;
    let xi = ExperimentConfig::require(&config.xi, "xi")?.clone();
    let (k, d) = (xi.len(), rp.dim());
    let sigma = functional(ExperimentConfig::require(&config.sigma, "sigma")?, k, k * d)?;
    let drift = functional(config.b.as_deref().unwrap_or("zero"), k, k)?;
    Ok(RdeProblem::with_start(drift, sigma, rp, xi)?)
}

fn solve_options(config: &ExperimentConfig) -> SolveOptions {
    let d = SolveOptions::default();
    SolveOptions::new(
        config.tol.unwrap_or(d.tol),
        config.max_iter.unwrap_or(d.max_iter),
    )
}

pub fn pvar(config: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let file = ExperimentConfig::require(&config.path, "path")?;
    let path = load_input_path(file)?;
    let oracle = config.oracle_config()?;
    let exponents = config.exponents.clone().unwrap_or_else(|| vec![config.p()]);
    let [t, s] = span(config, path.times());
    let (lo, hi) = path.interval(t, s)?;
    let approximate = path.len() - 1 > EXACT_PVAR_LIMIT;
    let mut rows = Vec::new();
    for &p in &exponents {
        let exact = if approximate {
            String::new()
        } else {
            num(p_variation_exact(&path, p, t, s)?)
        };
        let greedy = num(p_variation_greedy(&path, p, t, s)?);
        let brute = if hi - lo < oracle.enumeration_cap {
            num(pvar_bruteforce(&path, p, t, s, &oracle)?.powf(1.0 / p))
        } else {
            String::new()
        };
        rows.push(vec![
            num(p),
            num(t),
            num(s),
            exact,
            greedy,
            brute,
            approximate.to_string(),
        ]);
    }
    let mut comments = provenance("pvar", config)?;
    if approximate {
        comments.push(format!(
            "approximate: {} intervals exceed {EXACT_PVAR_LIMIT}, exact column left empty",
            path.len() - 1
        ));
    }
    let header = [
        "p",
        "t",
        "s",
        "exact",
        "greedy",
        "bruteforce",
        "approximate",
    ];
    sink.primary("pvar.csv", &csv(&comments, &header, &rows))
}

#[derive(Serialize)]
struct IntegrateSummary<'a> {
    functional: &'a str,
    p: f64,
    interval: [f64; 2],
    intervals: usize,
    total: Vec<f64>,
    defect_slope: Option<f64>,
    estimate_terms: Option<roughpd::integral::EstimateTerms>,
    compensation: roughpd::Compensation,
    chen_defect: f64,
}

pub fn integrate(config: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let p = config.p();
    check_functional_p(p)?;
    let rp = match &config.path {
        Some(file) => smooth_lift(&load_input_path(file)?, p)?,
        None => driver(config)?,
    };
    let id = ExperimentConfig::require(&config.functional, "functional")?;
    let d = rp.dim();
    let f = functional(id, d, d)?;
    let [t, s] = span(config, rp.times());
    let r = integrate_functional_with(f.as_ref(), &rp, t, s, &IntegralOptions::default())?;

    let comments = provenance("integrate", config)?;
    let mut header = vec!["t".to_string()];
    header.extend(column_names("Z", r.value.dim()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.primary(
        "integrate.csv",
        &csv(&comments, &header, &path_rows(&r.value)),
    )?;

    let defects: Vec<Vec<String>> = r
        .local_defects
        .iter()
        .map(|x| vec![num(x.t), num(x.s), num(x.defect), num(x.rho)])
        .collect();
    sink.secondary(
        "integrate_defects.csv",
        &csv(&comments, &["t", "s", "defect", "rho"], &defects),
    )?;
    let summary = IntegrateSummary {
        functional: id,
        p,
        interval: [t, s],
        intervals: r.value.len() - 1,
        total: r.total().to_vec(),
        defect_slope: r.defect_slope,
        estimate_terms: r.estimate_terms,
        compensation: r.compensation,
        chen_defect: rp.chen_defect(),
    };
    sink.secondary("integrate.json", &json("integrate", config, summary)?)
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    converged: bool,
    residual: Option<f64>,
    remainder_var: Option<f64>,
    windows: &'a [WindowReport],
    failure: Option<&'a NonConvergence>,
}

pub fn solve(config: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let problem = problem(config)?;
    let sol = match solve_rde(&problem, &solve_options(config)) {
        Ok(sol) => sol,
        Err(Error::NonConvergence(nc)) => {
            let summary = SolveSummary {
                converged: false,
                residual: None,
                remainder_var: None,
                windows: &nc.accepted,
                failure: Some(&nc),
            };
            let report = json("solve", config, summary)?;
            sink.secondary("solve.json", &report)?;
            sink.note(&String::from_utf8_lossy(&report))?;
            return Err(Error::NonConvergence(nc).into());
        }
        Err(e) => return Err(e.into()),
    };
    let (y, yp) = (sol.solution.y(), sol.solution.y_prime());
    let mut header = vec!["t".to_string()];
    header.extend(column_names("Y", y.dim()));
    header.extend(column_names("Yprime", yp.dim()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..y.len())
        .map(|k| {
            let mut row = vec![num(y.time(k))];
            row.extend(y.point(k).iter().chain(yp.point(k)).map(|v| num(*v)));
            row
        })
        .collect();
    sink.primary(
        "solve.csv",
        &csv(&provenance("solve", config)?, &header, &rows),
    )?;
    let summary = SolveSummary {
        converged: true,
        residual: Some(sol.residual),
        remainder_var: Some(sol.remainder_var),
        windows: &sol.windows,
        failure: None,
    };
    sink.secondary("solve.json", &json("solve", config, summary)?)
}

/// Local slopes `log(e_prev / e) / log(x / x_prev)` of a decreasing error.
fn local_slopes(x: &[f64], e: &[f64]) -> Vec<String> {
    (0..x.len())
        .map(|i| {
            if i == 0 || e[i] <= 0.0 || e[i - 1] <= 0.0 {
                String::new()
            } else {
                num((e[i - 1] / e[i]).ln() / (x[i] / x[i - 1]).ln())
            }
        })
        .collect()
}

/// Error of the solver on `dY = Y dX`, `X(t) = t`, `Y(0) = 1`, at `t = 1`.
pub fn exp_ode_error(n: usize, p: f64) -> CliResult<f64> {
    let rp = DriverSpec::Linear(n).build(p)?;
    let problem = RdeProblem::with_start(
        functional("zero", 1, 1)?,
        functional("x", 1, 1)?,
        rp,
        vec![1.0],
    )?;
    let sol = solve_rde(&problem, &SolveOptions::new(1e-14, 200))?;
    Ok((sol.solution.y().point(n)[0] - std::f64::consts::E).abs())
}

pub fn convergence(config: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let study = ExperimentConfig::require(&config.study, "study")?.as_str();
    let p = config.p();
    let seed = config.seed.unwrap_or(0);
    let mut comments = provenance("convergence", config)?;
    comments.push(format!("study {study}"));
    let (header, rows): (Vec<&str>, Vec<Vec<String>>) = match study {
        "exp-ode" => {
            let sizes = [4usize, 8, 16, 32, 64];
            let n: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
            let errors = sizes
                .iter()
                .map(|&n| exp_ode_error(n, p))
                .collect::<CliResult<Vec<f64>>>()?;
            let slope = loglog_slope(&n, &errors).map(|s| -s);
            let mut rows: Vec<Vec<String>> = sizes
                .iter()
                .zip(&errors)
                .zip(local_slopes(&n, &errors))
                .map(|((n, e), s)| vec![n.to_string(), num(*e), s])
                .collect();
            rows.push(vec![
                "fit".into(),
                String::new(),
                slope.map_or("n/a".into(), num),
            ]);
            comments.push("target slope >= 1".into());
            (vec!["n", "error", "slope"], rows)
        }
        "chen-defect" => {
            let mut rows = Vec::new();
            let mut worst: f64 = 0.0;
            for j in 6..=12 {
                let n = 1usize << j;
                let defect = BrownianSpec::new(seed, n)
                    .dim(2)
                    .p(p)
                    .build()?
                    .chen_defect();
                worst = worst.max(defect);
                rows.push(vec![n.to_string(), num(defect), String::new()]);
            }
            rows.push(vec!["fit".into(), String::new(), "n/a".into()]);
            comments.push(format!("max defect {} (target <= 1e-12)", num(worst)));
            (vec!["n", "error", "slope"], rows)
        }
        "remainder-scaling" => {
            let id = config.functional.as_deref().unwrap_or(DEFAULT_SMAX);
            let f = functional(id, 1, 1)?;
            let rp = BrownianSpec::new(seed, 256).p(p).build()?;
            let study = remainder_scaling(f.as_ref(), rp.base(), p)?;
            let slopes = local_slopes(&study.omega, &study.remainder);
            let mut rows: Vec<Vec<String>> = (0..study.omega.len())
                .map(|i| {
                    vec![
                        (1usize << i).to_string(),
                        num(study.omega[i]),
                        num(study.remainder[i]),
                        // Remainders grow with omega, so flip the sign back.
                        slopes[i].parse::<f64>().map_or(String::new(), |s| num(-s)),
                    ]
                })
                .collect();
            rows.push(vec![
                "fit".into(),
                String::new(),
                String::new(),
                study.slope.map_or("n/a".into(), num),
            ]);
            comments.push(format!(
                "functional {id}, brownian seed {seed}, 256 intervals"
            ));
            comments.push(format!(
                "target slope >= {}",
                num((1.0 + 1.0 / p) / p - 0.15)
            ));
            (vec!["n", "omega", "error", "slope"], rows)
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown study '{other}'; expected exp-ode, chen-defect or remainder-scaling"
            )))
        }
    };
    sink.primary("convergence.csv", &csv(&comments, &header, &rows))
}

#[derive(Serialize)]
struct PvarCheck {
    p: f64,
    dynamic_programming: f64,
    enumeration: f64,
    equal: bool,
}

#[derive(Serialize)]
struct SolverCheck {
    fine_steps: usize,
    relative_sup_error: f64,
    tolerance: f64,
}

#[derive(Serialize)]
struct CheckReport {
    pvar: Option<Vec<PvarCheck>>,
    derivatives: Option<FdReport>,
    solver: Option<SolverCheck>,
    passed: bool,
}

pub fn check(config: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let oracle = config.oracle_config()?;
    let mut passed = true;
    let mut report = CheckReport {
        pvar: None,
        derivatives: None,
        solver: None,
        passed,
    };
    if let Some(file) = &config.path {
        let path = load_input_path(file)?;
        let hi = path.len() - 1;
        let (t, s) = (path.first_time(), path.last_time());
        let exponents = config.exponents.clone().unwrap_or_else(|| vec![config.p()]);
        let mut rows = Vec::new();
        for p in exponents {
            let dp = path.pvar_sum(p, 0, hi);
            let enumeration = pvar_bruteforce(&path, p, t, s, &oracle)?;
            passed &= dp == enumeration;
            rows.push(PvarCheck {
                p,
                dynamic_programming: dp,
                enumeration,
                equal: dp == enumeration,
            });
        }
        report.pvar = Some(rows);
    }
    if let Some(id) = &config.functional {
        let f = functional(id, 1, 1)?;
        let probes = brownian_probes(config)?;
        let stops: Vec<StoppedPath> = probes
            .iter()
            .flat_map(|x| {
                (1..=STOPS_PER_PROBE)
                    .map(move |j| StoppedPath::new(x, j * (x.len() - 1) / STOPS_PER_PROBE))
            })
            .collect();
        let fd = fd_derivative_check(f.as_ref(), &stops, &oracle)?;
        passed &= fd.vertical_discrepancy <= 1e-6
            && fd.horizontal_discrepancy.map_or(true, |h| h <= 1e-3)
            && fd.unstable == 0;
        report.derivatives = Some(fd);
    }
    if config.sigma.is_some() {
        let problem = problem(config)?;
        let sol = solve_rde(&problem, &solve_options(config))?;
        let m = oracle.refinement_factor;
        let intervals = problem.driver().len() - 1;
        let fine = euler_level2(&problem, intervals * m)?;
        let y = sol.solution.y();
        let (mut err, mut scale): (f64, f64) = (0.0, 0.0);
        for u in 0..=intervals {
            for (a, b) in y.point(u).iter().zip(fine.point(u * m)) {
                err = err.max((a - b).abs());
                scale = scale.max(b.abs());
            }
        }
        let relative = err / scale.max(f64::MIN_POSITIVE);
        passed &= relative <= EULER_TOLERANCE;
        report.solver = Some(SolverCheck {
            fine_steps: intervals * m,
            relative_sup_error: relative,
            tolerance: EULER_TOLERANCE,
        });
    }
    if report.pvar.is_none() && report.derivatives.is_none() && report.solver.is_none() {
        return Err(CliError::Usage(
            "nothing to check; give --path, --functional, or --driver with --sigma and --xi".into(),
        ));
    }
    report.passed = passed;
    sink.primary("check.json", &json("check", config, report)?)
}

pub fn report(config: &ExperimentConfig, sink: &mut Sink) -> CliResult<()> {
    let id = ExperimentConfig::require(&config.functional, "functional")?;
    let f = functional(id, 1, 1)?;
    let probes = brownian_probes(config)?;
    let rc = ReportConfig {
        p: config.p(),
        ..ReportConfig::default()
    };
    let r = regularity_report(f.as_ref(), &probes, &rc)?;
    sink.primary("report.json", &json("report", config, r)?)
}
