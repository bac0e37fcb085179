//! Brute-force references for tests: exhaustive partition enumeration,
//! Riemann-Stieltjes sums, finite differences and a fine-grid one-step RDE
//! scheme. None of these share norm or integration code with the modules
//! they check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{PathFunctional, StoppedPath};
use crate::path::DiscretePath;
use crate::rde::RdeProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleConfig {
    pub refinement_factor: usize,
    pub enumeration_cap: usize,
    pub fd_step: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            refinement_factor: 64,
            enumeration_cap: 12,
            fd_step: 1e-5,
        }
    }
}

impl OracleConfig {
    pub fn new(refinement_factor: usize, enumeration_cap: usize, fd_step: f64) -> Result<Self> {
        let c = OracleConfig {
            refinement_factor,
            enumeration_cap,
            fd_step,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement_factor < 2 {
            return Err(Error::domain("refinement_factor must be at least 2"));
        }
        if self.enumeration_cap > 16 {
            return Err(Error::Guard(format!(
                "enumeration_cap {} exceeds 16",
                self.enumeration_cap
            )));
        }
        if !(self.fd_step > 0.0) {
            return Err(Error::domain("fd_step must be positive"));
        }
        Ok(())
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += (x - y) * (x - y);
    }
    acc.sqrt()
}

/// Largest `sum |X_{t_k t_{k+1}}|^p` over all sub-partitions of the grid
/// points in `[t, s]` (the p-th power of the p-variation norm).
pub fn pvar_bruteforce(
    path: &DiscretePath,
    p: f64,
    t: f64,
    s: f64,
    config: &OracleConfig,
) -> Result<f64> {
    let times = path.times();
    let lo = times.iter().position(|&u| u >= t);
    let hi = times.iter().rposition(|&u| u <= s);
    let (lo, hi) = match (lo, hi) {
        (Some(lo), Some(hi)) if lo <= hi => (lo, hi),
        _ => return Err(Error::domain("interval contains no grid points")),
    };
    let count = hi - lo + 1;
    if count > config.enumeration_cap.min(16) {
        return Err(Error::Guard(format!(
            "{count} grid points exceed the enumeration cap {}",
            config.enumeration_cap
        )));
    }
    if count == 1 {
        return Ok(0.0);
    }
    let inner = count - 2;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1u32 << inner) {
        let mut sum = 0.0;
        let mut prev = lo;
        for b in 0..inner {
            if mask & (1 << b) != 0 {
                let k = lo + 1 + b;
                sum += euclid(path.point(k), path.point(prev)).powf(p);
                prev = k;
            }
        }
        sum += euclid(path.point(hi), path.point(prev)).powf(p);
        best = best.max(sum);
    }
    Ok(best)
}

/// Piecewise-linear refinement with `factor` sub-steps per interval.
pub fn refine_linear(path: &DiscretePath, factor: usize) -> Result<DiscretePath> {
    if factor == 0 {
        return Err(Error::domain("refinement factor must be positive"));
    }
    let d = path.dim();
    let mut times = Vec::with_capacity((path.len() - 1) * factor + 1);
    let mut values = Vec::with_capacity(((path.len() - 1) * factor + 1) * d);
    for k in 0..path.len() - 1 {
        let (t0, t1) = (path.time(k), path.time(k + 1));
        let (a, b) = (path.point(k), path.point(k + 1));
        for j in 0..factor {
            let w = j as f64 / factor as f64;
            times.push(t0 + w * (t1 - t0));
            values.extend(a.iter().zip(b).map(|(x, y)| x + w * (y - x)));
        }
    }
    times.push(path.last_time());
    values.extend_from_slice(path.point(path.len() - 1));
    DiscretePath::new(times, values, d)
}

/// Midpoint Riemann-Stieltjes sum `sum (f_k + f_{k+1})/2 . X_{t_k t_{k+1}}`.
///
/// `integrand` has dimension `k * d` laid out `[l * d + j]`; the result has
/// dimension `k`.
pub fn rs_integral(integrand: &DiscretePath, path: &DiscretePath) -> Result<Vec<f64>> {
    let d = path.dim();
    if integrand.times() != path.times() {
        return Err(Error::domain(
            "integrand and integrator must share the grid",
        ));
    }
    if integrand.dim() % d != 0 {
        return Err(Error::domain("integrand dimension must be a multiple of d"));
    }
    let k = integrand.dim() / d;
    let mut out = vec![0.0; k];
    for n in 0..path.len() - 1 {
        let (f0, f1) = (integrand.point(n), integrand.point(n + 1));
        let (x0, x1) = (path.point(n), path.point(n + 1));
        for l in 0..k {
            for j in 0..d {
                out[l] += 0.5 * (f0[l * d + j] + f1[l * d + j]) * (x1[j] - x0[j]);
            }
        }
    }
    Ok(out)
}

fn one_step_scheme(problem: &RdeProblem, n_fine: usize, level2: bool) -> Result<DiscretePath> {
    let coarse = problem.driver();
    let intervals = coarse.len() - 1;
    if n_fine == 0 || n_fine % intervals != 0 {
        return Err(Error::domain(format!(
            "n_fine {n_fine} is not a multiple of the {intervals} driver intervals"
        )));
    }
    let m = n_fine / intervals;
    let fine = coarse.refine(m)?;
    let (k, d) = (problem.dim(), fine.dim());
    let horizon = fine.base().last_time();
    let times = fine.times();
    let n = times.len();

    let history = refine_linear(problem.initial(), m)?;
    let i0 = history.len() - 1;
    let mut y = vec![0.0; n * k];
    y[..history.values().len()].copy_from_slice(history.values());

    let sigma = problem.sigma();
    let drift = problem.drift();
    for u in i0..n - 1 {
        let (s, g, b) = {
            let x = StoppedPath::from_slices(&times[..=u], &y[..(u + 1) * k], k, horizon);
            let g = if level2 {
                Some(sigma.vertical(&x).ok_or_else(|| {
                    Error::Capability(format!(
                        "sigma '{}' has no analytic vertical derivative",
                        sigma.id()
                    ))
                })?)
            } else {
                None
            };
            (sigma.evaluate(&x), g, drift.evaluate(&x))
        };
        let dt = times[u + 1] - times[u];
        let dx = fine.increment(u, u + 1);
        let area = fine.block(u);
        for l in 0..k {
            let mut next = y[u * k + l] + b[l] * dt;
            for j in 0..d {
                next += s[l * d + j] * dx[j];
            }
            if let Some(g) = &g {
                // (grad sigma . sigma)[(l, j), i] contracted with XX^{ij}.
                for j in 0..d {
                    for i in 0..d {
                        let mut coef = 0.0;
                        for c in 0..k {
                            coef += g[(l * d + j) * k + c] * s[c * d + i];
                        }
                        next += coef * area[i * d + j];
                    }
                }
            }
            y[(u + 1) * k + l] = next;
        }
    }
    DiscretePath::new(times.to_vec(), y, k)
}

/// `Y_{k+1} = Y_k + b dt + sigma dX + (grad sigma . sigma) XX` on the
/// Chen refinement of the driver with `n_fine` intervals.
pub fn euler_level2(problem: &RdeProblem, n_fine: usize) -> Result<DiscretePath> {
    one_step_scheme(problem, n_fine, true)
}

/// The same scheme without the second-level term.
pub fn euler_plain(problem: &RdeProblem, n_fine: usize) -> Result<DiscretePath> {
    one_step_scheme(problem, n_fine, false)
}

/// Outcome of [`fd_derivative_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub probes: usize,
    /// Max `|analytic - central difference at fd_step|` for the vertical
    /// gradient.
    pub vertical_discrepancy: f64,
    /// `log2(err(H) / err(H/2))` at the probe with the largest `err(H)`,
    /// `H = 1e-2`; `None` when every error is at round-off level.
    pub vertical_slope: Option<f64>,
    /// Max `|analytic - forward difference at fd_step|`, when a horizontal
    /// derivative is declared.
    pub horizontal_discrepancy: Option<f64>,
    /// Probes whose one-sided vertical differences disagree.
    pub unstable: usize,
}

const RICHARDSON_STEP: f64 = 1e-2;

fn bumped_value(f: &dyn PathFunctional, x: &StoppedPath, j: usize, h: f64) -> Vec<f64> {
    let mut bump = vec![0.0; x.dim()];
    if let Some(b) = x.bump() {
        bump.copy_from_slice(b);
    }
    bump[j] += h;
    f.evaluate(&x.with_bump(&bump))
}

fn central_gradient(f: &dyn PathFunctional, x: &StoppedPath, h: f64) -> Vec<f64> {
    let (k, m) = (x.dim(), f.output_dim());
    let mut g = vec![0.0; m * k];
    for j in 0..k {
        let up = bumped_value(f, x, j, h);
        let down = bumped_value(f, x, j, -h);
        for o in 0..m {
            g[o * k + j] = (up[o] - down[o]) / (2.0 * h);
        }
    }
    g
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Compares declared derivatives with finite differences over `probes`.
pub fn fd_derivative_check(
    f: &dyn PathFunctional,
    probes: &[StoppedPath],
    config: &OracleConfig,
) -> Result<FdReport> {
    let h = config.fd_step;
    let mut vertical_discrepancy: f64 = 0.0;
    let mut horizontal: Option<f64> = None;
    let mut unstable = 0;
    let mut richardson: Option<(f64, f64)> = None;
    for x in probes {
        let Some(analytic) = f.vertical(x) else {
            return Err(Error::Capability(format!(
                "'{}' has no analytic vertical derivative",
                f.id()
            )));
        };
        vertical_discrepancy =
            vertical_discrepancy.max(max_gap(&analytic, &central_gradient(f, x, h)));

        let base = f.evaluate(x);
        for j in 0..x.dim() {
            let up = bumped_value(f, x, j, h);
            let down = bumped_value(f, x, j, -h);
            let fwd: Vec<f64> = up.iter().zip(&base).map(|(a, b)| (a - b) / h).collect();
            let bwd: Vec<f64> = base.iter().zip(&down).map(|(a, b)| (a - b) / h).collect();
            let scale = 1.0 + base.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if max_gap(&fwd, &bwd) > (100.0 * h * scale).max(1e-6) {
                unstable += 1;
                break;
            }
        }

        let e1 = max_gap(&analytic, &central_gradient(f, x, RICHARDSON_STEP));
        let e2 = max_gap(&analytic, &central_gradient(f, x, 0.5 * RICHARDSON_STEP));
        if e1 > 1e-9 && richardson.map_or(true, |(best, _)| e1 > best) {
            richardson = Some((e1, (e1 / e2).log2()));
        }

        if let Some(dt) = f.horizontal(x) {
            if let Ok(later) = x.advanced(h) {
                let ahead = f.evaluate(&later);
                let fd: Vec<f64> = ahead.iter().zip(&base).map(|(a, b)| (a - b) / h).collect();
                let gap = max_gap(&dt, &fd);
                horizontal = Some(horizontal.map_or(gap, |g| g.max(gap)));
            }
        }
    }
    Ok(FdReport {
        probes: probes.len(),
        vertical_discrepancy,
        vertical_slope: richardson.map(|(_, s)| s),
        horizontal_discrepancy: horizontal,
        unstable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bruteforce_small_cases() {
        let c = OracleConfig::default();
        let zigzag = DiscretePath::scalar(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(pvar_bruteforce(&zigzag, 2.0, 0.0, 2.0, &c).unwrap(), 2.0);
        let up = DiscretePath::scalar(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 0.5, 1.5, 3.0]).unwrap();
        assert_eq!(
            pvar_bruteforce(&up, 2.2, 0.0, 3.0, &c).unwrap(),
            3f64.powf(2.2)
        );
        let long = DiscretePath::sample(20, 1.0, 1, |t| vec![t]).unwrap();
        assert!(matches!(
            pvar_bruteforce(&long, 2.0, 0.0, 1.0, &c),
            Err(Error::Guard(_))
        ));
        assert!(OracleConfig::new(64, 17, 1e-5).is_err());
    }

    #[test]
    fn riemann_stieltjes() {
        let x = DiscretePath::sample(1000, 1.0, 1, |t| vec![t]).unwrap();
        assert!((rs_integral(&x, &x).unwrap()[0] - 0.5).abs() < 1e-14);
        let sq = DiscretePath::sample(1000, 1.0, 1, |t| vec![t * t]).unwrap();
        assert!((rs_integral(&sq, &x).unwrap()[0] - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn refinement_keeps_nodes() {
        let x = DiscretePath::scalar(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        let r = refine_linear(&x, 4).unwrap();
        assert_eq!(r.len(), 9);
        assert_eq!(r.point(4), &[2.0]);
        assert_eq!(r.time(6), 2.0);
        assert_eq!(r.point(6), &[1.5]);
    }
}
