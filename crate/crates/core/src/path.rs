//! Grid paths, p-variation and superadditive interval controls.
//!
//! A [`DiscretePath`] is a continuous path known on a strictly increasing
//! time grid and linearly interpolated in between. Because `|x - y|^p` is
//! convex for `p >= 1`, the supremum over all partitions of the interpolated
//! path is attained on partitions made of grid points, so every p-variation
//! below is an exact supremum over grid sub-partitions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{dist, norm};

/// A `dim`-dimensional path sampled on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathEnvelope", into = "PathEnvelope")]
pub struct DiscretePath {
    times: Vec<f64>,
    values: Vec<f64>,
    dim: usize,
}

#[derive(Serialize, Deserialize)]
struct PathEnvelope {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    dimension: usize,
}

impl TryFrom<PathEnvelope> for DiscretePath {
    type Error = Error;

    fn try_from(env: PathEnvelope) -> Result<Self> {
        if env.values.iter().any(|row| row.len() != env.dimension) {
            return Err(Error::Parse(format!(
                "every value row must have {} entries",
                env.dimension
            )));
        }
        DiscretePath::new(env.times, env.values.concat(), env.dimension)
    }
}

impl From<DiscretePath> for PathEnvelope {
    fn from(path: DiscretePath) -> Self {
        PathEnvelope {
            values: path.values.chunks(path.dim).map(<[f64]>::to_vec).collect(),
            times: path.times,
            dimension: path.dim,
        }
    }
}

impl DiscretePath {
    /// Builds a path from a time grid and row-major values (`times.len() * dim`).
    pub fn new(times: Vec<f64>, values: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("path dimension must be positive"));
        }
        if times.is_empty() {
            return Err(Error::domain("a path needs at least one grid point"));
        }
        if values.len() != times.len() * dim {
            return Err(Error::domain(format!(
                "expected {} values for {} times of dimension {dim}, got {}",
                times.len() * dim,
                times.len(),
                values.len()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("path data must be finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::domain("times must be strictly increasing"));
        }
        Ok(DiscretePath { times, values, dim })
    }

    pub fn from_rows(times: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::domain("ragged value rows"));
        }
        DiscretePath::new(times, rows.concat(), dim)
    }

    /// Scalar path from a time grid and one value per time.
    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        DiscretePath::new(times, values, 1)
    }

    /// Samples `f` on the uniform grid `k * horizon / intervals`.
    pub fn sample<F>(intervals: usize, horizon: f64, dim: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        if intervals == 0 || horizon <= 0.0 {
            return Err(Error::domain(
                "need at least one interval and a positive horizon",
            ));
        }
        let times = uniform_grid(intervals, horizon);
        let mut values = Vec::with_capacity(times.len() * dim);
        for &t in &times {
            let v = f(t);
            if v.len() != dim {
                return Err(Error::domain(
                    "sample function returned the wrong dimension",
                ));
            }
            values.extend(v);
        }
        DiscretePath::new(times, values, dim)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn time(&self, k: usize) -> f64 {
        self.times[k]
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn first_time(&self) -> f64 {
        self.times[0]
    }

    pub fn last_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Grid index of `t`; `t` must be bit-equal to a grid time.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        grid_index(&self.times, t)
    }

    /// Grid indices of a closed interval `[t, s]`.
    pub fn interval(&self, t: f64, s: f64) -> Result<(usize, usize)> {
        let lo = self.index_of(t)?;
        let hi = self.index_of(s)?;
        if hi < lo {
            return Err(Error::domain(format!("interval [{t}, {s}] is reversed")));
        }
        Ok((lo, hi))
    }

    /// `X(t_j) - X(t_i)`.
    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.point(j)
            .iter()
            .zip(self.point(i))
            .map(|(b, a)| b - a)
            .collect()
    }

    /// Linear interpolation; constant extension outside the grid.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if t <= self.first_time() {
            return self.point(0).to_vec();
        }
        if t >= self.last_time() {
            return self.point(self.len() - 1).to_vec();
        }
        let k = self.times.partition_point(|&u| u <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        self.point(k)
            .iter()
            .zip(self.point(k + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_on(0, self.len() - 1)
    }

    pub fn sup_norm_on(&self, lo: usize, hi: usize) -> f64 {
        (lo..=hi).map(|k| norm(self.point(k))).fold(0.0, f64::max)
    }

    /// The sub-path on grid indices `lo..=hi`.
    pub fn slice(&self, lo: usize, hi: usize) -> DiscretePath {
        DiscretePath {
            times: self.times[lo..=hi].to_vec(),
            values: self.values[lo * self.dim..(hi + 1) * self.dim].to_vec(),
            dim: self.dim,
        }
    }

    /// Total variation `sum |X_{k+1} - X_k|` on `lo..=hi`.
    pub fn length_on(&self, lo: usize, hi: usize) -> f64 {
        (lo..hi)
            .map(|k| dist(self.point(k + 1), self.point(k)))
            .sum()
    }

    /// Supremum over grid partitions of `lo..=hi` of `sum |X_{t_{k+1}} - X_{t_k}|^p`,
    /// returned for every right endpoint `lo..=hi`.
    pub fn pvar_row(&self, p: f64, lo: usize, hi: usize) -> Vec<f64> {
        variation_row(lo, hi, p, |a, out: &mut Vec<f64>| {
            out.clear();
            out.extend((a + 1..=hi).map(|b| dist(self.point(b), self.point(a))));
        })
    }

    /// `V_p(X; t_lo, t_hi)`, the p-th power of the p-variation norm.
    pub fn pvar_sum(&self, p: f64, lo: usize, hi: usize) -> f64 {
        *self.pvar_row(p, lo, hi).last().unwrap()
    }
}

/// Uniform grid with `intervals + 1` points on `[0, horizon]`.
pub fn uniform_grid(intervals: usize, horizon: f64) -> Vec<f64> {
    (0..=intervals)
        .map(|k| {
            if k == intervals {
                horizon
            } else {
                horizon * k as f64 / intervals as f64
            }
        })
        .collect()
}

pub(crate) fn grid_index(times: &[f64], t: f64) -> Result<usize> {
    let k = times.partition_point(|&u| u < t);
    if k < times.len() && times[k] == t {
        Ok(k)
    } else {
        Err(Error::GridAlignment(t))
    }
}

fn check_p(p: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        Err(Error::domain(format!("p-variation needs p >= 1, got {p}")))
    } else {
        Ok(())
    }
}

/// Exact dynamic programme for two-parameter variation sums.
///
/// `pair_norms(a, out)` must fill `out` with `|R_{a,b}|` for `b = a+1..=hi`.
/// Returns `best[j - lo]`, the supremum over partitions of `[t_lo, t_j]` of
/// `sum |R_{t_k,t_{k+1}}|^q`.
pub fn variation_row<F>(lo: usize, hi: usize, q: f64, mut pair_norms: F) -> Vec<f64>
where
    F: FnMut(usize, &mut Vec<f64>),
{
    let n = hi - lo + 1;
    let mut best = vec![f64::NEG_INFINITY; n];
    best[0] = 0.0;
    let mut norms = Vec::with_capacity(n);
    for a in lo..hi {
        let base = best[a - lo];
        pair_norms(a, &mut norms);
        debug_assert_eq!(norms.len(), hi - a);
        for (off, r) in norms.iter().enumerate() {
            let cand = base + r.powf(q);
            let slot = &mut best[a - lo + 1 + off];
            if cand > *slot {
                *slot = cand;
            }
        }
    }
    best
}

/// Exact p-variation norm `||X||_{p,[t,s]}` over grid sub-partitions.
pub fn p_variation_exact(path: &DiscretePath, p: f64, t: f64, s: f64) -> Result<f64> {
    check_p(p)?;
    let (lo, hi) = path.interval(t, s)?;
    Ok(pvar_norm_idx(path, p, lo, hi))
}

pub(crate) fn pvar_norm_idx(path: &DiscretePath, p: f64, lo: usize, hi: usize) -> f64 {
    if lo == hi {
        return 0.0;
    }
    let sum = path.pvar_sum(p, lo, hi);
    let direct = dist(path.point(hi), path.point(lo));
    // When the coarsest partition is optimal the norm is the increment itself.
    if sum == direct.powf(p) {
        direct
    } else {
        sum.powf(1.0 / p)
    }
}

/// Fast lower bound for the p-variation norm.
///
/// Scalar paths are first reduced to their alternating local extrema; then
/// interior points are dropped while dropping increases the partition sum.
/// The result is the norm of a concrete partition, hence never exceeds
/// [`p_variation_exact`]. It is an approximation, not an exact supremum.
pub fn p_variation_greedy(path: &DiscretePath, p: f64, t: f64, s: f64) -> Result<f64> {
    check_p(p)?;
    let (lo, hi) = path.interval(t, s)?;
    if lo == hi {
        return Ok(0.0);
    }
    let mut pts = if path.dim() == 1 {
        scalar_extrema(path, lo, hi)
    } else {
        (lo..=hi).collect::<Vec<_>>()
    };
    let w = |a: usize, b: usize| dist(path.point(b), path.point(a)).powf(p);
    loop {
        let mut changed = false;
        let mut k = 1;
        while k + 1 < pts.len() {
            let (a, m, b) = (pts[k - 1], pts[k], pts[k + 1]);
            if w(a, b) > w(a, m) + w(m, b) {
                pts.remove(k);
                changed = true;
            } else {
                k += 1;
            }
        }
        if !changed {
            break;
        }
    }
    let sum = pts
        .windows(2)
        .fold(0.0, |acc, pair| acc + w(pair[0], pair[1]));
    if pts.len() == 2 {
        return Ok(dist(path.point(hi), path.point(lo)));
    }
    Ok(sum.powf(1.0 / p))
}

fn scalar_extrema(path: &DiscretePath, lo: usize, hi: usize) -> Vec<usize> {
    let x = |k: usize| path.point(k)[0];
    let mut pts = vec![lo];
    let mut dir = 0.0_f64;
    for k in lo + 1..=hi {
        let step = x(k) - x(*pts.last().unwrap());
        if step == 0.0 {
            continue;
        }
        if dir * step > 0.0 {
            *pts.last_mut().unwrap() = k;
        } else {
            pts.push(k);
        }
        dir = step.signum();
    }
    if *pts.last().unwrap() != hi {
        pts.push(hi);
    }
    if pts.len() == 1 {
        pts.push(hi);
    }
    pts
}

/// A superadditive function on grid intervals.
pub trait IntervalControl {
    fn times(&self) -> &[f64];

    /// `omega([t_i, t_j])` for every `j` in `i..=hi`; the first entry is 0.
    fn row(&self, i: usize, hi: usize) -> Vec<f64>;

    fn between(&self, i: usize, j: usize) -> f64 {
        self.row(i, j)[j - i]
    }

    fn eval(&self, t: f64, s: f64) -> Result<f64> {
        let i = grid_index(self.times(), t)?;
        let j = grid_index(self.times(), s)?;
        if j < i {
            return Err(Error::domain("reversed interval"));
        }
        Ok(self.between(i, j))
    }
}

/// `V_p(X; t, s) = ||X||^p_{p,[t,s]}`.
#[derive(Debug, Clone)]
pub struct VpControl<'a> {
    path: &'a DiscretePath,
    p: f64,
}

impl IntervalControl for VpControl<'_> {
    fn times(&self) -> &[f64] {
        self.path.times()
    }

    fn row(&self, i: usize, hi: usize) -> Vec<f64> {
        self.path.pvar_row(self.p, i, hi)
    }
}

pub fn vp_control(path: &DiscretePath, p: f64) -> Result<VpControl<'_>> {
    check_p(p)?;
    Ok(VpControl { path, p })
}

/// Dense table of a control on all grid pairs of `lo..=hi`.
#[derive(Debug, Clone)]
pub struct ControlTable {
    lo: usize,
    n: usize,
    data: Vec<f64>,
}

impl ControlTable {
    pub fn new(control: &dyn IntervalControl, lo: usize, hi: usize) -> Self {
        let n = hi - lo + 1;
        let mut data = vec![0.0; n * n];
        for i in lo..=hi {
            let row = control.row(i, hi);
            data[(i - lo) * n + (i - lo)..(i - lo) * n + n].copy_from_slice(&row);
        }
        ControlTable { lo, n, data }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i - self.lo) * self.n + (j - self.lo)]
    }

    pub fn lo(&self) -> usize {
        self.lo
    }

    pub fn hi(&self) -> usize {
        self.lo + self.n - 1
    }

    /// Largest `omega([t,u]) + omega([u,s]) - omega([t,s])` over grid triples.
    /// Non-positive values mean superadditivity holds.
    pub fn superadditivity_gap(&self) -> f64 {
        let mut gap = f64::NEG_INFINITY;
        for i in self.lo..=self.hi() {
            for u in i..=self.hi() {
                for j in u..=self.hi() {
                    gap = gap.max(self.get(i, u) + self.get(u, j) - self.get(i, j));
                }
            }
        }
        gap
    }
}

/// Result of [`piecewise_linear_approx`].
#[derive(Debug, Clone)]
pub struct LinearApprox {
    /// `X^N` sampled on the original grid up to `s`.
    pub path: DiscretePath,
    /// Grid indices of the knots on `[t, s]`.
    pub knots: Vec<usize>,
    pub diagnostics: ApproxDiagnostics,
}

/// Measured quantities for the four approximation bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ApproxDiagnostics {
    pub nu: f64,
    pub pieces: usize,
    pub pvar: f64,
    /// `||X^N||_inf / ||X||_inf`, at most 1.
    pub sup_ratio: f64,
    /// `||X^N||_{p,[t,s]} / ||X||_{p,[t,s]}`, at most 1.
    pub pvar_ratio: f64,
    pub sup_error: f64,
    /// `sup_error / (N^{-nu} ||X||_{p,[t,s]})`.
    pub error_constant: f64,
    pub variation: f64,
    /// `V_1(X^N) / (N^{1-nu} ||X||_{p,[t,s]})`.
    pub variation_constant: f64,
}

/// Piecewise-linear approximation with `pieces` segments on `[t, s]`.
///
/// The result coincides with `X` on `[0, t]`. Knots sit at the grid points
/// where `V_p(X; t, .)` first reaches the quantiles `i / N` of
/// `V_p(X; t, s)`; a constant path falls back to equal time spacing.
pub fn piecewise_linear_approx(
    path: &DiscretePath,
    p: f64,
    pieces: usize,
    t: f64,
    s: f64,
) -> Result<LinearApprox> {
    check_p(p)?;
    if pieces <= 1 {
        return Err(Error::domain("the approximation needs N > 1 pieces"));
    }
    let (lo, hi) = path.interval(t, s)?;
    let knots: Vec<usize> = if hi - lo <= pieces {
        (lo..=hi).collect()
    } else {
        let row = path.pvar_row(p, lo, hi);
        let total = row[hi - lo];
        let mut knots = vec![lo];
        for i in 1..pieces {
            let k = if total > 0.0 {
                let target = total * i as f64 / pieces as f64;
                lo + row.partition_point(|&w| w < target)
            } else {
                let target = t + (s - t) * i as f64 / pieces as f64;
                path.times().partition_point(|&u| u < target)
            };
            let k = k.clamp(lo, hi);
            if k > *knots.last().unwrap() && k < hi {
                knots.push(k);
            }
        }
        knots.push(hi);
        knots
    };

    let dim = path.dim();
    let mut values = path.values()[..(hi + 1) * dim].to_vec();
    for pair in knots.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (ta, tb) = (path.time(a), path.time(b));
        for k in a + 1..b {
            let w = (path.time(k) - ta) / (tb - ta);
            for c in 0..dim {
                let (xa, xb) = (path.point(a)[c], path.point(b)[c]);
                values[k * dim + c] = xa + w * (xb - xa);
            }
        }
    }
    let approx = DiscretePath::new(path.times()[..=hi].to_vec(), values, dim)?;

    let nu = 1.0 / p;
    let pvar = pvar_norm_idx(path, p, lo, hi);
    let approx_pvar = pvar_norm_idx(&approx, p, lo, hi);
    let sup = path.sup_norm_on(0, hi);
    let sup_error = (0..=hi)
        .map(|k| dist(path.point(k), approx.point(k)))
        .fold(0.0, f64::max);
    let variation = approx.length_on(lo, hi);
    let n = (knots.len() - 1).max(1) as f64;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    let diagnostics = ApproxDiagnostics {
        nu,
        pieces: knots.len() - 1,
        pvar,
        sup_ratio: ratio(approx.sup_norm(), sup),
        pvar_ratio: ratio(approx_pvar, pvar),
        sup_error,
        error_constant: ratio(sup_error, n.powf(-nu) * pvar),
        variation,
        variation_constant: ratio(variation, n.powf(1.0 - nu) * pvar),
    };
    Ok(LinearApprox {
        path: approx,
        knots,
        diagnostics,
    })
}
