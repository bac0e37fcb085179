//! Non-anticipative functionals on stopped paths.
//!
//! A [`StoppedPath`] borrows a grid path up to a grid index and freezes it
//! afterwards. Its `time` may lie beyond the last kept grid time (used by
//! horizontal differences) and it may carry a vertical bump, a jump added
//! to the value at `time` and everything after it. The left limit at the
//! bump time stays the unbumped grid value.
//!
//! Derivatives of an `m`-valued functional on `k`-dimensional paths are laid
//! out row-major: the vertical gradient is `m x k` (`[o * k + i]`), the
//! second vertical derivative is `m x k x k`.

mod catalog;
mod examples;
mod regularity;

pub use catalog::{parse_functional, FUNCTIONAL_IDS};
pub use examples::{
    discrete_time_functional, integral_functional, smoothed_running_max, Constant,
    DiscreteTimeFunctional, Endpoint, HShape, IntegralFunctional, PhiFn, PsiFn, RunningMax,
    SmoothedRunningMax,
};
pub use regularity::{
    regularity_report, remainder_scaling, Constants, Flags, RegularityReport, ReportConfig,
    ScalingStudy,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::path::{grid_index, DiscretePath};

#[derive(Debug, Clone, Copy)]
pub struct StoppedPath<'a> {
    times: &'a [f64],
    values: &'a [f64],
    dim: usize,
    time: f64,
    horizon: f64,
    bump: Option<&'a [f64]>,
}

impl<'a> StoppedPath<'a> {
    /// `path` stopped at grid index `index`.
    pub fn new(path: &'a DiscretePath, index: usize) -> Self {
        StoppedPath {
            times: &path.times()[..=index],
            values: &path.values()[..(index + 1) * path.dim()],
            dim: path.dim(),
            time: path.time(index),
            horizon: path.last_time(),
            bump: None,
        }
    }

    /// A path given by row-major `values` on `times`, stopped at its last
    /// time, with horizon `horizon`.
    pub fn from_slices(times: &'a [f64], values: &'a [f64], dim: usize, horizon: f64) -> Self {
        assert_eq!(values.len(), times.len() * dim, "stopped path shape");
        StoppedPath {
            times,
            values,
            dim,
            time: times[times.len() - 1],
            horizon,
            bump: None,
        }
    }

    /// `path` stopped at grid time `t`.
    pub fn at_time(path: &'a DiscretePath, t: f64) -> Result<Self> {
        Ok(Self::new(path, grid_index(path.times(), t)?))
    }

    /// Adds the vertical perturbation `bump * 1_{[t,T]}`.
    pub fn with_bump<'b>(&self, bump: &'b [f64]) -> StoppedPath<'b>
    where
        'a: 'b,
    {
        assert_eq!(bump.len(), self.dim, "bump dimension");
        StoppedPath {
            bump: Some(bump),
            ..*self
        }
    }

    /// The same frozen path viewed at the later time `time + h`.
    pub fn advanced(&self, h: f64) -> Result<Self> {
        let time = self.time + h;
        if !(h > 0.0) || time > self.horizon {
            return Err(Error::Horizon(self.time));
        }
        Ok(StoppedPath { time, ..*self })
    }

    /// The path stopped at an earlier grid index `j`, without bump.
    pub fn stopped_at(&self, j: usize) -> StoppedPath<'a> {
        assert!(j <= self.index());
        StoppedPath {
            times: &self.times[..=j],
            values: &self.values[..(j + 1) * self.dim],
            dim: self.dim,
            time: self.times[j],
            horizon: self.horizon,
            bump: None,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Last grid index kept.
    pub fn index(&self) -> usize {
        self.times.len() - 1
    }

    /// Grid times `t_0..=t_index`.
    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    pub fn bump(&self) -> Option<&'a [f64]> {
        self.bump
    }

    /// Unbumped grid value at index `k <= index`.
    pub fn grid_point(&self, k: usize) -> &'a [f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    /// Unbumped value at the stopping time, the left limit there.
    pub fn left_terminal(&self) -> &'a [f64] {
        self.grid_point(self.index())
    }

    /// `x(t)`, including the bump.
    pub fn terminal(&self) -> Vec<f64> {
        let mut v = self.left_terminal().to_vec();
        if let Some(b) = self.bump {
            v.iter_mut().zip(b).for_each(|(x, d)| *x += d);
        }
        v
    }

    /// `x(u ^ t)`.
    pub fn value_at(&self, u: f64) -> Vec<f64> {
        let last = self.times[self.index()];
        if u >= last {
            return self.terminal();
        }
        if u <= self.times[0] {
            return self.grid_point(0).to_vec();
        }
        let k = self.times.partition_point(|&s| s <= u) - 1;
        let w = (u - self.times[k]) / (self.times[k + 1] - self.times[k]);
        self.grid_point(k)
            .iter()
            .zip(self.grid_point(k + 1))
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }

    /// Left limit `x((u ^ t)-)`.
    fn left_value_at(&self, u: f64) -> Vec<f64> {
        if self.bump.is_some() && u == self.times[self.index()] {
            self.left_terminal().to_vec()
        } else {
            self.value_at(u)
        }
    }
}

/// `d_inf((t,x),(t',x')) = sup_u |x(u ^ t) - x'(u ^ t')| + |t - t'|`.
pub fn d_infty(a: &StoppedPath, b: &StoppedPath) -> f64 {
    let mut nodes: Vec<f64> = a.times().iter().chain(b.times()).copied().collect();
    nodes.push(a.time());
    nodes.push(b.time());
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let mut sup: f64 = 0.0;
    for &u in &nodes {
        sup = sup.max(crate::dist(&a.value_at(u), &b.value_at(u)));
        sup = sup.max(crate::dist(&a.left_value_at(u), &b.left_value_at(u)));
    }
    sup + (a.time() - b.time()).abs()
}

/// Declared Lipschitz constants in `d_inf`; `None` means undeclared.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LipschitzMeta {
    pub value: Option<f64>,
    pub horizontal: Option<f64>,
    pub gradient: Option<f64>,
    pub hessian: Option<f64>,
}

/// A non-anticipative functional `F: (t, x_t) -> R^m`.
///
/// Implementations must be pure: the same stopped path always gives the
/// same output.
pub trait PathFunctional: Send + Sync {
    /// Identifier understood by [`parse_functional`] where applicable.
    fn id(&self) -> String;

    /// Path dimension `k`.
    fn input_dim(&self) -> usize;

    /// Output dimension `m`.
    fn output_dim(&self) -> usize;

    fn evaluate(&self, x: &StoppedPath) -> Vec<f64>;

    /// Analytic vertical gradient, `m x k`.
    fn vertical(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        None
    }

    /// Analytic second vertical derivative, `m x k x k`.
    fn vertical2(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        None
    }

    /// Analytic horizontal derivative, `m` values.
    fn horizontal(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        None
    }

    fn lipschitz(&self) -> LipschitzMeta {
        LipschitzMeta::default()
    }
}

/// Default finite-difference step `1e-5 (1 + ||x||_inf)`.
pub fn default_step(x: &StoppedPath) -> f64 {
    let sup = (0..=x.index())
        .map(|k| crate::norm(x.grid_point(k)))
        .fold(0.0, f64::max);
    1e-5 * (1.0 + sup)
}

/// Central finite-difference vertical gradient with a stability flag.
#[derive(Debug, Clone, PartialEq)]
pub struct VerticalFd {
    pub value: Vec<f64>,
    /// Forward and backward one-sided quotients disagree.
    pub unstable: bool,
}

/// Finite-difference vertical gradient, `m x k`.
pub fn vertical_fd(f: &dyn PathFunctional, x: &StoppedPath, h: f64) -> VerticalFd {
    let (m, k) = (f.output_dim(), x.dim());
    let base_bump = x.bump().map_or_else(|| vec![0.0; k], <[f64]>::to_vec);
    let centre = f.evaluate(x);
    let mut value = vec![0.0; m * k];
    let mut unstable = false;
    for i in 0..k {
        let mut up = base_bump.clone();
        up[i] += h;
        let mut down = base_bump.clone();
        down[i] -= h;
        let fu = f.evaluate(&x.with_bump(&up));
        let fd = f.evaluate(&x.with_bump(&down));
        for o in 0..m {
            let fwd = (fu[o] - centre[o]) / h;
            let bwd = (centre[o] - fd[o]) / h;
            value[o * k + i] = (fu[o] - fd[o]) / (2.0 * h);
            let tol = (100.0 * h * (1.0 + centre[o].abs())).max(1e-6);
            if (fwd - bwd).abs() > tol {
                unstable = true;
            }
        }
    }
    VerticalFd { value, unstable }
}

/// Analytic vertical gradient if available, otherwise the central difference with step `h`.
pub fn vertical_derivative(f: &dyn PathFunctional, x: &StoppedPath, h: f64) -> VerticalFd {
    match f.vertical(x) {
        Some(value) => VerticalFd {
            value,
            unstable: false,
        },
        None => vertical_fd(f, x, h),
    }
}

/// Finite-difference second vertical derivative, `m x k x k`.
pub fn vertical2_fd(f: &dyn PathFunctional, x: &StoppedPath, h: f64) -> Vec<f64> {
    let (m, k) = (f.output_dim(), x.dim());
    let base = x.bump().map_or_else(|| vec![0.0; k], <[f64]>::to_vec);
    let eval = |di: Option<(usize, f64)>, dj: Option<(usize, f64)>| {
        let mut b = base.clone();
        for (idx, s) in [di, dj].into_iter().flatten() {
            b[idx] += s;
        }
        f.evaluate(&x.with_bump(&b))
    };
    let mut out = vec![0.0; m * k * k];
    for i in 0..k {
        for j in 0..k {
            let vals = if i == j {
                let (up, mid, down) = (
                    eval(Some((i, h)), None),
                    eval(None, None),
                    eval(Some((i, -h)), None),
                );
                (0..m)
                    .map(|o| (up[o] - 2.0 * mid[o] + down[o]) / (h * h))
                    .collect::<Vec<_>>()
            } else {
                let pp = eval(Some((i, h)), Some((j, h)));
                let pm = eval(Some((i, h)), Some((j, -h)));
                let mp = eval(Some((i, -h)), Some((j, h)));
                let mm = eval(Some((i, -h)), Some((j, -h)));
                (0..m)
                    .map(|o| (pp[o] - pm[o] - mp[o] + mm[o]) / (4.0 * h * h))
                    .collect()
            };
            for o in 0..m {
                out[(o * k + i) * k + j] = vals[o];
            }
        }
    }
    out
}

/// Forward difference `(F(t + h, x_t) - F(t, x_t)) / h`.
pub fn horizontal_fd(f: &dyn PathFunctional, x: &StoppedPath, h: f64) -> Result<Vec<f64>> {
    let later = x.advanced(h)?;
    let (a, b) = (f.evaluate(x), f.evaluate(&later));
    Ok(b.iter().zip(&a).map(|(v1, v0)| (v1 - v0) / h).collect())
}

/// Analytic horizontal derivative if available, else [`horizontal_fd`].
pub fn horizontal_derivative(f: &dyn PathFunctional, x: &StoppedPath, h: f64) -> Result<Vec<f64>> {
    if x.time() >= x.horizon() {
        return Err(Error::Horizon(x.time()));
    }
    match f.horizontal(x) {
        Some(v) => Ok(v),
        None => horizontal_fd(f, x, h),
    }
}

/// `R^F_{t,s}(X) = F(s, X_s) - F(t, X_t) - grad F(t, X_t) (X(s) - X(t))` at grid indices.
pub fn functional_remainder_idx(
    f: &dyn PathFunctional,
    path: &DiscretePath,
    i: usize,
    j: usize,
) -> Result<Vec<f64>> {
    let (xi, xj) = (StoppedPath::new(path, i), StoppedPath::new(path, j));
    let grad = f.vertical(&xi).ok_or_else(|| {
        Error::Capability(format!("{} has no analytic vertical derivative", f.id()))
    })?;
    let k = path.dim();
    let dx = path.increment(i, j);
    let (fi, fj) = (f.evaluate(&xi), f.evaluate(&xj));
    Ok((0..f.output_dim())
        .map(|o| fj[o] - fi[o] - (0..k).map(|c| grad[o * k + c] * dx[c]).sum::<f64>())
        .collect())
}

/// `R^F_{t,s}(X)` at grid times.
pub fn functional_remainder(
    f: &dyn PathFunctional,
    path: &DiscretePath,
    t: f64,
    s: f64,
) -> Result<Vec<f64>> {
    let i = grid_index(path.times(), t)?;
    let j = grid_index(path.times(), s)?;
    if j < i {
        return Err(Error::domain("reversed interval"));
    }
    functional_remainder_idx(f, path, i, j)
}

/// `F(t_k, X_{t_k})` for every grid index, concatenated.
pub fn evaluate_along(f: &dyn PathFunctional, path: &DiscretePath) -> Vec<f64> {
    (0..path.len())
        .flat_map(|k| f.evaluate(&StoppedPath::new(path, k)))
        .collect()
}

/// Analytic `grad F(t_k, X_{t_k})` for every grid index, concatenated.
pub fn vertical_along(f: &dyn PathFunctional, path: &DiscretePath) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(path.len() * f.output_dim() * path.dim());
    for k in 0..path.len() {
        let g = f.vertical(&StoppedPath::new(path, k)).ok_or_else(|| {
            Error::Capability(format!("{} has no analytic vertical derivative", f.id()))
        })?;
        out.extend(g);
    }
    Ok(out)
}

pub(crate) fn check_dims(f: &dyn PathFunctional, k: usize) -> Result<()> {
    if f.input_dim() != k {
        return Err(Error::domain(format!(
            "{} expects {}-dimensional paths, got {k}",
            f.id(),
            f.input_dim()
        )));
    }
    Ok(())
}
