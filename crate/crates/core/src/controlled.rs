//! Controlled paths, their norms, and the control `rho_X`.
//!
//! A controlled path of dimension `m` over a `d`-dimensional rough path
//! stores `Y` (`m` values per time) and `Y'` (`m * d` values per time,
//! entry `[l * d + i]` multiplying `X^i`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lift::RoughPath;
use crate::path::{grid_index, pvar_norm_idx, variation_row, DiscretePath, IntervalControl};
use crate::{norm, remainder_exponent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlledPath {
    y: DiscretePath,
    y_prime: DiscretePath,
    p: f64,
    q: f64,
    reference_id: String,
}

/// `|Y_0| + |Y'_0| + ||Y'||_p + ||R^Y||_q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlledNorm {
    pub initial: f64,
    pub gubinelli_var: f64,
    pub remainder_var: f64,
    pub total: f64,
}

impl ControlledPath {
    /// Pairs `Y` and `Y'` over `reference`, with `q = p^2 / (p + 1)`.
    pub fn new(y: DiscretePath, y_prime: DiscretePath, reference: &RoughPath) -> Result<Self> {
        Self::with_id(y, y_prime, reference, reference.reference_id())
    }

    /// Like [`ControlledPath::new`] with a precomputed reference id.
    pub(crate) fn with_id(
        y: DiscretePath,
        y_prime: DiscretePath,
        reference: &RoughPath,
        reference_id: String,
    ) -> Result<Self> {
        if y.times() != reference.times() || y_prime.times() != reference.times() {
            return Err(Error::Reference);
        }
        if y_prime.dim() != y.dim() * reference.dim() {
            return Err(Error::domain(format!(
                "Gubinelli derivative needs {} components, got {}",
                y.dim() * reference.dim(),
                y_prime.dim()
            )));
        }
        let p = reference.p();
        Ok(ControlledPath {
            y,
            y_prime,
            p,
            q: remainder_exponent(p),
            reference_id,
        })
    }

    /// `(X, Id)`, the rough path's base as a controlled path.
    pub fn identity(rp: &RoughPath) -> Result<Self> {
        let d = rp.dim();
        let mut id = vec![0.0; d * d];
        (0..d).for_each(|i| id[i * d + i] = 1.0);
        let values = id.repeat(rp.len());
        let y_prime = DiscretePath::new(rp.times().to_vec(), values, d * d)?;
        ControlledPath::new(rp.base().clone(), y_prime, rp)
    }

    pub(crate) fn from_parts(
        y: DiscretePath,
        y_prime: DiscretePath,
        p: f64,
        q: f64,
        reference_id: String,
    ) -> Self {
        ControlledPath {
            y,
            y_prime,
            p,
            q,
            reference_id,
        }
    }

    /// Replaces the remainder exponent.
    pub fn with_q(mut self, q: f64) -> Result<Self> {
        if !(q >= 1.0) {
            return Err(Error::Exponent(format!(
                "remainder exponent must be >= 1, got {q}"
            )));
        }
        self.q = q;
        Ok(self)
    }

    pub fn y(&self) -> &DiscretePath {
        &self.y
    }

    pub fn y_prime(&self) -> &DiscretePath {
        &self.y_prime
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn reference_id(&self) -> &str {
        &self.reference_id
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn check_reference(&self, rp: &RoughPath) -> Result<()> {
        if rp.times() != self.y.times() || rp.reference_id() != self.reference_id {
            return Err(Error::Reference);
        }
        Ok(())
    }

    /// `R^Y_{t_i,t_j} = Y_{t_i,t_j} - Y'_{t_i} X_{t_i,t_j}`.
    pub fn remainder_idx(&self, rp: &RoughPath, i: usize, j: usize) -> Vec<f64> {
        let d = rp.dim();
        let x = rp.increment(i, j);
        let yp = self.y_prime.point(i);
        self.y
            .increment(i, j)
            .iter()
            .enumerate()
            .map(|(l, dy)| dy - (0..d).map(|c| yp[l * d + c] * x[c]).sum::<f64>())
            .collect()
    }

    /// Pair norms `|R^Y_{t_a,t_b}|` for `b` in `a+1..=hi`.
    fn remainder_norms_from(&self, rp: &RoughPath, a: usize, hi: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend((a + 1..=hi).map(|b| norm(&self.remainder_idx(rp, a, b))));
    }

    /// `||R^Y||_{q,[t_lo,t_hi]}`.
    pub fn remainder_var_idx(&self, rp: &RoughPath, lo: usize, hi: usize) -> f64 {
        if lo == hi {
            return 0.0;
        }
        let sum = variation_row(lo, hi, self.q, |a, out| {
            self.remainder_norms_from(rp, a, hi, out)
        })[hi - lo];
        sum.powf(1.0 / self.q)
    }

    /// Componentwise difference, used for distances between iterates.
    pub fn difference(&self, other: &ControlledPath) -> Result<ControlledPath> {
        if self.y.times() != other.y.times() || self.dim() != other.dim() {
            return Err(Error::Reference);
        }
        let sub = |a: &DiscretePath, b: &DiscretePath| {
            let v = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| x - y)
                .collect();
            DiscretePath::new(a.times().to_vec(), v, a.dim())
        };
        Ok(ControlledPath {
            y: sub(&self.y, &other.y)?,
            y_prime: sub(&self.y_prime, &other.y_prime)?,
            ..self.clone()
        })
    }
}

/// `R^Y_{t,s}` at grid times.
pub fn remainder(cp: &ControlledPath, rp: &RoughPath, t: f64, s: f64) -> Result<Vec<f64>> {
    cp.check_reference(rp)?;
    let i = grid_index(rp.times(), t)?;
    let j = grid_index(rp.times(), s)?;
    if j < i {
        return Err(Error::domain("reversed interval"));
    }
    Ok(cp.remainder_idx(rp, i, j))
}

/// Controlled norm on the whole grid.
pub fn controlled_norm(cp: &ControlledPath, rp: &RoughPath) -> Result<ControlledNorm> {
    cp.check_reference(rp)?;
    Ok(controlled_norm_idx(cp, rp, 0, cp.len() - 1))
}

/// Controlled norm on grid indices `lo..=hi`, anchored at `t_lo`.
pub fn controlled_norm_idx(
    cp: &ControlledPath,
    rp: &RoughPath,
    lo: usize,
    hi: usize,
) -> ControlledNorm {
    let initial = norm(cp.y.point(lo)) + norm(cp.y_prime.point(lo));
    let gubinelli_var = pvar_norm_idx(&cp.y_prime, cp.p, lo, hi);
    let remainder_var = cp.remainder_var_idx(rp, lo, hi);
    ControlledNorm {
        initial,
        gubinelli_var,
        remainder_var,
        total: initial + gubinelli_var + remainder_var,
    }
}

/// `rho_X([t,s]) = |s - t| + ||X||^p_{p,[t,s]} + ||XX||^{p/2}_{p/2,[t,s]}`.
#[derive(Debug, Clone)]
pub struct RhoControl<'a> {
    rp: &'a RoughPath,
}

pub fn rho_control(rp: &RoughPath) -> RhoControl<'_> {
    RhoControl { rp }
}

impl IntervalControl for RhoControl<'_> {
    fn times(&self) -> &[f64] {
        self.rp.times()
    }

    fn row(&self, i: usize, hi: usize) -> Vec<f64> {
        let p = self.rp.p();
        let vx = self.rp.base().pvar_row(p, i, hi);
        let vxx = self.rp.second_level_var_row(p / 2.0, i, hi);
        let t0 = self.rp.base().time(i);
        (i..=hi)
            .map(|j| (self.rp.base().time(j) - t0) + vx[j - i] + vxx[j - i])
            .collect()
    }
}

/// `sup |W_{a,b}| / omega([t_a,t_b])^gamma` over grid pairs in `lo..=hi`.
///
/// Pairs with `omega = 0` contribute 0 when `W_{a,b} = 0` and `+inf` otherwise.
pub fn gamma_seminorm<F>(
    control: &dyn IntervalControl,
    gamma: f64,
    lo: usize,
    hi: usize,
    mut pair_norms: F,
) -> f64
where
    F: FnMut(usize, &mut Vec<f64>),
{
    let mut worst: f64 = 0.0;
    let mut norms = Vec::new();
    for a in lo..hi {
        let omega = control.row(a, hi);
        pair_norms(a, &mut norms);
        for (off, w) in norms.iter().enumerate() {
            let o = omega[off + 1];
            let ratio = if o > 0.0 {
                w / o.powf(gamma)
            } else if *w == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
        }
    }
    worst
}

/// `sup |W_{t,s}| / omega([t,s])^gamma` for a grid path `W`.
pub fn path_seminorm(w: &DiscretePath, control: &dyn IntervalControl, gamma: f64) -> f64 {
    let hi = w.len() - 1;
    gamma_seminorm(control, gamma, 0, hi, |a, out| {
        out.clear();
        out.extend((a + 1..=hi).map(|b| crate::dist(w.point(b), w.point(a))));
    })
}

/// `||Z'||_{kappa,rho} + ||R^Z||_{beta,rho}` on grid indices `lo..=hi`.
pub fn holder_seminorm_idx(
    cp: &ControlledPath,
    rp: &RoughPath,
    control: &dyn IntervalControl,
    kappa: f64,
    beta: f64,
    lo: usize,
    hi: usize,
) -> f64 {
    let yp = &cp.y_prime;
    let gub = gamma_seminorm(control, kappa, lo, hi, |a, out| {
        out.clear();
        out.extend((a + 1..=hi).map(|b| crate::dist(yp.point(b), yp.point(a))));
    });
    let rem = gamma_seminorm(control, beta, lo, hi, |a, out| {
        cp.remainder_norms_from(rp, a, hi, out)
    });
    gub + rem
}

/// `||(Z, Z')||_{kappa,beta,rho}` on the whole grid.
pub fn holder_seminorm(
    cp: &ControlledPath,
    rp: &RoughPath,
    control: &dyn IntervalControl,
    kappa: f64,
    beta: f64,
) -> Result<f64> {
    cp.check_reference(rp)?;
    for (name, v) in [("kappa", kappa), ("beta", beta)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Exponent(format!(
                "{name} must lie in (0, 1], got {v}"
            )));
        }
    }
    Ok(holder_seminorm_idx(
        cp,
        rp,
        control,
        kappa,
        beta,
        0,
        cp.len() - 1,
    ))
}
