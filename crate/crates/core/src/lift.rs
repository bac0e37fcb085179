//! Level-2 rough paths on a grid.
//!
//! Only the blocks `XX_{t_k,t_{k+1}}` of consecutive grid intervals are
//! primary data; every other second-level increment is rebuilt by Chen
//! chaining. Running anchors `XX_{t_0,t_k}` are stored alongside the blocks
//! so that a block edited after construction shows up in [`RoughPath::chen_defect`].
//! Matrices are `d x d`, row-major.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::path::{grid_index, uniform_grid, variation_row, DiscretePath};
use crate::rng::CounterRng;

/// Default number of fine Brownian steps per coarse interval.
pub const DEFAULT_REFINEMENT: usize = 16;

/// Largest [`RoughPath::chen_defect`] accepted as Chen-consistent.
pub const CHEN_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RoughEnvelope", into = "RoughEnvelope")]
pub struct RoughPath {
    base: DiscretePath,
    blocks: Vec<f64>,
    anchors: Vec<f64>,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RoughEnvelope {
    base: DiscretePath,
    second_level: Vec<Vec<f64>>,
    p_exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    running_second_level: Option<Vec<Vec<f64>>>,
}

impl TryFrom<RoughEnvelope> for RoughPath {
    type Error = Error;

    fn try_from(env: RoughEnvelope) -> Result<Self> {
        let dd = env.base.dim() * env.base.dim();
        let flat = |rows: Vec<Vec<f64>>, what: &str| -> Result<Vec<f64>> {
            if rows.iter().any(|r| r.len() != dd) {
                return Err(Error::Parse(format!(
                    "every {what} entry must have {dd} values"
                )));
            }
            Ok(rows.concat())
        };
        let blocks = flat(env.second_level, "second_level")?;
        let mut rp = RoughPath::new(env.base, blocks, env.p_exponent)?;
        if let Some(anchors) = env.running_second_level {
            let anchors = flat(anchors, "running_second_level")?;
            if anchors.len() != rp.anchors.len() {
                return Err(Error::Parse(
                    "running_second_level has the wrong length".into(),
                ));
            }
            rp.anchors = anchors;
        }
        Ok(rp)
    }
}

impl From<RoughPath> for RoughEnvelope {
    fn from(rp: RoughPath) -> Self {
        let dd = rp.dim() * rp.dim();
        let rows = |v: &[f64]| v.chunks(dd).map(<[f64]>::to_vec).collect();
        RoughEnvelope {
            second_level: rows(&rp.blocks),
            running_second_level: Some(rows(&rp.anchors)),
            base: rp.base,
            p_exponent: rp.p,
        }
    }
}

/// `acc += a (x) b`.
pub(crate) fn add_outer(acc: &mut [f64], a: &[f64], b: &[f64]) {
    let d = b.len();
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            acc[i * d + j] += ai * bj;
        }
    }
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn check_rough_p(p: f64) -> Result<()> {
    if (2.0..3.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "rough path exponent must lie in [2, 3), got {p}"
        )))
    }
}

impl RoughPath {
    /// Builds a rough path from its base and per-interval blocks
    /// (`(len - 1) * d * d` values).
    pub fn new(base: DiscretePath, blocks: Vec<f64>, p: f64) -> Result<Self> {
        check_rough_p(p)?;
        let d = base.dim();
        if blocks.len() != (base.len() - 1) * d * d {
            return Err(Error::domain(format!(
                "expected {} second-level values, got {}",
                (base.len() - 1) * d * d,
                blocks.len()
            )));
        }
        if blocks.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("second level must be finite"));
        }
        let mut rp = RoughPath {
            base,
            blocks,
            anchors: Vec::new(),
            p,
        };
        rp.anchors = rp.chain_row(0, rp.len() - 1);
        Ok(rp)
    }

    pub fn base(&self) -> &DiscretePath {
        &self.base
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        self.base.times()
    }

    /// Stable content hash of grid, base values and blocks.
    pub fn reference_id(&self) -> String {
        let mut hasher = Sha256::new();
        for v in self
            .times()
            .iter()
            .chain(self.base.values())
            .chain(&self.blocks)
        {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update((self.dim() as u64).to_le_bytes());
        let digest = hasher.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Same data, different exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        check_rough_p(p)?;
        Ok(RoughPath { p, ..self.clone() })
    }

    /// The rough path on grid indices `lo..=hi`.
    pub fn restrict(&self, lo: usize, hi: usize) -> Result<RoughPath> {
        if lo >= hi || hi >= self.len() {
            return Err(Error::domain("restriction needs lo < hi within the grid"));
        }
        let dd = self.dim() * self.dim();
        RoughPath::new(
            self.base.slice(lo, hi),
            self.blocks[lo * dd..hi * dd].to_vec(),
            self.p,
        )
    }

    /// Stored block `XX_{t_k,t_{k+1}}`.
    pub fn block(&self, k: usize) -> &[f64] {
        let dd = self.dim() * self.dim();
        &self.blocks[k * dd..(k + 1) * dd]
    }

    /// Mutable access to a stored block. Anchors are left untouched, so
    /// edits are visible to [`RoughPath::chen_defect`].
    pub fn block_mut(&mut self, k: usize) -> &mut [f64] {
        let dd = self.dim() * self.dim();
        &mut self.blocks[k * dd..(k + 1) * dd]
    }

    /// `X_{t_i,t_j}`.
    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.base.increment(i, j)
    }

    /// `XX_{t_a,t_b}` for every `b` in `a..=hi`, concatenated.
    pub fn chain_row(&self, a: usize, hi: usize) -> Vec<f64> {
        let d = self.dim();
        let dd = d * d;
        let mut out = vec![0.0; (hi - a + 1) * dd];
        let mut acc = vec![0.0; dd];
        for k in a..hi {
            let left = self.base.increment(a, k);
            let step = self.base.increment(k, k + 1);
            add_outer(&mut acc, &left, &step);
            for (x, b) in acc.iter_mut().zip(self.block(k)) {
                *x += b;
            }
            out[(k + 1 - a) * dd..(k + 2 - a) * dd].copy_from_slice(&acc);
        }
        out
    }

    /// `XX_{t_i,t_j}` by left-to-right chaining.
    pub fn second_level(&self, i: usize, j: usize) -> Vec<f64> {
        let dd = self.dim() * self.dim();
        if i == j {
            return vec![0.0; dd];
        }
        self.chain_row(i, j)[(j - i) * dd..].to_vec()
    }

    /// `XX_{t,s}` for grid times `t <= s`.
    pub fn chen_extend(&self, t: f64, s: f64) -> Result<Vec<f64>> {
        let i = grid_index(self.times(), t)?;
        let j = grid_index(self.times(), s)?;
        if j < i {
            return Err(Error::domain("reversed interval"));
        }
        Ok(self.second_level(i, j))
    }

    /// Largest violation of Chen's relation.
    ///
    /// Combines the stored anchors against the stored blocks on every
    /// interval with a check of `XX_{t,u} + XX_{u,s} + X_{t,u} (x) X_{u,s} = XX_{t,s}`
    /// on all triples of an evenly spaced sample of at most 33 grid points.
    pub fn chen_defect(&self) -> f64 {
        let d = self.dim();
        let dd = d * d;
        let n = self.len();
        let mut defect: f64 = 0.0;
        let origin = self.base.point(0);
        for k in 0..n - 1 {
            let left: Vec<f64> = self
                .base
                .point(k)
                .iter()
                .zip(origin)
                .map(|(a, b)| a - b)
                .collect();
            let step = self.base.increment(k, k + 1);
            let mut rhs: Vec<f64> = self.anchors[k * dd..(k + 1) * dd]
                .iter()
                .zip(self.block(k))
                .map(|(a, b)| a + b)
                .collect();
            add_outer(&mut rhs, &left, &step);
            let lhs = &self.anchors[(k + 1) * dd..(k + 2) * dd];
            let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            defect = defect.max(frobenius(&diff));
        }

        let samples: Vec<usize> = if n <= 33 {
            (0..n).collect()
        } else {
            let mut s: Vec<usize> = (0..=32).map(|k| k * (n - 1) / 32).collect();
            s.dedup();
            s
        };
        let rows: Vec<Vec<f64>> = samples.iter().map(|&a| self.chain_row(a, n - 1)).collect();
        let at =
            |ia: usize, b: usize| &rows[ia][(b - samples[ia]) * dd..(b - samples[ia] + 1) * dd];
        for (it, &t) in samples.iter().enumerate() {
            for (iu, &u) in samples.iter().enumerate().skip(it) {
                let xtu = self.base.increment(t, u);
                for &s in &samples[iu..] {
                    let mut lhs: Vec<f64> = at(it, u)
                        .iter()
                        .zip(at(iu, s))
                        .map(|(a, b)| a + b)
                        .collect();
                    add_outer(&mut lhs, &xtu, &self.base.increment(u, s));
                    let diff: Vec<f64> = lhs.iter().zip(at(it, s)).map(|(a, b)| a - b).collect();
                    defect = defect.max(frobenius(&diff));
                }
            }
        }
        defect
    }

    /// Largest `|Sym(XX_{t_k,t_{k+1}}) - X (x) X / 2|` over stored blocks.
    pub fn geometric_defect(&self) -> f64 {
        let d = self.dim();
        (0..self.len() - 1)
            .map(|k| {
                let x = self.base.increment(k, k + 1);
                let b = self.block(k);
                let mut worst: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let sym = 0.5 * (b[i * d + j] + b[j * d + i]);
                        worst = worst.max((sym - 0.5 * x[i] * x[j]).abs());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    /// Variation sums of `|XX|^q` for every right endpoint `lo..=hi`.
    pub fn second_level_var_row(&self, q: f64, lo: usize, hi: usize) -> Vec<f64> {
        let dd = self.dim() * self.dim();
        variation_row(lo, hi, q, |a, out: &mut Vec<f64>| {
            let row = self.chain_row(a, hi);
            out.clear();
            out.extend(row[dd..].chunks(dd).map(frobenius));
        })
    }

    /// `||X||_{p,[t_lo,t_hi]}`.
    pub fn x_pvar(&self, lo: usize, hi: usize) -> f64 {
        crate::path::pvar_norm_idx(&self.base, self.p, lo, hi)
    }

    /// `||XX||_{p/2,[t_lo,t_hi]}`.
    pub fn xx_pvar(&self, lo: usize, hi: usize) -> f64 {
        let q = self.p / 2.0;
        self.second_level_var_row(q, lo, hi)[hi - lo].powf(1.0 / q)
    }

    /// Chen refinement: every interval is split into `m` equal sub-intervals,
    /// the base is linearly interpolated, and each fine block is
    /// `d (x) d / 2 + (XX - X (x) X / 2) / m`, so chaining the `m` fine blocks
    /// returns the original block.
    pub fn refine(&self, m: usize) -> Result<RoughPath> {
        if m == 0 {
            return Err(Error::domain("refinement factor must be positive"));
        }
        let d = self.dim();
        let dd = d * d;
        let n = self.len() - 1;
        let mut times = Vec::with_capacity(n * m + 1);
        let mut values = Vec::with_capacity((n * m + 1) * d);
        let mut blocks = Vec::with_capacity(n * m * dd);
        for k in 0..n {
            let (t0, t1) = (self.base.time(k), self.base.time(k + 1));
            let x0 = self.base.point(k);
            let dx = self.base.increment(k, k + 1);
            let mut excess = self.block(k).to_vec();
            add_outer(
                &mut excess,
                &dx.iter().map(|v| -0.5 * v).collect::<Vec<_>>(),
                &dx,
            );
            let delta: Vec<f64> = dx.iter().map(|v| v / m as f64).collect();
            let mut fine = excess.iter().map(|v| v / m as f64).collect::<Vec<_>>();
            add_outer(
                &mut fine,
                &delta.iter().map(|v| 0.5 * v).collect::<Vec<_>>(),
                &delta,
            );
            for j in 0..m {
                let w = j as f64 / m as f64;
                times.push(t0 + (t1 - t0) * w);
                values.extend(x0.iter().zip(&dx).map(|(a, v)| a + w * v));
                blocks.extend_from_slice(&fine);
            }
        }
        times.push(self.base.last_time());
        values.extend_from_slice(self.base.point(n));
        RoughPath::new(DiscretePath::new(times, values, d)?, blocks, self.p)
    }
}

/// Canonical geometric lift of a piecewise-linear path:
/// `XX_{t_k,t_{k+1}} = X_{t_k,t_{k+1}} (x) X_{t_k,t_{k+1}} / 2`.
pub fn smooth_lift(path: &DiscretePath, p: f64) -> Result<RoughPath> {
    check_rough_p(p)?;
    let d = path.dim();
    let mut blocks = vec![0.0; (path.len() - 1) * d * d];
    for k in 0..path.len() - 1 {
        let dx = path.increment(k, k + 1);
        let half: Vec<f64> = dx.iter().map(|v| 0.5 * v).collect();
        add_outer(&mut blocks[k * d * d..(k + 1) * d * d], &half, &dx);
    }
    RoughPath::new(path.clone(), blocks, p)
}

/// Parameters of a seeded Brownian lift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianSpec {
    pub seed: u64,
    /// Number of coarse intervals; the grid has `intervals + 1` points.
    pub intervals: usize,
    pub horizon: f64,
    pub dim: usize,
    pub p: f64,
    pub refinement: usize,
}

impl BrownianSpec {
    pub fn new(seed: u64, intervals: usize) -> Self {
        BrownianSpec {
            seed,
            intervals,
            horizon: 1.0,
            dim: 1,
            p: 2.1,
            refinement: DEFAULT_REFINEMENT,
        }
    }

    pub fn dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn refinement(mut self, refinement: usize) -> Self {
        self.refinement = refinement;
        self
    }

    pub fn build(&self) -> Result<RoughPath> {
        brownian_lift(self)
    }
}

/// Brownian rough path with the piecewise-linear (Stratonovich) area.
///
/// Fine increment `j`, coordinate `a`, is `sqrt(dt) * N(seed, j * d + a)`
/// with `dt = T / (n r)`. Each coarse block chains its `r` fine blocks and is
/// then projected onto the geometric form `X (x) X / 2 + Anti(chained)`.
pub fn brownian_lift(spec: &BrownianSpec) -> Result<RoughPath> {
    let BrownianSpec {
        seed,
        intervals: n,
        horizon,
        dim: d,
        p,
        refinement: r,
    } = *spec;
    if n < 2 {
        return Err(Error::domain("a Brownian lift needs at least 2 intervals"));
    }
    if d == 0 || r == 0 || !(horizon > 0.0) {
        return Err(Error::domain(
            "dimension, refinement and horizon must be positive",
        ));
    }
    if !(p > 2.0 && p < 3.0) {
        return Err(Error::domain(format!(
            "Brownian lifts need p in (2, 3), got {p}"
        )));
    }
    let rng = CounterRng::new(seed);
    let scale = (horizon / (n * r) as f64).sqrt();
    let dd = d * d;
    let mut values = vec![0.0; (n + 1) * d];
    let mut blocks = vec![0.0; n * dd];
    let mut current = vec![0.0; d];
    let mut delta = vec![0.0; d];
    for k in 0..n {
        let start = current.clone();
        let mut acc = vec![0.0; dd];
        for j in k * r..(k + 1) * r {
            for (a, dv) in delta.iter_mut().enumerate() {
                *dv = scale * rng.normal((j * d + a) as u64);
            }
            let left: Vec<f64> = current.iter().zip(&start).map(|(c, s)| c - s).collect();
            add_outer(&mut acc, &left, &delta);
            let half: Vec<f64> = delta.iter().map(|v| 0.5 * v).collect();
            add_outer(&mut acc, &half, &delta);
            for (c, dv) in current.iter_mut().zip(&delta) {
                *c += dv;
            }
        }
        values[(k + 1) * d..(k + 2) * d].copy_from_slice(&current);
        let dx: Vec<f64> = (0..d)
            .map(|a| values[(k + 1) * d + a] - values[k * d + a])
            .collect();
        let block = &mut blocks[k * dd..(k + 1) * dd];
        for i in 0..d {
            for j in 0..d {
                block[i * d + j] = 0.5 * dx[i] * dx[j] + 0.5 * (acc[i * d + j] - acc[j * d + i]);
            }
        }
    }
    let base = DiscretePath::new(uniform_grid(n, horizon), values, d)?;
    RoughPath::new(base, blocks, p)
}
