//! Shipped functionals: endpoint maps, constants, the running maximum and
//! its smoothed version, discrete-time dependence and integral dependence.

use std::fmt;
use std::sync::Arc;

use super::{LipschitzMeta, PathFunctional, StoppedPath};
use crate::error::{Error, Result};

/// `F(t, x) = A x(t)` with `A` an `m x k` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Endpoint {
    matrix: Vec<f64>,
    rows: usize,
    cols: usize,
    id: String,
}

impl Endpoint {
    pub fn new(matrix: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || matrix.len() != rows * cols {
            return Err(Error::domain("endpoint matrix has the wrong shape"));
        }
        Ok(Endpoint {
            matrix,
            rows,
            cols,
            id: "linear".into(),
        })
    }

    pub fn identity(k: usize) -> Self {
        let mut matrix = vec![0.0; k * k];
        (0..k).for_each(|i| matrix[i * k + i] = 1.0);
        Endpoint {
            matrix,
            rows: k,
            cols: k,
            id: "x".into(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }
}

impl PathFunctional for Endpoint {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn input_dim(&self) -> usize {
        self.cols
    }

    fn output_dim(&self) -> usize {
        self.rows
    }

    fn evaluate(&self, x: &StoppedPath) -> Vec<f64> {
        let z = x.terminal();
        self.matrix
            .chunks(self.cols)
            .map(|row| row.iter().zip(&z).map(|(a, v)| a * v).sum())
            .collect()
    }

    fn vertical(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(self.matrix.clone())
    }

    fn vertical2(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![0.0; self.rows * self.cols * self.cols])
    }

    fn horizontal(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![0.0; self.rows])
    }

    fn lipschitz(&self) -> LipschitzMeta {
        LipschitzMeta {
            value: Some(crate::norm(&self.matrix)),
            horizontal: Some(0.0),
            gradient: Some(0.0),
            hessian: Some(0.0),
        }
    }
}

/// `F(t, x) = c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constant {
    value: Vec<f64>,
    input_dim: usize,
}

impl Constant {
    pub fn new(value: Vec<f64>, input_dim: usize) -> Self {
        Constant { value, input_dim }
    }
}

impl PathFunctional for Constant {
    fn id(&self) -> String {
        match self.value.first() {
            Some(c) if self.value.iter().all(|v| v == c) => format!("const:{c}"),
            _ => "const".into(),
        }
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.value.len()
    }

    fn evaluate(&self, _x: &StoppedPath) -> Vec<f64> {
        self.value.clone()
    }

    fn vertical(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![0.0; self.value.len() * self.input_dim])
    }

    fn vertical2(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![
            0.0;
            self.value.len() * self.input_dim * self.input_dim
        ])
    }

    fn horizontal(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![0.0; self.value.len()])
    }

    fn lipschitz(&self) -> LipschitzMeta {
        LipschitzMeta {
            value: Some(0.0),
            horizontal: Some(0.0),
            gradient: Some(0.0),
            hessian: Some(0.0),
        }
    }
}

/// `m(t, z)` and `z(t)` of a scalar stopped path. The maximum includes the
/// left limit at `t`, so a downward bump cannot lower it.
fn max_and_terminal(x: &StoppedPath) -> (f64, f64) {
    let z = x.terminal()[0];
    let m = (0..=x.index())
        .map(|k| x.grid_point(k)[0])
        .fold(z, f64::max);
    (m, z)
}

/// The running maximum `m(t, z) = max_{s <= t} z(s)` of a scalar path.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningMax;

impl PathFunctional for RunningMax {
    fn id(&self) -> String {
        "maxraw".into()
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &StoppedPath) -> Vec<f64> {
        vec![max_and_terminal(x).0]
    }

    fn horizontal(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }

    fn lipschitz(&self) -> LipschitzMeta {
        LipschitzMeta {
            value: Some(1.0),
            horizontal: Some(0.0),
            ..LipschitzMeta::default()
        }
    }
}

/// Interpolating polynomial of the smoothed running maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HShape {
    /// `h(z) = z^2 / (4 eps)`.
    Quadratic,
    /// Degree-5 polynomial with `h(0) = h'(0) = h''(0) = 0` and
    /// `h(2 eps) = eps`, `h'(2 eps) = 1`, `h''(2 eps) = 0`.
    Quintic,
}

impl fmt::Display for HShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HShape::Quadratic => "quadratic",
            HShape::Quintic => "quintic",
        })
    }
}

/// Smoothed running maximum `M_{eps,h}` of a scalar path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothedRunningMax {
    eps: f64,
    shape: HShape,
    /// `h(z) = c[0] z^3 + c[1] z^4 + c[2] z^5` for the quintic shape.
    coeffs: [f64; 3],
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for c in col..3 {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// `M_{eps,h}` with the chosen `h`.
pub fn smoothed_running_max(eps: f64, shape: HShape) -> Result<SmoothedRunningMax> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("eps must be positive, got {eps}")));
    }
    let l = 2.0 * eps;
    let coeffs = match shape {
        HShape::Quadratic => [0.0; 3],
        HShape::Quintic => solve3(
            [
                [l.powi(3), l.powi(4), l.powi(5)],
                [3.0 * l * l, 4.0 * l.powi(3), 5.0 * l.powi(4)],
                [6.0 * l, 12.0 * l * l, 20.0 * l.powi(3)],
            ],
            [eps, 1.0, 0.0],
        ),
    };
    Ok(SmoothedRunningMax { eps, shape, coeffs })
}

impl SmoothedRunningMax {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn shape(&self) -> HShape {
        self.shape
    }

    /// `(a_3, a_4, a_5)` of the quintic; zero for the quadratic.
    pub fn coefficients(&self) -> [f64; 3] {
        self.coeffs
    }

    pub fn h(&self, z: f64) -> f64 {
        let [a3, a4, a5] = self.coeffs;
        match self.shape {
            HShape::Quadratic => z * z / (4.0 * self.eps),
            HShape::Quintic => z * z * z * (a3 + z * (a4 + z * a5)),
        }
    }

    pub fn h1(&self, z: f64) -> f64 {
        let [a3, a4, a5] = self.coeffs;
        match self.shape {
            HShape::Quadratic => z / (2.0 * self.eps),
            HShape::Quintic => z * z * (3.0 * a3 + z * (4.0 * a4 + z * 5.0 * a5)),
        }
    }

    pub fn h2(&self, z: f64) -> f64 {
        let [a3, a4, a5] = self.coeffs;
        match self.shape {
            HShape::Quadratic => 1.0 / (2.0 * self.eps),
            HShape::Quintic => z * (6.0 * a3 + z * (12.0 * a4 + z * 20.0 * a5)),
        }
    }

    /// Branch value, first and second derivative at `(m, z)`.
    fn branches(&self, m: f64, z: f64) -> (f64, f64, f64) {
        if z >= m {
            return (z, 1.0, 0.0);
        }
        let u = z - (m - 2.0 * self.eps);
        if u <= 0.0 {
            (m - self.eps, 0.0, 0.0)
        } else {
            (m - self.eps + self.h(u), self.h1(u), self.h2(u))
        }
    }
}

impl PathFunctional for SmoothedRunningMax {
    fn id(&self) -> String {
        format!("smax:eps={}:{}", self.eps, self.shape)
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn evaluate(&self, x: &StoppedPath) -> Vec<f64> {
        let (m, z) = max_and_terminal(x);
        vec![self.branches(m, z).0]
    }

    fn vertical(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        let (m, z) = max_and_terminal(x);
        Some(vec![self.branches(m, z).1])
    }

    fn vertical2(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        let (m, z) = max_and_terminal(x);
        Some(vec![self.branches(m, z).2])
    }

    fn horizontal(&self, _x: &StoppedPath) -> Option<Vec<f64>> {
        Some(vec![0.0])
    }

    fn lipschitz(&self) -> LipschitzMeta {
        // h' and h'' are evaluated at z - m + 2 eps, which moves by at most 2 d_inf.
        let (gradient, hessian) = match self.shape {
            HShape::Quadratic => (1.0 / self.eps, None),
            HShape::Quintic => (1.5 / self.eps, Some(3.0 / (self.eps * self.eps))),
        };
        LipschitzMeta {
            value: Some(1.0),
            horizontal: Some(0.0),
            gradient: Some(gradient),
            hessian,
        }
    }
}

/// `phi(t, x_1, ..., x_m) -> R^N` on concatenated arguments.
pub type PhiFn = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

/// `F(t, x) = phi(t, x(t ^ t_1), ..., x(t ^ t_m))`.
#[derive(Clone)]
pub struct DiscreteTimeFunctional {
    points: Vec<f64>,
    k: usize,
    n_out: usize,
    phi: PhiFn,
    grad: Option<PhiFn>,
    hess: Option<PhiFn>,
    dt: Option<PhiFn>,
    id: String,
}

impl fmt::Debug for DiscreteTimeFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiscreteTimeFunctional")
            .field("points", &self.points)
            .field("k", &self.k)
            .field("n_out", &self.n_out)
            .field("id", &self.id)
            .finish()
    }
}

/// Builds the discrete-time functional. `grad` returns `N x (m k)` values,
/// `hess` returns `N x (m k) x (m k)`, `dt` returns `d phi / dt`.
pub fn discrete_time_functional(
    points: Vec<f64>,
    k: usize,
    n_out: usize,
    phi: PhiFn,
) -> Result<DiscreteTimeFunctional> {
    if points.is_empty() || points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("time points must be nonempty and increasing"));
    }
    Ok(DiscreteTimeFunctional {
        points,
        k,
        n_out,
        phi,
        grad: None,
        hess: None,
        dt: None,
        id: "disc".into(),
    })
}

impl DiscreteTimeFunctional {
    pub fn with_gradient(mut self, grad: PhiFn) -> Self {
        self.grad = Some(grad);
        self
    }

    pub fn with_hessian(mut self, hess: PhiFn) -> Self {
        self.hess = Some(hess);
        self
    }

    pub fn with_time_derivative(mut self, dt: PhiFn) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn arguments(&self, x: &StoppedPath) -> Vec<f64> {
        self.points.iter().flat_map(|&ti| x.value_at(ti)).collect()
    }

    /// Indices `i` with `t_i >= t`.
    fn live(&self, t: f64) -> impl Iterator<Item = usize> + '_ {
        let first = self.points.partition_point(|&ti| ti < t);
        first..self.points.len()
    }
}

impl PathFunctional for DiscreteTimeFunctional {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn input_dim(&self) -> usize {
        self.k
    }

    fn output_dim(&self) -> usize {
        self.n_out
    }

    fn evaluate(&self, x: &StoppedPath) -> Vec<f64> {
        (self.phi)(x.time(), &self.arguments(x))
    }

    fn vertical(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        let grad = (self.grad.as_ref()?)(x.time(), &self.arguments(x));
        let (k, mk) = (self.k, self.k * self.points.len());
        let mut out = vec![0.0; self.n_out * k];
        for o in 0..self.n_out {
            for i in self.live(x.time()) {
                for c in 0..k {
                    out[o * k + c] += grad[o * mk + i * k + c];
                }
            }
        }
        Some(out)
    }

    fn vertical2(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        let hess = (self.hess.as_ref()?)(x.time(), &self.arguments(x));
        let (k, mk) = (self.k, self.k * self.points.len());
        let mut out = vec![0.0; self.n_out * k * k];
        for o in 0..self.n_out {
            for i in self.live(x.time()) {
                for j in self.live(x.time()) {
                    for c in 0..k {
                        for c2 in 0..k {
                            out[(o * k + c) * k + c2] +=
                                hess[(o * mk + i * k + c) * mk + j * k + c2];
                        }
                    }
                }
            }
        }
        Some(out)
    }

    fn horizontal(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        self.dt.as_ref().map(|dt| dt(x.time(), &self.arguments(x)))
    }
}

/// `psi(s, x_s, y) -> R^N`.
pub type PsiFn = Arc<dyn Fn(f64, &StoppedPath, &[f64]) -> Vec<f64> + Send + Sync>;

/// `F(t, x) = int_0^t psi(s, x_s, x(t)) ds` by the trapezoid rule on the grid.
#[derive(Clone)]
pub struct IntegralFunctional {
    k: usize,
    n_out: usize,
    psi: PsiFn,
    grad_y: Option<PsiFn>,
    hess_y: Option<PsiFn>,
    id: String,
}

impl fmt::Debug for IntegralFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IntegralFunctional")
            .field("k", &self.k)
            .field("n_out", &self.n_out)
            .field("id", &self.id)
            .finish()
    }
}

/// Builds the integral functional; `grad_y` returns `N x k`, `hess_y` `N x k x k`.
pub fn integral_functional(k: usize, n_out: usize, psi: PsiFn) -> IntegralFunctional {
    IntegralFunctional {
        k,
        n_out,
        psi,
        grad_y: None,
        hess_y: None,
        id: "int".into(),
    }
}

impl IntegralFunctional {
    pub fn with_gradient(mut self, grad_y: PsiFn) -> Self {
        self.grad_y = Some(grad_y);
        self
    }

    pub fn with_hessian(mut self, hess_y: PsiFn) -> Self {
        self.hess_y = Some(hess_y);
        self
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    fn integrate(&self, g: &PsiFn, x: &StoppedPath) -> Vec<f64> {
        let y = x.terminal();
        let last = x.index();
        let times = x.times();
        let mut prev = g(times[0], &x.stopped_at(0), &y);
        let mut acc = vec![0.0; prev.len()];
        let step = |acc: &mut Vec<f64>, prev: &mut Vec<f64>, next: Vec<f64>, h: f64| {
            for ((a, p), v) in acc.iter_mut().zip(prev.iter()).zip(&next) {
                *a += 0.5 * h * (p + v);
            }
            *prev = next;
        };
        for j in 1..=last {
            let next = g(times[j], &x.stopped_at(j), &y);
            step(&mut acc, &mut prev, next, times[j] - times[j - 1]);
        }
        let tail = x.time() - times[last];
        if tail > 0.0 {
            let frozen = x.stopped_at(last).advanced(tail).expect("within horizon");
            let next = g(x.time(), &frozen, &y);
            step(&mut acc, &mut prev, next, tail);
        }
        acc
    }
}

impl PathFunctional for IntegralFunctional {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn input_dim(&self) -> usize {
        self.k
    }

    fn output_dim(&self) -> usize {
        self.n_out
    }

    fn evaluate(&self, x: &StoppedPath) -> Vec<f64> {
        self.integrate(&self.psi, x)
    }

    fn vertical(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        Some(self.integrate(self.grad_y.as_ref()?, x))
    }

    fn vertical2(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        Some(self.integrate(self.hess_y.as_ref()?, x))
    }

    fn horizontal(&self, x: &StoppedPath) -> Option<Vec<f64>> {
        Some((self.psi)(x.time(), x, &x.terminal()))
    }
}
