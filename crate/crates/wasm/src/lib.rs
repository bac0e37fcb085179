//! Browser bindings for three demo operations: a planar Brownian lift with
//! its Lévy area, a path-dependent RDE driven by the smoothed running
//! maximum, and the running-max smoothing itself.
//!
//! The computations live in plain functions returning [`roughpd::Result`] so
//! they run under `cargo test`; the `#[wasm_bindgen]` wrappers only convert
//! errors.

use std::sync::Arc;

use wasm_bindgen::prelude::*;

use roughpd::functional::{
    evaluate_along, remainder_scaling, smoothed_running_max, vertical_along, Constant, HShape,
};
use roughpd::lift::BrownianSpec;
use roughpd::oracle::euler_level2;
use roughpd::path::p_variation_exact;
use roughpd::rde::{solve, SolveOptions};
use roughpd::{RdeProblem, Result};

/// Fine Euler steps per driver interval in the solver comparison.
const EULER_REFINEMENT: usize = 16;

fn js(e: roughpd::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn shape(quintic: bool) -> HShape {
    if quintic {
        HShape::Quintic
    } else {
        HShape::Quadratic
    }
}

/// A two-dimensional Brownian rough path.
#[wasm_bindgen]
pub struct LiftView {
    times: Vec<f64>,
    x1: Vec<f64>,
    x2: Vec<f64>,
    area: Vec<f64>,
    chen_defect: f64,
    pvar: f64,
}

#[wasm_bindgen]
impl LiftView {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    pub fn x1(&self) -> Vec<f64> {
        self.x1.clone()
    }

    pub fn x2(&self) -> Vec<f64> {
        self.x2.clone()
    }

    /// Lévy area `A_{0,t}`.
    pub fn area(&self) -> Vec<f64> {
        self.area.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn chen_defect(&self) -> f64 {
        self.chen_defect
    }

    /// Exact p-variation of the first level.
    #[wasm_bindgen(getter)]
    pub fn pvar(&self) -> f64 {
        self.pvar
    }
}

pub fn lift_view(seed: u32, n: usize, p: f64) -> Result<LiftView> {
    let rp = BrownianSpec::new(seed.into(), n).dim(2).p(p).build()?;
    let x = rp.base();
    let area = (0..rp.len())
        .map(|k| {
            let xx = rp.second_level(0, k);
            0.5 * (xx[1] - xx[2])
        })
        .collect();
    Ok(LiftView {
        times: x.times().to_vec(),
        x1: (0..x.len()).map(|k| x.point(k)[0]).collect(),
        x2: (0..x.len()).map(|k| x.point(k)[1]).collect(),
        area,
        chen_defect: rp.chen_defect(),
        pvar: p_variation_exact(x, p, 0.0, x.last_time())?,
    })
}

#[wasm_bindgen]
pub fn brownian_lift(seed: u32, n: usize, p: f64) -> std::result::Result<LiftView, JsError> {
    lift_view(seed, n, p).map_err(js)
}

/// Solution of `dY = smax_eps(Y) dX` next to a fine Euler reference.
#[wasm_bindgen]
pub struct SolveView {
    times: Vec<f64>,
    driver: Vec<f64>,
    y: Vec<f64>,
    euler: Vec<f64>,
    boundaries: Vec<f64>,
    residual: f64,
    iterations: usize,
}

#[wasm_bindgen]
impl SolveView {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    pub fn driver(&self) -> Vec<f64> {
        self.driver.clone()
    }

    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }

    /// Fine-grid Euler scheme with the second-level term, at driver times.
    pub fn euler(&self) -> Vec<f64> {
        self.euler.clone()
    }

    /// Start times of the Picard windows, then the final time.
    pub fn boundaries(&self) -> Vec<f64> {
        self.boundaries.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Picard iterations summed over windows.
    #[wasm_bindgen(getter)]
    pub fn iterations(&self) -> usize {
        self.iterations
    }
}

pub fn solve_view(seed: u32, n: usize, eps: f64, xi: f64) -> Result<SolveView> {
    let rp = BrownianSpec::new(seed.into(), n).build()?;
    let sigma = smoothed_running_max(eps, HShape::Quintic)?;
    let problem = RdeProblem::with_start(
        Arc::new(Constant::new(vec![0.0], 1)),
        Arc::new(sigma),
        rp,
        vec![xi],
    )?;
    let sol = solve(&problem, &SolveOptions::default())?;
    let fine = euler_level2(&problem, n * EULER_REFINEMENT)?;
    let x = problem.driver().base();
    let mut boundaries: Vec<f64> = sol.windows.iter().map(|w| w.t_start).collect();
    boundaries.push(x.last_time());
    Ok(SolveView {
        times: x.times().to_vec(),
        driver: x.values().to_vec(),
        y: sol.solution.y().values().to_vec(),
        euler: (0..x.len())
            .map(|k| fine.point(k * EULER_REFINEMENT)[0])
            .collect(),
        boundaries,
        residual: sol.residual,
        iterations: sol.windows.iter().map(|w| w.iterations).sum(),
    })
}

#[wasm_bindgen]
pub fn solve_smax(seed: u32, n: usize, eps: f64, xi: f64) -> std::result::Result<SolveView, JsError> {
    solve_view(seed, n, eps, xi).map_err(js)
}

/// The smoothed running maximum along a scalar Brownian path.
#[wasm_bindgen]
pub struct SmaxView {
    times: Vec<f64>,
    x: Vec<f64>,
    raw: Vec<f64>,
    smooth: Vec<f64>,
    gradient: Vec<f64>,
    remainder_slope: f64,
}

#[wasm_bindgen]
impl SmaxView {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    /// `max_{u <= t} x(u)`.
    pub fn raw(&self) -> Vec<f64> {
        self.raw.clone()
    }

    pub fn smooth(&self) -> Vec<f64> {
        self.smooth.clone()
    }

    /// Vertical derivative of the smoothed maximum.
    pub fn gradient(&self) -> Vec<f64> {
        self.gradient.clone()
    }

    /// Log-log slope of the remainder against the control; NaN when the
    /// fit is degenerate.
    #[wasm_bindgen(getter)]
    pub fn remainder_slope(&self) -> f64 {
        self.remainder_slope
    }
}

pub fn smax_view(seed: u32, n: usize, eps: f64, quintic: bool, p: f64) -> Result<SmaxView> {
    let rp = BrownianSpec::new(seed.into(), n).p(p).build()?;
    let x = rp.base();
    let f = smoothed_running_max(eps, shape(quintic))?;
    let mut raw = Vec::with_capacity(x.len());
    let mut top = f64::NEG_INFINITY;
    for &v in x.values() {
        top = top.max(v);
        raw.push(top);
    }
    Ok(SmaxView {
        times: x.times().to_vec(),
        x: x.values().to_vec(),
        raw,
        smooth: evaluate_along(&f, x),
        gradient: vertical_along(&f, x)?,
        remainder_slope: remainder_scaling(&f, x, p)?.slope.unwrap_or(f64::NAN),
    })
}

#[wasm_bindgen]
pub fn smax_profile(
    seed: u32,
    n: usize,
    eps: f64,
    quintic: bool,
    p: f64,
) -> std::result::Result<SmaxView, JsError> {
    smax_view(seed, n, eps, quintic, p).map_err(js)
}
