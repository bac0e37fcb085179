//! Numerical toolkit for rough paths driven by path-dependent coefficients.
//!
//! The crate is organised bottom-up:
//!
//! * [`path`]: grid paths, exact and greedy p-variation, superadditive
//!   interval controls and the piecewise-linear approximation operator.
//! * [`lift`]: level-2 rough paths with Chen reconstruction and the
//!   smooth and Brownian constructors.
//! * [`controlled`]: controlled paths, their remainders and norms, and the
//!   `rho` control with its Hölder-type seminorms.
//! * [`functional`]: non-anticipative functionals on stopped paths, their
//!   horizontal and vertical derivatives and the shipped example families.
//! * [`integral`]: compensated Riemann sums for controlled and functional
//!   integrands.
//! * [`rde`]: the fixed-point solver for path-dependent rough differential
//!   equations.
//! * [`oracle`]: brute-force references used to cross-check the above.

pub mod controlled;
pub mod error;
pub mod functional;
pub mod integral;
pub mod io;
pub mod lift;
pub mod oracle;
pub mod path;
pub mod rde;
pub mod rng;
pub mod stats;

pub use controlled::{ControlledNorm, ControlledPath};
pub use error::{Error, Result};
pub use functional::{PathFunctional, StoppedPath};
pub use integral::{Compensation, IntegralResult};
pub use lift::RoughPath;
pub use path::{DiscretePath, IntervalControl};
pub use rde::{RdeProblem, RdeSolution};

/// Upper end of the exponent range in which `1/p + 1/q_p > 1` holds for
/// `q_p = p^2 / (p + 1)`, namely `1 + sqrt(2)`.
pub const P_FUNCTIONAL_LIMIT: f64 = 1.0 + std::f64::consts::SQRT_2;

/// Remainder exponent `q_p = p^2 / (p + 1)` attached to functional lifts.
pub fn remainder_exponent(p: f64) -> f64 {
    p * p / (p + 1.0)
}

/// Euclidean (Frobenius for matrices) norm of a flat vector.
#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Euclidean norm of `a - b`.
#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
