//! Functionals addressable by string id.

use std::sync::Arc;

use super::examples::{
    discrete_time_functional, integral_functional, smoothed_running_max, Constant, Endpoint,
    HShape, PhiFn, PsiFn, RunningMax,
};
use super::PathFunctional;
use crate::error::{Error, Result};

/// Recognised ids, for help texts.
pub const FUNCTIONAL_IDS: &[&str] = &[
    "x",
    "linear:<c>",
    "const:<c>",
    "zero",
    "maxraw",
    "smax:eps=<eps>[:quadratic|:quintic]",
    "smax:<eps>[:quadratic|:quintic]",
    "int:x",
    "int:y2",
    "disc:<t1>:<t2>",
];

fn number(s: &str, what: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("invalid {what} '{s}'")))
}

fn scalar_only(id: &str, k: usize, m: usize) -> Result<()> {
    if k != 1 || m != 1 {
        return Err(Error::domain(format!(
            "'{id}' is scalar; requested {k} inputs and {m} outputs"
        )));
    }
    Ok(())
}

/// `c x(t)` broadcast to `m` outputs: the identity when `m == k`, a column
/// of `c` when `k == 1`.
fn broadcast(id: &str, c: f64, k: usize, m: usize) -> Result<Endpoint> {
    let mut a = vec![0.0; m * k];
    if m == k {
        (0..k).for_each(|i| a[i * k + i] = c);
    } else if k == 1 {
        a.iter_mut().for_each(|v| *v = c);
    } else {
        return Err(Error::domain(format!(
            "'{id}' cannot map {k}-dimensional paths to {m} outputs"
        )));
    }
    Ok(Endpoint::new(a, m, k)?.with_id(id))
}

/// Parses a functional id for paths of dimension `k` and `m` outputs.
pub fn parse_functional(id: &str, k: usize, m: usize) -> Result<Box<dyn PathFunctional>> {
    let parts: Vec<&str> = id.trim().split(':').collect();
    let f: Box<dyn PathFunctional> = match parts.as_slice() {
        ["x"] => Box::new(broadcast(id, 1.0, k, m)?),
        ["linear", c] => Box::new(broadcast(id, number(c, "coefficient")?, k, m)?),
        ["zero"] => Box::new(Constant::new(vec![0.0; m], k)),
        ["const", c] => Box::new(Constant::new(vec![number(c, "constant")?; m], k)),
        ["maxraw"] => {
            scalar_only(id, k, m)?;
            Box::new(RunningMax)
        }
        ["smax", rest @ ..] if !rest.is_empty() && rest.len() <= 2 => {
            scalar_only(id, k, m)?;
            let eps_text = rest[0].strip_prefix("eps=").unwrap_or(rest[0]);
            let shape = match rest.get(1) {
                None | Some(&"quintic") => HShape::Quintic,
                Some(&"quadratic") => HShape::Quadratic,
                Some(other) => return Err(Error::Parse(format!("unknown h shape '{other}'"))),
            };
            Box::new(smoothed_running_max(number(eps_text, "eps")?, shape)?)
        }
        ["int", "x"] => {
            if k != m {
                return Err(Error::domain("'int:x' needs as many outputs as inputs"));
            }
            let psi: PsiFn = Arc::new(|_, xs, _| xs.terminal());
            let zero: PsiFn = Arc::new(move |_, _, _| vec![0.0; k * k]);
            let zero2: PsiFn = Arc::new(move |_, _, _| vec![0.0; k * k * k]);
            Box::new(
                integral_functional(k, k, psi)
                    .with_gradient(zero)
                    .with_hessian(zero2)
                    .with_id(id),
            )
        }
        ["int", "y2"] => {
            scalar_only(id, k, m)?;
            let psi: PsiFn = Arc::new(|_, _, y| vec![y[0] * y[0]]);
            let grad: PsiFn = Arc::new(|_, _, y| vec![2.0 * y[0]]);
            let hess: PsiFn = Arc::new(|_, _, _| vec![2.0]);
            Box::new(
                integral_functional(1, 1, psi)
                    .with_gradient(grad)
                    .with_hessian(hess)
                    .with_id(id),
            )
        }
        ["disc", t1, t2] => {
            scalar_only(id, k, m)?;
            let phi: PhiFn = Arc::new(|_, a| vec![a[0] * a[1]]);
            let grad: PhiFn = Arc::new(|_, a| vec![a[1], a[0]]);
            let hess: PhiFn = Arc::new(|_, _| vec![0.0, 1.0, 1.0, 0.0]);
            let dt: PhiFn = Arc::new(|_, _| vec![0.0]);
            Box::new(
                discrete_time_functional(
                    vec![number(t1, "time")?, number(t2, "time")?],
                    1,
                    1,
                    phi,
                )?
                .with_gradient(grad)
                .with_hessian(hess)
                .with_time_derivative(dt)
                .with_id(id),
            )
        }
        _ => {
            return Err(Error::Parse(format!(
                "unknown functional '{id}'; expected one of {}",
                FUNCTIONAL_IDS.join(", ")
            )))
        }
    };
    if f.input_dim() != k || f.output_dim() != m {
        return Err(Error::domain(format!("'{id}' has the wrong shape")));
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_ids() {
        for id in [
            "x",
            "linear:2",
            "const:1.5",
            "zero",
            "maxraw",
            "smax:eps=0.1:quintic",
            "smax:0.25:quintic",
            "smax:0.5:quadratic",
            "int:x",
            "int:y2",
            "disc:0.25:0.75",
        ] {
            parse_functional(id, 1, 1).unwrap();
        }
        let f = parse_functional("smax:0.25", 1, 1).unwrap();
        assert_eq!(f.id(), "smax:eps=0.25:quintic");
    }

    #[test]
    fn rejects_unknown_and_misshaped() {
        assert!(matches!(
            parse_functional("nope", 1, 1),
            Err(Error::Parse(_))
        ));
        assert!(parse_functional("smax:abc", 1, 1).is_err());
        assert!(parse_functional("maxraw", 2, 1).is_err());
        assert!(parse_functional("x", 2, 3).is_err());
        assert_eq!(parse_functional("x", 1, 3).unwrap().output_dim(), 3);
    }
}
