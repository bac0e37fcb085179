//! Empirical regularity of functionals over probe paths.

use serde::Serialize;

use super::{
    d_infty, default_step, functional_remainder_idx, horizontal_derivative, vertical2_fd,
    vertical_derivative, PathFunctional, StoppedPath,
};
use crate::error::Result;
use crate::path::{pvar_norm_idx, DiscretePath};
use crate::stats::loglog_slope;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportConfig {
    /// Variation exponent of the probes.
    pub p: f64,
    /// Stopping times sampled per probe.
    pub stops_per_probe: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            p: 2.1,
            stops_per_probe: 12,
        }
    }
}

/// Largest observed `|Q(a) - Q(b)| / d_inf(a, b)` for `F`, `DF`, `grad F`, `grad^2 F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    #[serde(rename = "F")]
    pub value: f64,
    #[serde(rename = "DF")]
    pub horizontal: Option<f64>,
    #[serde(rename = "gradF")]
    pub gradient: f64,
    pub hess: f64,
}

/// `None` means no declared constant to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flags {
    pub value: Option<bool>,
    pub horizontal: Option<bool>,
    pub gradient: Option<bool>,
    pub hessian: Option<bool>,
    /// Every finite-difference vertical gradient was stable.
    pub vertically_differentiable: bool,
    /// Remainder scaling slope meets `(1 + 1/p)/p - 0.15`.
    pub remainder_scaling: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityReport {
    pub functional_id: String,
    pub constants: Constants,
    pub flags: Flags,
    pub probe_count: usize,
    pub unstable_points: usize,
    pub remainder_slope: Option<f64>,
}

struct Sample<'a> {
    stop: StoppedPath<'a>,
    value: Vec<f64>,
    horizontal: Option<Vec<f64>>,
    gradient: Vec<f64>,
    hessian: Vec<f64>,
}

const BUMP: f64 = 1e-3;

fn within(observed: f64, declared: Option<f64>) -> Option<bool> {
    declared.map(|k| observed <= k * (1.0 + 1e-6) + 1e-9)
}

/// Empirical Lipschitz constants, finite-difference stability and remainder
/// scaling of `f` over stopped probe paths.
pub fn regularity_report(
    f: &dyn PathFunctional,
    probes: &[DiscretePath],
    config: &ReportConfig,
) -> Result<RegularityReport> {
    if probes.is_empty() {
        return Err(crate::Error::domain(
            "the report needs at least one probe path",
        ));
    }
    for probe in probes {
        super::check_dims(f, probe.dim())?;
    }
    let mut samples = Vec::new();
    let mut unstable_points = 0;
    let (mut kv, mut kh, mut kg, mut k2) = (0.0_f64, None::<f64>, 0.0_f64, 0.0_f64);
    for probe in probes {
        let n = probe.len();
        let stops = config.stops_per_probe.clamp(1, n);
        let mut idx: Vec<usize> = if stops == 1 {
            vec![n - 1]
        } else {
            (0..stops).map(|i| i * (n - 1) / (stops - 1)).collect()
        };
        idx.dedup();
        for k in idx {
            let stop = StoppedPath::new(probe, k);
            let h = default_step(&stop);
            let grad = vertical_derivative(f, &stop, h);
            if grad.unstable {
                unstable_points += 1;
            }
            let hessian = f
                .vertical2(&stop)
                .unwrap_or_else(|| vertical2_fd(f, &stop, 1e-4));
            let value = f.evaluate(&stop);
            // Vertical bumps: d_inf equals the bump size.
            for i in 0..probe.dim() {
                let mut bump = vec![0.0; probe.dim()];
                bump[i] = BUMP;
                let bumped = stop.with_bump(&bump);
                kv = kv.max(crate::dist(&f.evaluate(&bumped), &value) / BUMP);
                let g = vertical_derivative(f, &bumped, h).value;
                kg = kg.max(crate::dist(&g, &grad.value) / BUMP);
                let hb = f
                    .vertical2(&bumped)
                    .unwrap_or_else(|| vertical2_fd(f, &bumped, 1e-4));
                k2 = k2.max(crate::dist(&hb, &hessian) / BUMP);
            }
            samples.push(Sample {
                value,
                horizontal: horizontal_derivative(f, &stop, h).ok(),
                gradient: grad.value,
                hessian,
                stop,
            });
        }
    }

    for (i, a) in samples.iter().enumerate() {
        for b in &samples[i + 1..] {
            let d = d_infty(&a.stop, &b.stop);
            if d <= 0.0 {
                continue;
            }
            kv = kv.max(crate::dist(&a.value, &b.value) / d);
            kg = kg.max(crate::dist(&a.gradient, &b.gradient) / d);
            k2 = k2.max(crate::dist(&a.hessian, &b.hessian) / d);
            if let (Some(ha), Some(hb)) = (&a.horizontal, &b.horizontal) {
                let r = crate::dist(ha, hb) / d;
                kh = Some(kh.map_or(r, |v: f64| v.max(r)));
            }
        }
    }

    let remainder_slope = if samples.iter().all(|s| f.vertical(&s.stop).is_some()) {
        let slopes: Vec<f64> = probes
            .iter()
            .filter_map(|probe| remainder_scaling(f, probe, config.p).ok()?.slope)
            .collect();
        (!slopes.is_empty()).then(|| slopes.iter().sum::<f64>() / slopes.len() as f64)
    } else {
        None
    };
    let target = (1.0 + 1.0 / config.p) / config.p - 0.15;
    let meta = f.lipschitz();
    Ok(RegularityReport {
        functional_id: f.id(),
        constants: Constants {
            value: kv,
            horizontal: kh,
            gradient: kg,
            hess: k2,
        },
        flags: Flags {
            value: within(kv, meta.value),
            horizontal: kh.and_then(|v| within(v, meta.horizontal)),
            gradient: within(kg, meta.gradient),
            hessian: within(k2, meta.hessian),
            vertically_differentiable: unstable_points == 0,
            remainder_scaling: remainder_slope.map(|s| s >= target),
        },
        probe_count: probes.len(),
        unstable_points,
        remainder_slope,
    })
}

/// Per-level averages of `|R^F_{t,s}|` against `omega([t,s]) = |s - t| + ||X||^p_{p,[t,s]}`
/// over dyadic intervals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingStudy {
    pub omega: Vec<f64>,
    pub remainder: Vec<f64>,
    pub slope: Option<f64>,
}

/// Dyadic remainder scaling study of `f` along `path`.
pub fn remainder_scaling(
    f: &dyn PathFunctional,
    path: &DiscretePath,
    p: f64,
) -> Result<ScalingStudy> {
    let n = path.len() - 1;
    let (mut omega, mut remainder) = (Vec::new(), Vec::new());
    let mut len = 1;
    while len <= n / 2 {
        let (mut so, mut sr, mut count) = (0.0, 0.0, 0.0);
        let mut a = 0;
        while a + len <= n {
            let b = a + len;
            let w = (path.time(b) - path.time(a)) + pvar_norm_idx(path, p, a, b).powf(p);
            so += w;
            sr += crate::norm(&functional_remainder_idx(f, path, a, b)?);
            count += 1.0;
            a = b;
        }
        omega.push(so / count);
        remainder.push(sr / count);
        len *= 2;
    }
    let slope = loglog_slope(&omega, &remainder);
    Ok(ScalingStudy {
        omega,
        remainder,
        slope,
    })
}
