//! Dormand–Prince 5(4) integration of autonomous systems.

use serde::{Deserialize, Serialize};

use super::field::VectorField;
use super::Point;
use crate::error::{GeomError, Result};

/// Tolerances and limits for every flow computed by the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Log-time floor used when approximating `t → 0` limits.
    pub tau_min: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_steps: 200_000,
            tau_min: (1e-6f64).ln(),
        }
    }
}

impl FlowOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(GeomError::Precondition("tolerances must be positive".into()));
        }
        if self.max_steps == 0 {
            return Err(GeomError::Precondition("max_steps must be at least 1".into()));
        }
        if !(self.tau_min < 0.0) {
            return Err(GeomError::Precondition("tau_min must be negative".into()));
        }
        Ok(())
    }
}

/// End state of an integration that may stop early on a predicate.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowOutcome {
    pub point: Point,
    pub time: f64,
    pub stopped: bool,
    pub steps: usize,
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn scaled_norm(v: &[f64], y: &[f64], opts: &FlowOptions) -> f64 {
    v.iter()
        .zip(y)
        .map(|(a, b)| (a / (opts.abs_tol + opts.rel_tol * b.abs())).abs())
        .fold(0.0, f64::max)
}

fn initial_step<F>(rhs: &F, y: &[f64], f0: &[f64], dir: f64, span: f64, opts: &FlowOptions) -> f64
where
    F: Fn(&[f64]) -> Option<Point>,
{
    let d0 = scaled_norm(y, y, opts);
    let d1 = scaled_norm(f0, y, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1: Point = y.iter().zip(f0).map(|(a, b)| a + dir * h0 * b).collect();
    let d2 = match rhs(&y1) {
        Some(f1) => {
            let diff: Point = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
            scaled_norm(&diff, y, opts) / h0
        }
        None => return h0 * 0.1,
    };
    let m = d1.max(d2);
    let h1 = if m <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / m).powf(0.2) };
    (100.0 * h0).min(h1).min(span)
}

/// Integrates `ẏ = rhs(y)` from time `0` to `t_end` (either sign).
///
/// After every accepted step the optional `stop` predicate is evaluated on
/// the new state; when it holds, integration ends there. A `None` from `rhs`
/// marks the domain boundary: the step is retried smaller, and an escape
/// error is raised once the step collapses.
pub fn integrate<F>(
    rhs: F,
    y0: &[f64],
    t_end: f64,
    opts: &FlowOptions,
    stop: Option<&dyn Fn(&[f64]) -> bool>,
) -> Result<FlowOutcome>
where
    F: Fn(&[f64]) -> Option<Point>,
{
    let mut y = y0.to_vec();
    if t_end == 0.0 {
        return Ok(FlowOutcome { point: y, time: 0.0, stopped: false, steps: 0 });
    }
    let dir = t_end.signum();
    let span = t_end.abs();
    let n = y.len();
    let mut f = rhs(&y).ok_or(GeomError::Escape { time: 0.0 })?;
    let mut h = initial_step(&rhs, &y, &f, dir, span, opts);
    let mut t = 0.0f64;
    let mut steps = 0usize;
    let mut k = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];

    while t < span {
        if steps >= opts.max_steps {
            return Err(GeomError::NonConvergence { steps });
        }
        steps += 1;
        if t + h > span || span - (t + h) < 1e-12 * span {
            h = span - t;
        }
        k[0].copy_from_slice(&f);
        let mut escaped = false;
        for s in 0..6 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s + 1) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = y[i] + dir * h * acc;
            }
            match rhs(&stage) {
                Some(v) => k[s + 1].copy_from_slice(&v),
                None => {
                    escaped = true;
                    break;
                }
            }
        }
        if escaped {
            h *= 0.25;
            if h < 1e-14 * (1.0 + span) {
                return Err(GeomError::Escape { time: dir * t });
            }
            continue;
        }
        // stage now holds the fifth-order solution (FSAL row).
        let mut err = vec![0.0; n];
        for (i, e) in err.iter_mut().enumerate() {
            *e = dir * h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        }
        let scale: Point = y.iter().zip(&stage).map(|(a, b)| a.abs().max(b.abs())).collect();
        let en = scaled_norm(&err, &scale, opts);
        if en <= 1.0 {
            t += h;
            y.copy_from_slice(&stage);
            f.copy_from_slice(&k[6]);
            if let Some(pred) = stop {
                if pred(&y) {
                    return Ok(FlowOutcome { point: y, time: dir * t, stopped: true, steps });
                }
            }
        }
        let factor = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h *= if en <= 1.0 { factor } else { factor.min(1.0) };
    }
    Ok(FlowOutcome { point: y, time: t_end, stopped: false, steps })
}

/// `Ψ^t(p)` for the flow of `field`.
pub fn flow(field: &VectorField, p: &[f64], t: f64, opts: &FlowOptions) -> Result<Point> {
    Ok(integrate(|x| field.try_eval(x), p, t, opts, None)?.point)
}

/// Flows for at most `t` and stops early once `stop` holds.
pub fn flow_until(
    field: &VectorField,
    p: &[f64],
    t: f64,
    opts: &FlowOptions,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<FlowOutcome> {
    integrate(|x| field.try_eval(x), p, t, opts, Some(stop))
}
