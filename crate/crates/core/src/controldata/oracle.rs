//! Reference control data on the coordinate flag of `R³`.

use std::f64::consts::FRAC_PI_2;

use super::ControlData;
use crate::error::Result;
use crate::smoothcore::vecops::{norm, scale};
use crate::smoothcore::Point;
use crate::strata::library;
use crate::tubular::{ClosureTubular, TubularData};

fn sheet(c: f64) -> f64 {
    if c < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `(r, θ', α')` with `θ'` the angle to the nearer half of the `x` axis and
/// `α'` the angle in the `yz` plane to the nearer half of the `y` axis.
fn polar(v: &[f64]) -> (f64, f64, f64) {
    let r = norm(v);
    let theta = (v[0].abs() / r).clamp(0.0, 1.0).acos();
    let s = sheet(v[1]);
    (r, theta, (s * v[2]).atan2(s * v[1]))
}

/// Inverse of `polar` on the sheets `sign x = sx`, `sign y = sy`.
fn cartesian(sx: f64, sy: f64, r: f64, theta: f64, alpha: f64) -> Point {
    let w = r * theta.sin();
    vec![sx * r * theta.cos(), sy * w * alpha.cos(), sy * w * alpha.sin()]
}

/// Control data on FLAG3 written in spherical coordinates, where the three
/// scalings act on independent coordinates and so commute exactly:
/// `X0` scales `r`, `X1` scales `θ'`, `X2` scales `α'`.
pub fn analytic_flag_oracle() -> Result<ControlData> {
    let s = library::flag(3)?;
    let x0 = ClosureTubular::new(
        "oracle X0",
        3,
        |_| true,
        |v| v.iter().map(|c| c * c).sum(),
        |t, v| Some(scale(v, t)),
        |v| v.to_vec(),
    );
    let x1 = ClosureTubular::new(
        "oracle X1",
        3,
        |v| v[0] != 0.0,
        |v| polar(v).1.powi(2),
        |t, v| {
            let (r, theta, alpha) = polar(v);
            (t * theta < FRAC_PI_2).then(|| cartesian(sheet(v[0]), sheet(v[1]), r, t * theta, alpha))
        },
        |v| {
            let (r, theta, alpha) = polar(v);
            let (sx, sy) = (sheet(v[0]), sheet(v[1]));
            let c = theta.cos();
            vec![-sx * r * theta.sin(), sy * r * c * alpha.cos(), sy * r * c * alpha.sin()]
                .into_iter()
                .map(|d| theta * d)
                .collect()
        },
    );
    let x2 = ClosureTubular::new(
        "oracle X2",
        3,
        |v| v[1] != 0.0,
        |v| polar(v).2.powi(2),
        |t, v| {
            let (r, theta, alpha) = polar(v);
            (t * alpha.abs() < FRAC_PI_2).then(|| cartesian(sheet(v[0]), sheet(v[1]), r, theta, t * alpha))
        },
        |v| {
            let (_, _, alpha) = polar(v);
            let w = (v[1] * v[1] + v[2] * v[2]).sqrt();
            let sy = sheet(v[1]);
            vec![0.0, -sy * alpha * w * alpha.sin(), sy * alpha * w * alpha.cos()]
        },
    );
    let tubulars = vec![
        TubularData::new(&s.strata[0], x0),
        TubularData::new(&s.strata[1], x1),
        TubularData::new(&s.strata[2], x2),
    ];
    ControlData::new(s, tubulars, "oracle")
}

/// Coordinate scalings on FLAG3: `X0` scales everything, `X1` scales
/// `(y, z)`, `X2` scales `z`. Each is a tubular neighbourhood, but the
/// family does not pre-commute.
pub fn naive_flag_data() -> Result<ControlData> {
    let s = library::flag(3)?;
    let x0 = ClosureTubular::new(
        "naive X0",
        3,
        |_| true,
        |v| v.iter().map(|c| c * c).sum(),
        |t, v| Some(scale(v, t)),
        |v| v.to_vec(),
    );
    let x1 = ClosureTubular::new(
        "naive X1",
        3,
        |v| v[0] != 0.0,
        |v| v[1] * v[1] + v[2] * v[2],
        |t, v| Some(vec![v[0], t * v[1], t * v[2]]),
        |v| vec![0.0, v[1], v[2]],
    );
    let x2 = ClosureTubular::new(
        "naive X2",
        3,
        |v| v[1] != 0.0,
        |v| v[2] * v[2],
        |t, v| Some(vec![v[0], v[1], t * v[2]]),
        |v| vec![0.0, 0.0, v[2]],
    );
    let tubulars = vec![
        TubularData::new(&s.strata[0], x0),
        TubularData::new(&s.strata[1], x1),
        TubularData::new(&s.strata[2], x2),
    ];
    ControlData::new(s, tubulars, "naive")
}
