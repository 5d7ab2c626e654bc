//! Euler-like fields: the order-two test, chart Euler fields and charts
//! adapted to a submersion.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::smoothcore::dual;
use crate::smoothcore::field::lie_derivative;
use crate::smoothcore::vecops::{axpy, norm};
use crate::smoothcore::{ScalarField, VectorField};
use crate::strata::{AdaptedChart, ConicalChart, DualMap, Stratum};

/// The `ε` ladder of the order-two test.
pub const LADDER: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Largest Jacobian condition number accepted for adapted charts.
const MAX_CONDITION: f64 = 1e6;

/// `r(ε)/ε²` along `q + εu` with `r = f − L_V f`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioReport {
    pub eps: Vec<f64>,
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `max_k |ratio_{k+1}| / max(|ratio_k|, 1)`.
    pub growth: f64,
    pub bounded: bool,
}

impl RatioReport {
    fn from_residuals(eps: &[f64], residuals: Vec<f64>) -> Self {
        let ratios: Vec<f64> = eps.iter().zip(&residuals).map(|(e, r)| r / (e * e)).collect();
        let growth = ratios
            .windows(2)
            .map(|w| w[1].abs() / w[0].abs().max(1.0))
            .fold(0.0, f64::max);
        Self { eps: eps.to_vec(), residuals, ratios, growth, bounded: growth <= 2.0 }
    }
}

/// The order-two test of `field` along the zero set of `f` at `q` in
/// direction `u`.
pub fn euler_like_residual(
    field: &VectorField,
    f: &ScalarField,
    q: &[f64],
    u: &[f64],
    eps_ladder: &[f64],
) -> Result<RatioReport> {
    let f0 = f.eval(q)?;
    if f0.abs() > 1e-12 {
        return Err(GeomError::Precondition(format!("f does not vanish at the base point ({f0:.3e})")));
    }
    let residuals = eps_ladder
        .iter()
        .map(|&e| {
            let p = axpy(q, e, u);
            Ok(f.eval(&p)? - lie_derivative(field, f, &p)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(RatioReport::from_residuals(eps_ladder, residuals))
}

/// The order-two test at a stratum point for each defining function, in
/// the direction of its gradient. Returns the report with the largest
/// growth; an open stratum yields an empty, bounded report.
pub fn ladder_at(field: &VectorField, stratum: &Stratum, q: &[f64]) -> Result<RatioReport> {
    let mut worst = RatioReport::from_residuals(&[], Vec::new());
    worst.bounded = true;
    for f in stratum.defining_functions() {
        let g = f.gradient(q)?;
        let gn = norm(&g);
        if gn == 0.0 {
            continue;
        }
        let u: Vec<f64> = g.iter().map(|c| c / gn).collect();
        let r = euler_like_residual(field, &f, q, &u, &LADDER)?;
        if !r.bounded || r.growth > worst.growth || worst.eps.is_empty() {
            let stop = !r.bounded;
            worst = r;
            if stop {
                break;
            }
        }
    }
    Ok(worst)
}

/// `Dθ⁻¹ · (0, y)` on the chart domain.
pub fn euler_from_chart(chart: &ConicalChart) -> VectorField {
    let chart = chart.clone();
    VectorField::new(chart.ambient_dim(), move |p| chart.euler(p))
}

fn condition(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    if lo == 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

fn subsets(k: usize, l: usize) -> Vec<Vec<usize>> {
    if l == 0 {
        return vec![Vec::new()];
    }
    if k < l {
        return Vec::new();
    }
    let mut out = subsets(k - 1, l);
    for mut s in subsets(k - 1, l - 1) {
        s.push(k - 1);
        out.push(s);
    }
    out
}

/// Replaces `l` tangential coordinates of `chart` by the components of
/// `f`, choosing the best-conditioned block at `p`, and restricts the
/// result to a ball around `p` on which its Jacobian stays invertible.
pub fn adapt_chart_to_submersion(chart: &ConicalChart, f: DualMap, p: &[f64]) -> Result<ConicalChart> {
    let n = chart.ambient_dim();
    let k = chart.split();
    let l = f(&dual::constants(p)).len();
    if l > k {
        return Err(GeomError::NotSubmersion(format!("{l} functions on a {k}-dimensional stratum")));
    }
    let jt = chart
        .jacobian(p)
        .and_then(|j| j.try_inverse())
        .ok_or_else(|| GeomError::Domain(format!("chart is singular or undefined at {p:?}")))?;
    let mut df = DMatrix::zeros(l, n);
    for c in 0..n {
        let mut e = vec![0.0; n];
        e[c] = 1.0;
        for (r, d) in f(&dual::seed(p, &e)).iter().enumerate() {
            df[(r, c)] = d.eps;
        }
    }
    let tangential = df * jt.columns(0, k);
    let (cond, best) = subsets(k, l)
        .into_iter()
        .map(|s| (condition(&tangential.select_columns(s.iter())), s))
        .fold((f64::INFINITY, Vec::new()), |acc, c| if c.0 < acc.0 { c } else { acc });
    if !(cond <= MAX_CONDITION) {
        return Err(GeomError::NotSubmersion(format!(
            "tangential Jacobian block has condition {cond:.3e} at {p:?}"
        )));
    }
    let adapted = ConicalChart::from_arc(p.to_vec(), Arc::new(AdaptedChart::new(chart.clone(), f, best)));
    let mut radius = 0.5 * (1.0 + norm(p));
    for _ in 0..40 {
        if stencil_ok(&adapted, p, radius) {
            return Ok(adapted.with_cover(p.to_vec(), radius));
        }
        radius *= 0.5;
    }
    Err(GeomError::NotSubmersion(format!("no invertible neighbourhood of {p:?}")))
}

/// The Jacobian is invertible at every point of the `3^n` stencil of
/// half-width `r` that lies in the chart domain.
fn stencil_ok(chart: &ConicalChart, p: &[f64], r: f64) -> bool {
    let n = p.len();
    let total = 3usize.pow(n as u32);
    (0..total).all(|mut code| {
        let q: Vec<f64> = (0..n)
            .map(|i| {
                let digit = code % 3;
                code /= 3;
                p[i] + r * (digit as f64 - 1.0)
            })
            .collect();
        if !chart.map().contains(&q) {
            return true;
        }
        chart.jacobian(&q).is_some_and(|j| condition(&j) <= MAX_CONDITION)
    })
}
