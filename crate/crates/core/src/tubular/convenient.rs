//! Convenient modification `φ' = h(ρ/δ)·φ` of an Euler-like field.

use std::fmt;
use std::sync::Arc;

use super::{shrink, ChartTubular, TubularData, TubularModel};
use crate::error::{GeomError, Result};
use crate::smoothcore::ode::{flow, flow_until, FlowOptions};
use crate::smoothcore::vecops::axpy;
use crate::smoothcore::{BumpSpec, Point, ScalarField, VectorField};
use crate::strata::Stratum;

/// Longest backward log-time allowed when returning to the plateau.
const RETURN_LIMIT: f64 = 60.0;

/// The neighbourhood of a cut-off Euler-like field, with every map
/// computed from its flow.
#[derive(Clone)]
pub struct FlowTubular {
    field: VectorField,
    rho_raw: ScalarField,
    plateau: f64,
    outer: f64,
    stratum: Stratum,
    opts: FlowOptions,
}

impl fmt::Debug for FlowTubular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FlowTubular")
            .field("stratum", &self.stratum.id)
            .field("plateau", &self.plateau)
            .field("outer", &self.outer)
            .finish()
    }
}

impl FlowTubular {
    /// Flows backward into `{ρ_raw ≤ plateau}`; returns the point and the
    /// (nonnegative) log-time spent.
    fn to_plateau(&self, v: &[f64]) -> Result<(Point, f64)> {
        if self.rho_raw.eval(v)? <= self.plateau {
            return Ok((v.to_vec(), 0.0));
        }
        let stop = |p: &[f64]| self.rho_raw.eval(p).is_ok_and(|r| r <= self.plateau);
        let out = flow_until(&self.field, v, -RETURN_LIMIT, &self.opts, &stop)?;
        if !out.stopped {
            return Err(GeomError::NotConvenient(format!(
                "{v:?} does not flow back into the plateau of {}",
                self.stratum.id
            )));
        }
        Ok((out.point, -out.time))
    }
}

impl TubularModel for FlowTubular {
    fn ambient_dim(&self) -> usize {
        self.field.dim()
    }

    fn contains(&self, v: &[f64]) -> bool {
        if self.stratum.contains(v) {
            return true;
        }
        self.rho_raw.eval(v).is_ok_and(|r| r < self.outer)
            && self.field.try_eval(v).is_some_and(|x| x.iter().any(|&c| c != 0.0))
    }

    /// `lim e^{-2τ} ρ_raw(Ψ^τ v)` as `τ → -∞`, from the values at
    /// `tau_min` and `tau_min − ln 2` with the linear tail extrapolated.
    fn rho(&self, v: &[f64]) -> Result<f64> {
        let (p, tau) = self.to_plateau(v)?;
        let t1 = self.opts.tau_min;
        let p1 = flow(&self.field, &p, t1, &self.opts)?;
        let p2 = flow(&self.field, &p1, -std::f64::consts::LN_2, &self.opts)?;
        let r1 = (-2.0 * t1).exp() * self.rho_raw.eval(&p1)?;
        let r2 = 4.0 * (-2.0 * t1).exp() * self.rho_raw.eval(&p2)?;
        Ok((2.0 * tau).exp() * (2.0 * r2 - r1))
    }

    fn mult(&self, t: f64, v: &[f64]) -> Result<Point> {
        flow(&self.field, v, t.ln(), &self.opts)
    }

    /// Flows to log-time `tau_min` and to `tau_min − ln 2` and extrapolates
    /// the linear tail, then snaps onto the stratum through its chart.
    fn project(&self, v: &[f64]) -> Result<Point> {
        let (p, _) = self.to_plateau(v)?;
        let p1 = flow(&self.field, &p, self.opts.tau_min, &self.opts)?;
        let p2 = flow(&self.field, &p1, -std::f64::consts::LN_2, &self.opts)?;
        let guess = axpy(&p2, 1.0, &crate::smoothcore::vecops::sub(&p2, &p1));
        match self.stratum.chart_at(&guess).and_then(|c| c.project(&guess)) {
            Some(q) => Ok(q),
            None => Ok(guess),
        }
    }

    fn field(&self, v: &[f64]) -> Result<Point> {
        self.field.eval(v)
    }
}

/// Multiplies `field` by `h(ρ_raw/δ)`, extended by zero from `ρ_raw ≥ bδ`,
/// and builds the induced neighbourhood from its flow.
pub fn make_convenient(
    field: &VectorField,
    stratum: &Stratum,
    rho_raw: &ScalarField,
    delta: f64,
    spec: BumpSpec,
) -> Result<TubularData> {
    if !(delta > 0.0) {
        return Err(GeomError::Precondition(format!("δ must be positive, got {delta}")));
    }
    let spec = BumpSpec::new(spec.a, spec.b)?;
    for q in stratum.samples(crate::strata::DEFAULT_SEED, 5) {
        let r = super::ladder_at(field, stratum, &q)?;
        if !r.bounded {
            return Err(GeomError::Precondition(format!(
                "field is not Euler-like along {} at {q:?}",
                stratum.id
            )));
        }
    }
    let (inner, rho_c) = (field.clone(), rho_raw.clone());
    let n = field.dim();
    let cut = VectorField::new(n, move |p| {
        let r = rho_c.eval(p).ok()?;
        let h = spec.value(r / delta);
        if h == 0.0 {
            return Some(vec![0.0; n]);
        }
        Some(inner.try_eval(p)?.into_iter().map(|c| h * c).collect())
    });
    let model = FlowTubular {
        field: cut,
        rho_raw: rho_raw.clone(),
        plateau: spec.a * delta,
        outer: spec.b * delta,
        stratum: stratum.clone(),
        opts: FlowOptions { abs_tol: 1e-20, ..FlowOptions::default() },
    };
    let mut tub = TubularData::from_arc(stratum, Arc::new(model));
    tub.bump_history.push(spec.scaled(delta));
    Ok(tub)
}

/// The convenient neighbourhood of a chart Euler field in closed form.
///
/// When the patched field is the chart's own Euler field, `h(ρ/δ)·V`
/// acts along each chart ray, and its flow is the shrinking of the chart
/// normal form by `h_{aδ, bδ}`.
pub fn convenient_from_charts(stratum: &Stratum, spec: BumpSpec) -> Result<TubularData> {
    let delta = stratum.neighbourhood.delta;
    let raw = TubularData::new(stratum, ChartTubular::new(stratum.charts.clone())?);
    shrink(&raw, spec.scaled(delta))
}
