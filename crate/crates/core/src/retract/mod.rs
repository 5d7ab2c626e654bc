//! The smooth weak deformation retraction assembled from the per-dimension
//! radial retractions of commutative control data.

use rayon::prelude::*;
use serde::Serialize;

use crate::controldata::verify::filtered_samples;
use crate::controldata::{ControlData, Status};
use crate::error::{GeomError, Result};
use crate::smoothcore::vecops::dist;
use crate::smoothcore::{smooth_step, BumpSpec, Point};
use crate::strata::act;

const INNER: BumpSpec = BumpSpec { a: 1.0, b: 2.0 };
const OUTER: BumpSpec = BumpSpec { a: 2.0, b: 3.0 };

/// Times at which trajectories are recorded.
pub const TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
/// `C`-residual bound met by most samples, and by every sample.
pub const C_TOL: f64 = 1e-5;
pub const C_TOL_ALL: f64 = 1e-3;
pub const C_FRACTION: f64 = 0.95;

/// The homotopy `F: [0, 1] × M → M` of commutative control data.
#[derive(Debug, Clone)]
pub struct Homotopy {
    cd: ControlData,
    /// Stratum dimensions in ascending order.
    dims: Vec<usize>,
}

/// Refuses control data whose commutativity has not been verified.
pub fn build_homotopy(cd: &ControlData) -> Result<Homotopy> {
    if cd.flags.commutative.status != Status::Verified {
        return Err(GeomError::Refused(format!(
            "control data {:?} is not verified commutative ({})",
            cd.label,
            cd.flags.commutative.status.as_str()
        )));
    }
    Ok(Homotopy { cd: cd.clone(), dims: cd.scenario.dims() })
}

impl Homotopy {
    pub fn control_data(&self) -> &ControlData {
        &self.cd
    }

    /// `ρ_d(v)`: the distance of the dimension-`d` tubular containing `v`,
    /// `+∞` if there is none.
    pub fn rho_d(&self, d: usize, v: &[f64]) -> f64 {
        self.cd.tubular_at(d, v).map_or(f64::INFINITY, |t| t.rho_or_inf(v))
    }

    /// `φ_d = h_{2,3}(ρ_d) Π_{i<d} (1 − h_{1,2}(ρ_i))`.
    pub fn phi(&self, d: usize, v: &[f64]) -> f64 {
        let lower: f64 = self
            .dims
            .iter()
            .filter(|&&i| i < d)
            .map(|&i| 1.0 - INNER.value(self.rho_d(i, v)))
            .product();
        OUTER.value(self.rho_d(d, v)) * lower
    }

    /// `f_d(t, v) = m_d^{1 − t φ_d(v)}(v)`.
    pub fn step(&self, d: usize, t: f64, v: &[f64]) -> Result<Point> {
        let Some(tub) = self.cd.tubular_at(d, v) else {
            return Ok(v.to_vec());
        };
        tub.mult((1.0 - t * self.phi(d, v)).clamp(0.0, 1.0), v)
    }

    /// `F_d` for `d = dims[k]`: the higher levels run during `[0, ½]`, then
    /// `f_d` during `[½, 1]`. `F` past the top dimension is the identity.
    fn level(&self, k: usize, t: f64, v: &[f64]) -> Result<Point> {
        if k == self.dims.len() {
            return Ok(v.to_vec());
        }
        if t <= 0.5 {
            return self.level(k + 1, smooth_step(2.0 * t), v);
        }
        let w = self.level(k + 1, 1.0, v)?;
        self.step(self.dims[k], smooth_step(2.0 * t - 1.0), &w)
    }

    /// `F(t, v)`; `F(0) = id` and `F(1) = f_{d_min}(1) ∘ … ∘ f_{d_max}(1)`.
    pub fn at(&self, t: f64, v: &[f64]) -> Result<Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(GeomError::Precondition(format!("homotopy time {t} is outside [0, 1]")));
        }
        if self.dims.is_empty() {
            return Ok(v.to_vec());
        }
        self.level(0, t, v)
    }

    /// Per-stratum `ρ` of the tubulars containing `v`, `+∞` elsewhere.
    pub fn rhos(&self, v: &[f64]) -> Vec<f64> {
        self.cd.tubulars.iter().map(|t| t.rho_or_inf(v)).collect()
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub sample: usize,
    pub t: f64,
    pub point: Point,
    pub rho: Vec<f64>,
    pub c_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetractionReport {
    pub samples: usize,
    /// Samples where the homotopy left a neighbourhood.
    pub failed: usize,
    /// `max |F(0, v) − v|`.
    pub identity_at_zero: f64,
    /// Share of samples with `C`-residual of `F(1, v)` at most `1e-5`.
    pub c_fraction: f64,
    pub c_worst: f64,
    /// Largest increase of a finite `ρ` between consecutive times.
    pub rho_increase: f64,
    /// `max |g·F(1, v) − F(1, g·v)|`, when there is an action.
    pub equivariance: Option<f64>,
    pub passed: bool,
    #[serde(skip)]
    pub trajectories: Vec<TrajectoryRow>,
}

/// Box samples of `∪_X {ρ_X < 1}` over the non-open strata.
pub fn retraction_samples(cd: &ControlData, count: usize, seed: u64) -> Vec<Point> {
    let s = &cd.scenario;
    let tubs: Vec<_> = cd.tubulars.iter().zip(&s.strata).filter(|(_, x)| !x.is_open()).map(|(t, _)| t).collect();
    filtered_samples(s.ambient_dim, s.sample_radius, seed, count, |p| {
        tubs.iter().any(|t| t.rho_or_inf(p) < 1.0)
    })
}

struct Trace {
    rows: Vec<TrajectoryRow>,
    identity: f64,
    rho_increase: f64,
    c_final: f64,
    equivariance: f64,
}

fn trace(h: &Homotopy, id: usize, v: &[f64]) -> Result<Trace> {
    let s = &h.cd.scenario;
    let mut rows: Vec<TrajectoryRow> = Vec::with_capacity(TIMES.len());
    for t in TIMES {
        let p = h.at(t, v)?;
        rows.push(TrajectoryRow { sample: id, t, rho: h.rhos(&p), c_residual: s.c_residual(&p), point: p });
    }
    let identity = dist(&rows[0].point, v);
    let mut rho_increase: f64 = 0.0;
    for w in rows.windows(2) {
        for (a, b) in w[0].rho.iter().zip(&w[1].rho) {
            if a.is_finite() && b.is_finite() {
                rho_increase = rho_increase.max((b - a) / (1.0 + a));
            }
        }
    }
    let end = &rows[TIMES.len() - 1].point;
    let mut equivariance: f64 = 0.0;
    if let Some(action) = &s.action {
        for g in action.test_elements() {
            equivariance = equivariance.max(dist(&act(&g, end), &h.at(1.0, &act(&g, v))?));
        }
    }
    let c_final = rows[TIMES.len() - 1].c_residual;
    Ok(Trace { rows, identity, rho_increase, c_final, equivariance })
}

/// Runs the homotopy on `count` samples of `∪ {ρ < 1}`.
pub fn retraction_metrics(h: &Homotopy, count: usize, seed: u64) -> RetractionReport {
    let pts = retraction_samples(&h.cd, count, seed);
    let traces: Vec<Option<Trace>> =
        pts.par_iter().enumerate().map(|(i, v)| trace(h, i, v).ok()).collect();
    let mut rep = RetractionReport {
        samples: pts.len(),
        failed: 0,
        identity_at_zero: 0.0,
        c_fraction: 0.0,
        c_worst: 0.0,
        rho_increase: 0.0,
        equivariance: h.cd.scenario.action.as_ref().map(|_| 0.0),
        passed: false,
        trajectories: Vec::new(),
    };
    let mut within = 0;
    for tr in traces {
        let Some(tr) = tr else {
            rep.failed += 1;
            continue;
        };
        rep.identity_at_zero = rep.identity_at_zero.max(tr.identity);
        rep.c_worst = rep.c_worst.max(tr.c_final);
        within += usize::from(tr.c_final <= C_TOL);
        rep.rho_increase = rep.rho_increase.max(tr.rho_increase);
        if let Some(e) = rep.equivariance.as_mut() {
            *e = e.max(tr.equivariance);
        }
        rep.trajectories.extend(tr.rows);
    }
    if rep.samples > 0 {
        rep.c_fraction = within as f64 / rep.samples as f64;
    }
    rep.passed = rep.samples > 0
        && rep.failed == 0
        && rep.identity_at_zero == 0.0
        && rep.c_fraction >= C_FRACTION
        && rep.c_worst <= C_TOL_ALL
        && rep.rho_increase <= 1e-9
        && rep.equivariance.is_none_or(|e| e <= 1e-6);
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controldata::{build_commutative, build_tangential, verify_all, DEFAULT_TOL};
    use crate::strata::library;

    fn verified(name: &str) -> ControlData {
        let mut cd = build_commutative(&library::lookup(name).unwrap()).unwrap();
        verify_all(&mut cd, 60, 42, DEFAULT_TOL);
        cd
    }

    #[test]
    fn unverified_data_is_refused() {
        let cd = build_tangential(&library::lookup("CONE2").unwrap()).unwrap();
        assert!(matches!(build_homotopy(&cd), Err(GeomError::Refused(_))));
    }

    #[test]
    fn cone_retracts_onto_the_cone() {
        let h = build_homotopy(&verified("CONE2")).unwrap();
        let r = retraction_metrics(&h, 40, 42);
        assert!(r.passed, "{r:?}");
        assert_eq!(r.trajectories.len(), r.samples * TIMES.len());
    }

    #[test]
    fn weights_vanish_far_out_and_near_lower_strata() {
        let h = build_homotopy(&verified("FLAG3")).unwrap();
        // Next to the origin only the point stratum retracts.
        let v = [0.05, 0.02, 0.01];
        assert_eq!(h.phi(1, &v), 0.0);
        assert_eq!(h.phi(2, &v), 0.0);
        assert_eq!(h.phi(0, &v), 1.0);
        assert_eq!(h.at(0.0, &v).unwrap(), v.to_vec());
        assert!(crate::smoothcore::vecops::norm(&h.at(1.0, &v).unwrap()) < 1e-15);
    }
}
