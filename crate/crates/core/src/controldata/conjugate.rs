//! Conjugating a higher tubular neighbourhood by the radial reparametrisation
//! `Φ(v) = m_X^{f(ρ_X(v))}(v)` of a lower one.

use std::sync::Arc;

use super::{pair_report, ControlData};
use crate::error::{GeomError, Result};
use crate::smoothcore::{BumpSpec, Point};
use crate::tubular::{TubularData, TubularModel};

/// Pre-commutation residual above which conjugation is refused.
const PRECOMMUTE_GATE: f64 = 1e-5;
/// Overlap samples used for the pre-commutation gate.
const GATE_SAMPLES: usize = 50;
/// Log-time step of the central difference that recovers the field.
const FIELD_STEP: f64 = 1e-5;

const BLEND: BumpSpec = BumpSpec { a: 0.5, b: 1.0 };

/// `f(t) = √t` on `(0, ½]`, `1` on `[1, ∞)`, and `h·√t + (1 − h)` with
/// `h = h_{½,1}(t)` in between.
pub fn conjugation_profile(t: f64) -> f64 {
    if t >= 1.0 {
        return 1.0;
    }
    let h = BLEND.value(t);
    h * t.sqrt() + (1.0 - h)
}

/// Solves `f(r)² r = target` for `r`; the left side is strictly increasing.
fn invert_profile(target: f64) -> f64 {
    if target <= 0.25 {
        return target.sqrt();
    }
    if target >= 1.0 {
        return target;
    }
    let (mut lo, mut hi) = (0.5f64, 1.0f64);
    while hi - lo > 1e-16 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let f = conjugation_profile(mid);
        if f * f * mid < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `Φ(v) = m_X^{f(ρ_X(v))}(v)`; the identity off `T_X \ X`.
fn squeeze(x: &TubularData, v: &[f64]) -> Result<Point> {
    if !x.contains(v) {
        return Ok(v.to_vec());
    }
    let r = x.rho(v)?;
    if r == 0.0 || !r.is_finite() {
        return Ok(v.to_vec());
    }
    x.mult(conjugation_profile(r), v)
}

/// `Φ⁻¹(w) = m_X^{σ}(w)` with `σ² = r/ρ_X(w)`, `f(r)² r = ρ_X(w)`.
fn unsqueeze(x: &TubularData, w: &[f64]) -> Result<Point> {
    if !x.contains(w) {
        return Ok(w.to_vec());
    }
    let r = x.rho(w)?;
    if r == 0.0 || !r.is_finite() {
        return Ok(w.to_vec());
    }
    x.mult((invert_profile(r) / r).sqrt(), w)
}

/// `m̃_Y^t = Φ ∘ m_Y^t ∘ Φ⁻¹`, `ρ̃_Y = ρ_Y ∘ Φ⁻¹`, `T̃_Y = Φ(T_Y)`.
#[derive(Debug, Clone)]
pub struct Conjugated {
    x: TubularData,
    y: TubularData,
}

impl Conjugated {
    pub fn new(x: TubularData, y: TubularData) -> Self {
        Self { x, y }
    }
}

impl TubularModel for Conjugated {
    fn ambient_dim(&self) -> usize {
        self.y.ambient_dim()
    }

    fn contains(&self, v: &[f64]) -> bool {
        unsqueeze(&self.x, v).is_ok_and(|u| self.y.contains(&u))
    }

    fn rho(&self, v: &[f64]) -> Result<f64> {
        self.y.rho(&unsqueeze(&self.x, v)?)
    }

    fn mult(&self, t: f64, v: &[f64]) -> Result<Point> {
        squeeze(&self.x, &self.y.mult(t, &unsqueeze(&self.x, v)?)?)
    }

    fn project(&self, v: &[f64]) -> Result<Point> {
        self.mult(0.0, v)
    }

    /// `d/dτ m̃^{e^τ}(v)` at `τ = 0`, by a central difference.
    fn field(&self, v: &[f64]) -> Result<Point> {
        if !self.x.contains(v) {
            return self.y.field(v);
        }
        let plus = self.mult(FIELD_STEP.exp(), v)?;
        let minus = self.mult((-FIELD_STEP).exp(), v)?;
        Ok(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * FIELD_STEP)).collect())
    }
}

/// Replaces the tubular of `higher` by its conjugate with respect to
/// `lower`. Refused unless the pair pre-commutes to `1e-5` on samples.
pub fn conjugate(cd: &ControlData, lower: &str, higher: &str) -> Result<ControlData> {
    let s = &cd.scenario;
    let (xi, yi) = (s.index_of(lower)?, s.index_of(higher)?);
    if !s.less(xi, yi) {
        return Err(GeomError::Precondition(format!("{lower} < {higher} is not declared")));
    }
    let gate = pair_report(cd, xi, yi, GATE_SAMPLES, crate::strata::DEFAULT_SEED);
    let worst = gate.pc1.max(gate.pc2);
    if !(worst <= PRECOMMUTE_GATE) {
        return Err(GeomError::Refused(format!(
            "{lower}/{higher} do not pre-commute: residual {worst:.3e} on {} samples",
            gate.samples
        )));
    }
    let mut out = cd.clone();
    let model = Conjugated::new(cd.tubulars[xi].clone(), cd.tubulars[yi].clone());
    out.tubulars[yi] = cd.tubulars[yi].with_model(Arc::new(model));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_pieces_and_inverse() {
        assert_eq!(conjugation_profile(0.25), 0.5);
        assert_eq!(conjugation_profile(0.5), 0.5f64.sqrt());
        assert_eq!(conjugation_profile(1.0), 1.0);
        assert_eq!(conjugation_profile(7.0), 1.0);
        let mut prev = 0.0;
        for i in 1..200 {
            let t = i as f64 / 100.0;
            let f = conjugation_profile(t);
            assert!(f >= prev);
            prev = f;
            let image = f * f * t;
            assert!((invert_profile(image) - t).abs() < 1e-13, "{t}");
        }
    }
}
