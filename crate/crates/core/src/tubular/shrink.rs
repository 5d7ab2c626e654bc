//! Shrinking a tubular neighbourhood by a cutoff `h(ρ)`.
//!
//! Along a ray of the original neighbourhood the shrunk field `h(ρ)·V`
//! moves `ρ` by `ρ̇ = 2 h(ρ) ρ`. Its flow is therefore the original
//! multiplication with a reparametrised scale, read off from the
//! log-time function
//!
//! ```text
//! G(x) = ∫_a^x dy / (2 y h(y)),
//! ```
//!
//! which is `½ ln(x/a)` on the plateau `x ≤ a` and blows up at `x = b`.
//! The flow advances `G` at unit speed and the new distance is
//! `ρ̃ = a·exp(2 G(ρ))`.

use std::sync::Arc;

use serde::Serialize;

use super::{sample_tubular, TubularData, TubularModel};
use crate::error::{GeomError, Result};
use crate::smoothcore::ode::{integrate, FlowOptions};
use crate::smoothcore::vecops::dist;
use crate::smoothcore::{BumpSpec, Point};

/// Absolute quadrature target relative to a coarse first estimate.
const QUAD_REL: f64 = 1e-15;

/// The log-time function of a bump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelMap {
    spec: BumpSpec,
}

impl LevelMap {
    pub fn new(spec: BumpSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> BumpSpec {
        self.spec
    }

    /// `∫_a^x (1/h − 1)/y dy`, with `1/h − 1 = exp(1/up − 1/down)`.
    fn excess(&self, x: f64) -> f64 {
        let BumpSpec { a, b } = self.spec;
        let w = b - a;
        let integrand = |y: f64| {
            let (up, down) = ((b - y) / w, (y - a) / w);
            if down <= 0.0 {
                0.0
            } else {
                (1.0 / up - 1.0 / down).exp() / y
            }
        };
        let coarse = quadrature::integrate(integrand, a, x, 1e-6).integral;
        if !coarse.is_finite() {
            return f64::INFINITY;
        }
        let fine = quadrature::integrate(integrand, a, x, QUAD_REL * coarse.max(1e-3)).integral;
        if fine.is_finite() {
            fine
        } else {
            f64::INFINITY
        }
    }

    /// `G(x)`; `+∞` from `b` on.
    pub fn g(&self, x: f64) -> f64 {
        let BumpSpec { a, b } = self.spec;
        if x <= a {
            return 0.5 * (x / a).ln();
        }
        if x >= b {
            return f64::INFINITY;
        }
        0.5 * (x / a).ln() + 0.5 * self.excess(x)
    }

    /// `G'(x) = 1 / (2 x h(x))`.
    pub fn g_prime(&self, x: f64) -> f64 {
        1.0 / (2.0 * x * self.spec.value(x))
    }

    /// `G⁻¹(γ) ∈ (0, b)`, by safeguarded Newton on the band `(a, b)`.
    pub fn g_inv(&self, gamma: f64) -> f64 {
        let BumpSpec { a, b } = self.spec;
        if gamma <= 0.0 {
            return a * (2.0 * gamma).exp();
        }
        if gamma == f64::INFINITY {
            return b;
        }
        let (mut lo, mut hi) = (a, b);
        let mut x = (a * (2.0 * gamma).exp()).min(0.5 * (a + b));
        let mut prev = f64::INFINITY;
        for _ in 0..400 {
            let r = self.g(x) - gamma;
            if r.abs() <= 1e-15 * (1.0 + gamma) {
                return x;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if hi - lo <= 2e-16 * hi {
                return 0.5 * (lo + hi);
            }
            let mut next = x - r / self.g_prime(x);
            // Newton stalls where h is tiny; fall back to bisection.
            if !(next > lo && next < hi) || r.abs() > 0.5 * prev {
                next = 0.5 * (lo + hi);
            }
            prev = r.abs();
            x = next;
        }
        x
    }

    /// `ρ` after flowing the shrunk field for log-time `tau` from `ρ = s`.
    pub fn advance(&self, s: f64, tau: f64) -> f64 {
        self.g_inv(self.g(s) + tau)
    }

    /// The shrunk distance `ρ̃ = a·exp(2 G(s))`; equal to `s` on the plateau.
    pub fn distance(&self, s: f64) -> f64 {
        if s <= self.spec.a {
            return s;
        }
        self.spec.a * (2.0 * self.g(s)).exp()
    }
}

/// `exp_{h,s}(t)`: the solution of `E' = h(s E²) E`, `E(0) = 1`, by the
/// adaptive Runge–Kutta integrator.
pub fn exp_h_s(spec: &BumpSpec, s: f64, t: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(GeomError::Precondition(format!("exp_h_s needs s > 0, got {s}")));
    }
    let opts = FlowOptions { rel_tol: 1e-12, abs_tol: 1e-14, ..FlowOptions::default() };
    let rhs = |e: &[f64]| Some(vec![spec.value(s * e[0] * e[0]) * e[0]]);
    Ok(integrate(rhs, &[1.0], t, &opts, None)?.point[0])
}

/// `(X, h(ρ)·V)`: the neighbourhood `{ρ < b}` with the reparametrised
/// multiplication.
#[derive(Debug, Clone)]
pub struct Shrunk {
    inner: TubularData,
    level: LevelMap,
}

impl Shrunk {
    pub fn new(inner: TubularData, spec: BumpSpec) -> Self {
        Self { inner, level: LevelMap::new(spec) }
    }

    pub fn inner(&self) -> &TubularData {
        &self.inner
    }

    pub fn level(&self) -> &LevelMap {
        &self.level
    }

    /// The scale `E` with `m̃^t(v) = m^E(v)` for `ρ(v) = s > 0`.
    fn scale(&self, t: f64, s: f64) -> f64 {
        let a = self.level.spec.a;
        if s <= a && s * t * t <= a {
            return t;
        }
        (self.level.advance(s, t.ln()) / s).sqrt()
    }
}

impl TubularModel for Shrunk {
    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn contains(&self, v: &[f64]) -> bool {
        self.inner.contains(v) && self.inner.rho(v).is_ok_and(|r| r < self.level.spec.b)
    }

    fn rho(&self, v: &[f64]) -> Result<f64> {
        Ok(self.level.distance(self.inner.rho(v)?))
    }

    fn mult(&self, t: f64, v: &[f64]) -> Result<Point> {
        let s = self.inner.rho(v)?;
        if s == 0.0 {
            return Ok(v.to_vec());
        }
        self.inner.mult(self.scale(t, s), v)
    }

    fn project(&self, v: &[f64]) -> Result<Point> {
        self.inner.project(v)
    }

    fn field(&self, v: &[f64]) -> Result<Point> {
        let h = self.level.spec.value(self.inner.rho(v)?);
        Ok(self.inner.field(v)?.into_iter().map(|c| h * c).collect())
    }
}

/// The shrinking of `tub` by `h_{a,b}`.
pub fn shrink(tub: &TubularData, spec: BumpSpec) -> Result<TubularData> {
    let spec = BumpSpec::new(spec.a, spec.b)?;
    let mut out = tub.with_model(Arc::new(Shrunk::new(tub.clone(), spec)));
    out.bump_history.push(spec);
    Ok(out)
}

/// Same-fiber level-set comparison of a neighbourhood and its shrinking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelSetReport {
    pub pairs: usize,
    pub skipped: usize,
    /// `max |ρ(v) − ρ(w)|` over pairs with `ρ̃(v) = ρ̃(w)`.
    pub worst_rho_gap: f64,
    /// `max |ρ(v) − c'| / (1 + ρ(v))`, with `c'` from `exp_{h,a/2}`.
    pub worst_formula_gap: f64,
    pub passed: bool,
}

/// Draws points of the shrunk neighbourhood in `[-radius, radius]^n` and
/// pairs each with a point of equal `ρ̃` on the ray of the next sample
/// when the two share a fiber. Pairs on different fibers are skipped.
pub fn shrink_levelset_check(
    tub: &TubularData,
    shrunk: &TubularData,
    samples: usize,
    radius: f64,
    seed: u64,
) -> Result<LevelSetReport> {
    let spec = *shrunk
        .bump_history
        .last()
        .ok_or_else(|| GeomError::Precondition("neighbourhood was never shrunk".into()))?;
    let pts: Vec<Point> = sample_tubular(shrunk, radius, seed, 4 * samples, 800 * samples)
        .into_iter()
        .filter(|p| shrunk.rho(p).is_ok_and(f64::is_finite))
        .collect();
    let mut r = LevelSetReport { pairs: 0, skipped: 0, worst_rho_gap: 0.0, worst_formula_gap: 0.0, passed: true };
    for pair in pts.chunks_exact(2) {
        if r.pairs == samples {
            break;
        }
        let (v, u) = (&pair[0], &pair[1]);
        if dist(&shrunk.project(v)?, &shrunk.project(u)?) > 1e-8 {
            r.skipped += 1;
            continue;
        }
        let c = shrunk.rho(v)?;
        let t = (c / shrunk.rho(u)?).sqrt();
        let w = shrunk.mult(t, u)?;
        if !shrunk.contains(&w) || (shrunk.rho(&w)? - c).abs() > 1e-10 * (1.0 + c) {
            r.skipped += 1;
            continue;
        }
        r.pairs += 1;
        let rv = tub.rho(v)?;
        r.worst_rho_gap = r.worst_rho_gap.max((rv - tub.rho(&w)?).abs());
        let half = 0.5 * spec.a;
        let tau = -(half / c).sqrt().ln();
        let c_prime = exp_h_s(&spec, half, tau)?.powi(2) * half;
        r.worst_formula_gap = r.worst_formula_gap.max((c_prime - rv).abs() / (1.0 + rv));
    }
    r.passed = r.pairs > 0 && r.worst_rho_gap <= 1e-6 && r.worst_formula_gap <= 1e-5;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::{ConicalChart, LinearChart, Stratum};
    use crate::tubular::ChartTubular;

    fn euler_plane() -> TubularData {
        let origin = Stratum::new("X0", 0, 2, |p| p.to_vec(), |_| true, |_| vec![0.0; 2]);
        let chart = ConicalChart::new(vec![0.0; 2], LinearChart::identity(2, 0));
        TubularData::new(&origin, ChartTubular::new(vec![chart]).unwrap())
    }

    #[test]
    fn exp_h_s_examples() {
        let third = BumpSpec::third();
        assert!((exp_h_s(&third, 0.01, 1.0).unwrap() - 1f64.exp()).abs() < 1e-6);
        assert_eq!(exp_h_s(&third, 0.3, 0.0).unwrap(), 1.0);
        let plateau = exp_h_s(&third, 0.01, 20.0).unwrap();
        assert!(plateau <= (2.0f64 / 3.0 / 0.01).sqrt());
        assert!(exp_h_s(&third, 0.0, 1.0).is_err());
    }

    #[test]
    fn level_map_matches_the_ode() {
        // Two independent routes to the same flow: quadrature of G and RK.
        let spec = BumpSpec::third();
        let level = LevelMap::new(spec);
        for s in [0.01, 0.2, 0.4, 0.6] {
            for t in [-1.0, 0.3, 1.0, 2.5] {
                let ode = exp_h_s(&spec, s, t).unwrap();
                let quad = (level.advance(s, t) / s).sqrt();
                assert!((ode - quad).abs() < 1e-8 * ode, "s={s} t={t}: {ode} vs {quad}");
            }
        }
    }

    #[test]
    fn level_map_inverse_and_derivative() {
        let level = LevelMap::new(BumpSpec::third());
        assert_eq!(level.g(1.0 / 3.0), 0.0);
        assert_eq!(level.g(2.0 / 3.0), f64::INFINITY);
        for x in [0.1, 0.4, 0.5, 0.6] {
            let back = level.g_inv(level.g(x));
            assert!((back - x).abs() < 1e-13, "{x} -> {back}");
            let h = 1e-6;
            let fd = (level.g(x + h) - level.g(x - h)) / (2.0 * h);
            assert!((fd - level.g_prime(x)).abs() < 1e-6 * level.g_prime(x));
        }
    }

    #[test]
    fn level_map_inverse_does_not_stall_deep_in_the_band() {
        let level = LevelMap::new(BumpSpec::quarter());
        for k in 0..200 {
            let s = 0.05 + 0.001 * k as f64;
            for t in [1.4f64, 2.0, 3.0] {
                let x = level.advance(s, t.ln());
                assert!((level.g(x) - level.g(s) - t.ln()).abs() < 1e-13, "{s} {t} -> {x}");
            }
        }
    }

    #[test]
    fn shrinking_cuts_the_neighbourhood() {
        let s = shrink(&euler_plane(), BumpSpec::third()).unwrap();
        assert!(!s.contains(&[0.9f64.sqrt(), 0.0]));
        assert!(s.contains(&[0.8, 0.0]));
        let v = [0.3, 0.2];
        assert_eq!(s.mult(0.5, &v).unwrap(), euler_plane().mult(0.5, &v).unwrap());
        assert_eq!(s.bump_history, vec![BumpSpec::third()]);
        assert_eq!(s.rho(&v).unwrap(), 0.13);
    }

    #[test]
    fn double_shrink_agrees_on_the_plateau() {
        let once = shrink(&euler_plane(), BumpSpec::third()).unwrap();
        let twice = shrink(&once, BumpSpec::third()).unwrap();
        for v in [[0.1, 0.2], [-0.3, 0.1], [0.0, -0.25]] {
            for t in [0.5, 1.5] {
                assert!(dist(&once.mult(t, &v).unwrap(), &twice.mult(t, &v).unwrap()) < 1e-8);
            }
        }
    }

    #[test]
    fn shrunk_mult_is_homogeneous_in_the_band() {
        let s = shrink(&euler_plane(), BumpSpec::third()).unwrap();
        let v = [0.55, 0.3];
        let r = s.rho(&v).unwrap();
        for t in [0.25, 0.5, 2.0] {
            let w = s.mult(t, &v).unwrap();
            assert!((s.rho(&w).unwrap() - t * t * r).abs() <= 1e-9 * t * t * r);
        }
        let back = s.mult(2.0, &s.mult(0.5, &v).unwrap()).unwrap();
        assert!(dist(&back, &v) < 1e-12);
    }

    #[test]
    fn level_sets_agree_with_the_closed_form() {
        let tub = euler_plane();
        let s = shrink(&tub, BumpSpec::third()).unwrap();
        let r = shrink_levelset_check(&tub, &s, 100, 1.0, 42).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.pairs, 100);
    }
}
