//! Euler-like vector fields, the tubular neighbourhoods they induce
//! `(m^t, m⁰, ρ)`, convenient modification and shrinking.

mod convenient;
mod euler;
mod models;
mod shrink;

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GeomError, Result};
use crate::smoothcore::{BumpSpec, Point, ScalarField, VectorField};
use crate::strata::Stratum;

pub use convenient::{convenient_from_charts, make_convenient, FlowTubular};
pub use euler::{adapt_chart_to_submersion, euler_from_chart, euler_like_residual, ladder_at, RatioReport, LADDER};
pub use models::{ChartTubular, ClosureTubular, TrivialTubular};
pub use shrink::{exp_h_s, shrink, shrink_levelset_check, LevelMap, LevelSetReport, Shrunk};

/// The maps of a tubular neighbourhood. Callers go through [`TubularData`],
/// which handles `t = 1`, `t = 0` and points off the neighbourhood, so
/// implementations only see `v ∈ T` and `t > 0`.
pub trait TubularModel: Send + Sync + fmt::Debug {
    fn ambient_dim(&self) -> usize;
    fn contains(&self, v: &[f64]) -> bool;
    fn rho(&self, v: &[f64]) -> Result<f64>;
    fn mult(&self, t: f64, v: &[f64]) -> Result<Point>;
    fn project(&self, v: &[f64]) -> Result<Point>;
    fn field(&self, v: &[f64]) -> Result<Point>;
}

/// A tubular neighbourhood `(V_X, T_X, m_X^t, ρ_X)` of one stratum.
#[derive(Clone)]
pub struct TubularData {
    pub stratum: String,
    pub stratum_dim: usize,
    model: Arc<dyn TubularModel>,
    pub bump_history: Vec<BumpSpec>,
}

impl fmt::Debug for TubularData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TubularData")
            .field("stratum", &self.stratum)
            .field("model", &self.model)
            .field("bump_history", &self.bump_history)
            .finish()
    }
}

impl TubularData {
    pub fn new(stratum: &Stratum, model: impl TubularModel + 'static) -> Self {
        Self::from_arc(stratum, Arc::new(model))
    }

    pub fn from_arc(stratum: &Stratum, model: Arc<dyn TubularModel>) -> Self {
        Self {
            stratum: stratum.id.clone(),
            stratum_dim: stratum.dim,
            model,
            bump_history: Vec::new(),
        }
    }

    /// The same bookkeeping around a different model.
    pub fn with_model(&self, model: Arc<dyn TubularModel>) -> Self {
        Self { model, ..self.clone() }
    }

    pub fn model(&self) -> &Arc<dyn TubularModel> {
        &self.model
    }

    pub fn ambient_dim(&self) -> usize {
        self.model.ambient_dim()
    }

    /// `v ∈ T_X`.
    pub fn contains(&self, v: &[f64]) -> bool {
        self.model.contains(v)
    }

    pub fn rho(&self, v: &[f64]) -> Result<f64> {
        if !self.contains(v) {
            return Err(self.outside(v));
        }
        self.model.rho(v)
    }

    /// `ρ` extended by `+∞` off the neighbourhood.
    pub fn rho_or_inf(&self, v: &[f64]) -> f64 {
        self.rho(v).unwrap_or(f64::INFINITY)
    }

    /// `m^t(v)`. Off the neighbourhood the field vanishes, so positive
    /// times act as the identity there.
    pub fn mult(&self, t: f64, v: &[f64]) -> Result<Point> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(GeomError::Precondition(format!("mult needs finite t ≥ 0, got {t}")));
        }
        if t == 1.0 {
            return Ok(v.to_vec());
        }
        if !self.contains(v) {
            return if t > 0.0 { Ok(v.to_vec()) } else { Err(self.outside(v)) };
        }
        if t == 0.0 {
            return self.model.project(v);
        }
        self.model.mult(t, v)
    }

    /// `m⁰(v)`.
    pub fn project(&self, v: &[f64]) -> Result<Point> {
        self.mult(0.0, v)
    }

    /// `V_X(v)`, zero off the neighbourhood.
    pub fn field(&self, v: &[f64]) -> Result<Point> {
        if !self.contains(v) {
            return Ok(vec![0.0; self.ambient_dim()]);
        }
        self.model.field(v)
    }

    pub fn vector_field(&self) -> VectorField {
        let me = self.clone();
        VectorField::new(self.ambient_dim(), move |v| me.field(v).ok())
    }

    /// `ρ` as a scalar field on `T_X`.
    pub fn rho_field(&self) -> ScalarField {
        let me = self.clone();
        ScalarField::new(self.ambient_dim(), move |v| me.rho(v).ok())
    }

    fn outside(&self, v: &[f64]) -> GeomError {
        GeomError::Domain(format!("{v:?} is outside the tubular neighbourhood of {}", self.stratum))
    }
}

/// Rejection samples of the open neighbourhood `T_X \ X` inside the box
/// `[-radius, radius]^n`. Returns fewer than `count` points if `max_draws`
/// runs out.
pub fn sample_tubular(
    tub: &TubularData,
    radius: f64,
    seed: u64,
    count: usize,
    max_draws: usize,
) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = tub.ambient_dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..max_draws {
        if out.len() == count {
            break;
        }
        let p: Point = (0..n).map(|_| rng.gen_range(-radius..radius)).collect();
        if tub.contains(&p) && tub.rho(&p).is_ok_and(|r| r > 0.0) {
            out.push(p);
        }
    }
    out
}

/// Tubular-level invariants measured on sample points.
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize)]
pub struct HomogeneityReport {
    pub samples: usize,
    /// `max |ρ(m^t v) − t² ρ(v)| / (t² ρ(v))` over `t ∈ {0.25, 0.5, 2}`.
    pub homogeneity: f64,
    /// `max |m^s m^t v − m^{st} v| / (1 + |v|)` over `s, t ∈ {0.5, 2}`.
    pub composition: f64,
    /// `max |m⁰ m^t v − m⁰ v|` over `t ∈ {0.5, 2}`.
    pub projection: f64,
    /// Largest `ρ(m⁰ v)`.
    pub rho_on_stratum: f64,
}

/// Scales used by the homogeneity checks.
pub const HOMOGENEITY_SCALES: [f64; 3] = [0.25, 0.5, 2.0];

/// Measures homogeneity, composition and projection idempotence.
pub fn homogeneity_check(tub: &TubularData, points: &[Point]) -> Result<HomogeneityReport> {
    use crate::smoothcore::vecops::{dist, norm};
    let mut r = HomogeneityReport { samples: points.len(), ..Default::default() };
    for v in points {
        let rv = tub.rho(v)?;
        for t in HOMOGENEITY_SCALES {
            let w = tub.mult(t, v)?;
            let rw = tub.rho(&w)?;
            r.homogeneity = r.homogeneity.max((rw - t * t * rv).abs() / (t * t * rv));
        }
        let p = tub.project(v)?;
        r.rho_on_stratum = r.rho_on_stratum.max(tub.rho(&p)?);
        for s in [0.5, 2.0] {
            let ms = tub.mult(s, v)?;
            r.projection = r.projection.max(dist(&tub.project(&ms)?, &p));
            for t in [0.5, 2.0] {
                let lhs = tub.mult(t, &ms)?;
                let rhs = tub.mult(s * t, v)?;
                r.composition = r.composition.max(dist(&lhs, &rhs) / (1.0 + norm(v)));
            }
        }
    }
    Ok(r)
}
