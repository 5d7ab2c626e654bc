//! Stratified subsets of `R^n`: strata described by residuals and
//! exclusions, their conical charts, a declared partial order and an
//! optional linear group action.

mod action;
mod chart;
pub mod library;

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::smoothcore::dual::{self, Dual};
use crate::smoothcore::vecops::{norm, norm_sq};
use crate::smoothcore::{Point, ScalarField};

pub use action::{act, orbit_type, CircleAction, FiniteGroup, GroupAction, Stabilizer, CIRCLE_TEST_ANGLES, MAX_GROUP_ORDER};
pub use chart::{AdaptedChart, ChartMap, ConeChart, ConicalChart, DualMap, FlagChart, LinearChart};

/// Seed used by checks that take no seed of their own.
pub const DEFAULT_SEED: u64 = 42;

/// Residual threshold below which a point counts as lying on a stratum.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

type RealScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Predicate = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
/// Seeded generator of on-stratum points.
pub type Sampler = Arc<dyn Fn(&mut ChaCha8Rng) -> Point + Send + Sync>;

/// The scheduled neighbourhood of a stratum: the constant `δ` of its
/// convenient cutoff `h(ρ/δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighbourhoodSpec {
    pub delta: f64,
}

/// A stratum: the zero set of `residual` minus the lower strata carved out
/// by `exclusion`.
#[derive(Clone)]
pub struct Stratum {
    pub id: String,
    pub dim: usize,
    ambient: usize,
    codim_eqs: usize,
    residual: DualMap,
    membership: Option<RealScalarFn>,
    threshold: f64,
    exclusion: Predicate,
    sampler: Sampler,
    pub charts: Vec<ConicalChart>,
    pub neighbourhood: NeighbourhoodSpec,
}

impl fmt::Debug for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stratum")
            .field("id", &self.id)
            .field("dim", &self.dim)
            .field("charts", &self.charts.len())
            .field("delta", &self.neighbourhood.delta)
            .finish()
    }
}

impl Stratum {
    pub fn new(
        id: impl Into<String>,
        dim: usize,
        ambient: usize,
        residual: impl Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
        exclusion: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        sampler: impl Fn(&mut ChaCha8Rng) -> Point + Send + Sync + 'static,
    ) -> Self {
        let codim_eqs = residual(&dual::constants(&vec![0.0; ambient])).len();
        Self {
            id: id.into(),
            dim,
            ambient,
            codim_eqs,
            residual: Arc::new(residual),
            membership: None,
            threshold: MEMBERSHIP_TOL,
            exclusion: Arc::new(exclusion),
            sampler: Arc::new(sampler),
            charts: Vec::new(),
            neighbourhood: NeighbourhoodSpec { delta: 1.0 },
        }
    }

    pub fn with_charts(mut self, charts: Vec<ConicalChart>) -> Self {
        self.charts = charts;
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.neighbourhood = NeighbourhoodSpec { delta };
        self
    }

    /// Replaces the membership test by `f(p) ≤ threshold`; the smooth
    /// residual is still used as the stratum's defining functions.
    pub fn with_membership(
        mut self,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        threshold: f64,
    ) -> Self {
        self.membership = Some(Arc::new(f));
        self.threshold = threshold;
        self
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    /// An open stratum has no defining equations.
    pub fn is_open(&self) -> bool {
        self.codim_eqs == 0
    }

    pub fn residual(&self, p: &[f64]) -> Point {
        (self.residual)(&dual::constants(p)).iter().map(|d| d.re).collect()
    }

    pub fn residual_dual(&self, p: &[Dual]) -> Vec<Dual> {
        (self.residual)(p)
    }

    /// Size of the residual used for membership.
    pub fn residual_norm(&self, p: &[f64]) -> f64 {
        match &self.membership {
            Some(f) => f(p),
            None => norm(&self.residual(p)),
        }
    }

    pub fn excludes_lower(&self, p: &[f64]) -> bool {
        (self.exclusion)(p)
    }

    /// `p` lies on the stratum (on the residual locus and off lower strata).
    pub fn contains(&self, p: &[f64]) -> bool {
        self.residual_norm(p) <= self.threshold && self.excludes_lower(p)
    }

    /// The residual components as scalar fields vanishing on the stratum.
    pub fn defining_functions(&self) -> Vec<ScalarField> {
        (0..self.codim_eqs)
            .map(|i| {
                let r = Arc::clone(&self.residual);
                ScalarField::from_dual(self.ambient, move |p| Some(r(p)[i]))
            })
            .collect()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Point {
        (self.sampler)(rng)
    }

    pub fn samples(&self, seed: u64, count: usize) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count).map(|_| self.sample(&mut rng)).collect()
    }

    /// The first chart whose domain contains `p`.
    pub fn chart_at(&self, p: &[f64]) -> Option<&ConicalChart> {
        self.charts.iter().find(|c| c.contains(p))
    }
}

/// A stratified subset with a declared partial order on its strata.
#[derive(Clone, Debug)]
pub struct StratifiedScenario {
    pub name: String,
    /// One-line description of the scenario family.
    pub family: String,
    pub ambient_dim: usize,
    pub strata: Vec<Stratum>,
    order: Vec<(usize, usize)>,
    pub action: Option<GroupAction>,
    /// Half-width of the box used when sampling ambient neighbourhoods.
    pub sample_radius: f64,
}

impl StratifiedScenario {
    /// Builds a scenario; `order` lists pairs `(lower, higher)` by id.
    pub fn new(
        name: impl Into<String>,
        family: impl Into<String>,
        ambient_dim: usize,
        strata: Vec<Stratum>,
        order: &[(&str, &str)],
        action: Option<GroupAction>,
        sample_radius: f64,
    ) -> Result<Self> {
        let mut s = Self {
            name: name.into(),
            family: family.into(),
            ambient_dim,
            strata,
            order: Vec::new(),
            action,
            sample_radius,
        };
        for x in &s.strata {
            if x.ambient != ambient_dim || x.dim > ambient_dim {
                return Err(GeomError::Precondition(format!(
                    "stratum {} does not fit ambient dimension {ambient_dim}",
                    x.id
                )));
            }
        }
        if let Some(a) = &s.action {
            a.validate()?;
            if a.dim() != ambient_dim {
                return Err(GeomError::InvalidAction("action dimension differs from ambient".into()));
            }
        }
        for (lo, hi) in order {
            let i = s.index_of(lo)?;
            let j = s.index_of(hi)?;
            s.order.push((i, j));
        }
        Ok(s)
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.strata
            .iter()
            .position(|x| x.id == id)
            .ok_or_else(|| GeomError::Precondition(format!("unknown stratum {id}")))
    }

    pub fn stratum(&self, id: &str) -> Option<&Stratum> {
        self.strata.iter().find(|x| x.id == id)
    }

    /// Declared `strata[i] < strata[j]`.
    pub fn less(&self, i: usize, j: usize) -> bool {
        self.order.contains(&(i, j))
    }

    pub fn comparable(&self, i: usize, j: usize) -> bool {
        i == j || self.less(i, j) || self.less(j, i)
    }

    pub fn order_pairs(&self) -> &[(usize, usize)] {
        &self.order
    }

    /// The same scenario with the edge `lower < higher` removed.
    pub fn without_edge(&self, lower: &str, higher: &str) -> Result<Self> {
        let (i, j) = (self.index_of(lower)?, self.index_of(higher)?);
        let mut s = self.clone();
        s.order.retain(|&e| e != (i, j));
        Ok(s)
    }

    /// Distinct stratum dimensions in ascending order.
    pub fn dims(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.strata.iter().map(|x| x.dim).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// Distance surrogate to `C`: the smallest residual norm over strata.
    pub fn c_residual(&self, p: &[f64]) -> f64 {
        self.strata.iter().map(|x| x.residual_norm(p)).fold(f64::INFINITY, f64::min)
    }

    /// The stratum containing `p`, if any.
    pub fn locate(&self, p: &[f64]) -> Option<usize> {
        self.strata.iter().position(|x| x.contains(p))
    }
}

/// Verdict of a single order-check pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderPairReport {
    pub lower: String,
    pub higher: String,
    pub declared: bool,
    pub dims_ok: bool,
    /// Worst lower-stratum residual of scaled higher samples (declared
    /// pairs) or best witness residual (undeclared pairs).
    pub frontier_residual: f64,
    pub witnesses: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub transitive: bool,
    pub antisymmetric: bool,
    pub pairs: Vec<OrderPairReport>,
    pub passed: bool,
}

const FRONTIER_SAMPLES: usize = 50;
const FRONTIER_T: f64 = 1e-6;
const FRONTIER_TOL: f64 = 1e-5;

/// Worst and best frontier residuals of `higher` samples scaled toward
/// `lower` through the lower stratum's charts, with the number of samples
/// that fell in a chart.
fn frontier_probe(lower: &Stratum, higher: &Stratum) -> (f64, f64, usize) {
    let mut worst = 0.0f64;
    let mut best = f64::INFINITY;
    let mut hits = 0;
    for y in higher.samples(DEFAULT_SEED, FRONTIER_SAMPLES) {
        let Some(chart) = lower.chart_at(&y) else { continue };
        let Some(m) = chart.scale_fiber(&y, FRONTIER_T) else { continue };
        hits += 1;
        let scale = 1.0 + norm(&y);
        let on_higher_closure = higher.residual_norm(&m) / scale;
        let r = (lower.residual_norm(&m) / scale).max(on_higher_closure);
        worst = worst.max(r);
        best = best.min(r);
    }
    (worst, best, hits)
}

/// Checks transitivity, antisymmetry, dimension monotonicity and the
/// frontier condition on samples. An undeclared pair whose higher samples
/// converge onto the lower stratum is reported as a failure.
pub fn order_check(s: &StratifiedScenario) -> OrderReport {
    let n = s.strata.len();
    let mut transitive = true;
    let mut antisymmetric = true;
    for &(a, b) in &s.order {
        if a == b || s.less(b, a) {
            antisymmetric = false;
        }
        for &(c, d) in &s.order {
            if b == c && !s.less(a, d) {
                transitive = false;
            }
        }
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let (x, y) = (&s.strata[i], &s.strata[j]);
            let declared = s.less(i, j);
            if !declared && x.dim >= y.dim {
                continue;
            }
            let dims_ok = x.dim < y.dim;
            let (worst, best, hits) = frontier_probe(x, y);
            let (frontier_residual, passed) = if declared {
                (worst, dims_ok && hits > 0 && worst <= FRONTIER_TOL)
            } else {
                let witnessed = hits > 0 && best <= FRONTIER_TOL;
                (best, !witnessed)
            };
            pairs.push(OrderPairReport {
                lower: x.id.clone(),
                higher: y.id.clone(),
                declared,
                dims_ok,
                frontier_residual,
                witnesses: hits,
                passed,
            });
        }
    }
    let passed = transitive && antisymmetric && pairs.iter().all(|p| p.passed);
    OrderReport { transitive, antisymmetric, pairs, passed }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConicalityReport {
    pub owner: Option<String>,
    pub checked: usize,
    pub skipped: usize,
    /// Worst higher-stratum residual after scaling the fiber coordinates.
    pub worst_scaled_residual: f64,
    /// Worst `|θ⁻¹(θ(p)) - p|` over checked points.
    pub worst_round_trip: f64,
    /// Worst fiber norm of the owning stratum's samples.
    pub worst_fiber_on_owner: f64,
    pub passed: bool,
}

const CONICAL_SCALES: [f64; 2] = [0.25, 0.5];

/// Samples the strata above the chart's owner inside the chart domain and
/// checks that scaling the fiber coordinates keeps them on their stratum.
pub fn chart_conicality_check(
    chart: &ConicalChart,
    s: &StratifiedScenario,
    samples: usize,
) -> ConicalityReport {
    let owner = s.strata.iter().position(|x| x.contains(&chart.center));
    let mut report = ConicalityReport {
        owner: owner.map(|i| s.strata[i].id.clone()),
        checked: 0,
        skipped: 0,
        worst_scaled_residual: 0.0,
        worst_round_trip: 0.0,
        worst_fiber_on_owner: 0.0,
        passed: false,
    };
    let Some(owner) = owner else { return report };
    let k = chart.split();
    for p in s.strata[owner].samples(DEFAULT_SEED, samples) {
        if let Some(q) = chart.theta(&p) {
            report.worst_fiber_on_owner = report.worst_fiber_on_owner.max(norm_sq(&q[k..]).sqrt());
        }
    }
    for (j, y) in s.strata.iter().enumerate() {
        if !s.less(owner, j) {
            continue;
        }
        for p in y.samples(DEFAULT_SEED ^ j as u64, samples) {
            let Some(q) = chart.theta(&p) else {
                report.skipped += 1;
                continue;
            };
            let Some(back) = chart.theta_inv(&q, &p) else {
                report.skipped += 1;
                continue;
            };
            report.checked += 1;
            let scale = 1.0 + norm(&p);
            report.worst_round_trip =
                report.worst_round_trip.max(crate::smoothcore::vecops::dist(&back, &p) / scale);
            for t in CONICAL_SCALES {
                let r = match chart.scale_fiber(&p, t) {
                    Some(m) if y.excludes_lower(&m) => y.residual_norm(&m) / scale,
                    _ => f64::INFINITY,
                };
                report.worst_scaled_residual = report.worst_scaled_residual.max(r);
            }
        }
    }
    let has_higher = (0..s.strata.len()).any(|j| s.less(owner, j));
    report.passed = (report.checked > 0 || !has_higher)
        && report.worst_scaled_residual <= 1e-8
        && report.worst_round_trip <= 1e-9
        && report.worst_fiber_on_owner <= 1e-9;
    report
}
