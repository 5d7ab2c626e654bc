//! Tubular models that are not built from a flow: chart normal forms,
//! the trivial model of an open stratum and closure-backed models.

use std::fmt;
use std::sync::Arc;

use super::TubularModel;
use crate::error::{GeomError, Result};
use crate::smoothcore::Point;
use crate::strata::{ConicalChart, Stratum};

/// The normal form of the chart Euler field: `m^t = θ⁻¹(x, t·y)`,
/// `ρ = |y|²`, on the union of pairwise disjoint chart domains.
#[derive(Debug, Clone)]
pub struct ChartTubular {
    charts: Vec<ConicalChart>,
}

impl ChartTubular {
    pub fn new(charts: Vec<ConicalChart>) -> Result<Self> {
        if charts.is_empty() {
            return Err(GeomError::Precondition("a chart tubular needs at least one chart".into()));
        }
        Ok(Self { charts })
    }

    fn chart(&self, v: &[f64]) -> Result<&ConicalChart> {
        self.charts
            .iter()
            .find(|c| c.contains(v))
            .ok_or_else(|| GeomError::Domain(format!("{v:?} is in no chart")))
    }
}

fn chart_failure(v: &[f64]) -> GeomError {
    GeomError::Domain(format!("chart inverse failed near {v:?}"))
}

impl TubularModel for ChartTubular {
    fn ambient_dim(&self) -> usize {
        self.charts[0].ambient_dim()
    }

    fn contains(&self, v: &[f64]) -> bool {
        self.charts.iter().any(|c| c.contains(v))
    }

    fn rho(&self, v: &[f64]) -> Result<f64> {
        self.chart(v)?.fiber_norm_sq(v).ok_or_else(|| chart_failure(v))
    }

    fn mult(&self, t: f64, v: &[f64]) -> Result<Point> {
        self.chart(v)?.scale_fiber(v, t).ok_or_else(|| chart_failure(v))
    }

    fn project(&self, v: &[f64]) -> Result<Point> {
        self.chart(v)?.project(v).ok_or_else(|| chart_failure(v))
    }

    fn field(&self, v: &[f64]) -> Result<Point> {
        self.chart(v)?.euler(v).ok_or_else(|| chart_failure(v))
    }
}

/// The tubular neighbourhood of an open stratum: `V = 0`, `T = X`.
#[derive(Clone)]
pub struct TrivialTubular {
    stratum: Stratum,
}

impl fmt::Debug for TrivialTubular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TrivialTubular").field("stratum", &self.stratum.id).finish()
    }
}

impl TrivialTubular {
    pub fn new(stratum: &Stratum) -> Self {
        Self { stratum: stratum.clone() }
    }
}

impl TubularModel for TrivialTubular {
    fn ambient_dim(&self) -> usize {
        self.stratum.ambient_dim()
    }

    fn contains(&self, v: &[f64]) -> bool {
        self.stratum.contains(v)
    }

    fn rho(&self, _: &[f64]) -> Result<f64> {
        Ok(0.0)
    }

    fn mult(&self, _: f64, v: &[f64]) -> Result<Point> {
        Ok(v.to_vec())
    }

    fn project(&self, v: &[f64]) -> Result<Point> {
        Ok(v.to_vec())
    }

    fn field(&self, v: &[f64]) -> Result<Point> {
        Ok(vec![0.0; v.len()])
    }
}

type Membership = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
type RhoFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MultFn = Arc<dyn Fn(f64, &[f64]) -> Option<Point> + Send + Sync>;
type FieldFn = Arc<dyn Fn(&[f64]) -> Point + Send + Sync>;

/// A tubular model given by explicit formulas.
#[derive(Clone)]
pub struct ClosureTubular {
    label: String,
    dim: usize,
    contains: Membership,
    rho: RhoFn,
    mult: MultFn,
    field: FieldFn,
}

impl fmt::Debug for ClosureTubular {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClosureTubular").field("label", &self.label).finish()
    }
}

impl ClosureTubular {
    /// `mult` is called with `t ≥ 0` (`t = 0` is the projection) and may
    /// return `None` where the formula breaks down.
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        contains: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
        rho: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        mult: impl Fn(f64, &[f64]) -> Option<Point> + Send + Sync + 'static,
        field: impl Fn(&[f64]) -> Point + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            dim,
            contains: Arc::new(contains),
            rho: Arc::new(rho),
            mult: Arc::new(mult),
            field: Arc::new(field),
        }
    }
}

impl TubularModel for ClosureTubular {
    fn ambient_dim(&self) -> usize {
        self.dim
    }

    fn contains(&self, v: &[f64]) -> bool {
        (self.contains)(v)
    }

    fn rho(&self, v: &[f64]) -> Result<f64> {
        Ok((self.rho)(v))
    }

    fn mult(&self, t: f64, v: &[f64]) -> Result<Point> {
        (self.mult)(t, v).ok_or_else(|| GeomError::Domain(format!("{}: mult undefined at {v:?}", self.label)))
    }

    fn project(&self, v: &[f64]) -> Result<Point> {
        self.mult(0.0, v)
    }

    fn field(&self, v: &[f64]) -> Result<Point> {
        Ok((self.field)(v))
    }
}
