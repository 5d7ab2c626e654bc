//! Control data: one tubular neighbourhood per stratum, the tangential and
//! commutative builders, conjugation, reference data and the property
//! verifiers.

mod build;
mod conjugate;
mod oracle;
pub(crate) mod verify;

use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::strata::StratifiedScenario;
use crate::tubular::TubularData;

pub use build::{build_commutative, build_tangential};
pub use conjugate::{conjugate, conjugation_profile, Conjugated};
pub use oracle::{analytic_flag_oracle, naive_flag_data};
pub use verify::{
    only_top_stratum_check, overlap_samples, pair_report, pair_reports, pc2_at, verify_adjusted,
    verify_all, verify_commute, verify_equivariant, verify_precommute, verify_tangential,
    Item, PairReport, SuiteReport, TopStratumReport, DEFAULT_TOL,
};

/// Outcome of a verification suite or item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Unset,
    Verified,
    Failed,
    Inconclusive,
    Skipped,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Unset => "unset",
            Status::Verified => "verified",
            Status::Failed => "failed",
            Status::Inconclusive => "inconclusive",
            Status::Skipped => "skipped",
        }
    }
}

/// A property flag with the worst residual seen when it was set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flag {
    pub status: Status,
    pub worst: f64,
}

impl Default for Flag {
    fn default() -> Self {
        Self { status: Status::Unset, worst: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Flags {
    pub adjusted: Flag,
    pub tangential: Flag,
    pub precommutative: Flag,
    pub commutative: Flag,
    pub equivariant: Flag,
}

/// A tubular neighbourhood for every stratum of a scenario, indexed like
/// `scenario.strata`.
#[derive(Debug, Clone)]
pub struct ControlData {
    pub scenario: StratifiedScenario,
    pub tubulars: Vec<TubularData>,
    pub flags: Flags,
    pub label: String,
}

impl ControlData {
    pub fn new(scenario: StratifiedScenario, tubulars: Vec<TubularData>, label: impl Into<String>) -> Result<Self> {
        if tubulars.len() != scenario.strata.len()
            || tubulars.iter().zip(&scenario.strata).any(|(t, x)| t.stratum != x.id)
        {
            return Err(GeomError::Precondition("control data needs one tubular per stratum, in order".into()));
        }
        Ok(Self { scenario, tubulars, flags: Flags::default(), label: label.into() })
    }

    pub fn tubular(&self, id: &str) -> Result<&TubularData> {
        Ok(&self.tubulars[self.scenario.index_of(id)?])
    }

    /// Indices of the strata of dimension `d`.
    pub fn of_dim(&self, d: usize) -> Vec<usize> {
        (0..self.tubulars.len()).filter(|&i| self.scenario.strata[i].dim == d).collect()
    }

    /// The tubular of dimension `d` containing `v`, if any.
    pub fn tubular_at(&self, d: usize, v: &[f64]) -> Option<&TubularData> {
        self.of_dim(d).into_iter().map(|i| &self.tubulars[i]).find(|t| t.contains(v))
    }
}
