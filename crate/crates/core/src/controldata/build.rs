//! The ascending tangential builder and the descending commutative one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{conjugate, ControlData};
use crate::error::{GeomError, Result};
use crate::smoothcore::pou::max_field_gap;
use crate::smoothcore::{group_average, BumpSpec, PartitionOfUnity, Point, ScalarField, VectorField};
use crate::strata::{StratifiedScenario, Stratum, DEFAULT_SEED};
use crate::tubular::{
    convenient_from_charts, euler_from_chart, make_convenient, shrink, ChartTubular, TrivialTubular,
    TubularData, TubularModel,
};

/// Stratum samples that must each lie in some chart.
const COVER_SAMPLES: usize = 50;
/// Off-stratum probes comparing the patched field with the chart field.
const PROBES: usize = 20;

fn build_error(x: &Stratum, detail: impl Into<String>) -> GeomError {
    GeomError::Build { stratum: x.id.clone(), detail: detail.into() }
}

/// Chart Euler fields patched by a partition of unity over the chart cover
/// balls; charts without a cover ball have disjoint domains and are used
/// where they are defined.
fn patched_field(x: &Stratum) -> Result<VectorField> {
    let n = x.ambient_dim();
    let fields: Vec<VectorField> = x.charts.iter().map(euler_from_chart).collect();
    if x.charts.iter().all(|c| c.cover.is_some()) && x.charts.len() > 1 {
        let pou = PartitionOfUnity::new(x.charts.iter().map(|c| c.cover.clone().unwrap()).collect())?;
        return Ok(VectorField::new(n, move |p| {
            let w = pou.weights(p).ok()?;
            let mut acc = vec![0.0; n];
            for (wi, f) in w.iter().zip(&fields) {
                if *wi == 0.0 {
                    continue;
                }
                for (a, c) in acc.iter_mut().zip(f.try_eval(p)?) {
                    *a += wi * c;
                }
            }
            Some(acc)
        }));
    }
    let charts = x.charts.clone();
    Ok(VectorField::new(n, move |p| charts.iter().find(|c| c.contains(p))?.euler(p)))
}

fn probes(x: &Stratum, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    x.samples(seed, PROBES)
        .into_iter()
        .map(|q| q.iter().map(|c| c + rng.gen_range(-0.05..0.05)).collect::<Point>())
        .filter(|p| x.chart_at(p).is_some())
        .collect()
}

fn tangential_tubular(s: &StratifiedScenario, x: &Stratum) -> Result<TubularData> {
    if x.is_open() {
        return Ok(TubularData::new(x, TrivialTubular::new(x)));
    }
    if x.charts.is_empty() {
        return Err(build_error(x, "no charts"));
    }
    if let Some(q) = x.samples(DEFAULT_SEED, COVER_SAMPLES).into_iter().find(|q| x.chart_at(q).is_none()) {
        return Err(build_error(x, format!("{}: stratum point {q:?}", GeomError::Uncovered)));
    }
    let patched = patched_field(x)?;
    let averaged = match &s.action {
        Some(a) => group_average(&patched, a)?,
        None => patched.clone(),
    };
    let chart_field = {
        let charts = x.charts.clone();
        VectorField::new(x.ambient_dim(), move |p| charts.iter().find(|c| c.contains(p))?.euler(p))
    };
    let pts = probes(x, DEFAULT_SEED);
    let gap = max_field_gap(&averaged, &chart_field, &pts);
    if !pts.is_empty() && gap <= 1e-10 {
        return convenient_from_charts(x, BumpSpec::third()).map_err(|e| build_error(x, e.to_string()));
    }
    let raw = ChartTubular::new(x.charts.clone())?;
    let rho_raw = ScalarField::new(x.ambient_dim(), move |p| raw.contains(p).then(|| raw.rho(p).ok()).flatten());
    make_convenient(&averaged, x, &rho_raw, x.neighbourhood.delta, BumpSpec::third())
        .map_err(|e| build_error(x, e.to_string()))
}

/// Ascending-dimension construction: per stratum the chart Euler fields,
/// patched, averaged over the group and cut off inside the scheduled
/// neighbourhood; after each dimension every lower tubular is shrunk by
/// `h_{1/3,2/3}`.
pub fn build_tangential(s: &StratifiedScenario) -> Result<ControlData> {
    let mut tubulars: Vec<Option<TubularData>> = vec![None; s.strata.len()];
    for d in s.dims() {
        for (i, x) in s.strata.iter().enumerate() {
            if x.dim == d {
                tubulars[i] = Some(tangential_tubular(s, x)?);
            }
        }
        for (i, x) in s.strata.iter().enumerate() {
            if x.dim < d && !x.is_open() {
                let t = tubulars[i].as_ref().expect("lower strata are built first");
                tubulars[i] = Some(shrink(t, BumpSpec::third())?);
            }
        }
    }
    ControlData::new(s.clone(), tubulars.into_iter().map(Option::unwrap).collect(), "tangential")
}

/// Descending-dimension construction: conjugate every higher tubular
/// against each tubular of dimension `d`, then shrink those by
/// `h_{1/4,1/2}`.
pub fn build_commutative(s: &StratifiedScenario) -> Result<ControlData> {
    let mut cd = build_tangential(s)?;
    for d in s.dims().into_iter().rev() {
        for xi in cd.of_dim(d) {
            if s.strata[xi].is_open() {
                continue;
            }
            for yi in 0..s.strata.len() {
                if s.strata[yi].dim > d && s.less(xi, yi) && !s.strata[yi].is_open() {
                    cd = conjugate(&cd, &s.strata[xi].id, &s.strata[yi].id)?;
                }
            }
        }
        for xi in cd.of_dim(d) {
            if !s.strata[xi].is_open() {
                cd.tubulars[xi] = shrink(&cd.tubulars[xi], BumpSpec::quarter())?;
            }
        }
    }
    cd.label = "commutative".into();
    Ok(cd)
}
