//! Sample-based verification of the control-data axioms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{ControlData, Flag, Status};
use crate::error::Result;
use crate::smoothcore::vecops::{dist, norm};
use crate::smoothcore::Point;
use crate::strata::act;
use crate::tubular::{sample_tubular, TubularData};

pub const DEFAULT_TOL: f64 = 1e-5;

/// Candidate draws per requested sample before a search gives up.
const DRAWS_PER_SAMPLE: usize = 400;
const BATCH: usize = 256;
const SCALES: [f64; 2] = [0.5, 2.0];
const PROJECTION_SCALES: [f64; 3] = [0.0, 0.5, 2.0];
/// Step of the central differences along `V_Y`.
const FD_STEP: f64 = 1e-6;

fn box_points(n: usize, radius: f64, rng: &mut ChaCha8Rng, k: usize) -> Vec<Point> {
    (0..k).map(|_| (0..n).map(|_| rng.gen_range(-radius..radius)).collect()).collect()
}

/// Seeded box samples satisfying `keep`; candidates are generated
/// sequentially and filtered in parallel, preserving order.
pub(crate) fn filtered_samples(
    n: usize,
    radius: f64,
    seed: u64,
    count: usize,
    keep: impl Fn(&Point) -> bool + Sync,
) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut drawn = 0;
    while out.len() < count && drawn < DRAWS_PER_SAMPLE * count.max(1) {
        let batch = box_points(n, radius, &mut rng, BATCH);
        drawn += BATCH;
        let kept: Vec<Point> = batch.into_par_iter().filter(|p| keep(p)).collect();
        out.extend(kept);
    }
    out.truncate(count);
    out
}

/// Points of `T_X ∩ T_Y` with finite `ρ_X` and finite positive `ρ_Y`.
pub fn overlap_samples(cd: &ControlData, x: usize, y: usize, count: usize, seed: u64) -> Vec<Point> {
    let (tx, ty) = (&cd.tubulars[x], &cd.tubulars[y]);
    filtered_samples(cd.scenario.ambient_dim, cd.scenario.sample_radius, seed, count, |p| {
        tx.rho(p).is_ok_and(f64::is_finite) && ty.rho(p).is_ok_and(|r| r.is_finite() && r > 0.0)
    })
}

/// Residuals of one ordered pair `X < Y` on overlap samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub lower: String,
    pub higher: String,
    pub samples: usize,
    /// Samples where some composition left a neighbourhood.
    pub skipped: usize,
    /// `max |m⁰_X m_Y^t v − m⁰_X v|`, `t ∈ {0, ½, 2}`.
    pub pc1: f64,
    /// `max |ρ_X(m_Y^t v) − ρ_X(v)| / (1 + ρ_X(v))`.
    pub pc2: f64,
    /// `max |m_X^s m_Y^t v − m_Y^t m_X^s v| / (1 + |v|)`, `s, t ∈ {½, 2}`.
    pub c1: f64,
    /// The same with one of `s, t` equal to `0`.
    pub c1_t0: f64,
    /// `max |ρ_Y(m_X^s v) − ρ_Y(v)| / (1 + ρ_Y(v))`.
    pub c2: f64,
    /// `max` residual of `Y` at `m_X^s y` over `Y` samples inside `T_X`.
    pub tangential: f64,
    pub tangential_samples: usize,
}

#[derive(Default, Clone, Copy)]
struct Residuals {
    pc1: f64,
    pc2: f64,
    c1: f64,
    c1_t0: f64,
    c2: f64,
}

fn residuals_at(tx: &TubularData, ty: &TubularData, v: &[f64]) -> Result<Residuals> {
    let mut r = Residuals::default();
    let px = tx.project(v)?;
    let rx = tx.rho(v)?;
    let ry = ty.rho(v)?;
    for t in PROJECTION_SCALES {
        let w = ty.mult(t, v)?;
        r.pc1 = r.pc1.max(dist(&tx.project(&w)?, &px));
        r.pc2 = r.pc2.max((tx.rho(&w)? - rx).abs() / (1.0 + rx));
    }
    let scale = 1.0 + norm(v);
    for s in SCALES {
        for t in SCALES {
            let a = tx.mult(s, &ty.mult(t, v)?)?;
            let b = ty.mult(t, &tx.mult(s, v)?)?;
            r.c1 = r.c1.max(dist(&a, &b) / scale);
        }
        let u = tx.mult(s, v)?;
        r.c2 = r.c2.max((ty.rho(&u)? - ry).abs() / (1.0 + ry));
    }
    for (s, t) in [(0.0, 0.5), (0.0, 2.0), (0.5, 0.0), (2.0, 0.0)] {
        let a = tx.mult(s, &ty.mult(t, v)?)?;
        let b = ty.mult(t, &tx.mult(s, v)?)?;
        r.c1_t0 = r.c1_t0.max(dist(&a, &b) / scale);
    }
    Ok(r)
}

fn tangential_at(cd: &ControlData, x: usize, y: usize, q: &[f64]) -> f64 {
    let (tx, sy) = (&cd.tubulars[x], &cd.scenario.strata[y]);
    SCALES
        .iter()
        .map(|&s| match tx.mult(s, q) {
            Ok(w) if sy.excludes_lower(&w) => sy.residual_norm(&w),
            Ok(_) => f64::INFINITY,
            // The scaled point left the chart of X; nothing to compare.
            Err(_) => 0.0,
        })
        .fold(0.0, f64::max)
}

/// Every pair residual of `X < Y` on `count` overlap samples.
pub fn pair_report(cd: &ControlData, x: usize, y: usize, count: usize, seed: u64) -> PairReport {
    let (tx, ty) = (&cd.tubulars[x], &cd.tubulars[y]);
    let pts = overlap_samples(cd, x, y, count, seed);
    let res: Vec<Option<Residuals>> = pts.par_iter().map(|v| residuals_at(tx, ty, v).ok()).collect();
    let mut rep = PairReport {
        lower: tx.stratum.clone(),
        higher: ty.stratum.clone(),
        samples: 0,
        skipped: 0,
        pc1: 0.0,
        pc2: 0.0,
        c1: 0.0,
        c1_t0: 0.0,
        c2: 0.0,
        tangential: 0.0,
        tangential_samples: 0,
    };
    for r in res {
        match r {
            Some(r) => {
                rep.samples += 1;
                rep.pc1 = rep.pc1.max(r.pc1);
                rep.pc2 = rep.pc2.max(r.pc2);
                rep.c1 = rep.c1.max(r.c1);
                rep.c1_t0 = rep.c1_t0.max(r.c1_t0);
                rep.c2 = rep.c2.max(r.c2);
            }
            None => rep.skipped += 1,
        }
    }
    let inside: Vec<Point> = cd.scenario.strata[y]
        .samples(seed, count)
        .into_iter()
        .filter(|q| tx.contains(q))
        .collect();
    let tang: Vec<f64> = inside.par_iter().map(|q| tangential_at(cd, x, y, q)).collect();
    rep.tangential_samples = tang.len();
    rep.tangential = tang.into_iter().fold(0.0, f64::max);
    rep
}

/// Pairs `X < Y` of non-open strata; open strata carry the trivial
/// neighbourhood and impose nothing.
fn checked_pairs(cd: &ControlData) -> Vec<(usize, usize)> {
    let s = &cd.scenario;
    s.order_pairs()
        .iter()
        .copied()
        .filter(|&(i, j)| !s.strata[i].is_open() && !s.strata[j].is_open())
        .collect()
}

pub fn pair_reports(cd: &ControlData, count: usize, seed: u64) -> Vec<PairReport> {
    checked_pairs(cd).into_iter().map(|(x, y)| pair_report(cd, x, y, count, seed)).collect()
}

/// `|ρ_X(m_Y^t v) − ρ_X(v)|` at a single point, unnormalised.
pub fn pc2_at(cd: &ControlData, lower: &str, higher: &str, v: &[f64], t: f64) -> Result<f64> {
    let (tx, ty) = (cd.tubular(lower)?, cd.tubular(higher)?);
    Ok((tx.rho(&ty.mult(t, v)?)? - tx.rho(v)?).abs())
}

/// One verified property of one pair or stratum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Item {
    pub lower: String,
    pub higher: String,
    pub property: String,
    pub residual: f64,
    pub tol: f64,
    pub samples: usize,
    pub status: Status,
}

impl Item {
    /// Inconclusive without samples, else verified iff `residual ≤ tol`.
    pub fn judged(lower: &str, higher: &str, property: &str, residual: f64, samples: usize, tol: f64) -> Self {
        let status = if samples == 0 {
            Status::Inconclusive
        } else if residual <= tol {
            Status::Verified
        } else {
            Status::Failed
        };
        Self {
            lower: lower.into(),
            higher: higher.into(),
            property: property.into(),
            residual,
            tol,
            samples,
            status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub status: Status,
    pub worst: f64,
    pub tol: f64,
    pub items: Vec<Item>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn new(suite: &str, tol: f64, items: Vec<Item>, notes: Vec<String>) -> Self {
        let status = if items.iter().any(|i| i.status == Status::Failed) {
            Status::Failed
        } else if items.iter().any(|i| i.status == Status::Inconclusive) {
            Status::Inconclusive
        } else {
            Status::Verified
        };
        let worst = items
            .iter()
            .filter(|i| i.samples > 0)
            .map(|i| i.residual)
            .fold(0.0, |a: f64, r| if r.is_nan() { f64::INFINITY } else { a.max(r) });
        Self { suite: suite.into(), status, worst, tol, items, notes }
    }

    pub fn skipped(suite: &str, tol: f64, note: &str) -> Self {
        Self {
            suite: suite.into(),
            status: Status::Skipped,
            worst: 0.0,
            tol,
            items: Vec::new(),
            notes: vec![note.into()],
        }
    }

    pub fn passed(&self) -> bool {
        matches!(self.status, Status::Verified | Status::Skipped)
    }

    pub fn flag(&self) -> Flag {
        Flag { status: self.status, worst: self.worst }
    }
}

fn id(cd: &ControlData, i: usize) -> &str {
    &cd.scenario.strata[i].id
}

/// Neighbourhood overlaps follow the order (`AD₁`), stratum points of `Y`
/// lie in `T_X` only when `X < Y` (`AD₂`), equal-dimension neighbourhoods
/// are disjoint (`AD₃`), and every lower neighbourhood has been shrunk
/// (`AD₄`).
pub fn verify_adjusted(cd: &ControlData, count: usize, seed: u64, tol: f64) -> SuiteReport {
    let s = &cd.scenario;
    let k = s.strata.len();
    let mut items = Vec::new();
    let mut notes = Vec::new();
    let mut equal_dim_pairs = 0;
    for i in 0..k {
        for j in i + 1..k {
            let (ti, tj) = (&cd.tubulars[i], &cd.tubulars[j]);
            let overlap = filtered_samples(s.ambient_dim, s.sample_radius, seed, count, |p| {
                ti.contains(p) && tj.contains(p)
            });
            let (lo, hi) = if s.less(j, i) { (j, i) } else { (i, j) };
            let mut item = Item::judged(id(cd, lo), id(cd, hi), "AD1", 0.0, overlap.len(), tol);
            if !s.comparable(i, j) && !overlap.is_empty() {
                item.status = Status::Failed;
                item.residual = 1.0;
            } else if !s.comparable(i, j) {
                item.status = Status::Verified;
            }
            items.push(item);
            if s.strata[i].dim == s.strata[j].dim {
                equal_dim_pairs += 1;
                items.push(Item::judged(id(cd, i), id(cd, j), "AD3", overlap.len() as f64, count, 0.0));
            }
        }
    }
    if equal_dim_pairs == 0 {
        notes.push("AD3: no pair of distinct strata shares a dimension".into());
    }
    for y in 0..k {
        let pts = s.strata[y].samples(seed, count);
        for x in 0..k {
            if x == y || s.strata[x].is_open() {
                continue;
            }
            let inside = pts.iter().filter(|q| cd.tubulars[x].contains(q)).count();
            let item = if s.less(x, y) {
                Item::judged(id(cd, x), id(cd, y), "AD2", 0.0, inside, tol)
            } else {
                Item::judged(id(cd, x), id(cd, y), "AD2", inside as f64 / count as f64, count, 0.0)
            };
            items.push(item);
        }
    }
    for (i, t) in cd.tubulars.iter().enumerate() {
        if s.strata[i].is_open() {
            continue;
        }
        let shrunk = !t.bump_history.is_empty();
        let mut item = Item::judged(&t.stratum, &t.stratum, "AD4", 0.0, usize::from(shrunk), tol);
        if !shrunk {
            item.status = Status::Inconclusive;
        }
        items.push(item);
    }
    SuiteReport::new("adjusted", tol, items, notes)
}

pub fn verify_tangential(cd: &ControlData, reports: &[PairReport], tol: f64) -> SuiteReport {
    let items = reports
        .iter()
        .map(|r| Item::judged(&r.lower, &r.higher, "tangential", r.tangential, r.tangential_samples, tol))
        .collect();
    SuiteReport::new("tangential", tol, items, open_note(cd))
}

pub fn verify_precommute(cd: &ControlData, reports: &[PairReport], tol: f64) -> SuiteReport {
    let mut items = Vec::new();
    for r in reports {
        items.push(Item::judged(&r.lower, &r.higher, "PC1", r.pc1, r.samples, tol));
        items.push(Item::judged(&r.lower, &r.higher, "PC2", r.pc2, r.samples, tol));
    }
    SuiteReport::new("precommutative", tol, items, skipped_notes(cd, reports))
}

pub fn verify_commute(cd: &ControlData, reports: &[PairReport], tol: f64) -> SuiteReport {
    let mut items = Vec::new();
    for r in reports {
        items.push(Item::judged(&r.lower, &r.higher, "C1", r.c1, r.samples, tol));
        items.push(Item::judged(&r.lower, &r.higher, "C1_t0", r.c1_t0, r.samples, tol));
        items.push(Item::judged(&r.lower, &r.higher, "C2", r.c2, r.samples, tol));
    }
    SuiteReport::new("commutative", tol, items, skipped_notes(cd, reports))
}

fn open_note(cd: &ControlData) -> Vec<String> {
    cd.scenario
        .strata
        .iter()
        .filter(|x| x.is_open())
        .map(|x| format!("{} is open and carries the trivial neighbourhood", x.id))
        .collect()
}

fn skipped_notes(cd: &ControlData, reports: &[PairReport]) -> Vec<String> {
    let mut notes = open_note(cd);
    for r in reports.iter().filter(|r| r.skipped > 0) {
        notes.push(format!("{}<{}: {} samples left a neighbourhood and were skipped", r.lower, r.higher, r.skipped));
    }
    notes
}

fn equivariance_at(t: &TubularData, g: &nalgebra::DMatrix<f64>, v: &[f64]) -> f64 {
    let gv = act(g, v);
    if !t.contains(&gv) {
        return f64::INFINITY;
    }
    let (Ok(r), Ok(rg)) = (t.rho(v), t.rho(&gv)) else {
        return f64::INFINITY;
    };
    let mut worst = (rg - r).abs() / (1.0 + r);
    for s in PROJECTION_SCALES {
        match (t.mult(s, v), t.mult(s, &gv)) {
            (Ok(a), Ok(b)) => worst = worst.max(dist(&act(g, &a), &b) / (1.0 + norm(v))),
            _ => return f64::INFINITY,
        }
    }
    worst
}

/// `g·m^t v = m^t(g·v)`, `ρ(g·v) = ρ(v)` and `g·T = T` for the test
/// elements of the action.
pub fn verify_equivariant(cd: &ControlData, count: usize, seed: u64, tol: f64) -> SuiteReport {
    let Some(action) = &cd.scenario.action else {
        return SuiteReport::skipped("equivariant", tol, "no group action");
    };
    let elements = action.test_elements();
    let mut items = Vec::new();
    for (t, x) in cd.tubulars.iter().zip(&cd.scenario.strata) {
        if x.is_open() {
            continue;
        }
        let pts = sample_tubular(t, cd.scenario.sample_radius, seed, count, DRAWS_PER_SAMPLE * count);
        let worst = pts
            .par_iter()
            .map(|v| elements.iter().map(|g| equivariance_at(t, g, v)).fold(0.0, f64::max))
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max);
        items.push(Item::judged(&x.id, &x.id, "equivariance", worst, pts.len(), tol));
    }
    SuiteReport::new("equivariant", tol, items, open_note(cd))
}

/// Runs every suite, sharing one set of pair reports, and records the
/// flags on `cd`.
pub fn verify_all(cd: &mut ControlData, count: usize, seed: u64, tol: f64) -> Vec<SuiteReport> {
    let reports = pair_reports(cd, count, seed);
    let suites = vec![
        verify_adjusted(cd, count, seed, tol),
        verify_tangential(cd, &reports, tol),
        verify_precommute(cd, &reports, tol),
        verify_commute(cd, &reports, tol),
        verify_equivariant(cd, count, seed, tol),
    ];
    cd.flags.adjusted = suites[0].flag();
    cd.flags.tangential = suites[1].flag();
    cd.flags.precommutative = suites[2].flag();
    cd.flags.commutative = suites[3].flag();
    cd.flags.equivariant = suites[4].flag();
    suites
}

/// Rates of change of `ρ_X` and `m⁰_X` along `V_Y` for the top non-open
/// stratum `Y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TopStratumReport {
    pub stratum: String,
    /// `(X, worst |V_Y ρ_X| / (|∇ρ_X| |V_Y|), worst |V_Y m⁰_X| / (1 + |v|), samples)`.
    pub lower: Vec<(String, f64, f64, usize)>,
    pub worst: f64,
    pub passed: bool,
}

pub fn only_top_stratum_check(cd: &ControlData, count: usize, seed: u64, tol: f64) -> Option<TopStratumReport> {
    let s = &cd.scenario;
    let y = (0..s.strata.len()).filter(|&i| !s.strata[i].is_open()).max_by_key(|&i| s.strata[i].dim)?;
    let ty = &cd.tubulars[y];
    let mut rep = TopStratumReport { stratum: s.strata[y].id.clone(), lower: Vec::new(), worst: 0.0, passed: true };
    for x in (0..s.strata.len()).filter(|&x| s.less(x, y)) {
        let tx = &cd.tubulars[x];
        let pts = overlap_samples(cd, x, y, count, seed);
        let rates: Vec<Option<(f64, f64)>> = pts
            .par_iter()
            .map(|v| {
                let dv = ty.field(v).ok()?;
                let plus: Point = v.iter().zip(&dv).map(|(a, b)| a + FD_STEP * b).collect();
                let minus: Point = v.iter().zip(&dv).map(|(a, b)| a - FD_STEP * b).collect();
                let rate = |a: &[f64], b: &[f64]| Some((tx.rho(a).ok()? - tx.rho(b).ok()?) / (2.0 * FD_STEP));
                let along = rate(&plus, &minus)?.abs();
                let mut grad_sq = 0.0;
                for i in 0..v.len() {
                    let (mut a, mut b) = (v.to_vec(), v.to_vec());
                    a[i] += FD_STEP;
                    b[i] -= FD_STEP;
                    grad_sq += rate(&a, &b)?.powi(2);
                }
                let scale = grad_sq.sqrt() * norm(&dv);
                let rho = if scale > 0.0 { along / scale } else { 0.0 };
                let proj = dist(&tx.project(&plus).ok()?, &tx.project(&minus).ok()?) / (2.0 * FD_STEP);
                Some((rho, proj / (1.0 + norm(v))))
            })
            .collect();
        let ok: Vec<(f64, f64)> = rates.into_iter().flatten().collect();
        let rho = ok.iter().map(|r| r.0).fold(0.0, f64::max);
        let proj = ok.iter().map(|r| r.1).fold(0.0, f64::max);
        rep.worst = rep.worst.max(rho).max(proj);
        rep.passed &= !ok.is_empty() && rho <= tol && proj <= tol;
        rep.lower.push((s.strata[x].id.clone(), rho, proj, ok.len()));
    }
    Some(rep)
}
