//! Configuration, the scenario pipeline and report writing behind `stratctl`.
//!
//! A run is described by one JSON document:
//!
//! ```json
//! {
//!   "scenario": "FLAG3",
//!   "seed": 42,
//!   "samples": 200,
//!   "tolerances": { "verify": 1e-5, "retract": 1e-5 },
//!   "flow": { "rel_tol": 1e-9, "abs_tol": 1e-11 },
//!   "suites": ["adjusted", "commutative", "retraction"],
//!   "out": "out"
//! }
//! ```
//!
//! Every field is optional. `scenario` is a library name or a custom block
//! such as `{"flag": 4}`; omitting `suites` requests all of them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controldata::{
    build_commutative, build_tangential, pair_reports, verify_adjusted, verify_all, verify_precommute,
    verify_tangential, ControlData, Item, Status, SuiteReport,
};
use crate::error::GeomError;
use crate::examples::momentum::action_generators;
use crate::examples::{
    crit_residual, cv_residual, d3_image_check, hilbert_d3, moment, norm_sq_gradient_flow, quadratic_moment,
    quasi_homog_check, reduce_control_data, HilbertModel, TorusHamiltonian,
};
use crate::retract::{build_homotopy, retraction_metrics, retraction_samples, RetractionReport, C_TOL_ALL, TIMES};
use crate::smoothcore::ode::FlowOptions;
use crate::smoothcore::vecops::norm;
use crate::strata::{library, GroupAction, StratifiedScenario, DEFAULT_SEED};

/// Suites in report order.
pub const SUITES: [&str; 8] = [
    "adjusted",
    "tangential",
    "precommutative",
    "commutative",
    "equivariant",
    "retraction",
    "momentum",
    "hilbert",
];

/// Overrides the output directory of `run`; `--out` still wins.
pub const OUT_ENV: &str = "STRATCTL_OUT";

/// Flow time of the gradient-flow comparator.
const GRADIENT_FLOW_TIME: f64 = 400.0;
/// Samples for the momentum and Hilbert identities.
const IDENTITY_SAMPLES: usize = 1000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot write output: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomScenario {
    /// The coordinate flag of `R^n`.
    pub flag: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioSpec {
    Named(String),
    Custom(CustomScenario),
}

impl ScenarioSpec {
    pub fn build(&self) -> crate::Result<StratifiedScenario> {
        match self {
            ScenarioSpec::Named(name) => library::lookup(name),
            ScenarioSpec::Custom(c) => library::flag(c.flag),
        }
    }

    fn library_name(&self) -> Option<&str> {
        match self {
            ScenarioSpec::Named(name) => Some(name),
            ScenarioSpec::Custom(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub verify: f64,
    pub retract: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { verify: 1e-5, retract: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub seed: u64,
    /// Samples per pair, stratum or suite.
    pub samples: usize,
    pub tolerances: Tolerances,
    pub flow: FlowOptions,
    /// Requested suites; `None` requests all of them.
    pub suites: Option<Vec<String>>,
    /// Not echoed, so that reports do not depend on where they were written.
    #[serde(skip_serializing)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioSpec::Named("FLAG3".into()),
            seed: DEFAULT_SEED,
            samples: 200,
            tolerances: Tolerances::default(),
            flow: FlowOptions::default(),
            suites: None,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    /// Parses and validates a JSON document.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match &self.scenario {
            ScenarioSpec::Named(name) if !library::SCENARIOS.contains(&name.as_str()) => {
                return Err(CliError::Config(format!(
                    "unknown scenario {name:?}; expected one of {}",
                    library::SCENARIOS.join(", ")
                )));
            }
            ScenarioSpec::Custom(c) if !(2..=6).contains(&c.flag) => {
                return Err(CliError::Config(format!("custom flag needs 2 ≤ n ≤ 6, got {}", c.flag)));
            }
            _ => {}
        }
        for (name, t) in [("verify", self.tolerances.verify), ("retract", self.tolerances.retract)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("tolerance {name:?} must be positive, got {t}")));
            }
        }
        if self.samples == 0 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        self.flow.validate().map_err(|e| CliError::Config(format!("flow: {e}")))?;
        if let Some(suites) = &self.suites {
            for (i, s) in suites.iter().enumerate() {
                if !SUITES.contains(&s.as_str()) {
                    return Err(CliError::Config(format!(
                        "unknown suite {s:?}; expected one of {}",
                        SUITES.join(", ")
                    )));
                }
                if suites[..i].contains(s) {
                    return Err(CliError::Config(format!("suite {s:?} requested twice")));
                }
            }
        }
        Ok(())
    }

    /// Requested suites in report order.
    pub fn requested(&self) -> Vec<&'static str> {
        SUITES
            .iter()
            .copied()
            .filter(|s| self.suites.as_ref().is_none_or(|r| r.iter().any(|x| x == s)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioInfo {
    pub name: String,
    pub family: String,
    pub ambient_dim: usize,
    pub strata: Vec<String>,
    pub action: String,
}

impl ScenarioInfo {
    fn of(s: &StratifiedScenario) -> Self {
        Self {
            name: s.name.clone(),
            family: s.family.clone(),
            ambient_dim: s.ambient_dim,
            strata: s.strata.iter().map(|x| x.id.clone()).collect(),
            action: action_label(s.action.as_ref()),
        }
    }
}

pub fn action_label(action: Option<&GroupAction>) -> String {
    match action {
        None => "none".into(),
        Some(GroupAction::Finite(g)) => format!("finite group of order {}", g.order()),
        Some(GroupAction::Circle(c)) => {
            let w: Vec<String> = c.weights().iter().map(i64::to_string).collect();
            format!("circle, weights ({})", w.join(", "))
        }
    }
}

/// Everything a run produced except wall-clock times, which go to
/// `timing.json` so that the report is reproducible byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub config: RunConfig,
    pub scenario: Option<ScenarioInfo>,
    /// Checks of the tangential data, before conjugation.
    pub tangential_stage: Vec<SuiteReport>,
    pub suites: Vec<SuiteReport>,
    pub retraction: Option<RetractionReport>,
    pub error: Option<String>,
    pub artifacts: Vec<String>,
    pub exit_code: i32,
}

impl RunReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteReport> {
        self.suites.iter().find(|s| s.suite == name)
    }
}

/// `{:.16e}`: seventeen significant digits, enough to round-trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

struct Run {
    report: RunReport,
    timing: BTreeMap<String, f64>,
}

impl Run {
    fn timed<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timing.entry(name.to_string()).or_default() += start.elapsed().as_secs_f64();
        out
    }

    fn abort(mut self, stage: &str, e: GeomError, out: Option<&Path>) -> Result<RunReport, CliError> {
        self.report.error = Some(format!("{stage}: {e}"));
        self.report.exit_code = 3;
        self.finish(out, None)
    }

    fn finish(mut self, out: Option<&Path>, trajectories: Option<(&ControlData, &RetractionReport)>) -> Result<RunReport, CliError> {
        if self.report.error.is_none() {
            let failed = self.report.suites.iter().chain(&self.report.tangential_stage).any(|s| s.status == Status::Failed);
            self.report.exit_code = i32::from(failed);
        }
        let Some(dir) = out else {
            return Ok(self.report);
        };
        fs::create_dir_all(dir)?;
        let mut artifacts = vec!["report.json".to_string(), "timing.json".to_string()];
        for s in &self.report.suites {
            if !s.items.is_empty() {
                let name = format!("residuals_{}.csv", s.suite);
                write_residuals(&dir.join(&name), s)?;
                artifacts.push(name);
            }
        }
        if let Some((cd, r)) = trajectories {
            write_trajectories(&dir.join("trajectories.csv"), cd, r)?;
            artifacts.push("trajectories.csv".into());
        }
        self.report.artifacts = artifacts;
        let json = serde_json::to_string_pretty(&self.report).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join("report.json"), json + "\n")?;
        let timing = serde_json::to_string_pretty(&self.timing).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(dir.join("timing.json"), timing + "\n")?;
        Ok(self.report)
    }
}

/// Runs the pipeline. With `out = None` nothing is written. Configuration
/// errors are returned before any computation; build errors produce a
/// partial report with exit code 3.
pub fn run(cfg: &RunConfig, out: Option<&Path>) -> Result<RunReport, CliError> {
    cfg.validate()?;
    let requested = cfg.requested();
    let (n, seed, tol) = (cfg.samples, cfg.seed, cfg.tolerances.verify);
    let mut run = Run {
        report: RunReport {
            config: cfg.clone(),
            scenario: None,
            tangential_stage: Vec::new(),
            suites: Vec::new(),
            retraction: None,
            error: None,
            artifacts: Vec::new(),
            exit_code: 0,
        },
        timing: BTreeMap::new(),
    };

    let scenario = match run.timed("build_scenario", || cfg.scenario.build()) {
        Ok(s) => s,
        Err(e) => return run.abort("scenario", e, out),
    };
    run.report.scenario = Some(ScenarioInfo::of(&scenario));

    let tangential = match run.timed("build_tangential", || build_tangential(&scenario)) {
        Ok(cd) => cd,
        Err(e) => return run.abort("build_tangential", e, out),
    };
    run.report.tangential_stage = run.timed("tangential_stage", || {
        let reports = pair_reports(&tangential, n, seed);
        vec![
            verify_adjusted(&tangential, n, seed, tol),
            verify_tangential(&tangential, &reports, tol),
            verify_precommute(&tangential, &reports, tol),
        ]
    });

    let mut cd = match run.timed("build_commutative", || build_commutative(&scenario)) {
        Ok(cd) => cd,
        Err(e) => return run.abort("build_commutative", e, out),
    };
    let verified = run.timed("verify", || verify_all(&mut cd, n, seed, tol));
    for s in verified {
        if requested.contains(&s.suite.as_str()) {
            run.report.suites.push(s);
        }
    }

    let mut retraction = None;
    if requested.contains(&"retraction") {
        let suite = match build_homotopy(&cd) {
            Ok(h) => {
                let r = run.timed("retraction", || retraction_metrics(&h, n, seed));
                let suite = retraction_suite(&r, cfg.tolerances.retract);
                retraction = Some(r);
                suite
            }
            Err(e) => refused("retraction", cfg.tolerances.retract, &e),
        };
        run.report.suites.push(suite);
    }
    if requested.contains(&"momentum") {
        let suite = run.timed("momentum", || momentum_suite(&cd, cfg));
        run.report.suites.push(suite);
    }
    if requested.contains(&"hilbert") {
        let suite = run.timed("hilbert", || hilbert_suite(&cd, cfg));
        run.report.suites.push(suite);
    }
    run.report.retraction = retraction.clone();
    run.finish(out, retraction.as_ref().map(|r| (&cd, r)))
}

fn refused(suite: &str, tol: f64, e: &GeomError) -> SuiteReport {
    let mut s = SuiteReport::new(suite, tol, vec![Item::judged("", "", "refused", f64::INFINITY, 1, tol)], Vec::new());
    s.notes.push(e.to_string());
    s
}

fn retraction_suite(r: &RetractionReport, tol: f64) -> SuiteReport {
    let finals: Vec<f64> = r.trajectories.iter().filter(|row| row.t == 1.0).map(|row| row.c_residual).collect();
    let within = finals.iter().filter(|&&c| c <= tol).count();
    let share = if finals.is_empty() { 0.0 } else { within as f64 / finals.len() as f64 };
    let n = r.samples;
    let mut items = vec![
        Item::judged("", "", "failed_samples", r.failed as f64, n, 0.0),
        Item::judged("", "", "identity_at_zero", r.identity_at_zero, n, 0.0),
        Item::judged("", "", "c_share_outside_tol", 1.0 - share, n, 0.05),
        Item::judged("", "", "c_worst", r.c_worst, n, C_TOL_ALL),
        Item::judged("", "", "rho_increase", r.rho_increase, n, 1e-9),
    ];
    if let Some(e) = r.equivariance {
        items.push(Item::judged("", "", "equivariance", e, n, 1e-6));
    }
    SuiteReport::new("retraction", tol, items, Vec::new())
}

fn uses_balanced_circle(name: Option<&str>) -> bool {
    matches!(name, Some("MOMZERO" | "CRIT11"))
}

fn box_samples(dim: usize, radius: f64, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-radius..radius)).collect()).collect()
}

/// Zero level, gradient-flow comparator, `Q` homogeneity and conical
/// invariance of the local critical model, for the balanced circle.
fn momentum_suite(cd: &ControlData, cfg: &RunConfig) -> SuiteReport {
    let tol = cfg.tolerances.verify;
    let s = &cd.scenario;
    if !uses_balanced_circle(cfg.scenario.library_name()) {
        return SuiteReport::skipped("momentum", tol, "scenario has no momentum map");
    }
    let ham = TorusHamiltonian::new(vec![1, -1], 0.0);
    let mut items = Vec::new();
    let mut notes = Vec::new();

    let zeros: Vec<Vec<f64>> = s.strata[1]
        .samples(cfg.seed, IDENTITY_SAMPLES)
        .into_iter()
        .filter(|z| moment(&ham, z).abs() <= 1e-12)
        .collect();
    let crit = zeros.iter().map(|z| crit_residual(&ham, z)).fold(0.0, f64::max);
    items.push(Item::judged("X1", "", "crit_residual_on_zero_level", crit, zeros.len(), 1e-12));

    let starts = retraction_samples(cd, cfg.samples, cfg.seed);
    let mut flow_worst: f64 = 0.0;
    let mut flow_failures = 0;
    for z in &starts {
        match norm_sq_gradient_flow(&ham, z, GRADIENT_FLOW_TIME, &cfg.flow) {
            Ok(end) => flow_worst = flow_worst.max(moment(&ham, &end).abs()),
            Err(_) => flow_failures += 1,
        }
    }
    if flow_failures > 0 {
        notes.push(format!("gradient flow failed on {flow_failures} samples"));
        flow_worst = f64::INFINITY;
    }
    items.push(Item::judged("", "", "gradient_flow_endpoint_moment", flow_worst, starts.len(), 1e-5));
    if let Ok(h) = build_homotopy(cd) {
        let ends: Vec<f64> = starts
            .iter()
            .filter_map(|z| h.at(1.0, z).ok())
            .map(|e| moment(&ham, &e).abs())
            .collect();
        let worst = if ends.len() == starts.len() { ends.iter().copied().fold(0.0, f64::max) } else { f64::INFINITY };
        items.push(Item::judged("", "", "retraction_endpoint_moment", worst, starts.len(), 1e-5));
    } else {
        notes.push("retraction endpoints not compared: control data not verified commutative".into());
    }

    let Some(Ok(gens)) = s.action.as_ref().map(action_generators) else {
        notes.push("no circle generator".into());
        return SuiteReport::new("momentum", tol, items, notes);
    };
    let box_pts = box_samples(s.ambient_dim, s.sample_radius, cfg.seed, IDENTITY_SAMPLES);
    let mut q_defect: f64 = 0.0;
    for z in &box_pts {
        let twice: Vec<f64> = z.iter().map(|c| 2.0 * c).collect();
        let (Ok(q), Ok(q2)) = (quadratic_moment(&gens, z), quadratic_moment(&gens, &twice)) else {
            q_defect = f64::INFINITY;
            continue;
        };
        q_defect = q.iter().zip(&q2).map(|(a, b)| (b - 4.0 * a).abs()).fold(q_defect, f64::max);
    }
    items.push(Item::judged("", "", "q_homogeneity", q_defect, box_pts.len(), 0.0));

    let beta = DMatrix::zeros(s.ambient_dim, s.ambient_dim);
    let cv = |z: &[f64]| cv_residual(&gens, &beta, z).unwrap_or(f64::INFINITY);
    let mut conical: f64 = 0.0;
    for z in &box_pts {
        let half: Vec<f64> = z.iter().map(|c| 0.5 * c).collect();
        conical = conical.max((cv(&half) - 0.25 * cv(z)).abs());
    }
    items.push(Item::judged("", "", "cv_conical_scaling", conical, box_pts.len(), 0.0));
    // (a, b, b, a) has |z_1| = |z_2| in exact arithmetic and in floating point.
    let exact_zeros: Vec<Vec<f64>> = box_samples(2, 1.0, cfg.seed, IDENTITY_SAMPLES)
        .into_iter()
        .map(|p| vec![p[0], p[1], p[1], p[0]])
        .filter(|z| cv(z) == 0.0)
        .collect();
    let on_zeros = exact_zeros.iter().map(|z| cv(&z.iter().map(|c| 0.5 * c).collect::<Vec<_>>())).fold(0.0, f64::max);
    items.push(Item::judged("", "", "cv_zero_set_conical", on_zeros, exact_zeros.len(), 0.0));
    SuiteReport::new("momentum", tol, items, notes)
}

/// Image, gap identity and weighted homogeneity of the dihedral Hilbert map,
/// and reduction of the verified control data.
fn hilbert_suite(cd: &ControlData, cfg: &RunConfig) -> SuiteReport {
    let tol = cfg.tolerances.verify;
    let model = match cfg.scenario.library_name() {
        Some("D3RED") => HilbertModel::d3(),
        name if uses_balanced_circle(name) => HilbertModel::balanced_circle(),
        _ => return SuiteReport::skipped("hilbert", tol, "scenario has no Hilbert model"),
    };
    let mut items = Vec::new();
    let mut notes = Vec::new();
    let (n, seed) = (cfg.samples, cfg.seed);
    match model.validate(IDENTITY_SAMPLES, seed) {
        Ok(()) => items.push(Item::judged("", "", "model_invariance", 0.0, IDENTITY_SAMPLES, 0.0)),
        Err(e) => {
            notes.push(e.to_string());
            items.push(Item::judged("", "", "model_invariance", f64::INFINITY, IDENTITY_SAMPLES, 0.0));
        }
    }
    if cfg.scenario.library_name() == Some("D3RED") {
        d3_items(&model, seed, &mut items, &mut notes);
    }
    match reduce_control_data(cd, &model) {
        Ok(nbhds) => {
            for nb in nbhds {
                match nb.check(n, seed) {
                    Ok(r) => {
                        let x = nb.stratum.as_str();
                        items.push(Item::judged(x, "", "reduced_composition", r.composition, r.samples, 1e-8));
                        items.push(Item::judged(x, "", "reduced_identity", r.identity, r.samples, 0.0));
                        items.push(Item::judged(x, "", "reduced_strata_changed", r.strata_changed as f64, r.samples, 0.0));
                        items.push(Item::judged(x, "", "reduced_homogeneity", r.homogeneity, r.samples, 1e-6));
                    }
                    Err(e) => {
                        notes.push(format!("{}: {e}", nb.stratum));
                        items.push(Item::judged(&nb.stratum, "", "reduced_check", f64::INFINITY, 1, 0.0));
                    }
                }
            }
        }
        Err(e) => {
            notes.push(e.to_string());
            items.push(Item::judged("", "", "reduction", f64::INFINITY, 1, 0.0));
        }
    }
    SuiteReport::new("hilbert", tol, items, notes)
}

fn d3_items(model: &HilbertModel, seed: u64, items: &mut Vec<Item>, notes: &mut Vec<String>) {
    let (s1, s2) = hilbert_d3(&[1.0, 0.0]);
    items.push(Item::judged("", "", "sigma_at_(1,0)", (s1 - 1.0).abs().max((s2 - 1.0).abs()), 1, 0.0));
    match d3_image_check(IDENTITY_SAMPLES, seed) {
        Ok(r) => {
            items.push(Item::judged("", "", "image_inequality", r.inequality, r.samples, 1e-9));
            items.push(Item::judged("", "", "gap_identity", r.identity, r.samples, 1e-9));
            items.push(Item::judged("", "", "boundary_misclassified", r.misclassified as f64, r.samples, 0.0));
        }
        Err(e) => {
            notes.push(e.to_string());
            items.push(Item::judged("", "", "image_check", f64::INFINITY, 1, 0.0));
        }
    }
    // Boundary image points `σ` of mirror rays, interior images of generic points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boundary = Vec::new();
    let mut interior = Vec::new();
    for _ in 0..IDENTITY_SAMPLES {
        let phi = rng.gen_range(0..6) as f64 * std::f64::consts::FRAC_PI_3;
        let r = rng.gen_range(0.05..1.5);
        let (a, b) = hilbert_d3(&[r * phi.cos(), r * phi.sin()]);
        boundary.push(vec![a, b]);
        let (a, b) = hilbert_d3(&[rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]);
        if b * b < a * a * a {
            interior.push(vec![a, b]);
        }
    }
    let gap = |y: &[f64]| y[1] * y[1] - y[0] * y[0] * y[0];
    let mut exact: f64 = 0.0;
    for y in &boundary {
        for t in [0.5f64, 0.25] {
            exact = exact.max((gap(&model.weighted_scale(t, y)) - t.powi(6) * gap(y)).abs());
        }
    }
    items.push(Item::judged("X1", "", "weighted_boundary_exact", exact, boundary.len(), 0.0));
    let grid = [0.25, 0.5, 0.75];
    let checks: [(&str, &[Vec<f64>], fn(&[f64]) -> f64); 3] = [
        ("weighted_boundary", &boundary, |y| (y[1] * y[1] - y[0].powi(3)).abs() / (1.0 + y[0].powi(3))),
        ("weighted_interior", &interior, |y| f64::from(!(y[1] * y[1] < y[0].powi(3)))),
        ("weighted_apex", &[vec![0.0, 0.0]], norm),
    ];
    for (name, pts, residual) in checks {
        match quasi_homog_check(model, pts, residual, &grid) {
            Ok(r) => items.push(Item::judged("", "", name, r.worst, r.samples, 1e-9)),
            Err(e) => {
                notes.push(e.to_string());
                items.push(Item::judged("", "", name, f64::INFINITY, 1, 0.0));
            }
        }
    }
}

/// `suite,lower,higher,property,residual,tol,samples,status`.
fn write_residuals(path: &Path, s: &SuiteReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(["suite", "lower", "higher", "property", "residual", "tol", "samples", "status"]).map_err(err)?;
    for i in &s.items {
        w.write_record([
            s.suite.as_str(),
            &i.lower,
            &i.higher,
            &i.property,
            &fmt_float(i.residual),
            &fmt_float(i.tol),
            &i.samples.to_string(),
            i.status.as_str(),
        ])
        .map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

/// `sample,t,x0..x{n-1},rho_<stratum>...,c_residual`; `ρ` is `inf` off the
/// tubular.
fn write_trajectories(path: &Path, cd: &ControlData, r: &RetractionReport) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::Io(e.to_string()))?;
    let err = |e: csv::Error| CliError::Io(e.to_string());
    let mut header = vec!["sample".to_string(), "t".to_string()];
    header.extend((0..cd.scenario.ambient_dim).map(|i| format!("x{i}")));
    header.extend(cd.scenario.strata.iter().map(|x| format!("rho_{}", x.id)));
    header.push("c_residual".into());
    w.write_record(&header).map_err(err)?;
    for row in &r.trajectories {
        let mut rec = vec![row.sample.to_string(), fmt_float(row.t)];
        rec.extend(row.point.iter().map(|&c| fmt_float(c)));
        rec.extend(row.rho.iter().map(|&c| fmt_float(c)));
        rec.push(fmt_float(row.c_residual));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush()?;
    debug_assert!(r.trajectories.len() == r.samples.saturating_sub(r.failed) * TIMES.len());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioRow {
    pub name: String,
    pub ambient_dim: usize,
    pub strata: usize,
    pub action: String,
    pub family: String,
}

pub fn scenario_rows() -> Vec<ScenarioRow> {
    library::SCENARIOS
        .iter()
        .filter_map(|name| library::lookup(name).ok())
        .map(|s| ScenarioRow {
            name: s.name.clone(),
            ambient_dim: s.ambient_dim,
            strata: s.strata.len(),
            action: action_label(s.action.as_ref()),
            family: s.family.clone(),
        })
        .collect()
}

/// The scenario table, as aligned text or as JSON.
pub fn list_scenarios(json: bool, color: bool) -> String {
    let rows = scenario_rows();
    if json {
        return serde_json::to_string_pretty(&rows).unwrap_or_default() + "\n";
    }
    let header = ["name", "dim", "strata", "action", "family"];
    let cells: Vec<[String; 5]> = rows
        .iter()
        .map(|r| [r.name.clone(), r.ambient_dim.to_string(), r.strata.to_string(), r.action.clone(), r.family.clone()])
        .collect();
    let mut widths = header.map(|h| h.chars().count());
    for c in &cells {
        for (w, s) in widths.iter_mut().zip(c) {
            *w = (*w).max(s.chars().count());
        }
    }
    let line = |c: &[String]| -> String {
        let mut l = String::new();
        for (i, (s, w)) in c.iter().zip(widths).enumerate() {
            if i + 1 == c.len() {
                l.push_str(s);
            } else {
                let _ = write!(l, "{s:<w$}  ");
            }
        }
        l
    };
    let head = line(&header.map(String::from));
    let mut out = if color { format!("\x1b[1m{head}\x1b[0m\n") } else { format!("{head}\n") };
    for c in &cells {
        out.push_str(&line(c));
        out.push('\n');
    }
    out
}

/// One line per suite: name, status, worst residual and tolerance.
pub fn summary(report: &RunReport) -> String {
    let mut out = String::new();
    if let Some(s) = &report.scenario {
        let _ = writeln!(out, "scenario {} ({})", s.name, s.family);
    }
    for s in &report.suites {
        let _ = writeln!(out, "{:<15} {:<12} worst {:.3e}", s.suite, s.status.as_str(), s.worst);
        for i in s.items.iter().filter(|i| i.status == Status::Failed) {
            let pair = match (i.lower.is_empty(), i.higher.is_empty()) {
                (true, _) => String::new(),
                (false, true) => format!("{} ", i.lower),
                (false, false) => format!("{}/{} ", i.lower, i.higher),
            };
            let _ = writeln!(out, "    {pair}{} residual {:.3e} > {:.1e}", i.property, i.residual, i.tol);
        }
        for n in &s.notes {
            let _ = writeln!(out, "    note: {n}");
        }
    }
    if let Some(e) = &report.error {
        let _ = writeln!(out, "error: {e}");
    }
    out
}

/// Writes `text` to stdout, ignoring a closed pipe.
pub fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

/// Resolves the output directory: `--out`, then the environment, then the
/// configuration.
pub fn output_dir(flag: Option<PathBuf>, cfg: &RunConfig) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)).unwrap_or_else(|| cfg.out.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_custom_blocks_parse() {
        let cfg = RunConfig::parse("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        let cfg = RunConfig::parse(r#"{"scenario": {"flag": 4}, "suites": ["adjusted"]}"#).unwrap();
        assert_eq!(cfg.scenario, ScenarioSpec::Custom(CustomScenario { flag: 4 }));
        assert_eq!(cfg.requested(), vec!["adjusted"]);
    }

    #[test]
    fn validation_errors() {
        for bad in [
            r#"{"scenario": "X"}"#,
            r#"{"scenario": {"flag": 9}}"#,
            r#"{"tolerances": {"verify": 0}}"#,
            r#"{"tolerances": {"retract": -1e-5}}"#,
            r#"{"samples": 0}"#,
            r#"{"suites": ["adjusted", "adjusted"]}"#,
            r#"{"suites": ["speed"]}"#,
            r#"{"flow": {"rel_tol": 0}}"#,
            r#"{"sede": 1}"#,
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn parse_errors_carry_the_line() {
        let Err(CliError::Config(m)) = RunConfig::parse("{\n  \"seed\": \"x\"\n}") else {
            panic!("expected a configuration error");
        };
        assert!(m.contains("line 2"), "{m}");
    }

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn listing_has_every_scenario() {
        let rows = scenario_rows();
        assert_eq!(rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), library::SCENARIOS);
        let plain = list_scenarios(false, false);
        assert_eq!(plain.lines().count(), 6);
        assert!(!plain.contains('\x1b'));
        assert!(list_scenarios(false, true).starts_with("\x1b[1m"));
        let json: Vec<serde_json::Value> = serde_json::from_str(&list_scenarios(true, false)).unwrap();
        assert_eq!(json.len(), 5);
        assert_eq!(json[3]["action"], "finite group of order 6");
    }

    #[test]
    fn output_dir_precedence() {
        let cfg = RunConfig { out: "cfg".into(), ..Default::default() };
        assert_eq!(output_dir(Some("flag".into()), &cfg), PathBuf::from("flag"));
    }

    #[test]
    fn balanced_zeros_are_exact_zeros_of_the_local_model() {
        let gens = action_generators(&GroupAction::Circle(crate::strata::CircleAction::new(vec![1, -1]))).unwrap();
        let beta = DMatrix::zeros(4, 4);
        for p in box_samples(2, 1.0, 7, 50) {
            let z = [p[0], p[1], p[1], p[0]];
            assert_eq!(cv_residual(&gens, &beta, &z).unwrap(), 0.0);
        }
    }
}
