use std::sync::OnceLock;

use proptest::prelude::*;

use stratcontrol::cli::{fmt_float, RunConfig, Tolerances};
use stratcontrol::controldata::{build_commutative, conjugation_profile, verify_all, ControlData, DEFAULT_TOL};
use stratcontrol::examples::momentum::action_generators;
use stratcontrol::examples::{d3_gap, hilbert_d3, moment, quadratic_moment, HilbertModel, TorusHamiltonian};
use stratcontrol::retract::{build_homotopy, Homotopy};
use stratcontrol::smoothcore::vecops::{dist, norm};
use stratcontrol::smoothcore::{bump, flow, partition_of_unity, smooth_step, BumpSpec, FlowOptions, VectorField};
use stratcontrol::strata::{act, library, CircleAction, FiniteGroup, GroupAction};

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n)
}

fn cone() -> &'static (ControlData, Homotopy) {
    static CONE: OnceLock<(ControlData, Homotopy)> = OnceLock::new();
    CONE.get_or_init(|| {
        let mut cd = build_commutative(&library::lookup("CONE2").unwrap()).unwrap();
        verify_all(&mut cd, 60, 42, DEFAULT_TOL);
        let h = build_homotopy(&cd).unwrap();
        (cd, h)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bump_is_monotone_with_fixed_ends(a in 0.05f64..2.0, w in 0.05f64..2.0, s in 0.0f64..5.0, d in 0.0f64..1.0) {
        let spec = BumpSpec::new(a, a + w).unwrap();
        prop_assert_eq!(bump(&spec, a).unwrap(), 1.0);
        prop_assert_eq!(bump(&spec, a + w).unwrap(), 0.0);
        let (lo, hi) = (bump(&spec, s).unwrap(), bump(&spec, s + d).unwrap());
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(lo >= hi);
    }

    #[test]
    fn smooth_step_is_a_monotone_step(s in -0.5f64..1.5, d in 0.0f64..1.0) {
        let (lo, hi) = (smooth_step(s), smooth_step(s + d));
        prop_assert!((0.0..=1.0).contains(&lo) && lo <= hi);
        if s <= 0.1 { prop_assert_eq!(lo, 0.0); }
        if s >= 0.9 { prop_assert_eq!(lo, 1.0); }
    }

    #[test]
    fn euler_flow_is_a_semigroup(p in point(3), s in 0.0f64..1.5, t in 0.0f64..1.5) {
        let e = VectorField::euler(3);
        let opts = FlowOptions::default();
        let two = flow(&e, &flow(&e, &p, s, &opts).unwrap(), t, &opts).unwrap();
        let one = flow(&e, &p, s + t, &opts).unwrap();
        prop_assert!(dist(&two, &one) <= 1e-6 * (1.0 + norm(&p)));
    }

    #[test]
    fn partition_weights_sum_to_one(p in point(2)) {
        let covers = vec![(vec![0.0, 0.0], 1.6), (vec![0.8, 0.0], 1.0), (vec![-0.5, 0.6], 0.9)];
        let phis = partition_of_unity(covers.clone()).unwrap();
        let w: Vec<f64> = phis.iter().map(|f| f.eval(&p).unwrap()).collect();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (wi, (c, r)) in w.iter().zip(&covers) {
            if dist(&p, c) >= *r { prop_assert_eq!(*wi, 0.0); }
        }
    }

    #[test]
    fn moment_is_invariant_and_homogeneous(z in point(4), theta in 0.0f64..6.3, t in 0.1f64..3.0, c in -1.0f64..1.0) {
        let ham = TorusHamiltonian::new(vec![1, -1], c);
        let g = CircleAction::new(vec![1, -1]).matrix(theta);
        prop_assert!((moment(&ham, &act(&g, &z)) - moment(&ham, &z)).abs() <= 1e-12);
        let tz: Vec<f64> = z.iter().map(|x| t * x).collect();
        let expected = t * t * moment(&ham, &z) + (t * t - 1.0) * c;
        prop_assert!((moment(&ham, &tz) - expected).abs() <= 1e-12 * (1.0 + t * t));
    }

    #[test]
    fn local_model_is_exactly_quadratic(z in point(4)) {
        let gens = action_generators(&GroupAction::Circle(CircleAction::new(vec![1, -1]))).unwrap();
        let twice: Vec<f64> = z.iter().map(|x| 2.0 * x).collect();
        let (q, q2) = (quadratic_moment(&gens, &z).unwrap(), quadratic_moment(&gens, &twice).unwrap());
        prop_assert_eq!(q2[0], 4.0 * q[0]);
    }

    #[test]
    fn dihedral_invariants_and_gap(p in point(2)) {
        let (s1, s2) = hilbert_d3(&p);
        let scale = 1.0 + s1.powi(3);
        prop_assert!(((s1.powi(3) - s2 * s2) - d3_gap(&p)).abs() <= 1e-9 * scale);
        prop_assert!(s2 * s2 <= s1.powi(3) + 1e-12 * scale);
        for g in FiniteGroup::dihedral3().elements() {
            let (g1, g2) = hilbert_d3(&act(g, &p));
            prop_assert!((g1 - s1).abs() <= 1e-10 && (g2 - s2).abs() <= 1e-10);
        }
    }

    #[test]
    fn weighted_scaling_is_exact_on_the_cusp(r in 0.05f64..1.5, k in 0usize..6, e in 1i32..5) {
        let phi = k as f64 * std::f64::consts::FRAC_PI_3;
        let (a, b) = hilbert_d3(&[r * phi.cos(), r * phi.sin()]);
        let t = 0.5f64.powi(e);
        let y = HilbertModel::d3().weighted_scale(t, &[a, b]);
        prop_assert_eq!(y[1] * y[1] - y[0].powi(3), t.powi(6) * (b * b - a.powi(3)));
    }

    #[test]
    fn conjugation_profile_is_increasing_and_square_root_near_zero(t in 0.0f64..2.0, d in 0.0f64..1.0) {
        prop_assert!(conjugation_profile(t) <= conjugation_profile(t + d));
        if t <= 0.5 { prop_assert_eq!(conjugation_profile(t), t.sqrt()); }
    }

    #[test]
    fn nonpositive_tolerances_are_rejected(v in -1.0f64..=0.0) {
        let cfg = RunConfig { tolerances: Tolerances { verify: v, retract: 1e-5 }, ..Default::default() };
        prop_assert!(cfg.validate().is_err());
    }

    #[test]
    fn floats_round_trip_through_reports(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        prop_assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cone_tubulars_are_homogeneous(v in point(3)) {
        let (cd, _) = cone();
        for tub in &cd.tubulars {
            if !tub.contains(&v) {
                continue;
            }
            prop_assert_eq!(tub.mult(1.0, &v).unwrap(), v.clone());
            let r = tub.rho(&v).unwrap();
            // The shrunk distance overflows towards the rim of the band.
            if !(r < 1e3) {
                continue;
            }
            for t in [0.25, 0.5, 2.0] {
                if let Ok(w) = tub.mult(t, &v) {
                    let rt = tub.rho(&w).unwrap();
                    if !(rt < 1e3) {
                        continue;
                    }
                    prop_assert!((rt - t * t * r).abs() <= 1e-6 * (t * t * r).max(1e-300));
                }
            }
        }
    }

    #[test]
    fn homotopy_starts_at_the_identity(v in point(3)) {
        let (_, h) = cone();
        prop_assert_eq!(h.at(0.0, &v).unwrap(), v);
    }
}
