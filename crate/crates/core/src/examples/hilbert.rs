//! Hilbert maps of linear group actions, the image of the dihedral quotient
//! `R²/D₃`, and control data pushed down to the quotient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::controldata::{ControlData, Status};
use crate::error::{GeomError, Result};
use crate::smoothcore::vecops::dist;
use crate::smoothcore::Point;
use crate::strata::{act, orbit_type, CircleAction, FiniteGroup, GroupAction, StratifiedScenario};
use crate::tubular::{sample_tubular, TubularData};

/// A real polynomial as a sum of `coefficient · Π x_i^{e_i}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polynomial {
    pub terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(terms: Vec<(f64, Vec<u32>)>) -> Self {
        Self { terms }
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, e)| c * e.iter().zip(p).map(|(&k, x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// The common total degree, if every term has the same one.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degs = self.terms.iter().map(|(_, e)| e.iter().sum::<u32>());
        let d = degs.next()?;
        degs.all(|k| k == d).then_some(d)
    }
}

/// Generators of the invariant ring of an action, assembled into the map
/// `σ: V → R^k`, with the weights `d̄` and the inequalities (`≥ 0`) cutting
/// out its image.
#[derive(Debug, Clone, Serialize)]
pub struct HilbertModel {
    pub name: String,
    pub generators: Vec<Polynomial>,
    pub weights: Vec<u32>,
    pub constraints: Vec<Polynomial>,
    #[serde(skip)]
    pub action: GroupAction,
}

impl HilbertModel {
    /// `σ = (x² + y², x³ − 3xy²)` for the dihedral group of order six, with
    /// image `{σ₁ ≥ 0, σ₂² ≤ σ₁³}`.
    pub fn d3() -> Self {
        Self {
            name: "D3".into(),
            generators: vec![
                Polynomial::new(vec![(1.0, vec![2, 0]), (1.0, vec![0, 2])]),
                Polynomial::new(vec![(1.0, vec![3, 0]), (-3.0, vec![1, 2])]),
            ],
            weights: vec![2, 3],
            constraints: vec![
                Polynomial::new(vec![(1.0, vec![1, 0])]),
                Polynomial::new(vec![(1.0, vec![3, 0]), (-1.0, vec![0, 2])]),
            ],
            action: GroupAction::Finite(FiniteGroup::dihedral3()),
        }
    }

    /// `σ = (|z₁|², |z₂|², Re z₁z₂, Im z₁z₂)` for the circle acting on `C²`
    /// with weights `(1, −1)`; the image is `σ₁, σ₂ ≥ 0`, `σ₁σ₂ = σ₃² + σ₄²`.
    pub fn balanced_circle() -> Self {
        let sq = |i: usize| {
            let mut e = vec![0; 4];
            e[i] = 2;
            e
        };
        let mono = |i: usize, j: usize| {
            let mut e = vec![0; 4];
            e[i] += 1;
            e[j] += 1;
            e
        };
        let var = |i: usize| {
            let mut e = vec![0; 4];
            e[i] = 1;
            e
        };
        Self {
            name: "circle(1,-1)".into(),
            generators: vec![
                Polynomial::new(vec![(1.0, sq(0)), (1.0, sq(1))]),
                Polynomial::new(vec![(1.0, sq(2)), (1.0, sq(3))]),
                Polynomial::new(vec![(1.0, mono(0, 2)), (-1.0, mono(1, 3))]),
                Polynomial::new(vec![(1.0, mono(0, 3)), (1.0, mono(1, 2))]),
            ],
            weights: vec![2, 2, 2, 2],
            constraints: vec![
                Polynomial::new(vec![(1.0, var(0))]),
                Polynomial::new(vec![(1.0, var(1))]),
                Polynomial::new(vec![(1.0, mono(0, 1)), (-1.0, sq(2)), (-1.0, sq(3))]),
            ],
            action: GroupAction::Circle(CircleAction::new(vec![1, -1])),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.action.dim()
    }

    /// `σ(p)`.
    pub fn map(&self, p: &[f64]) -> Point {
        self.generators.iter().map(|g| g.eval(p)).collect()
    }

    /// `(t^{d₁} y₁, …, t^{d_k} y_k)`.
    pub fn weighted_scale(&self, t: f64, y: &[f64]) -> Point {
        y.iter().zip(&self.weights).map(|(c, &d)| t.powi(d as i32) * c).collect()
    }

    /// Worst violation of the image inequalities at `y`.
    pub fn image_violation(&self, y: &[f64]) -> f64 {
        self.constraints.iter().map(|c| (-c.eval(y)).max(0.0)).fold(0.0, f64::max)
    }

    /// Checks that each generator is invariant under the test elements to
    /// `1e-10` on samples of the unit box, and homogeneous of its weight.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        for (i, (g, &d)) in self.generators.iter().zip(&self.weights).enumerate() {
            if g.homogeneous_degree() != Some(d) {
                return Err(GeomError::Precondition(format!(
                    "{}: generator {i} is not homogeneous of degree {d}",
                    self.name
                )));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let elements = self.action.test_elements();
        for _ in 0..samples {
            let p: Point = (0..self.ambient_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y = self.map(&p);
            for g in &elements {
                let gap = dist(&self.map(&act(g, &p)), &y);
                if gap > 1e-10 {
                    return Err(GeomError::EquivarianceDefect(format!(
                        "{}: σ moves by {gap:.3e} at {p:?}",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `(x² + y², x³ − 3xy²)`.
pub fn hilbert_d3(p: &[f64]) -> (f64, f64) {
    let (x, y) = (p[0], p[1]);
    (x * x + y * y, x * x * x - 3.0 * x * y * y)
}

/// `σ₁³ − σ₂² = y²(3x² − y²)²`: the gap to the boundary of the image.
pub fn d3_gap(p: &[f64]) -> f64 {
    let (x, y) = (p[0], p[1]);
    let m = 3.0 * x * x - y * y;
    y * y * m * m
}

/// Boundary test on the image: `σ₂² = σ₁³` up to `1e-10 (1 + σ₁³)`.
pub fn on_d3_boundary(s1: f64, s2: f64) -> bool {
    (s1 * s1 * s1 - s2 * s2).abs() <= 1e-10 * (1.0 + s1 * s1 * s1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D3ImageReport {
    pub samples: usize,
    pub mirror_samples: usize,
    /// Worst of `−σ₁` and `σ₂² − σ₁³`, relative to `1 + σ₁³`.
    pub inequality: f64,
    /// Worst `|σ₁³ − σ₂² − y²(3x² − y²)²| / (1 + σ₁³)`.
    pub identity: f64,
    /// Samples whose boundary test disagrees with their orbit type.
    pub misclassified: usize,
    pub passed: bool,
}

/// Samples half of the points on the mirror lines and half in the box
/// `[-1.5, 1.5]²`, and checks the image inequalities, the gap identity and
/// that the boundary is exactly the image of the mirrors.
pub fn d3_image_check(samples: usize, seed: u64) -> Result<D3ImageReport> {
    let action = GroupAction::Finite(FiniteGroup::dihedral3());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = D3ImageReport {
        samples,
        mirror_samples: 0,
        inequality: 0.0,
        identity: 0.0,
        misclassified: 0,
        passed: false,
    };
    for i in 0..samples {
        let p = if i % 2 == 0 {
            let phi = rng.gen_range(0..6) as f64 * std::f64::consts::FRAC_PI_3;
            let r = rng.gen_range(0.05..1.5);
            vec![r * phi.cos(), r * phi.sin()]
        } else {
            vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)]
        };
        let (s1, s2) = hilbert_d3(&p);
        let scale = 1.0 + s1 * s1 * s1;
        rep.inequality = rep.inequality.max(-s1).max((s2 * s2 - s1 * s1 * s1) / scale);
        rep.identity = rep.identity.max((s1 * s1 * s1 - s2 * s2 - d3_gap(&p)).abs() / scale);
        let mirror = !orbit_type(&action, &p)?.is_trivial();
        rep.mirror_samples += usize::from(mirror);
        if mirror != on_d3_boundary(s1, s2) {
            rep.misclassified += 1;
        }
    }
    rep.passed = rep.inequality <= 1e-10 && rep.identity <= 1e-9 && rep.misclassified == 0;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiHomogReport {
    pub samples: usize,
    /// Worst residual of the stratum predicate after weighted scaling.
    pub worst: f64,
    pub passed: bool,
}

/// Applies `y ↦ (t^{d_i} y_i)` for `t` in `t_grid` to image points of one
/// stratum and evaluates the stratum residual there.
pub fn quasi_homog_check(
    model: &HilbertModel,
    image_points: &[Point],
    residual: impl Fn(&[f64]) -> f64,
    t_grid: &[f64],
) -> Result<QuasiHomogReport> {
    if t_grid.iter().any(|t| !(*t > 0.0 && *t < 1.0)) {
        return Err(GeomError::Precondition("weighted scalings need t in (0, 1)".into()));
    }
    let mut worst: f64 = 0.0;
    for y in image_points {
        for &t in t_grid {
            worst = worst.max(residual(&model.weighted_scale(t, y)));
        }
    }
    Ok(QuasiHomogReport { samples: image_points.len(), worst, passed: worst <= 1e-9 })
}

/// A tubular neighbourhood pushed through the Hilbert chart:
/// `m̄^t(σ(p)) = σ(m^t p)` and `ρ̄(σ(p)) = ρ(p)`, evaluated on
/// representatives `p`.
#[derive(Debug, Clone)]
pub struct ReducedFiberedNbhd {
    pub stratum: String,
    pub model: HilbertModel,
    tubular: TubularData,
    scenario: StratifiedScenario,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ReducedReport {
    pub samples: usize,
    /// `max |m̄^t m̄^s − m̄^{ts}|`.
    pub composition: f64,
    /// `max |m̄^1 − id|`.
    pub identity: f64,
    /// Samples whose stratum changed under `m^t`, `t > 0`.
    pub strata_changed: usize,
    /// `max |ρ̄ m̄^t − t² ρ̄| / (t² ρ̄)`.
    pub homogeneity: f64,
    pub passed: bool,
}

impl ReducedFiberedNbhd {
    /// `σ(p)`.
    pub fn chart(&self, p: &[f64]) -> Point {
        self.model.map(p)
    }

    /// `m̄^t` at the image of the representative `p`.
    pub fn mult(&self, t: f64, p: &[f64]) -> Result<Point> {
        Ok(self.model.map(&self.tubular.mult(t, p)?))
    }

    /// `ρ̄` at the image of the representative `p`.
    pub fn rho(&self, p: &[f64]) -> Result<f64> {
        self.tubular.rho(p)
    }

    pub fn check(&self, samples: usize, seed: u64) -> Result<ReducedReport> {
        let pts = sample_tubular(&self.tubular, self.scenario.sample_radius, seed, samples, 400 * samples);
        let mut rep = ReducedReport { samples: pts.len(), ..Default::default() };
        for p in &pts {
            rep.identity = rep.identity.max(dist(&self.mult(1.0, p)?, &self.chart(p)));
            let r = self.rho(p)?;
            let home = self.scenario.locate(p);
            for t in [0.5, 2.0] {
                let q = self.tubular.mult(t, p)?;
                rep.strata_changed += usize::from(self.scenario.locate(&q) != home);
                rep.homogeneity = rep.homogeneity.max((self.tubular.rho(&q)? - t * t * r).abs() / (t * t * r));
                for s in [0.5, 2.0] {
                    let twice = self.model.map(&self.tubular.mult(t, &self.tubular.mult(s, p)?)?);
                    rep.composition = rep.composition.max(dist(&twice, &self.mult(t * s, p)?));
                }
            }
        }
        rep.passed = rep.samples > 0
            && rep.composition <= 1e-8
            && rep.identity == 0.0
            && rep.strata_changed == 0
            && rep.homogeneity <= 1e-6;
        Ok(rep)
    }
}

/// Pushes every non-open tubular of verified equivariant, commutative
/// control data through the Hilbert chart. Orbit pairs `(p, g·p)` are
/// sampled; their images under `m̄^t` must agree to `1e-7`.
pub fn reduce_control_data(cd: &ControlData, model: &HilbertModel) -> Result<Vec<ReducedFiberedNbhd>> {
    let flags = &cd.flags;
    if flags.equivariant.status != Status::Verified || flags.commutative.status != Status::Verified {
        return Err(GeomError::Precondition(
            "reduction needs control data verified equivariant and commutative".into(),
        ));
    }
    if cd.scenario.action.as_ref().map(GroupAction::dim) != Some(model.ambient_dim()) {
        return Err(GeomError::Precondition(format!("{} does not match the scenario action", model.name)));
    }
    let elements = match &model.action {
        GroupAction::Finite(g) => g.elements().to_vec(),
        GroupAction::Circle(_) => model.action.test_elements(),
    };
    let mut out = Vec::new();
    for (t, x) in cd.tubulars.iter().zip(&cd.scenario.strata) {
        if x.is_open() {
            continue;
        }
        for p in sample_tubular(t, cd.scenario.sample_radius, 7, 50, 20_000) {
            for g in &elements {
                let q = act(g, &p);
                if dist(&model.map(&p), &model.map(&q)) > 1e-10 {
                    continue;
                }
                for s in [0.0, 0.5, 2.0] {
                    let (a, b) = (model.map(&t.mult(s, &p)?), model.map(&t.mult(s, &q)?));
                    if dist(&a, &b) > 1e-7 {
                        return Err(GeomError::EquivarianceDefect(format!(
                            "{}: m^{s} of the orbit pair {p:?}, {q:?} lands on {a:?} and {b:?}",
                            x.id
                        )));
                    }
                }
            }
        }
        out.push(ReducedFiberedNbhd {
            stratum: x.id.clone(),
            model: model.clone(),
            tubular: t.clone(),
            scenario: cd.scenario.clone(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controldata::{build_commutative, verify_all, DEFAULT_TOL};
    use crate::strata::library;
    use crate::tubular::ClosureTubular;
    use std::collections::BTreeMap;

    /// Sparse polynomials in `x, y` with integer coefficients.
    type Poly = BTreeMap<(u32, u32), i64>;

    fn mul(a: &Poly, b: &Poly) -> Poly {
        let mut out = Poly::new();
        for (&(i, j), &c) in a {
            for (&(k, l), &d) in b {
                *out.entry((i + k, j + l)).or_default() += c * d;
            }
        }
        out.retain(|_, c| *c != 0);
        out
    }

    fn sub(a: &Poly, b: &Poly) -> Poly {
        let mut out = a.clone();
        for (&k, &c) in b {
            *out.entry(k).or_default() -= c;
        }
        out.retain(|_, c| *c != 0);
        out
    }

    #[test]
    fn gap_identity_holds_symbolically() {
        let s1: Poly = [((2, 0), 1), ((0, 2), 1)].into();
        let s2: Poly = [((3, 0), 1), ((1, 2), -3)].into();
        let m: Poly = [((2, 0), 3), ((0, 2), -1)].into();
        let y2: Poly = [((0, 2), 1)].into();
        let lhs = sub(&mul(&mul(&s1, &s1), &s1), &mul(&s2, &s2));
        let rhs = mul(&y2, &mul(&m, &m));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn hilbert_d3_examples() {
        assert_eq!(hilbert_d3(&[1.0, 0.0]), (1.0, 1.0));
        assert_eq!(hilbert_d3(&[0.0, 1.0]), (1.0, 0.0));
        let (a, b) = hilbert_d3(&[-0.5, 3f64.sqrt() / 2.0]);
        assert!((a - 1.0).abs() < 1e-15 && (b - 1.0).abs() < 1e-15);
        assert_eq!(hilbert_d3(&[1.0, 0.0]), {
            let y = HilbertModel::d3().map(&[1.0, 0.0]);
            (y[0], y[1])
        });
    }

    #[test]
    fn image_examples() {
        assert!(on_d3_boundary(1.0, 1.0));
        let (a, b) = hilbert_d3(&[0.0, 1.0]);
        assert!(!on_d3_boundary(a, b));
        assert_eq!(d3_gap(&[0.0, 1.0]), 1.0);
        let (a, b) = hilbert_d3(&[0.3, 0.7]);
        assert!(b * b < a * a * a);
    }

    #[test]
    fn models_are_invariant_and_weighted() {
        HilbertModel::d3().validate(200, 1).unwrap();
        HilbertModel::balanced_circle().validate(200, 1).unwrap();
        let mut bad = HilbertModel::d3();
        bad.weights = vec![2, 2];
        assert!(bad.validate(10, 1).is_err());
    }

    #[test]
    fn circle_image_satisfies_its_relation() {
        let m = HilbertModel::balanced_circle();
        for p in [[0.3, -0.2, 0.9, 0.1], [1.0, 0.0, 0.0, 0.0]] {
            assert!(m.image_violation(&m.map(&p)) < 1e-15);
        }
    }

    #[test]
    fn image_check_passes() {
        let r = d3_image_check(1000, 42).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.mirror_samples >= 400);
    }

    #[test]
    fn weighted_scaling_preserves_image_strata() {
        let m = HilbertModel::d3();
        let grid = [0.25, 0.5, 0.75];
        let boundary: Vec<Point> = [[1.0, 0.0], [-0.4, 0.0], [0.5, 0.5 * 3f64.sqrt()]].iter().map(|p| m.map(p)).collect();
        let r = quasi_homog_check(&m, &boundary, |y| (y[1] * y[1] - y[0].powi(3)).abs() / (1.0 + y[0].powi(3)), &grid).unwrap();
        assert!(r.passed, "{r:?}");
        let apex = quasi_homog_check(&m, &[vec![0.0, 0.0]], |y| y[0].abs() + y[1].abs(), &grid).unwrap();
        assert_eq!(apex.worst, 0.0);
        let inside = m.map(&[0.3, 0.7]);
        let r = quasi_homog_check(&m, &[inside], |y| f64::from(y[1] * y[1] >= y[0].powi(3)), &[0.5]).unwrap();
        assert_eq!(r.worst, 0.0);
        assert!(quasi_homog_check(&m, &[], |_| 0.0, &[1.0]).is_err());
    }

    fn verified(name: &str) -> ControlData {
        let mut cd = build_commutative(&library::lookup(name).unwrap()).unwrap();
        verify_all(&mut cd, 60, 42, DEFAULT_TOL);
        cd
    }

    #[test]
    fn d3_radial_data_reduces_to_weighted_scaling() {
        let cd = verified("D3RED");
        let reduced = reduce_control_data(&cd, &HilbertModel::d3()).unwrap();
        assert_eq!(reduced.len(), 2);
        for r in &reduced {
            let rep = r.check(50, 3).unwrap();
            assert!(rep.passed, "{}: {rep:?}", r.stratum);
        }
        // Near the apex the upstairs data is `t·p` with `ρ = |p|²`.
        let x0 = &reduced[0];
        let p = [0.1, -0.05];
        let y = x0.chart(&p);
        let w = x0.mult(0.5, &p).unwrap();
        let expect = HilbertModel::d3().weighted_scale(0.5, &y);
        assert!(dist(&w, &expect) < 1e-15);
        assert!((x0.rho(&p).unwrap() - y[0]).abs() < 1e-15);
    }

    #[test]
    fn circle_data_reduces() {
        let cd = verified("MOMZERO");
        for r in reduce_control_data(&cd, &HilbertModel::balanced_circle()).unwrap() {
            let rep = r.check(40, 3).unwrap();
            assert!(rep.passed, "{}: {rep:?}", r.stratum);
        }
    }

    #[test]
    fn non_equivariant_data_is_a_defect() {
        let mut cd = verified("D3RED");
        let skew = ClosureTubular::new(
            "skew",
            2,
            |_| true,
            |p| p[0] * p[0] + p[1] * p[1],
            |t, p| Some(vec![t * p[0], t * t * p[1]]),
            |p| vec![p[0], 2.0 * p[1]],
        );
        cd.tubulars[0] = cd.tubulars[0].with_model(std::sync::Arc::new(skew));
        let err = reduce_control_data(&cd, &HilbertModel::d3()).unwrap_err();
        assert!(matches!(err, GeomError::EquivarianceDefect(_)), "{err:?}");
    }

    #[test]
    fn unverified_data_is_rejected() {
        let cd = build_commutative(&library::lookup("D3RED").unwrap()).unwrap();
        assert!(reduce_control_data(&cd, &HilbertModel::d3()).is_err());
    }
}
