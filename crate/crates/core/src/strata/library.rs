//! Built-in scenarios.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{
    CircleAction, ConeChart, ConicalChart, FiniteGroup, FlagChart, GroupAction, LinearChart,
    StratifiedScenario, Stratum,
};
use crate::error::{GeomError, Result};
use crate::examples::momentum::{crit_residual, TorusHamiltonian};
use crate::smoothcore::dual::Dual;
use crate::smoothcore::Point;

/// Names of the built-in scenarios, in listing order.
pub const SCENARIOS: [&str; 5] = ["FLAG3", "CONE2", "MOMZERO", "D3RED", "CRIT11"];

/// Convenient-cutoff constant for point strata and flag strata.
const DELTA_WIDE: f64 = 3.0;
/// Cone strata: the fiber coordinate lives in `(-1, 1)`.
const DELTA_CONE: f64 = 1.2;
/// Mirror rays: the sector charts have `|fiber|² < 1/3`.
const DELTA_RAY: f64 = 0.45;

pub fn lookup(name: &str) -> Result<StratifiedScenario> {
    match name {
        "FLAG3" => flag(3),
        "CONE2" => cone2(),
        "MOMZERO" => momzero(),
        "D3RED" => d3red(),
        "CRIT11" => crit11(),
        other => Err(GeomError::Precondition(format!("unknown scenario {other:?}"))),
    }
}

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let r = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        r
    } else {
        -r
    }
}

fn origin(n: usize) -> Stratum {
    Stratum::new("X0", 0, n, |p: &[Dual]| p.to_vec(), |_| true, move |_| vec![0.0; n])
        .with_charts(vec![ConicalChart::new(vec![0.0; n], LinearChart::identity(n, 0))])
        .with_delta(DELTA_WIDE)
}

fn unit_vec(n: usize, i: usize, s: f64) -> Point {
    let mut e = vec![0.0; n];
    e[i] = s;
    e
}

/// The coordinate flag in `R^n`: `X_k = span(e_1..e_k) \ span(e_1..e_{k-1})`
/// for `k < n`, ordered by dimension.
pub fn flag(n: usize) -> Result<StratifiedScenario> {
    if !(2..=6).contains(&n) {
        return Err(GeomError::Precondition(format!("flag scenarios need 2 ≤ n ≤ 6, got {n}")));
    }
    let mut strata = vec![origin(n)];
    for k in 1..n {
        let charts = [1.0, -1.0]
            .iter()
            .map(|&s| ConicalChart::new(unit_vec(n, k - 1, s), FlagChart::coordinate(n, k, s).nested()))
            .collect();
        strata.push(
            Stratum::new(
                format!("X{k}"),
                k,
                n,
                move |p: &[Dual]| p[k..].to_vec(),
                move |p| p[k - 1] != 0.0,
                move |rng| {
                    let mut p = vec![0.0; n];
                    for c in p.iter_mut().take(k - 1) {
                        *c = rng.gen_range(-1.5..1.5);
                    }
                    p[k - 1] = signed(rng, 0.2, 1.5);
                    p
                },
            )
            .with_charts(charts)
            .with_delta(DELTA_WIDE),
        );
    }
    let ids: Vec<String> = strata.iter().map(|x| x.id.clone()).collect();
    let mut order = Vec::new();
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            order.push((ids[i].as_str(), ids[j].as_str()));
        }
    }
    let name = if n == 3 { "FLAG3".to_string() } else { format!("FLAG{n}") };
    StratifiedScenario::new(
        name,
        "coordinate flag of linear strata",
        n,
        strata,
        &order,
        None,
        1.0,
    )
}

fn cone2() -> Result<StratifiedScenario> {
    let charts = [1.0, -1.0]
        .iter()
        .map(|&s| ConicalChart::new(vec![1.0, 0.0, s], ConeChart::new(vec![0, 1], vec![2], 1.0, s)))
        .collect();
    let cone = Stratum::new(
        "X1",
        2,
        3,
        |p: &[Dual]| vec![p[0] * p[0] + p[1] * p[1] - p[2] * p[2]],
        |p| p.iter().any(|&c| c != 0.0),
        |rng| {
            let z = signed(rng, 0.2, 1.5);
            let phi = rng.gen_range(0.0..2.0 * PI);
            vec![z.abs() * phi.cos(), z.abs() * phi.sin(), z]
        },
    )
    .with_charts(charts)
    .with_delta(DELTA_CONE);
    StratifiedScenario::new(
        "CONE2",
        "quadratic cone with its vertex",
        3,
        vec![origin(3), cone],
        &[("X0", "X1")],
        None,
        1.0,
    )
}

fn zero_level(ham: TorusHamiltonian) -> Stratum {
    let chart = ConicalChart::new(
        vec![1.0, 0.0, 1.0, 0.0],
        ConeChart::new(vec![0, 1], vec![2, 3], 1.0, 1.0),
    );
    Stratum::new(
        "X1",
        3,
        4,
        move |p: &[Dual]| vec![ham.moment_dual(p)],
        |p| p.iter().any(|&c| c != 0.0),
        |rng| {
            let r = rng.gen_range(0.2..1.2);
            let (a, b) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
            vec![r * a.cos(), r * a.sin(), r * b.cos(), r * b.sin()]
        },
    )
    .with_charts(vec![chart])
    .with_delta(DELTA_CONE)
}

fn balanced_circle() -> TorusHamiltonian {
    TorusHamiltonian::new(vec![1, -1], 0.0)
}

fn momzero() -> Result<StratifiedScenario> {
    let ham = balanced_circle();
    let action = GroupAction::Circle(CircleAction::new(ham.weights().to_vec()));
    StratifiedScenario::new(
        "MOMZERO",
        "zero level of a balanced circle momentum map",
        4,
        vec![origin(4), zero_level(ham)],
        &[("X0", "X1")],
        Some(action),
        1.0,
    )
}

fn crit11() -> Result<StratifiedScenario> {
    let ham = balanced_circle();
    let action = GroupAction::Circle(CircleAction::new(ham.weights().to_vec()));
    let crit = ham.clone();
    let top = zero_level(ham).with_membership(move |p| crit_residual(&crit, p), 1e-10);
    StratifiedScenario::new(
        "CRIT11",
        "critical set of the squared balanced circle momentum map",
        4,
        vec![origin(4), top],
        &[("X0", "X1")],
        Some(action),
        1.0,
    )
}

/// `y (3x² - y²)`, vanishing exactly on the six mirror rays of `D₃`.
pub fn mirror_product<T>(x: T, y: T) -> T
where
    T: Copy + std::ops::Mul<Output = T> + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
{
    y * (x * x * 3.0 - y * y)
}

fn rotation(angle: f64) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn d3red() -> Result<StratifiedScenario> {
    let rays: Vec<ConicalChart> = (0..6)
        .map(|k| {
            let phi = k as f64 * PI / 3.0;
            ConicalChart::new(
                vec![phi.cos(), phi.sin()],
                FlagChart::new(rotation(-phi), 1, 1.0).with_fiber_bound(1.0 / 3.0).nested(),
            )
        })
        .collect();
    let mirrors = Stratum::new(
        "X1",
        1,
        2,
        |p: &[Dual]| vec![mirror_product(p[0], p[1])],
        |p| p[0] != 0.0 || p[1] != 0.0,
        |rng| {
            let k = rng.gen_range(0..6) as f64;
            let r = rng.gen_range(0.2..1.5);
            let phi = k * PI / 3.0;
            vec![r * phi.cos(), r * phi.sin()]
        },
    )
    .with_charts(rays)
    .with_delta(DELTA_RAY);
    let open = Stratum::new(
        "X2",
        2,
        2,
        |_: &[Dual]| Vec::new(),
        |p| mirror_product(p[0], p[1]) != 0.0,
        |rng| loop {
            let p = vec![rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)];
            if mirror_product(p[0], p[1]).abs() > 1e-3 {
                return p;
            }
        },
    )
    .with_charts(vec![ConicalChart::new(vec![0.5, 0.2], LinearChart::identity(2, 2))]);
    StratifiedScenario::new(
        "D3RED",
        "dihedral group of order six acting on the plane",
        2,
        vec![origin(2).with_delta(DELTA_WIDE), mirrors, open],
        &[("X0", "X1"), ("X0", "X2"), ("X1", "X2")],
        Some(GroupAction::Finite(FiniteGroup::dihedral3())),
        1.0,
    )
}
