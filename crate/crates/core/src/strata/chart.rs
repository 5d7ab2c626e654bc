//! Conical charts `θ: U → R^k × R^{n-k}` and the concrete chart families
//! used by the scenario library.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::smoothcore::dual::{self, Dual};
use crate::smoothcore::field::unit;
use crate::smoothcore::vecops::norm_sq;
use crate::smoothcore::Point;

/// A diffeomorphism onto its image splitting coordinates as
/// `(tangential ∈ R^k, fiber ∈ R^{n-k})`.
pub trait ChartMap: Send + Sync + fmt::Debug {
    fn ambient_dim(&self) -> usize;
    /// Number of tangential coordinates `k`.
    fn split(&self) -> usize;
    /// Whether `p` lies in the chart domain.
    fn contains(&self, p: &[f64]) -> bool;
    /// `θ`, written over dual numbers so that its Jacobian is exact.
    fn forward(&self, p: &[Dual]) -> Vec<Dual>;
    /// `θ⁻¹(q)`; `hint` is a domain point near the answer.
    fn inverse(&self, q: &[f64], hint: &[f64]) -> Option<Point>;
}

/// A chart together with its centre and an optional cover ball used when
/// several charts are patched by a partition of unity.
#[derive(Clone)]
pub struct ConicalChart {
    pub center: Point,
    map: Arc<dyn ChartMap>,
    pub cover: Option<(Point, f64)>,
}

impl fmt::Debug for ConicalChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConicalChart")
            .field("center", &self.center)
            .field("map", &self.map)
            .finish()
    }
}

impl ConicalChart {
    pub fn new(center: Point, map: impl ChartMap + 'static) -> Self {
        Self { center, map: Arc::new(map), cover: None }
    }

    pub fn from_arc(center: Point, map: Arc<dyn ChartMap>) -> Self {
        Self { center, map, cover: None }
    }

    pub fn with_cover(mut self, center: Point, radius: f64) -> Self {
        self.cover = Some((center, radius));
        self
    }

    pub fn map(&self) -> &Arc<dyn ChartMap> {
        &self.map
    }

    pub fn ambient_dim(&self) -> usize {
        self.map.ambient_dim()
    }

    pub fn split(&self) -> usize {
        self.map.split()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        self.map.contains(p) && self.cover.as_ref().is_none_or(|(c, r)| {
            crate::smoothcore::vecops::dist(p, c) < *r
        })
    }

    pub fn theta(&self, p: &[f64]) -> Option<Point> {
        self.contains(p)
            .then(|| self.map.forward(&dual::constants(p)).iter().map(|d| d.re).collect())
    }

    pub fn theta_inv(&self, q: &[f64], hint: &[f64]) -> Option<Point> {
        self.map.inverse(q, hint)
    }

    /// `Dθ(p)`.
    pub fn jacobian(&self, p: &[f64]) -> Option<DMatrix<f64>> {
        if !self.contains(p) {
            return None;
        }
        let n = self.ambient_dim();
        let mut j = DMatrix::zeros(n, n);
        for c in 0..n {
            let col = self.map.forward(&dual::seed(p, &unit(n, c)));
            for (r, d) in col.iter().enumerate() {
                j[(r, c)] = d.eps;
            }
        }
        Some(j)
    }

    /// `|y|²`, the squared fiber coordinates of `θ(p)`.
    pub fn fiber_norm_sq(&self, p: &[f64]) -> Option<f64> {
        let q = self.theta(p)?;
        Some(norm_sq(&q[self.split()..]))
    }

    /// The Euler field of the chart, `Dθ(p)⁻¹ · (0, y)`.
    pub fn euler(&self, p: &[f64]) -> Option<Point> {
        let k = self.split();
        let n = self.ambient_dim();
        if k == n {
            return self.contains(p).then(|| vec![0.0; n]);
        }
        let q = self.theta(p)?;
        let mut rhs = DVector::zeros(n);
        for i in k..n {
            rhs[i] = q[i];
        }
        let j = self.jacobian(p)?;
        j.lu().solve(&rhs).map(|v| v.as_slice().to_vec())
    }

    /// `θ⁻¹(x, t·y)`: the multiplication of the chart's Euler field.
    pub fn scale_fiber(&self, p: &[f64], t: f64) -> Option<Point> {
        let mut q = self.theta(p)?;
        let k = self.split();
        for c in &mut q[k..] {
            *c *= t;
        }
        self.map.inverse(&q, p)
    }

    /// `θ⁻¹(x, 0)`.
    pub fn project(&self, p: &[f64]) -> Option<Point> {
        self.scale_fiber(p, 0.0)
    }
}

/// An affine chart `θ(p) = A (p - c)`.
#[derive(Debug, Clone)]
pub struct LinearChart {
    a: DMatrix<f64>,
    a_inv: DMatrix<f64>,
    center: Point,
    k: usize,
}

impl LinearChart {
    pub fn new(a: DMatrix<f64>, center: Point, k: usize) -> Result<Self> {
        let a_inv = a
            .clone()
            .try_inverse()
            .ok_or_else(|| GeomError::Precondition("linear chart matrix is singular".into()))?;
        Ok(Self { a, a_inv, center, k })
    }

    pub fn identity(n: usize, k: usize) -> Self {
        Self::new(DMatrix::identity(n, n), vec![0.0; n], k).expect("identity is invertible")
    }

    pub fn translated(center: Point, k: usize) -> Self {
        let n = center.len();
        Self::new(DMatrix::identity(n, n), center, k).expect("identity is invertible")
    }
}

impl ChartMap for LinearChart {
    fn ambient_dim(&self) -> usize {
        self.center.len()
    }

    fn split(&self) -> usize {
        self.k
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.center.len()
    }

    fn forward(&self, p: &[Dual]) -> Vec<Dual> {
        let n = self.center.len();
        (0..n)
            .map(|r| {
                (0..n).fold(Dual::constant(0.0), |acc, c| {
                    acc + (p[c] - self.center[c]) * self.a[(r, c)]
                })
            })
            .collect()
    }

    fn inverse(&self, q: &[f64], _hint: &[f64]) -> Option<Point> {
        let v = &self.a_inv * DVector::from_column_slice(q);
        Some(v.iter().zip(&self.center).map(|(a, c)| a + c).collect())
    }
}

/// Half-space chart for the stratum `{q_{k+1} = … = q_n = 0, q_k ≠ 0}` of a
/// coordinate flag, in rotated coordinates `q = Q p`:
/// `θ(p) = (q_1, …, q_k, q_{k+1}/q_k, …, q_n/q_k)` on `sign·q_k > 0`.
#[derive(Debug, Clone)]
pub struct FlagChart {
    q: DMatrix<f64>,
    k: usize,
    sign: f64,
    fiber_bound_sq: Option<f64>,
    nested: bool,
}

impl FlagChart {
    pub fn new(q: DMatrix<f64>, k: usize, sign: f64) -> Self {
        assert!(k >= 1 && k <= q.nrows(), "flag chart needs 1 ≤ k ≤ n");
        Self { q, k, sign: sign.signum(), fiber_bound_sq: None, nested: false }
    }

    pub fn coordinate(n: usize, k: usize, sign: f64) -> Self {
        Self::new(DMatrix::identity(n, n), k, sign)
    }

    /// Restricts the domain to `|fiber|² < bound`.
    pub fn with_fiber_bound(mut self, bound: f64) -> Self {
        self.fiber_bound_sq = Some(bound);
        self
    }

    /// Replaces the tangential block by `(q_1, …, q_{k-1}, q_k² + … + q_n²)`.
    /// This is the chart adapted to the lower strata of the flag, written in
    /// closed form.
    pub fn nested(mut self) -> Self {
        self.nested = true;
        self
    }

    fn rotate(&self, p: &[f64]) -> Point {
        (&self.q * DVector::from_column_slice(p)).as_slice().to_vec()
    }
}

impl ChartMap for FlagChart {
    fn ambient_dim(&self) -> usize {
        self.q.nrows()
    }

    fn split(&self) -> usize {
        self.k
    }

    fn contains(&self, p: &[f64]) -> bool {
        let q = self.rotate(p);
        let pivot = q[self.k - 1];
        if self.sign * pivot <= 0.0 {
            return false;
        }
        match self.fiber_bound_sq {
            Some(b) => q[self.k..].iter().map(|c| (c / pivot).powi(2)).sum::<f64>() < b,
            None => true,
        }
    }

    fn forward(&self, p: &[Dual]) -> Vec<Dual> {
        let n = self.ambient_dim();
        let q: Vec<Dual> = (0..n)
            .map(|r| (0..n).fold(Dual::constant(0.0), |acc, c| acc + p[c] * self.q[(r, c)]))
            .collect();
        let pivot = q[self.k - 1];
        let mut out = q[..self.k].to_vec();
        if self.nested {
            out[self.k - 1] = dual::norm_sq(&q[self.k - 1..]);
        }
        out.extend(q[self.k..].iter().map(|&c| c / pivot));
        out
    }

    fn inverse(&self, x: &[f64], _hint: &[f64]) -> Option<Point> {
        let pivot = if self.nested {
            let s = x[self.k - 1];
            let w2 = norm_sq(&x[self.k..]);
            if !(s > 0.0) {
                return None;
            }
            self.sign * (s / (1.0 + w2)).sqrt()
        } else {
            x[self.k - 1]
        };
        if self.sign * pivot <= 0.0 {
            return None;
        }
        let mut q = x[..self.k].to_vec();
        q[self.k - 1] = pivot;
        q.extend(x[self.k..].iter().map(|c| c * pivot));
        let p = self.q.transpose() * DVector::from_vec(q);
        Some(p.as_slice().to_vec())
    }
}

/// Chart around the quadric cone `{|A|² = |B|²}` for a splitting of the
/// coordinates into blocks `A`, `B` of size 1 or 2:
/// `θ = (|p|², angles of the 2-blocks, (|A|² - |B|²)/|p|²)`.
/// One-dimensional blocks contribute a fixed sign instead of an angle.
#[derive(Debug, Clone)]
pub struct ConeChart {
    a: Vec<usize>,
    b: Vec<usize>,
    sign_a: f64,
    sign_b: f64,
}

impl ConeChart {
    pub fn new(a: Vec<usize>, b: Vec<usize>, sign_a: f64, sign_b: f64) -> Self {
        assert!(
            (1..=2).contains(&a.len()) && (1..=2).contains(&b.len()),
            "cone blocks have size 1 or 2"
        );
        Self { a, b, sign_a: sign_a.signum(), sign_b: sign_b.signum() }
    }

    fn block_ok(idx: &[usize], sign: f64, p: &[f64]) -> bool {
        match idx {
            [i] => sign * p[*i] > 0.0,
            [i, j] => p[*i] * p[*i] + p[*j] * p[*j] > 0.0,
            _ => false,
        }
    }
}

impl ChartMap for ConeChart {
    fn ambient_dim(&self) -> usize {
        self.a.len() + self.b.len()
    }

    fn split(&self) -> usize {
        self.ambient_dim() - 1
    }

    fn contains(&self, p: &[f64]) -> bool {
        Self::block_ok(&self.a, self.sign_a, p) && Self::block_ok(&self.b, self.sign_b, p)
    }

    fn forward(&self, p: &[Dual]) -> Vec<Dual> {
        let block_sq =
            |idx: &[usize]| idx.iter().fold(Dual::constant(0.0), |acc, &i| acc + p[i] * p[i]);
        let (sa, sb) = (block_sq(&self.a), block_sq(&self.b));
        let r2 = sa + sb;
        let mut out = vec![r2];
        for idx in [&self.a, &self.b] {
            if let [i, j] = idx.as_slice() {
                out.push(p[*j].atan2(p[*i]));
            }
        }
        out.push((sa - sb) / r2);
        out
    }

    fn inverse(&self, q: &[f64], _hint: &[f64]) -> Option<Point> {
        let r2 = q[0];
        let w = q[q.len() - 1];
        if r2 <= 0.0 || w.abs() >= 1.0 {
            return None;
        }
        let mut p = vec![0.0; self.ambient_dim()];
        let mut angle = 1;
        for (idx, sign, mass) in [
            (&self.a, self.sign_a, r2 * (1.0 + w) / 2.0),
            (&self.b, self.sign_b, r2 * (1.0 - w) / 2.0),
        ] {
            let r = mass.sqrt();
            match idx.as_slice() {
                [i] => p[*i] = sign * r,
                [i, j] => {
                    let (s, c) = q[angle].sin_cos();
                    angle += 1;
                    p[*i] = r * c;
                    p[*j] = r * s;
                }
                _ => return None,
            }
        }
        Some(p)
    }
}

/// Dual-valued map `R^n → R^l`.
pub type DualMap = Arc<dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync>;

/// The chart `Ψ = (f_1, …, f_l, remaining x, y) ∘ θ` obtained by replacing
/// the tangential coordinates listed in `replaced` with the components of
/// `f`. The inverse is computed by damped Newton iteration on the replaced
/// block.
#[derive(Clone)]
pub struct AdaptedChart {
    base: ConicalChart,
    f: DualMap,
    replaced: Vec<usize>,
}

impl fmt::Debug for AdaptedChart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptedChart")
            .field("base", &self.base)
            .field("replaced", &self.replaced)
            .finish()
    }
}

impl AdaptedChart {
    pub fn new(base: ConicalChart, f: DualMap, replaced: Vec<usize>) -> Self {
        assert!(replaced.iter().all(|&i| i < base.split()), "only tangential coordinates are replaced");
        Self { base, f, replaced }
    }

    pub fn base(&self) -> &ConicalChart {
        &self.base
    }

    fn f_real(&self, p: &[f64]) -> Point {
        (self.f)(&dual::constants(p)).iter().map(|d| d.re).collect()
    }

    fn kept(&self) -> Vec<usize> {
        (0..self.base.split()).filter(|i| !self.replaced.contains(i)).collect()
    }

    /// Base coordinates with the replaced block taken from `z_rep` and the
    /// rest read off the adapted coordinates `q`.
    fn assemble(&self, q: &[f64], z_rep: &[f64]) -> Point {
        let l = self.replaced.len();
        let k = self.base.split();
        let mut z = vec![0.0; q.len()];
        for (j, &i) in self.replaced.iter().enumerate() {
            z[i] = z_rep[j];
        }
        for (j, i) in self.kept().into_iter().enumerate() {
            z[i] = q[l + j];
        }
        z[k..].copy_from_slice(&q[k..]);
        z
    }
}

impl ChartMap for AdaptedChart {
    fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }

    fn split(&self) -> usize {
        self.base.split()
    }

    fn contains(&self, p: &[f64]) -> bool {
        self.base.contains(p)
    }

    fn forward(&self, p: &[Dual]) -> Vec<Dual> {
        let mut out = (self.f)(p);
        let old = self.base.map().forward(p);
        out.extend(self.kept().into_iter().map(|i| old[i]));
        out.extend_from_slice(&old[self.base.split()..]);
        out
    }

    fn inverse(&self, q: &[f64], hint: &[f64]) -> Option<Point> {
        let l = self.replaced.len();
        let start = self.base.theta(hint)?;
        let mut z: Point = self.replaced.iter().map(|&i| start[i]).collect();
        let target = &q[..l];
        let scale = 1.0 + target.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let resid_at = |z: &[f64]| -> Option<(Point, Point)> {
            let p = self.base.theta_inv(&self.assemble(q, z), hint)?;
            if !self.base.contains(&p) {
                return None;
            }
            let r = self.f_real(&p).iter().zip(target).map(|(a, b)| a - b).collect();
            Some((p, r))
        };
        let (mut p, mut r) = resid_at(&z)?;
        for _ in 0..60 {
            let err = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if err <= 1e-15 * scale {
                return Some(p);
            }
            let mut jac = DMatrix::zeros(l, l);
            for c in 0..l {
                let h = 1e-7 * (1.0 + z[c].abs());
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[c] += h;
                zm[c] -= h;
                let (_, rp) = resid_at(&zp)?;
                let (_, rm) = resid_at(&zm)?;
                for row in 0..l {
                    jac[(row, c)] = (rp[row] - rm[row]) / (2.0 * h);
                }
            }
            let step = jac.lu().solve(&DVector::from_vec(r.clone()))?;
            let mut damping = 1.0;
            let mut next = None;
            for _ in 0..30 {
                let trial: Point = z.iter().zip(step.iter()).map(|(a, d)| a - damping * d).collect();
                if let Some((tp, tr)) = resid_at(&trial) {
                    let terr = tr.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                    if terr < err || damping < 1e-6 {
                        next = Some((trial, tp, tr));
                        break;
                    }
                }
                damping *= 0.5;
            }
            let (nz, np, nr) = next?;
            if nz == z {
                break;
            }
            z = nz;
            p = np;
            r = nr;
        }
        let err = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        (err <= 1e-11 * scale).then_some(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothcore::vecops::dist;

    #[test]
    fn identity_chart_euler_field_is_fiber_scaling() {
        let c = ConicalChart::new(vec![0.0; 3], LinearChart::identity(3, 1));
        assert_eq!(c.euler(&[1.0, 2.0, 3.0]).unwrap(), vec![0.0, 2.0, 3.0]);
    }

    #[test]
    fn translated_chart_vanishes_on_axis() {
        let c = ConicalChart::new(vec![1.0, 0.0, 0.0], LinearChart::translated(vec![1.0, 0.0, 0.0], 1));
        assert_eq!(c.euler(&[3.0, 0.0, 0.0]).unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn flag_chart_round_trip() {
        let c = ConicalChart::new(vec![1.0, 0.0, 0.0], FlagChart::coordinate(3, 1, 1.0));
        let p = [0.8, 0.3, -0.2];
        let q = c.theta(&p).unwrap();
        assert!(dist(&c.theta_inv(&q, &p).unwrap(), &p) < 1e-14);
        assert!(c.theta(&[-0.8, 0.3, -0.2]).is_none());
    }

    #[test]
    fn cone_chart_round_trip_and_projection() {
        let c = ConicalChart::new(vec![1.0, 0.0, 1.0], ConeChart::new(vec![0, 1], vec![2], 1.0, 1.0));
        let p = [0.6, -0.5, 0.9];
        let q = c.theta(&p).unwrap();
        assert!(dist(&c.theta_inv(&q, &p).unwrap(), &p) < 1e-14);
        let m0 = c.project(&p).unwrap();
        assert!((m0[0] * m0[0] + m0[1] * m0[1] - m0[2] * m0[2]).abs() < 1e-14);
        assert!((norm_sq(&m0) - norm_sq(&p)).abs() < 1e-14);
    }

    #[test]
    fn adapted_chart_inverts_by_newton() {
        let base = ConicalChart::new(vec![1.0, 0.0, 0.0], FlagChart::coordinate(3, 1, 1.0));
        let f: DualMap = Arc::new(|p: &[Dual]| vec![dual::norm_sq(p)]);
        let c = ConicalChart::new(vec![1.0, 0.0, 0.0], AdaptedChart::new(base, f, vec![0]));
        let p = [0.7, 0.4, -0.1];
        let q = c.theta(&p).unwrap();
        assert!((q[0] - norm_sq(&p)).abs() < 1e-15);
        let back = c.theta_inv(&q, &[1.0, 0.0, 0.0]).unwrap();
        assert!(dist(&back, &p) < 1e-12);
    }

    #[test]
    fn nested_flag_chart_matches_newton_adaptation() {
        let base = ConicalChart::new(vec![0.0, 1.0, 0.0], FlagChart::coordinate(3, 2, 1.0));
        let f: DualMap = Arc::new(|p: &[Dual]| vec![p[0], p[1] * p[1] + p[2] * p[2]]);
        let newton = ConicalChart::new(vec![0.0, 1.0, 0.0], AdaptedChart::new(base, f, vec![0, 1]));
        let closed = ConicalChart::new(vec![0.0, 1.0, 0.0], FlagChart::coordinate(3, 2, 1.0).nested());
        let p = [0.3, 0.8, -0.25];
        let (a, b) = (newton.theta(&p).unwrap(), closed.theta(&p).unwrap());
        assert!(dist(&a, &b) < 1e-15);
        for t in [0.0, 0.5, 2.0] {
            let x = newton.scale_fiber(&p, t).unwrap();
            let y = closed.scale_fiber(&p, t).unwrap();
            assert!(dist(&x, &y) < 1e-11, "t={t}: {x:?} vs {y:?}");
        }
    }
}
