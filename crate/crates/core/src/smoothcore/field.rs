//! Scalar and vector fields on open subsets of `R^n`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::dual::{self, Dual};
use super::vecops::norm;
use super::Point;
use crate::error::{GeomError, Result};

type RealScalar = dyn Fn(&[f64]) -> Option<f64> + Send + Sync;
type DualScalar = dyn Fn(&[Dual]) -> Option<Dual> + Send + Sync;
type RealVector = dyn Fn(&[f64]) -> Option<Point> + Send + Sync;
type DualVector = dyn Fn(&[Dual]) -> Option<Vec<Dual>> + Send + Sync;

/// Relative central-difference step used for opaque callables.
pub const FD_STEP: f64 = 1e-6;

/// A real function with a domain: `eval` returns `None` off the domain.
#[derive(Clone)]
pub struct ScalarField {
    dim: usize,
    real: Arc<RealScalar>,
    dual: Option<Arc<DualScalar>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("dim", &self.dim)
            .field("dual", &self.dual.is_some())
            .finish()
    }
}

impl ScalarField {
    /// An opaque callable; derivatives fall back to central differences.
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> Option<f64> + Send + Sync + 'static) -> Self {
        Self { dim, real: Arc::new(f), dual: None }
    }

    /// An expression written over dual numbers; derivatives are exact.
    pub fn from_dual(
        dim: usize,
        f: impl Fn(&[Dual]) -> Option<Dual> + Send + Sync + 'static,
    ) -> Self {
        let f = Arc::new(f);
        let g = Arc::clone(&f);
        Self {
            dim,
            real: Arc::new(move |p: &[f64]| g(&dual::constants(p)).map(|d| d.re)),
            dual: Some(f),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_dual(dim, move |_| Some(Dual::constant(c)))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_dual(&self) -> bool {
        self.dual.is_some()
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        (self.real)(p).is_some()
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        (self.real)(p).ok_or_else(|| GeomError::Domain(format!("scalar field undefined at {p:?}")))
    }

    /// Directional derivative; exact when the field carries a dual form.
    pub fn derivative(&self, p: &[f64], direction: &[f64]) -> Result<f64> {
        match &self.dual {
            Some(f) => f(&dual::seed(p, direction))
                .map(|d| d.eps)
                .ok_or_else(|| GeomError::Domain(format!("scalar field undefined at {p:?}"))),
            None => self.derivative_fd(p, direction, FD_STEP * (1.0 + norm(p))),
        }
    }

    /// Central-difference directional derivative with step `h`.
    pub fn derivative_fd(&self, p: &[f64], direction: &[f64], h: f64) -> Result<f64> {
        let plus: Point = p.iter().zip(direction).map(|(a, d)| a + h * d).collect();
        let minus: Point = p.iter().zip(direction).map(|(a, d)| a - h * d).collect();
        Ok((self.eval(&plus)? - self.eval(&minus)?) / (2.0 * h))
    }

    pub fn gradient(&self, p: &[f64]) -> Result<Point> {
        (0..self.dim)
            .map(|i| self.derivative(p, &unit(self.dim, i)))
            .collect()
    }
}

/// A vector field with a domain: `eval` returns `None` off the domain.
#[derive(Clone)]
pub struct VectorField {
    dim: usize,
    real: Arc<RealVector>,
    dual: Option<Arc<DualVector>>,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorField")
            .field("dim", &self.dim)
            .field("dual", &self.dual.is_some())
            .finish()
    }
}

impl VectorField {
    pub fn new(dim: usize, f: impl Fn(&[f64]) -> Option<Point> + Send + Sync + 'static) -> Self {
        Self { dim, real: Arc::new(f), dual: None }
    }

    pub fn from_dual(
        dim: usize,
        f: impl Fn(&[Dual]) -> Option<Vec<Dual>> + Send + Sync + 'static,
    ) -> Self {
        let f = Arc::new(f);
        let g = Arc::clone(&f);
        Self {
            dim,
            real: Arc::new(move |p: &[f64]| {
                g(&dual::constants(p)).map(|v| v.iter().map(|d| d.re).collect())
            }),
            dual: Some(f),
        }
    }

    /// The Euler field `E(x) = x`.
    pub fn euler(dim: usize) -> Self {
        Self::from_dual(dim, |p| Some(p.to_vec()))
    }

    pub fn zero(dim: usize) -> Self {
        Self::from_dual(dim, move |_| Some(vec![Dual::constant(0.0); dim]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn in_domain(&self, p: &[f64]) -> bool {
        (self.real)(p).is_some()
    }

    pub fn try_eval(&self, p: &[f64]) -> Option<Point> {
        (self.real)(p)
    }

    pub fn eval(&self, p: &[f64]) -> Result<Point> {
        (self.real)(p).ok_or_else(|| GeomError::Domain(format!("vector field undefined at {p:?}")))
    }

    /// `c · self`.
    pub fn scaled(&self, c: f64) -> Self {
        let inner = self.clone();
        match &self.dual {
            Some(f) => {
                let f = Arc::clone(f);
                Self::from_dual(self.dim, move |p| {
                    f(p).map(|v| v.into_iter().map(|d| d * c).collect())
                })
            }
            None => Self::new(self.dim, move |p| {
                inner.try_eval(p).map(|v| v.into_iter().map(|x| x * c).collect())
            }),
        }
    }

    /// `f · self`, defined where both are.
    pub fn multiplied_by(&self, f: &ScalarField) -> Self {
        let (v, f) = (self.clone(), f.clone());
        Self::new(self.dim, move |p| {
            let s = (f.real)(p)?;
            let x = v.try_eval(p)?;
            Some(x.into_iter().map(|c| c * s).collect())
        })
    }

    /// Jacobian matrix; exact for dual expressions, central differences otherwise.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        match &self.dual {
            Some(f) => {
                let mut j = DMatrix::zeros(self.dim, self.dim);
                for c in 0..self.dim {
                    let col = f(&dual::seed(p, &unit(self.dim, c))).ok_or_else(|| {
                        GeomError::Domain(format!("vector field undefined at {p:?}"))
                    })?;
                    for (r, d) in col.iter().enumerate() {
                        j[(r, c)] = d.eps;
                    }
                }
                Ok(j)
            }
            None => self.jacobian_fd(p, FD_STEP * (1.0 + norm(p))),
        }
    }

    pub fn jacobian_fd(&self, p: &[f64], h: f64) -> Result<DMatrix<f64>> {
        let mut j = DMatrix::zeros(self.dim, self.dim);
        for c in 0..self.dim {
            let mut plus = p.to_vec();
            let mut minus = p.to_vec();
            plus[c] += h;
            minus[c] -= h;
            let (a, b) = (self.eval(&plus)?, self.eval(&minus)?);
            for r in 0..self.dim {
                j[(r, c)] = (a[r] - b[r]) / (2.0 * h);
            }
        }
        Ok(j)
    }
}

/// `L_X f (p) = ∇f(p) · X(p)`.
pub fn lie_derivative(field: &VectorField, f: &ScalarField, p: &[f64]) -> Result<f64> {
    let x = field.eval(p)?;
    f.eval(p)?;
    if x.iter().all(|&c| c == 0.0) {
        return Ok(0.0);
    }
    f.derivative(p, &x)
}

/// Returns `f` inside `region` and the constant `c` elsewhere.
pub fn extend_by_constant(
    f: &ScalarField,
    c: f64,
    region: impl Fn(&[f64]) -> bool + Send + Sync + 'static,
) -> ScalarField {
    let f = f.clone();
    ScalarField::new(f.dim, move |p| {
        if region(p) {
            (f.real)(p).or(Some(c))
        } else {
            Some(c)
        }
    })
}

pub(crate) fn unit(dim: usize, i: usize) -> Point {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothcore::bump::BumpSpec;

    fn x1() -> ScalarField {
        ScalarField::from_dual(2, |p| Some(p[0]))
    }

    fn sq() -> ScalarField {
        ScalarField::from_dual(2, |p| Some(dual::norm_sq(p)))
    }

    #[test]
    fn lie_derivative_examples() {
        let e = VectorField::euler(2);
        assert_eq!(lie_derivative(&e, &x1(), &[3.0, 0.0]).unwrap(), 3.0);
        assert_eq!(lie_derivative(&e, &sq(), &[1.0, 1.0]).unwrap(), 4.0);
        let z = VectorField::zero(2);
        assert_eq!(lie_derivative(&z, &sq(), &[0.3, -2.0]).unwrap(), 0.0);
    }

    #[test]
    fn finite_difference_route_agrees() {
        let opaque = ScalarField::new(2, |p| Some(p[0] * p[0] + p[1] * p[1]));
        let e = VectorField::euler(2);
        let p = [0.7, -1.3];
        let exact = lie_derivative(&e, &sq(), &p).unwrap();
        let fd = lie_derivative(&e, &opaque, &p).unwrap();
        assert!((exact - fd).abs() / exact < 1e-8);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let v = VectorField::from_dual(2, |p| Some(vec![p[0] * p[1], p[1].sin() + p[0] * p[0]]));
        let p = [0.4, 1.1];
        let exact = v.jacobian(&p).unwrap();
        let fd = v.jacobian_fd(&p, 1e-5).unwrap();
        assert!((exact - fd).amax() / 1.0 < 1e-5);
    }

    #[test]
    fn extension_by_constant() {
        let three = ScalarField::constant(2, 3.0);
        let ext = extend_by_constant(&three, 3.0, |p| p[0] * p[0] + p[1] * p[1] < 1.0);
        assert_eq!(ext.eval(&[5.0, 5.0]).unwrap(), 3.0);

        let h = BumpSpec::third();
        let f = ScalarField::new(2, move |p| {
            let r = p[0] * p[0] + p[1] * p[1];
            (r < 1.0).then(|| h.value(r))
        });
        let ext = extend_by_constant(&f, 0.0, |p| p[0] * p[0] + p[1] * p[1] <= 2.0 / 3.0);
        assert_eq!(ext.eval(&[0.9f64.sqrt(), 0.0]).unwrap(), 0.0);
        assert_eq!(ext.eval(&[0.0, 0.0]).unwrap(), 1.0);
    }
}
