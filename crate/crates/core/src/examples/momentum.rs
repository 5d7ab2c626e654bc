//! Weighted circle momentum maps on `C^n ≅ R^{2n}` and the quadratic local
//! model `Q`.
//!
//! Coordinates are interleaved `(x_1, y_1, …, x_n, y_n)` and the symplectic
//! form is `ω(u, v) = Σ_j (u_{y_j} v_{x_j} - u_{x_j} v_{y_j})`, so that
//! `ω(iz, z) = |z|²`.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::smoothcore::dual::Dual;
use crate::smoothcore::ode::{integrate, FlowOptions};
use crate::smoothcore::vecops::{dot, norm};
use crate::smoothcore::Point;
use crate::strata::GroupAction;

/// `μ(z) = ½ Σ a_j |z_j|² - c`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusHamiltonian {
    weights: Vec<i64>,
    shift: f64,
}

impl TorusHamiltonian {
    pub fn new(weights: Vec<i64>, shift: f64) -> Self {
        Self { weights, shift }
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn dim(&self) -> usize {
        2 * self.weights.len()
    }

    pub fn moment_dual(&self, z: &[Dual]) -> Dual {
        let mut acc = Dual::constant(-self.shift);
        for (j, &a) in self.weights.iter().enumerate() {
            acc += (z[2 * j] * z[2 * j] + z[2 * j + 1] * z[2 * j + 1]) * (0.5 * a as f64);
        }
        acc
    }

    /// `∇μ(z) = (a_j x_j, a_j y_j)_j`.
    pub fn gradient(&self, z: &[f64]) -> Point {
        let mut g = vec![0.0; self.dim()];
        for (j, &a) in self.weights.iter().enumerate() {
            g[2 * j] = a as f64 * z[2 * j];
            g[2 * j + 1] = a as f64 * z[2 * j + 1];
        }
        g
    }
}

pub fn moment(ham: &TorusHamiltonian, z: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (j, &a) in ham.weights.iter().enumerate() {
        acc += 0.5 * a as f64 * (z[2 * j] * z[2 * j] + z[2 * j + 1] * z[2 * j + 1]);
    }
    acc - ham.shift
}

/// `|∇‖μ‖²(z)| = |2 μ(z) ∇μ(z)|`.
pub fn crit_residual(ham: &TorusHamiltonian, z: &[f64]) -> f64 {
    2.0 * moment(ham, z).abs() * norm(&ham.gradient(z))
}

/// Flows `ż = -2 μ(z) ∇μ(z)` for time `t_final`.
pub fn norm_sq_gradient_flow(
    ham: &TorusHamiltonian,
    z: &[f64],
    t_final: f64,
    opts: &FlowOptions,
) -> Result<Point> {
    if !(t_final >= 0.0) {
        return Err(GeomError::Precondition("flow time must be nonnegative".into()));
    }
    if moment(ham, z) == 0.0 {
        return Ok(z.to_vec());
    }
    let rhs = |p: &[f64]| {
        let m = moment(ham, p);
        Some(ham.gradient(p).into_iter().map(|g| -2.0 * m * g).collect())
    };
    Ok(integrate(rhs, z, t_final, opts, None)?.point)
}

/// The standard complex structure, blocks `[[0, -1], [1, 0]]`.
fn complex_structure(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, n);
    for b in 0..n / 2 {
        j[(2 * b, 2 * b + 1)] = -1.0;
        j[(2 * b + 1, 2 * b)] = 1.0;
    }
    j
}

/// `ω(u, v) = Σ_j (u_{y_j} v_{x_j} - u_{x_j} v_{y_j})`.
pub fn omega(u: &[f64], v: &[f64]) -> f64 {
    (0..u.len() / 2)
        .map(|j| u[2 * j + 1] * v[2 * j] - u[2 * j] * v[2 * j + 1])
        .sum()
}

fn check_symplectic(xi: &DMatrix<f64>) -> Result<()> {
    let n = xi.nrows();
    if n % 2 != 0 || xi.ncols() != n {
        return Err(GeomError::InvalidAction("generator must be a square even-sized matrix".into()));
    }
    let j = complex_structure(n);
    let defect = (xi.transpose() * &j + &j * xi).amax();
    if defect > 1e-10 {
        return Err(GeomError::InvalidAction(format!(
            "generator is not infinitesimally symplectic (defect {defect:.3e})"
        )));
    }
    Ok(())
}

/// `⟨Q(z), ξ_j⟩ = ½ ω(ξ_j z, z)` for each generator.
pub fn quadratic_moment(generators: &[DMatrix<f64>], z: &[f64]) -> Result<Point> {
    generators
        .iter()
        .map(|xi| {
            check_symplectic(xi)?;
            let xz = xi * DVector::from_column_slice(z);
            Ok(0.5 * omega(xz.as_slice(), z))
        })
        .collect()
}

/// Lie algebra generators of an action, when it has a continuous part.
pub fn action_generators(action: &GroupAction) -> Result<Vec<DMatrix<f64>>> {
    match action {
        GroupAction::Circle(c) => Ok(vec![c.generator()]),
        GroupAction::Finite(_) => {
            Err(GeomError::InvalidAction("a finite group has no quadratic moment map".into()))
        }
    }
}

/// `|Q(z)| + |ξ_β z|`: zero exactly on the local critical model
/// `Q⁻¹(0) ∩ V^{T_β}`.
pub fn cv_residual(generators: &[DMatrix<f64>], beta: &DMatrix<f64>, z: &[f64]) -> Result<f64> {
    let q = quadratic_moment(generators, z)?;
    let bz = beta * DVector::from_column_slice(z);
    Ok(dot(&q, &q).sqrt() + bz.norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::CircleAction;

    fn balanced() -> TorusHamiltonian {
        TorusHamiltonian::new(vec![1, -1], 0.0)
    }

    #[test]
    fn moment_examples() {
        assert_eq!(moment(&balanced(), &[1.0, 0.0, 1.0, 0.0]), 0.0);
        assert_eq!(moment(&balanced(), &[1.0, 0.0, 0.0, 0.0]), 0.5);
        assert_eq!(moment(&TorusHamiltonian::new(vec![3, 2], 0.0), &[0.0; 4]), 0.0);
    }

    #[test]
    fn crit_residual_examples() {
        assert_eq!(crit_residual(&balanced(), &[1.0, 0.0, 1.0, 0.0]), 0.0);
        assert_eq!(crit_residual(&balanced(), &[1.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(crit_residual(&balanced(), &[0.0; 4]), 0.0);
    }

    #[test]
    fn gradient_flow_fixed_points() {
        let z = [0.3, 0.4, 0.5, 0.0];
        assert_eq!(norm_sq_gradient_flow(&balanced(), &z, 10.0, &FlowOptions::default()).unwrap(), z.to_vec());
        assert_eq!(norm_sq_gradient_flow(&balanced(), &[0.0; 4], 10.0, &FlowOptions::default()).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn quadratic_moment_of_weight_one_circle() {
        let xi = CircleAction::new(vec![1]).generator();
        let z = [0.6, -0.8];
        let q = quadratic_moment(&[xi.clone()], &z).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-15);
        assert_eq!(quadratic_moment(&[xi.clone()], &[0.0, 0.0]).unwrap(), vec![0.0]);
        let q2 = quadratic_moment(&[xi], &[1.2, -1.6]).unwrap();
        assert_eq!(q2[0], 4.0 * q[0]);
    }

    #[test]
    fn non_symplectic_generator_is_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(quadratic_moment(&[bad], &[1.0, 0.0]).is_err());
    }
}
