//! Linear group actions and stabilizer (orbit-type) computation.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_integer::Integer;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::smoothcore::Point;

/// Largest finite group enumerated by closure.
pub const MAX_GROUP_ORDER: usize = 48;

const MATCH_TOL: f64 = 1e-9;
const FIX_TOL: f64 = 1e-10;

/// A finite group of orthogonal matrices, stored with all its elements.
#[derive(Debug, Clone)]
pub struct FiniteGroup {
    generators: Vec<DMatrix<f64>>,
    elements: Vec<DMatrix<f64>>,
}

fn same(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    (a - b).amax() <= MATCH_TOL
}

fn check_orthogonal(g: &DMatrix<f64>) -> Result<()> {
    let n = g.nrows();
    if g.ncols() != n {
        return Err(GeomError::InvalidAction("generator is not square".into()));
    }
    let defect = (g.transpose() * g - DMatrix::identity(n, n)).amax();
    if defect > 1e-10 {
        return Err(GeomError::InvalidAction(format!(
            "generator is not orthogonal (defect {defect:.3e})"
        )));
    }
    Ok(())
}

impl FiniteGroup {
    /// Enumerates the group generated by `generators`.
    pub fn new(generators: Vec<DMatrix<f64>>) -> Result<Self> {
        let n = generators
            .first()
            .map(|g| g.nrows())
            .ok_or_else(|| GeomError::InvalidAction("no generators".into()))?;
        for g in &generators {
            check_orthogonal(g)?;
            if g.nrows() != n {
                return Err(GeomError::InvalidAction("generators differ in size".into()));
            }
        }
        let mut elements = vec![DMatrix::identity(n, n)];
        let mut frontier = 0;
        while frontier < elements.len() {
            let current = elements[frontier].clone();
            frontier += 1;
            for g in &generators {
                let next = g * &current;
                if !elements.iter().any(|e| same(e, &next)) {
                    if elements.len() == MAX_GROUP_ORDER {
                        return Err(GeomError::InvalidAction(format!(
                            "group order exceeds {MAX_GROUP_ORDER}"
                        )));
                    }
                    elements.push(next);
                }
            }
        }
        Ok(Self { generators, elements })
    }

    /// Rotation by `2π/3` and the reflection `(x, y) ↦ (x, -y)`.
    pub fn dihedral3() -> Self {
        let (c, s) = ((2.0 * PI / 3.0).cos(), (2.0 * PI / 3.0).sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        let refl = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        Self::new(vec![rot, refl]).expect("dihedral group is well formed")
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[DMatrix<f64>] {
        &self.generators
    }

    pub fn elements(&self) -> &[DMatrix<f64>] {
        &self.elements
    }

    fn index_of(&self, g: &DMatrix<f64>) -> usize {
        self.elements
            .iter()
            .position(|e| same(e, g))
            .expect("closed under products")
    }

    /// Smallest sorted index list among the conjugates of `subgroup`.
    fn conjugacy_label(&self, subgroup: &[usize]) -> String {
        let mut best: Option<Vec<usize>> = None;
        for g in &self.elements {
            let gi = g.transpose();
            let mut conj: Vec<usize> = subgroup
                .iter()
                .map(|&h| self.index_of(&(g * &self.elements[h] * &gi)))
                .collect();
            conj.sort_unstable();
            if best.as_ref().is_none_or(|b| conj < *b) {
                best = Some(conj);
            }
        }
        let idx = best.unwrap_or_default();
        let body: Vec<String> = idx.iter().map(ToString::to_string).collect();
        format!("order{}:[{}]", subgroup.len(), body.join(","))
    }
}

/// Circle acting on `C^m ≅ R^{2m}` (interleaved `x_j, y_j`) with weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircleAction {
    weights: Vec<i64>,
}

impl CircleAction {
    pub fn new(weights: Vec<i64>) -> Self {
        Self { weights }
    }

    pub fn weights(&self) -> &[i64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        2 * self.weights.len()
    }

    /// The rotation `z_j ↦ e^{i a_j θ} z_j`.
    pub fn matrix(&self, theta: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (j, &a) in self.weights.iter().enumerate() {
            let (s, c) = (a as f64 * theta).sin_cos();
            m[(2 * j, 2 * j)] = c;
            m[(2 * j, 2 * j + 1)] = -s;
            m[(2 * j + 1, 2 * j)] = s;
            m[(2 * j + 1, 2 * j + 1)] = c;
        }
        m
    }

    /// Infinitesimal generator `ξ`, the derivative of `matrix` at `θ = 0`.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (j, &a) in self.weights.iter().enumerate() {
            m[(2 * j, 2 * j + 1)] = -(a as f64);
            m[(2 * j + 1, 2 * j)] = a as f64;
        }
        m
    }
}

/// A linear action of a compact group on the ambient space.
#[derive(Debug, Clone)]
pub enum GroupAction {
    Finite(FiniteGroup),
    Circle(CircleAction),
}

/// Angles used as stand-in generators when checking circle equivariance.
pub const CIRCLE_TEST_ANGLES: [f64; 3] = [0.5, 1.7, PI];

impl GroupAction {
    pub fn dim(&self) -> usize {
        match self {
            Self::Finite(g) => g.elements[0].nrows(),
            Self::Circle(c) => c.dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Finite(g) => g.generators.iter().try_for_each(check_orthogonal),
            Self::Circle(c) if c.weights.is_empty() => {
                Err(GeomError::InvalidAction("circle action without weights".into()))
            }
            Self::Circle(_) => Ok(()),
        }
    }

    /// Elements summed by averaging: the whole finite group, or `nodes`
    /// equally spaced circle angles.
    pub fn averaging_elements(&self, nodes: usize) -> Vec<DMatrix<f64>> {
        match self {
            Self::Finite(g) => g.elements.clone(),
            Self::Circle(c) => (0..nodes)
                .map(|k| c.matrix(2.0 * PI * k as f64 / nodes as f64))
                .collect(),
        }
    }

    /// Elements against which equivariance is tested.
    pub fn test_elements(&self) -> Vec<DMatrix<f64>> {
        match self {
            Self::Finite(g) => g.generators.clone(),
            Self::Circle(c) => CIRCLE_TEST_ANGLES.iter().map(|&t| c.matrix(t)).collect(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Finite(g) => format!("finite(order {})", g.order()),
            Self::Circle(c) => format!("circle{:?}", c.weights),
        }
    }
}

/// `g · p`.
pub fn act(g: &DMatrix<f64>, p: &[f64]) -> Point {
    (g * DVector::from_column_slice(p)).as_slice().to_vec()
}

/// Stabilizer of a point, up to conjugacy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Stabilizer {
    /// The stabilizer is the whole group.
    Whole,
    /// A proper finite subgroup, labelled by its conjugacy class.
    Subgroup { order: u64, class: String },
}

impl Stabilizer {
    pub fn is_trivial(&self) -> bool {
        matches!(self, Self::Subgroup { order: 1, .. })
    }
}

/// The stabilizer `G_p`.
pub fn orbit_type(action: &GroupAction, p: &[f64]) -> Result<Stabilizer> {
    action.validate()?;
    if p.len() != action.dim() || p.iter().any(|x| !x.is_finite()) {
        return Err(GeomError::Domain("point does not match the action".into()));
    }
    match action {
        GroupAction::Finite(g) => {
            let fixed: Vec<usize> = g
                .elements
                .iter()
                .enumerate()
                .filter(|(_, e)| {
                    let q = act(e, p);
                    q.iter().zip(p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) <= FIX_TOL
                })
                .map(|(i, _)| i)
                .collect();
            if fixed.len() == g.order() {
                Ok(Stabilizer::Whole)
            } else {
                Ok(Stabilizer::Subgroup {
                    order: fixed.len() as u64,
                    class: g.conjugacy_label(&fixed),
                })
            }
        }
        GroupAction::Circle(c) => {
            let mut order = 0u64;
            for (j, &a) in c.weights.iter().enumerate() {
                let moved = p[2 * j].abs() > 0.0 || p[2 * j + 1].abs() > 0.0;
                if moved && a != 0 {
                    order = order.gcd(&a.unsigned_abs());
                }
            }
            if order == 0 {
                Ok(Stabilizer::Whole)
            } else {
                Ok(Stabilizer::Subgroup { order, class: format!("Z{order}") })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dihedral_group_has_six_elements() {
        assert_eq!(FiniteGroup::dihedral3().order(), 6);
    }

    #[test]
    fn dihedral_stabilizers() {
        let d3 = GroupAction::Finite(FiniteGroup::dihedral3());
        assert_eq!(orbit_type(&d3, &[0.0, 0.0]).unwrap(), Stabilizer::Whole);
        match orbit_type(&d3, &[1.0, 0.0]).unwrap() {
            Stabilizer::Subgroup { order, .. } => assert_eq!(order, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(orbit_type(&d3, &[0.3, 0.7]).unwrap().is_trivial());
    }

    #[test]
    fn mirror_stabilizers_are_conjugate() {
        let d3 = GroupAction::Finite(FiniteGroup::dihedral3());
        let a = orbit_type(&d3, &[1.0, 0.0]).unwrap();
        let angle = PI / 3.0;
        let b = orbit_type(&d3, &[angle.cos(), angle.sin()]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn circle_stabilizers() {
        let c = GroupAction::Circle(CircleAction::new(vec![1, -1]));
        assert!(orbit_type(&c, &[1.0, 0.0, 1.0, 0.0]).unwrap().is_trivial());
        assert_eq!(orbit_type(&c, &[0.0; 4]).unwrap(), Stabilizer::Whole);
        let c2 = GroupAction::Circle(CircleAction::new(vec![2, 4]));
        assert_eq!(
            orbit_type(&c2, &[1.0, 0.0, 1.0, 0.0]).unwrap(),
            Stabilizer::Subgroup { order: 2, class: "Z2".into() }
        );
    }

    #[test]
    fn generator_is_the_derivative_of_the_rotation() {
        let c = CircleAction::new(vec![1, -2]);
        let h = 1e-6;
        let fd = (c.matrix(h) - c.matrix(-h)) / (2.0 * h);
        assert!((fd - c.generator()).amax() < 1e-8);
    }

    #[test]
    fn too_large_groups_are_rejected() {
        let (c, s) = ((2.0 * PI / 97.0).cos(), (2.0 * PI / 97.0).sin());
        let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
        assert!(FiniteGroup::new(vec![rot]).is_err());
    }
}
