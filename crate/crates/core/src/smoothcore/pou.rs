//! Partitions of unity on ball covers and averaging over group actions.

use std::sync::Arc;

use super::bump::BumpSpec;
use super::field::{ScalarField, VectorField};
use super::vecops::{dist, norm_sq};
use super::Point;
use crate::error::{GeomError, Result};
use crate::strata::GroupAction;

/// Raw bump profile of a cover ball, applied to `|p - c|² / r²`.
const BALL_PROFILE: BumpSpec = BumpSpec { a: 0.5, b: 1.0 };

/// Partition of unity subordinate to a finite cover by open balls.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    covers: Arc<Vec<(Point, f64)>>,
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.covers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covers.is_empty()
    }

    fn raw(&self, i: usize, p: &[f64]) -> f64 {
        let (c, r) = &self.covers[i];
        let s = dist(p, c).powi(2) / (r * r);
        BALL_PROFILE.value(s)
    }

    /// All weights at `p`; they sum to one.
    pub fn weights(&self, p: &[f64]) -> Result<Vec<f64>> {
        let raw: Vec<f64> = (0..self.covers.len()).map(|i| self.raw(i, p)).collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(GeomError::Uncovered);
        }
        Ok(raw.into_iter().map(|w| w / total).collect())
    }

    /// The `i`-th weight as a scalar field, undefined at uncovered points.
    pub fn field(&self, i: usize, dim: usize) -> ScalarField {
        let me = self.clone();
        ScalarField::new(dim, move |p| me.weights(p).ok().map(|w| w[i]))
    }
}

/// Builds the partition of unity for the given `(center, radius)` balls.
pub fn partition_of_unity(covers: Vec<(Point, f64)>) -> Result<Vec<ScalarField>> {
    let pou = PartitionOfUnity::new(covers)?;
    let dim = pou.covers.first().map_or(0, |c| c.0.len());
    Ok((0..pou.len()).map(|i| pou.field(i, dim)).collect())
}

impl PartitionOfUnity {
    pub fn new(covers: Vec<(Point, f64)>) -> Result<Self> {
        if covers.iter().any(|(_, r)| !(*r > 0.0)) {
            return Err(GeomError::Precondition("cover radii must be positive".into()));
        }
        Ok(Self { covers: Arc::new(covers) })
    }
}

/// Number of trapezoid nodes for circle averages.
pub const CIRCLE_NODES: usize = 64;

/// Averages `field` over the group: `avg(p) = mean_g g⁻¹·field(g·p)`.
pub fn group_average(field: &VectorField, action: &GroupAction) -> Result<VectorField> {
    action.validate()?;
    let elements = action.averaging_elements(CIRCLE_NODES);
    if elements.first().is_some_and(|g| g.nrows() != field.dim()) {
        return Err(GeomError::InvalidAction("action and field dimensions differ".into()));
    }
    let elements = Arc::new(elements);
    let inner = field.clone();
    let dim = field.dim();
    Ok(VectorField::new(dim, move |p| {
        let mut acc = vec![0.0; dim];
        let pv = nalgebra::DVector::from_column_slice(p);
        for g in elements.iter() {
            let gp = g * &pv;
            let v = inner.try_eval(gp.as_slice())?;
            let back = g.transpose() * nalgebra::DVector::from_vec(v);
            for (a, b) in acc.iter_mut().zip(back.iter()) {
                *a += b;
            }
        }
        let n = elements.len() as f64;
        Some(acc.into_iter().map(|a| a / n).collect())
    }))
}

/// Largest componentwise gap between two fields over sample points.
pub fn max_field_gap(a: &VectorField, b: &VectorField, samples: &[Point]) -> f64 {
    samples
        .iter()
        .filter_map(|p| Some((a.try_eval(p)?, b.try_eval(p)?)))
        .map(|(x, y)| dist(&x, &y) / (1.0 + norm_sq(&x).sqrt()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strata::{CircleAction, FiniteGroup};
    use nalgebra::DMatrix;

    #[test]
    fn single_and_symmetric_covers() {
        let one = partition_of_unity(vec![(vec![0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(one[0].eval(&[0.0, 0.0]).unwrap(), 1.0);

        let two = PartitionOfUnity::new(vec![(vec![0.0, 0.0], 1.0), (vec![0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(two.weights(&[0.3, 0.2]).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn overlapping_balls_blend() {
        let pou = PartitionOfUnity::new(vec![(vec![0.0, 0.0], 1.0), (vec![1.0, 0.0], 1.0)]).unwrap();
        let w = pou.weights(&[0.9, 0.0]).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] > 0.0 && w[0] < 1.0);
    }

    #[test]
    fn uncovered_point_errors() {
        let pou = PartitionOfUnity::new(vec![(vec![0.0, 0.0], 1.0)]).unwrap();
        assert_eq!(pou.weights(&[2.0, 0.0]), Err(GeomError::Uncovered));
    }

    #[test]
    fn odd_average_vanishes() {
        let minus = FiniteGroup::new(vec![-DMatrix::<f64>::identity(2, 2)]).unwrap();
        let c = VectorField::new(2, |_| Some(vec![1.0, 0.0]));
        let avg = group_average(&c, &GroupAction::Finite(minus)).unwrap();
        assert_eq!(avg.eval(&[0.4, 0.1]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn dihedral_average_of_constant_field() {
        let d3 = GroupAction::Finite(FiniteGroup::dihedral3());
        let c = VectorField::new(2, |_| Some(vec![1.0, 0.0]));
        let avg = group_average(&c, &d3).unwrap();
        let v = avg.eval(&[0.2, -0.7]).unwrap();
        assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn invariant_field_is_a_fixed_point() {
        let circle = GroupAction::Circle(CircleAction::new(vec![1, -1]));
        let e = VectorField::euler(4);
        let avg = group_average(&e, &circle).unwrap();
        let p = [0.3, -0.2, 0.9, 0.5];
        let v = avg.eval(&p).unwrap();
        assert!(dist(&v, &p) < 1e-12);
    }

    #[test]
    fn rejects_non_orthogonal_generators() {
        let shear = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(FiniteGroup::new(vec![shear]), Err(GeomError::InvalidAction(_))));
    }
}
