//! Smooth monotone bump functions `h_{a,b}`.

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};

/// Parameters of a bump that is `1` on `[0, a]` and `0` on `[b, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub a: f64,
    pub b: f64,
}

impl BumpSpec {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > a && b.is_finite()) {
            return Err(GeomError::Precondition(format!(
                "bump needs 0 < a < b, got a={a}, b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// `h_{1/3,2/3}`, the cutoff used by convenient modification.
    pub fn third() -> Self {
        Self { a: 1.0 / 3.0, b: 2.0 / 3.0 }
    }

    /// `h_{1/4,1/2}`, the shrink applied after conjugation.
    pub fn quarter() -> Self {
        Self { a: 0.25, b: 0.5 }
    }

    /// The same bump with both thresholds multiplied by `k > 0`.
    pub fn scaled(&self, k: f64) -> Self {
        Self { a: self.a * k, b: self.b * k }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        bump(self, t)
    }

    /// Evaluation that clamps negative input to the inner plateau.
    pub(crate) fn value(&self, t: f64) -> f64 {
        if t <= self.a {
            return 1.0;
        }
        if t >= self.b {
            return 0.0;
        }
        let w = self.b - self.a;
        let up = g((self.b - t) / w);
        let down = g((t - self.a) / w);
        up / (up + down)
    }
}

fn g(x: f64) -> f64 {
    if x > 0.0 {
        (-1.0 / x).exp()
    } else {
        0.0
    }
}

/// Evaluates `h_{a,b}(t)` through the symmetric blend of `exp(-1/x)`.
pub fn bump(spec: &BumpSpec, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(GeomError::Domain(format!("bump argument {t} is negative")));
    }
    Ok(spec.value(t))
}

/// Smooth monotone step on `[0, 1]`: `0` on `[0, 0.1]`, `1` on `[0.9, 1]`.
pub fn smooth_step(t: f64) -> f64 {
    1.0 - BumpSpec { a: 0.1, b: 0.9 }.value(t.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateaus_and_midpoint() {
        let h = BumpSpec::third();
        assert_eq!(bump(&h, 0.2).unwrap(), 1.0);
        assert_eq!(bump(&h, 0.8).unwrap(), 0.0);
        assert_eq!(bump(&BumpSpec::quarter(), 0.375).unwrap(), 0.5);
        assert_eq!(bump(&h, h.a).unwrap(), 1.0);
        assert_eq!(bump(&h, h.b).unwrap(), 0.0);
    }

    #[test]
    fn negative_argument_is_a_domain_error() {
        assert!(matches!(
            bump(&BumpSpec::third(), -1e-3),
            Err(GeomError::Domain(_))
        ));
    }

    #[test]
    fn monotone_on_grid() {
        let h = BumpSpec::third();
        let mut prev = 1.0;
        for i in 0..=1000 {
            let v = h.value(i as f64 / 1000.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn flat_at_the_plateau_edges() {
        let h = BumpSpec::third();
        let e = 1e-3;
        for t in [h.a, h.b] {
            let d1 = (h.value(t + e) - h.value(t - e)) / (2.0 * e);
            let d2 = (h.value(t + e) - 2.0 * h.value(t) + h.value(t - e)) / (e * e);
            assert!(d1.abs() <= 1e-6, "d1 at {t}: {d1}");
            assert!(d2.abs() <= 1e-6, "d2 at {t}: {d2}");
        }
    }

    #[test]
    fn step_plateaus() {
        assert_eq!(smooth_step(0.05), 0.0);
        assert_eq!(smooth_step(0.95), 1.0);
        assert_eq!(smooth_step(0.5), 0.5);
    }

    #[test]
    fn rejects_bad_spec() {
        assert!(BumpSpec::new(0.0, 1.0).is_err());
        assert!(BumpSpec::new(0.5, 0.5).is_err());
        assert!(BumpSpec::new(0.25, 0.5).is_ok());
    }
}
