//! Forward-mode dual numbers `re + eps·ε` with `ε² = 0`.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub eps: f64,
}

impl Dual {
    pub const fn new(re: f64, eps: f64) -> Self {
        Self { re, eps }
    }

    pub const fn constant(re: f64) -> Self {
        Self { re, eps: 0.0 }
    }

    pub fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Self::new(s, self.eps / (2.0 * s))
    }

    pub fn exp(self) -> Self {
        let e = self.re.exp();
        Self::new(e, self.eps * e)
    }

    pub fn ln(self) -> Self {
        Self::new(self.re.ln(), self.eps / self.re)
    }

    pub fn sin(self) -> Self {
        Self::new(self.re.sin(), self.eps * self.re.cos())
    }

    pub fn cos(self) -> Self {
        Self::new(self.re.cos(), -self.eps * self.re.sin())
    }

    pub fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::constant(1.0);
        }
        Self::new(self.re.powi(n), self.eps * f64::from(n) * self.re.powi(n - 1))
    }

    pub fn recip(self) -> Self {
        Self::new(1.0 / self.re, -self.eps / (self.re * self.re))
    }

    /// Four-quadrant arctangent of `self / x`.
    pub fn atan2(self, x: Self) -> Self {
        let r2 = self.re * self.re + x.re * x.re;
        Self::new(self.re.atan2(x.re), (x.re * self.eps - self.re * x.eps) / r2)
    }

    pub fn signum(self) -> f64 {
        self.re.signum()
    }
}

/// Lifts a slice of reals to dual numbers seeded with `direction`.
pub fn seed(p: &[f64], direction: &[f64]) -> Vec<Dual> {
    p.iter().zip(direction).map(|(&a, &d)| Dual::new(a, d)).collect()
}

/// Lifts a slice of reals to constants.
pub fn constants(p: &[f64]) -> Vec<Dual> {
    p.iter().map(|&a| Dual::constant(a)).collect()
}

/// Sum of squares of a dual slice.
pub fn norm_sq(v: &[Dual]) -> Dual {
    v.iter().fold(Dual::constant(0.0), |acc, &x| acc + x * x)
}

impl From<f64> for Dual {
    fn from(re: f64) -> Self {
        Self::constant(re)
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.eps + o.eps)
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.eps - o.eps)
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        Self::new(
            self.re / o.re,
            (self.eps * o.re - self.re * o.eps) / (o.re * o.re),
        )
    }
}

impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.eps)
    }
}

impl Add<f64> for Dual {
    type Output = Self;
    fn add(self, o: f64) -> Self {
        Self::new(self.re + o, self.eps)
    }
}

impl Sub<f64> for Dual {
    type Output = Self;
    fn sub(self, o: f64) -> Self {
        Self::new(self.re - o, self.eps)
    }
}

impl Mul<f64> for Dual {
    type Output = Self;
    fn mul(self, o: f64) -> Self {
        Self::new(self.re * o, self.eps * o)
    }
}

impl Div<f64> for Dual {
    type Output = Self;
    fn div(self, o: f64) -> Self {
        Self::new(self.re / o, self.eps / o)
    }
}

impl Add<Dual> for f64 {
    type Output = Dual;
    fn add(self, o: Dual) -> Dual {
        o + self
    }
}

impl Sub<Dual> for f64 {
    type Output = Dual;
    fn sub(self, o: Dual) -> Dual {
        Dual::new(self - o.re, -o.eps)
    }
}

impl Mul<Dual> for f64 {
    type Output = Dual;
    fn mul(self, o: Dual) -> Dual {
        o * self
    }
}

impl Div<Dual> for f64 {
    type Output = Dual;
    fn div(self, o: Dual) -> Dual {
        Dual::constant(self) / o
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Dual {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for Dual {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}
