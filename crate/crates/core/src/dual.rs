//! Scalar abstraction used by the superoperator builders.
//!
//! Builders are written once over [`Field`] and instantiated with plain
//! complex numbers or with [`HyperDual`] numbers, which carry exact first and
//! mixed second derivatives along two seeded directions.

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub trait Field:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
{
    fn cst(z: C64) -> Self;
    fn value(&self) -> C64;
    fn exp(self) -> Self;
    fn sqrt(self) -> Self;

    fn real(x: f64) -> Self {
        Self::cst(C64::new(x, 0.0))
    }
    fn zero() -> Self {
        Self::real(0.0)
    }
    fn one() -> Self {
        Self::real(1.0)
    }
    fn scale(self, z: C64) -> Self {
        self * Self::cst(z)
    }
    fn is_exact_zero(&self) -> bool;
}

impl Field for C64 {
    fn cst(z: C64) -> Self {
        z
    }
    fn value(&self) -> C64 {
        *self
    }
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn sqrt(self) -> Self {
        Complex64::sqrt(self)
    }
    fn scale(self, z: C64) -> Self {
        self * z
    }
    fn is_exact_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
}

/// `re + e1·ε₁ + e2·ε₂ + e12·ε₁ε₂` with ε₁² = ε₂² = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperDual {
    pub re: C64,
    pub e1: C64,
    pub e2: C64,
    pub e12: C64,
}

impl HyperDual {
    pub fn new(re: C64, e1: C64, e2: C64, e12: C64) -> Self {
        HyperDual { re, e1, e2, e12 }
    }

    /// Variable with value `x` seeded with weights `w1`, `w2` in the two directions.
    pub fn var(x: C64, w1: f64, w2: f64) -> Self {
        HyperDual::new(x, c(w1, 0.0), c(w2, 0.0), C64::new(0.0, 0.0))
    }

    fn chain(self, f: C64, df: C64, ddf: C64) -> Self {
        HyperDual {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + ddf * self.e1 * self.e2,
        }
    }

    fn recip(self) -> Self {
        let f = 1.0 / self.re;
        self.chain(f, -f * f, 2.0 * f * f * f)
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        HyperDual::new(self.re + o.re, self.e1 + o.e1, self.e2 + o.e2, self.e12 + o.e12)
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        HyperDual::new(self.re - o.re, self.e1 - o.e1, self.e2 - o.e2, self.e12 - o.e12)
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        HyperDual::new(
            self.re * o.re,
            self.re * o.e1 + self.e1 * o.re,
            self.re * o.e2 + self.e2 * o.re,
            self.re * o.e12 + self.e12 * o.re + self.e1 * o.e2 + self.e2 * o.e1,
        )
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        HyperDual::new(-self.re, -self.e1, -self.e2, -self.e12)
    }
}

impl AddAssign for HyperDual {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for HyperDual {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for HyperDual {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Field for HyperDual {
    fn cst(z: C64) -> Self {
        let zero = C64::new(0.0, 0.0);
        HyperDual::new(z, zero, zero, zero)
    }
    fn value(&self) -> C64 {
        self.re
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * s * s))
    }
    fn scale(self, z: C64) -> Self {
        HyperDual::new(self.re * z, self.e1 * z, self.e2 * z, self.e12 * z)
    }
    fn is_exact_zero(&self) -> bool {
        self.re.is_exact_zero() && self.e1.is_exact_zero() && self.e2.is_exact_zero() && self.e12.is_exact_zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_sqrt_derivatives() {
        // f(x, y) = exp(x·y) at (0.3, -0.7): f_xy = (1 + xy) exp(xy)
        let x = HyperDual::var(c(0.3, 0.0), 1.0, 0.0);
        let y = HyperDual::var(c(-0.7, 0.0), 0.0, 1.0);
        let f = (x * y).exp();
        let xy = -0.21f64;
        assert!((f.e12.re - (1.0 + xy) * xy.exp()).abs() < 1e-14);
        assert!((f.e1.re - (-0.7) * xy.exp()).abs() < 1e-14);

        let z = HyperDual::var(c(2.0, 1.0), 1.0, 1.0);
        let s = z.sqrt();
        let s0 = c(2.0, 1.0).sqrt();
        assert!((s.e1 - 0.5 / s0).norm() < 1e-14);
        assert!((s.e12 + 0.25 / (s0 * s0 * s0)).norm() < 1e-14);
    }

    #[test]
    fn division_matches_quotient_rule() {
        let x = HyperDual::var(c(1.5, 0.5), 1.0, 1.0);
        let q = HyperDual::cst(c(2.0, 0.0)) / x;
        let x0 = c(1.5, 0.5);
        assert!((q.e1 + 2.0 / (x0 * x0)).norm() < 1e-13);
        assert!((q.e12 - 4.0 / (x0 * x0 * x0)).norm() < 1e-13);
    }
}
