//! Exact arithmetic in a real quadratic field.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::BigInt;
use num_integer::{Integer, Roots};
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{LabError, Result};

/// Scalar type for interval lengths.
pub trait Length: Clone + fmt::Debug + PartialEq {
    fn zero() -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn minus(&self, other: &Self) -> Self;
    fn divide(&self, other: &Self) -> Self;
    fn to_f64(&self) -> f64;
    fn is_positive(&self) -> bool;
    /// Order of `self` against `other`, or `None` when the two are tied on
    /// the scale `total`.
    fn compare(&self, other: &Self, total: &Self) -> Option<Ordering>;
}

/// Relative tie tolerance for floating lengths.
pub const TIE_TOLERANCE: f64 = 1e-14;

impl Length for f64 {
    fn zero() -> Self {
        0.0
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn minus(&self, other: &Self) -> Self {
        self - other
    }
    fn divide(&self, other: &Self) -> Self {
        self / other
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn is_positive(&self) -> bool {
        *self > 0.0
    }
    fn compare(&self, other: &Self, total: &Self) -> Option<Ordering> {
        if (self - other).abs() <= TIE_TOLERANCE * total {
            None
        } else {
            self.partial_cmp(other)
        }
    }
}

/// `(a + b sqrt(d)) / c` with `c > 0` and `gcd(a, b, c) = 1`.
#[derive(Clone, PartialEq, Eq)]
pub struct QuadraticSurd {
    a: BigInt,
    b: BigInt,
    c: BigInt,
    d: u64,
}

impl fmt::Debug for QuadraticSurd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}*sqrt({}))/{}", self.a, self.b, self.d, self.c)
    }
}

impl QuadraticSurd {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>, c: impl Into<BigInt>, d: u64) -> Result<Self> {
        let (a, b, c) = (a.into(), b.into(), c.into());
        if c.is_zero() {
            return Err(LabError::Invalid("zero denominator".into()));
        }
        if !b.is_zero() && d.sqrt() * d.sqrt() == d {
            return Err(LabError::Invalid(format!("{d} is a perfect square")));
        }
        Ok(Self::reduced(a, b, c, d))
    }

    pub fn integer(n: i64) -> Self {
        Self::reduced(n.into(), BigInt::zero(), BigInt::one(), 0)
    }

    fn reduced(mut a: BigInt, mut b: BigInt, mut c: BigInt, d: u64) -> Self {
        if c.is_negative() {
            a = -a;
            b = -b;
            c = -c;
        }
        let g = a.gcd(&b).gcd(&c);
        if !g.is_one() && !g.is_zero() {
            a /= &g;
            b /= &g;
            c /= &g;
        }
        let d = if b.is_zero() { 0 } else { d };
        QuadraticSurd { a, b, c, d }
    }

    fn field(&self, other: &Self) -> u64 {
        match (self.d, other.d) {
            (0, d) | (d, 0) => d,
            (d, e) => {
                assert_eq!(d, e, "surds from different quadratic fields");
                d
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let d = self.field(o);
        Self::reduced(&self.a * &o.c + &o.a * &self.c, &self.b * &o.c + &o.b * &self.c, &self.c * &o.c, d)
    }

    pub fn neg(&self) -> Self {
        QuadraticSurd { a: -&self.a, b: -&self.b, c: self.c.clone(), d: self.d }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        let d = self.field(o);
        let bd = BigInt::from(d);
        Self::reduced(&self.a * &o.a + &self.b * &o.b * bd, &self.a * &o.b + &o.a * &self.b, &self.c * &o.c, d)
    }

    /// Panics on division by zero.
    pub fn div(&self, o: &Self) -> Self {
        let d = self.field(o);
        let norm = &o.a * &o.a - &o.b * &o.b * BigInt::from(d);
        assert!(!norm.is_zero(), "division by zero surd");
        let conj = QuadraticSurd { a: o.a.clone(), b: -&o.b, c: BigInt::one(), d };
        let num = self.mul(&conj);
        Self::reduced(num.a * &o.c, num.b * &o.c, num.c * norm, d)
    }

    pub fn signum(&self) -> Ordering {
        let sa = self.a.sign();
        let sb = self.b.sign();
        use num_bigint::Sign::*;
        let pick = |s| match s {
            Plus => Ordering::Greater,
            Minus => Ordering::Less,
            NoSign => Ordering::Equal,
        };
        match (sa, sb) {
            (_, NoSign) => pick(sa),
            (NoSign, _) => pick(sb),
            _ if sa == sb => pick(sa),
            _ => {
                let a2 = &self.a * &self.a;
                let b2d = &self.b * &self.b * BigInt::from(self.d);
                if a2 > b2d {
                    pick(sa)
                } else {
                    pick(sb)
                }
            }
        }
    }

    /// `floor` of the value.
    pub fn floor(&self) -> BigInt {
        let approx = BigInt::from(self.to_f64().floor() as i64);
        // Correct the float guess exactly.
        let mut k = approx;
        while self.sub(&Self::reduced(k.clone(), BigInt::zero(), BigInt::one(), 0)).signum() == Ordering::Less {
            k -= 1;
        }
        while self.sub(&Self::reduced(&k + 1, BigInt::zero(), BigInt::one(), 0)).signum() != Ordering::Less {
            k += 1;
        }
        k
    }
}

impl Length for QuadraticSurd {
    fn zero() -> Self {
        Self::integer(0)
    }
    fn plus(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn minus(&self, other: &Self) -> Self {
        self.sub(other)
    }
    fn divide(&self, other: &Self) -> Self {
        self.div(other)
    }
    /// Evaluated without cancellation between the rational and irrational
    /// parts.
    fn to_f64(&self) -> f64 {
        let f = |x: &BigInt| x.to_f64().unwrap_or(f64::NAN);
        let root = (self.d as f64).sqrt();
        let c = f(&self.c);
        if self.a.sign() == self.b.sign() || self.a.is_zero() || self.b.is_zero() {
            return (f(&self.a) + f(&self.b) * root) / c;
        }
        let norm = &self.a * &self.a - &self.b * &self.b * BigInt::from(self.d);
        f(&norm) / (c * (f(&self.a) - f(&self.b) * root))
    }
    fn is_positive(&self) -> bool {
        self.signum() == Ordering::Greater
    }
    fn compare(&self, other: &Self, _total: &Self) -> Option<Ordering> {
        match self.sub(other).signum() {
            Ordering::Equal => None,
            o => Some(o),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(a: i64, b: i64, c: i64, d: u64) -> QuadraticSurd {
        QuadraticSurd::new(a, b, c, d).unwrap()
    }

    #[test]
    fn field_arithmetic() {
        let phi = s(1, 1, 2, 5);
        // phi^2 = phi + 1
        assert_eq!(phi.mul(&phi), phi.add(&QuadraticSurd::integer(1)));
        assert_eq!(QuadraticSurd::integer(1).div(&phi), phi.sub(&QuadraticSurd::integer(1)));
        assert!((phi.to_f64() - 1.618033988749895).abs() < 1e-15);
        assert_eq!(phi.floor(), BigInt::from(1));
        assert_eq!(s(-3, 1, 1, 13).signum(), Ordering::Greater);
        assert_eq!(s(-4, 1, 1, 13).signum(), Ordering::Less);
    }

    #[test]
    fn cancellation_free_conversion() {
        // (sqrt 2 - 1)^20 is tiny and has huge coefficients.
        let mut x = QuadraticSurd::integer(1);
        let base = s(-1, 1, 1, 2);
        for _ in 0..20 {
            x = x.mul(&base);
        }
        let expected = (2f64.sqrt() - 1.0).powi(20);
        assert!((x.to_f64() / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_squares_are_rejected() {
        assert!(QuadraticSurd::new(1, 1, 1, 9).is_err());
        assert!(QuadraticSurd::new(1, 1, 0, 2).is_err());
    }

    #[test]
    fn float_ties_are_relative() {
        assert_eq!(0.5f64.compare(&(0.5 + 1e-16), &1.0), None);
        assert_eq!(0.5f64.compare(&0.4, &1.0), Some(Ordering::Greater));
    }
}
