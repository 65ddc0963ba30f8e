//! Numeric backends.
//!
//! Chain parameters are stored as [`Number`]: either an exact rational or a
//! double. Algorithms are generic over [`Scalar`], implemented for `f64` and
//! [`BigRational`], so the same code runs tolerance-free on rational chains and
//! in double precision on float tables.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

use crate::error::ChainError;

/// A chain parameter: exact rational or double.
#[derive(Clone, Debug, PartialEq)]
pub enum Number {
    Exact(BigRational),
    Float(f64),
}

impl Number {
    pub fn ratio(numer: i64, denom: i64) -> Self {
        Number::Exact(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn integer(value: i64) -> Self {
        Number::Exact(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn half() -> Self {
        Number::ratio(1, 2)
    }

    pub fn one() -> Self {
        Number::integer(1)
    }

    pub fn zero() -> Self {
        Number::integer(0)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Number::Exact(_))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(q) => rational_to_f64(q),
            Number::Float(x) => *x,
        }
    }

    /// Exact value; doubles convert to their dyadic rational.
    pub fn to_rational(&self) -> Option<BigRational> {
        match self {
            Number::Exact(q) => Some(q.clone()),
            Number::Float(x) => BigRational::from_float(*x),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Number::Exact(q) => q.is_zero(),
            Number::Float(x) => *x == 0.0,
        }
    }

    pub fn is_positive(&self) -> bool {
        match self {
            Number::Exact(q) => q.is_positive(),
            Number::Float(x) => *x > 0.0,
        }
    }

    pub fn one_minus(&self) -> Number {
        &Number::one() - self
    }

    fn binary(
        &self,
        rhs: &Number,
        exact: impl Fn(&BigRational, &BigRational) -> BigRational,
        float: impl Fn(f64, f64) -> f64,
    ) -> Number {
        match (self, rhs) {
            (Number::Exact(a), Number::Exact(b)) => Number::Exact(exact(a, b)),
            _ => Number::Float(float(self.to_f64(), rhs.to_f64())),
        }
    }
}

impl PartialOrd for Number {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Number::Exact(a), Number::Exact(b)) => Some(a.cmp(b)),
            _ => self.to_f64().partial_cmp(&other.to_f64()),
        }
    }
}

impl<'a> Add<&'a Number> for &'a Number {
    type Output = Number;
    fn add(self, rhs: &Number) -> Number {
        self.binary(rhs, |a, b| a + b, |a, b| a + b)
    }
}

impl<'a> Sub<&'a Number> for &'a Number {
    type Output = Number;
    fn sub(self, rhs: &Number) -> Number {
        self.binary(rhs, |a, b| a - b, |a, b| a - b)
    }
}

impl<'a> Mul<&'a Number> for &'a Number {
    type Output = Number;
    fn mul(self, rhs: &Number) -> Number {
        self.binary(rhs, |a, b| a * b, |a, b| a * b)
    }
}

impl<'a> Div<&'a Number> for &'a Number {
    type Output = Number;
    fn div(self, rhs: &Number) -> Number {
        self.binary(rhs, |a, b| a / b, |a, b| a / b)
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(q) if q.is_integer() => write!(f, "{}", q.numer()),
            Number::Exact(q) => write!(f, "{}/{}", q.numer(), q.denom()),
            Number::Float(x) => write!(f, "{x:?}"),
        }
    }
}

impl FromStr for Number {
    type Err = ChainError;

    /// Parses `"a/b"` or `"a"` as an exact rational.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ChainError::BadNumber(s.to_string());
        let s_trim = s.trim();
        let (numer, denom) = match s_trim.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s_trim, "1"),
        };
        let numer = BigInt::from_str(numer).map_err(|_| bad())?;
        let denom = BigInt::from_str(denom).map_err(|_| bad())?;
        if denom.is_zero() {
            return Err(bad());
        }
        Ok(Number::Exact(BigRational::new(numer, denom)))
    }
}

/// Lossy conversion that survives numerators and denominators beyond `f64` range.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if let Some(x) = ToPrimitive::to_f64(q) {
        if x.is_finite() && (x != 0.0 || q.is_zero()) {
            return x;
        }
    }
    // Scale both parts down to 1024-bit windows before dividing.
    let sign = if q.is_negative() { -1.0 } else { 1.0 };
    let numer = q.numer().abs();
    let denom = q.denom().clone();
    let nb = numer.bits() as i64;
    let db = denom.bits() as i64;
    let ns = (nb - 1000).max(0);
    let ds = (db - 1000).max(0);
    let n = (&numer >> ns as usize).to_f64().unwrap_or(f64::INFINITY);
    let d = (&denom >> ds as usize).to_f64().unwrap_or(f64::INFINITY);
    sign * (n / d) * 2f64.powi((ns - ds).clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// Arithmetic backend for the generic algorithms.
pub trait Scalar: Num + Clone + PartialOrd + fmt::Debug + Send + Sync + 'static {
    /// Whether arithmetic in this backend is exact.
    const EXACT: bool;

    fn from_number(value: &Number) -> Self;

    fn from_u64(value: u64) -> Self;

    fn to_f64(&self) -> f64;

    fn to_number(&self) -> Number;

    /// Sum of a sequence. Doubles use compensated summation.
    fn sum_all<I: IntoIterator<Item = Self>>(items: I) -> Self {
        items.into_iter().fold(Self::zero(), |acc, x| acc + x)
    }
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_number(value: &Number) -> Self {
        value.to_f64()
    }

    fn from_u64(value: u64) -> Self {
        value as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_number(&self) -> Number {
        Number::Float(*self)
    }

    fn sum_all<I: IntoIterator<Item = Self>>(items: I) -> Self {
        let mut acc = NeumaierSum::default();
        for x in items {
            acc.add(x);
        }
        acc.value()
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_number(value: &Number) -> Self {
        match value {
            Number::Exact(q) => q.clone(),
            Number::Float(x) => BigRational::from_float(*x).unwrap_or_else(BigRational::zero),
        }
    }

    fn from_u64(value: u64) -> Self {
        BigRational::from_integer(BigInt::from(value))
    }

    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }

    fn to_number(&self) -> Number {
        Number::Exact(self.clone())
    }
}

/// Kahan-Babuska-Neumaier compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// A nonnegative quantity that may be `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub enum ExtendedValue<S> {
    Finite(S),
    PosInfinity,
}

impl<S: Scalar> ExtendedValue<S> {
    pub fn is_infinite(&self) -> bool {
        matches!(self, ExtendedValue::PosInfinity)
    }

    pub fn finite(&self) -> Option<&S> {
        match self {
            ExtendedValue::Finite(v) => Some(v),
            ExtendedValue::PosInfinity => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            ExtendedValue::Finite(v) => v.to_f64(),
            ExtendedValue::PosInfinity => f64::INFINITY,
        }
    }

    pub fn to_number(&self) -> Option<Number> {
        self.finite().map(Scalar::to_number)
    }
}

impl<S: Scalar> fmt::Display for ExtendedValue<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedValue::Finite(v) => write!(f, "{}", v.to_number()),
            ExtendedValue::PosInfinity => f.write_str("+inf"),
        }
    }
}
