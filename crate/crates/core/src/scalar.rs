//! Field types used for path weights: `f64`, `Complex64` and a binary
//! multiprecision float with a compile-time mantissa.

use crate::error::{Error, Result};
use crate::C64;
use dashu_float::FBig;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn from_real(x: f64) -> Self;
    /// Fails for types that cannot hold a nonzero imaginary part.
    fn from_complex(z: C64) -> Result<Self>;
    fn to_c64(&self) -> C64;
    fn abs_f64(&self) -> f64 {
        self.to_c64().norm()
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_real(x: f64) -> Self {
        x
    }
    fn from_complex(z: C64) -> Result<Self> {
        if z.im != 0.0 {
            return Err(Error::Invalid(format!(
                "complex hopping value {z} in a real computation"
            )));
        }
        Ok(z.re)
    }
    fn to_c64(&self) -> C64 {
        C64::new(*self, 0.0)
    }
    fn abs_f64(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn from_complex(z: C64) -> Result<Self> {
        Ok(z)
    }
    fn to_c64(&self) -> C64 {
        *self
    }
}

/// Real multiprecision float carrying `BITS` bits of mantissa.
#[derive(Clone, Debug, PartialEq)]
pub struct HighPrec<const BITS: usize>(pub FBig);

/// Default high-precision mode: 192 bits, about 57 decimal digits.
pub type High = HighPrec<192>;

impl<const BITS: usize> HighPrec<BITS> {
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().value()
    }

    fn lift(x: f64) -> FBig {
        FBig::try_from(x)
            .expect("finite f64")
            .with_precision(BITS)
            .value()
    }

    fn fix(v: FBig) -> Self {
        HighPrec(v.with_precision(BITS).value())
    }
}

impl<const BITS: usize> Add for HighPrec<BITS> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::fix(self.0 + o.0)
    }
}

impl<const BITS: usize> Sub for HighPrec<BITS> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::fix(self.0 - o.0)
    }
}

impl<const BITS: usize> Mul for HighPrec<BITS> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::fix(self.0 * o.0)
    }
}

impl<const BITS: usize> Div for HighPrec<BITS> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        Self::fix(self.0 / o.0)
    }
}

impl<const BITS: usize> Neg for HighPrec<BITS> {
    type Output = Self;
    fn neg(self) -> Self {
        HighPrec(-self.0)
    }
}

impl<const BITS: usize> Scalar for HighPrec<BITS> {
    fn zero() -> Self {
        HighPrec(Self::lift(0.0))
    }
    fn one() -> Self {
        HighPrec(Self::lift(1.0))
    }
    fn from_real(x: f64) -> Self {
        HighPrec(Self::lift(x))
    }
    fn from_complex(z: C64) -> Result<Self> {
        if z.im != 0.0 {
            return Err(Error::Invalid(format!(
                "complex hopping value {z} in a real computation"
            )));
        }
        Ok(Self::from_real(z.re))
    }
    fn to_c64(&self) -> C64 {
        C64::new(self.to_f64(), 0.0)
    }
}
