//! Number types the simplex can pivot over: hardware doubles and exact
//! rationals behind one trait. Every f64 is itself a rational, so the
//! exact backend reproduces the floating-point instance bit-for-bit on
//! the input side and solves it without roundoff.

use num::bigint::BigInt;
use num::rational::Ratio;
use num::ToPrimitive;

pub type BigRational = Ratio<BigInt>;

pub trait LpScalar: Clone + PartialOrd + std::fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    /// Exact conversion: the rational backend represents the double's
    /// mantissa/exponent value, not a decimal approximation.
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;
    fn is_zero(&self) -> bool;
    /// Pivot magnitude threshold.
    fn pivot_eps() -> Self;
    /// Reduced-cost threshold for entering columns.
    fn entering_eps() -> Self;
    /// Phase-1 objective tolerance separating feasible from infeasible.
    fn feas_eps() -> Self;
    /// How often to rebuild the basis inverse from scratch; `None` for
    /// exact arithmetic where nothing drifts.
    fn refactor_interval() -> Option<usize>;
}

impl LpScalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn pivot_eps() -> Self {
        1e-10
    }
    fn entering_eps() -> Self {
        1e-9
    }
    fn feas_eps() -> Self {
        1e-8
    }
    fn refactor_interval() -> Option<usize> {
        Some(64)
    }
}

impl LpScalar for BigRational {
    fn zero() -> Self {
        num::Zero::zero()
    }
    fn one() -> Self {
        num::One::one()
    }
    fn from_f64(x: f64) -> Self {
        Ratio::from_float(x).expect("finite LP datum")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        if self < &<Self as LpScalar>::zero() {
            -self
        } else {
            self.clone()
        }
    }
    fn is_zero(&self) -> bool {
        num::Zero::is_zero(self)
    }
    fn pivot_eps() -> Self {
        <Self as LpScalar>::zero()
    }
    fn entering_eps() -> Self {
        <Self as LpScalar>::zero()
    }
    fn feas_eps() -> Self {
        <Self as LpScalar>::zero()
    }
    fn refactor_interval() -> Option<usize> {
        None
    }
}
