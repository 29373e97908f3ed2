//! Differentiable scalars.
//!
//! Smooth maps are written once against the [`Scalar`] trait and run either
//! on plain `f64` (evaluation) or on [`Dual`] numbers (forward-mode
//! derivatives). Operations that can leave their domain (`checked_div`,
//! `try_ln`, `try_sqrt`, `try_pow`) return a [`ScalarError`] naming the operation.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::maps::Body;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarError {
    #[error("scalar-domain error in `{op}` at value {value}")]
    Domain { op: &'static str, value: f64 },
    #[error("length mismatch: expected {expected} components, got {got}")]
    Length { expected: usize, got: usize },
}

impl ScalarError {
    fn domain(op: &'static str, value: f64) -> Self {
        ScalarError::Domain { op, value }
    }
}

/// The abstract differentiable scalar smooth maps are written against.
///
/// Only `f64` and [`Dual`] implement it.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + Neg<Output = Self>
{
    /// Lifts a constant.
    fn cst(v: f64) -> Self;
    fn value(self) -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn checked_div(self, rhs: Self) -> Result<Self, ScalarError>;
    fn try_ln(self) -> Result<Self, ScalarError>;
    fn try_sqrt(self) -> Result<Self, ScalarError>;
    /// `self^exponent`, defined for a positive base.
    fn try_pow(self, exponent: Self) -> Result<Self, ScalarError>;

    fn abs2(self) -> Self {
        self * self
    }

    #[doc(hidden)]
    fn run(body: &dyn Body, x: &[Self]) -> Result<Vec<Self>, ScalarError>;
}

/// Sum of squares of a slice; the smooth stand-in for a squared norm.
pub fn norm2<S: Scalar>(xs: &[S]) -> S {
    xs.iter().fold(S::cst(0.0), |acc, &x| acc + x.abs2())
}

impl Scalar for f64 {
    fn cst(v: f64) -> Self {
        v
    }
    fn value(self) -> f64 {
        self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn checked_div(self, rhs: Self) -> Result<Self, ScalarError> {
        if rhs == 0.0 {
            return Err(ScalarError::domain("div", rhs));
        }
        Ok(self / rhs)
    }
    fn try_ln(self) -> Result<Self, ScalarError> {
        if self <= 0.0 {
            return Err(ScalarError::domain("ln", self));
        }
        Ok(f64::ln(self))
    }
    fn try_sqrt(self) -> Result<Self, ScalarError> {
        if self <= 0.0 {
            return Err(ScalarError::domain("sqrt", self));
        }
        Ok(f64::sqrt(self))
    }
    fn try_pow(self, exponent: Self) -> Result<Self, ScalarError> {
        if self <= 0.0 {
            return Err(ScalarError::domain("pow", self));
        }
        Ok(f64::powf(self, exponent))
    }
    fn run(body: &dyn Body, x: &[Self]) -> Result<Vec<Self>, ScalarError> {
        body.eval_real(x)
    }
}

/// A dual number `value + deriv·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dual {
    pub value: f64,
    pub deriv: f64,
}

impl Dual {
    pub const fn new(value: f64, deriv: f64) -> Self {
        Dual { value, deriv }
    }

    pub const fn constant(value: f64) -> Self {
        Dual { value, deriv: 0.0 }
    }

    /// Applies `f` with derivative `df` by the chain rule.
    fn chain(self, f: f64, df: f64) -> Self {
        Dual::new(f, df * self.deriv)
    }
}

impl Add for Dual {
    type Output = Dual;
    fn add(self, rhs: Dual) -> Dual {
        Dual::new(self.value + rhs.value, self.deriv + rhs.deriv)
    }
}

impl Sub for Dual {
    type Output = Dual;
    fn sub(self, rhs: Dual) -> Dual {
        Dual::new(self.value - rhs.value, self.deriv - rhs.deriv)
    }
}

impl Mul for Dual {
    type Output = Dual;
    fn mul(self, rhs: Dual) -> Dual {
        Dual::new(
            self.value * rhs.value,
            self.value * rhs.deriv + self.deriv * rhs.value,
        )
    }
}

impl Mul<f64> for Dual {
    type Output = Dual;
    fn mul(self, rhs: f64) -> Dual {
        Dual::new(self.value * rhs, self.deriv * rhs)
    }
}

impl Neg for Dual {
    type Output = Dual;
    fn neg(self) -> Dual {
        Dual::new(-self.value, -self.deriv)
    }
}

impl Scalar for Dual {
    fn cst(v: f64) -> Self {
        Dual::constant(v)
    }
    fn value(self) -> f64 {
        self.value
    }
    fn sin(self) -> Self {
        self.chain(self.value.sin(), self.value.cos())
    }
    fn cos(self) -> Self {
        self.chain(self.value.cos(), -self.value.sin())
    }
    fn exp(self) -> Self {
        let e = self.value.exp();
        self.chain(e, e)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(1.0);
        }
        let df = f64::from(n) * self.value.powi(n - 1);
        self.chain(self.value.powi(n), df)
    }
    fn checked_div(self, rhs: Self) -> Result<Self, ScalarError> {
        if rhs.value == 0.0 {
            return Err(ScalarError::domain("div", rhs.value));
        }
        let q = self.value / rhs.value;
        Ok(Dual::new(q, (self.deriv - q * rhs.deriv) / rhs.value))
    }
    fn try_ln(self) -> Result<Self, ScalarError> {
        if self.value <= 0.0 {
            return Err(ScalarError::domain("ln", self.value));
        }
        Ok(self.chain(self.value.ln(), 1.0 / self.value))
    }
    fn try_sqrt(self) -> Result<Self, ScalarError> {
        if self.value <= 0.0 {
            return Err(ScalarError::domain("sqrt", self.value));
        }
        let r = self.value.sqrt();
        Ok(self.chain(r, 0.5 / r))
    }
    fn try_pow(self, exponent: Self) -> Result<Self, ScalarError> {
        if self.value <= 0.0 {
            return Err(ScalarError::domain("pow", self.value));
        }
        // d(a^b) = a^b (b' ln a + b a' / a)
        let p = self.value.powf(exponent.value);
        let deriv =
            p * (exponent.deriv * self.value.ln() + exponent.value * self.deriv / self.value);
        Ok(Dual::new(p, deriv))
    }
    fn run(body: &dyn Body, x: &[Self]) -> Result<Vec<Self>, ScalarError> {
        body.eval_dual(x)
    }
}

/// Jacobian-vector product `J_f(x) · seed` by one forward-mode pass.
pub fn derivative<F>(f: F, x: &[f64], seed: &[f64]) -> Result<Vec<f64>, ScalarError>
where
    F: Fn(&[Dual]) -> Result<Vec<Dual>, ScalarError>,
{
    if x.len() != seed.len() {
        return Err(ScalarError::Length {
            expected: x.len(),
            got: seed.len(),
        });
    }
    let seeded: Vec<Dual> = x.iter().zip(seed).map(|(&v, &d)| Dual::new(v, d)).collect();
    Ok(f(&seeded)?.into_iter().map(|d| d.deriv).collect())
}
