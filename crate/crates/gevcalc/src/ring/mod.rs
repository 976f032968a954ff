//! Coefficient rings for the calculus: exact Gaussian rationals, complex
//! floats, and square matrices over either.
//!
//! The engine is generic over [`Ring`]. A ring element knows its own shape
//! (unit for scalars, the dimension for matrices), so jets can manufacture
//! zeros and identities matching their coefficients without threading
//! dimension arguments everywhere.

mod complex;
mod matrix;
mod rational;

pub use complex::ComplexFloat;
pub use matrix::{SquareMatrix, INVERSE_RESIDUAL_TOL};
pub use rational::{
    binomial, factorial, rat_from_str, rat_pow_dir, rat_pow_i32, rat_to_str, GaussianRational,
    Rat, RoundDir,
};

use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use std::fmt::Debug;

/// Magnitude values produced by [`Scalar::nu`]: exact nonnegative rationals
/// in exact mode, nonnegative floats in float mode.
///
/// The trait carries exactly the arithmetic the pseudonorm and certificate
/// machinery needs. `gevrey_weight` returns `None` when the weight is
/// irrational and the value type cannot represent it (exact backend with
/// fractional s or sigma); callers turn that into a validation error.
pub trait NormValue: Clone + PartialOrd + Debug + Send + Sync + 'static {
    /// True for the exact rational implementation.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_u64(v: u64) -> Self;
    fn from_rat(q: &Rat) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    /// Division; callers must ensure `o` is nonzero.
    fn div(&self, o: &Self) -> Self;
    fn powi(&self, k: u32) -> Self;
    fn to_f64(&self) -> f64;
    /// Exact rational image of the value. Rationals pass through; floats
    /// convert by their exact binary expansion, so no rounding happens in
    /// either direction.
    fn to_rat(&self) -> Rat;
    fn is_zero(&self) -> bool;

    /// The pseudonorm weight `T^j / (ax!^s * bxi!^sigma)` where `ax`, `bxi`
    /// are the lengths of the x- and xi-derivative blocks at level `j`.
    fn gevrey_weight(t: &Self, j: u32, ax: u64, bxi: u64, s: &Rat, sigma: &Rat) -> Option<Self>;
}

impl NormValue for Rat {
    const EXACT: bool = true;

    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_u64(v: u64) -> Self {
        Rat::from_integer(v.into())
    }
    fn from_rat(q: &Rat) -> Self {
        q.clone()
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn powi(&self, k: u32) -> Self {
        rat_pow_i32(self, k as i32)
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::INFINITY)
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }

    fn to_rat(&self) -> Rat {
        self.clone()
    }

    fn gevrey_weight(t: &Self, j: u32, ax: u64, bxi: u64, s: &Rat, sigma: &Rat) -> Option<Self> {
        let s = rational_exponent_as_u32(s)?;
        let sigma = rational_exponent_as_u32(sigma)?;
        let num = rat_pow_i32(t, j as i32);
        let fx = Rat::from_integer(factorial(ax).into());
        let fxi = Rat::from_integer(factorial(bxi).into());
        Some(num / (rat_pow_i32(&fx, s as i32) * rat_pow_i32(&fxi, sigma as i32)))
    }
}

fn rational_exponent_as_u32(e: &Rat) -> Option<u32> {
    if !e.is_integer() {
        return None;
    }
    e.to_integer().to_u32()
}

impl NormValue for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_u64(v: u64) -> Self {
        v as f64
    }
    fn from_rat(q: &Rat) -> Self {
        ToPrimitive::to_f64(q).unwrap_or(f64::INFINITY)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn powi(&self, k: u32) -> Self {
        f64::powi(*self, k as i32)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn to_rat(&self) -> Rat {
        Rat::from_float(*self).unwrap_or_else(|| num_traits::Zero::zero())
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }

    fn gevrey_weight(t: &Self, j: u32, ax: u64, bxi: u64, s: &Rat, sigma: &Rat) -> Option<Self> {
        if *t == 0.0 {
            return Some(if j == 0 { 1.0 } else { 0.0 });
        }
        let s = <f64 as NormValue>::from_rat(s);
        let sigma = <f64 as NormValue>::from_rat(sigma);
        let ln = (j as f64) * t.ln() - s * ln_factorial(ax) - sigma * ln_factorial(bxi);
        Some(ln.exp())
    }
}

/// Natural log of k!, summed directly (k stays small in this engine).
pub fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|i| (i as f64).ln()).sum()
}

/// A scalar coefficient: a field element with a magnitude map `nu`.
///
/// `nu` is submultiplicative and satisfies the triangle inequality; the exact
/// backend uses the surrogate |Re| + |Im| (exactly computable), the float
/// backend the true complex modulus.
pub trait Scalar: Clone + PartialEq + Debug + Send + Sync + 'static {
    type N: NormValue;

    /// True when arithmetic is exact (no rounding anywhere).
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    /// The imaginary unit.
    fn i() -> Self;
    fn from_i64(v: i64) -> Self;
    fn from_biguint(v: &BigUint) -> Self;
    /// Build `re + im*i` from exact rationals (float backend rounds).
    fn from_rat_pair(re: &Rat, im: &Rat) -> Self;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn conj(&self) -> Self;
    fn inv(&self) -> Result<Self>;
    fn is_zero(&self) -> bool;
    fn nu(&self) -> Self::N;

    /// Canonical string form (see the I/O module docs for the grammar).
    fn to_element_string(&self) -> String;
    fn parse_element_string(s: &str) -> Result<Self>;
}

/// A coefficient ring: scalars themselves, or square matrices over scalars.
///
/// All constructors take a [`Ring::Shape`] so matrix-valued jets can build
/// zeros/identities of the right dimension; the scalar shape is `()`.
pub trait Ring: Clone + PartialEq + Debug + Send + Sync + 'static {
    type S: Scalar;
    type Shape: Copy + Eq + Debug + Send + Sync;

    fn shape(&self) -> Self::Shape;
    fn zeros(shape: Self::Shape) -> Self;
    fn one(shape: Self::Shape) -> Self;
    /// `s * identity`.
    fn from_scalar(shape: Self::Shape, s: &Self::S) -> Self;
    /// `i^k * identity`, with negative exponents folded mod 4.
    fn i_pow(shape: Self::Shape, k: i64) -> Self {
        let k = k.rem_euclid(4);
        let s = match k {
            0 => Scalar::one(),
            1 => Scalar::i(),
            2 => Scalar::neg(&Scalar::one()),
            _ => Scalar::neg(&Scalar::i()),
        };
        Self::from_scalar(shape, &s)
    }

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Left scalar multiple (scalars are central, so sidedness is moot).
    fn scale(&self, s: &Self::S) -> Self;
    fn is_zero(&self) -> bool;

    /// Magnitude: `nu` itself for scalars, the induced max-column-sum of
    /// entrywise `nu` for matrices.
    fn nu(&self) -> <Self::S as Scalar>::N;
    /// Exact inverse (exact mode) or residual-checked inverse (float mode).
    fn inv(&self) -> Result<Self>;
    /// Conjugate transpose (plain conjugation for scalars).
    fn adjoint(&self) -> Self;

    /// JSON form: a string for scalars, row-major nested arrays for matrices.
    fn to_json(&self) -> serde_json::Value;
    /// Inverse of [`Ring::to_json`]; the shape is inferred from the value.
    fn from_json(v: &serde_json::Value) -> Result<Self>;

    /// `nu(self - o) <= tol * max(1, nu(o))`, the float-mode comparison used
    /// by identity checks; exact mode callers usually compare with `==`.
    fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        let diff = self.sub(o).nu().to_f64();
        diff <= tol * f64::max(1.0, o.nu().to_f64())
    }
}

/// Every scalar is a ring over itself with trivial shape.
impl<S: Scalar> Ring for S {
    type S = S;
    type Shape = ();

    fn shape(&self) -> () {}
    fn zeros(_: ()) -> Self {
        Scalar::zero()
    }
    fn one(_: ()) -> Self {
        Scalar::one()
    }
    fn from_scalar(_: (), s: &S) -> Self {
        s.clone()
    }
    fn add(&self, o: &Self) -> Self {
        Scalar::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Scalar::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Scalar::mul(self, o)
    }
    fn neg(&self) -> Self {
        Scalar::neg(self)
    }
    fn scale(&self, s: &S) -> Self {
        Scalar::mul(self, s)
    }
    fn is_zero(&self) -> bool {
        Scalar::is_zero(self)
    }
    fn nu(&self) -> S::N {
        Scalar::nu(self)
    }
    fn inv(&self) -> Result<Self> {
        Scalar::inv(self)
    }
    fn adjoint(&self) -> Self {
        self.conj()
    }
    fn to_json(&self) -> serde_json::Value {
        serde_json::Value::String(self.to_element_string())
    }
    fn from_json(v: &serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::String(s) => S::parse_element_string(s),
            other => Err(Error::Validation(format!(
                "expected a scalar element string, got {other}"
            ))),
        }
    }
}
