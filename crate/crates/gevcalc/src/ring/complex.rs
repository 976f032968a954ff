use crate::error::{Error, Result};
use crate::ring::{Rat, Scalar};
use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::ToPrimitive;

/// IEEE double complex scalar for the float backend.
///
/// The magnitude map is the true complex modulus. Inversion rejects zero and
/// non-finite inputs instead of silently producing infinities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexFloat(pub Complex64);

impl ComplexFloat {
    pub fn new(re: f64, im: f64) -> Self {
        ComplexFloat(Complex64::new(re, im))
    }

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }
}

/// Shortest round-trip decimal for one float component.
fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

impl Scalar for ComplexFloat {
    type N = f64;
    const EXACT: bool = false;

    fn zero() -> Self {
        ComplexFloat::new(0.0, 0.0)
    }
    fn one() -> Self {
        ComplexFloat::new(1.0, 0.0)
    }
    fn i() -> Self {
        ComplexFloat::new(0.0, 1.0)
    }
    fn from_i64(v: i64) -> Self {
        ComplexFloat::new(v as f64, 0.0)
    }
    fn from_biguint(v: &BigUint) -> Self {
        ComplexFloat::new(v.to_f64().unwrap_or(f64::INFINITY), 0.0)
    }
    fn from_rat_pair(re: &Rat, im: &Rat) -> Self {
        ComplexFloat::new(
            re.to_f64().unwrap_or(f64::INFINITY),
            im.to_f64().unwrap_or(f64::INFINITY),
        )
    }

    fn add(&self, o: &Self) -> Self {
        ComplexFloat(self.0 + o.0)
    }
    fn sub(&self, o: &Self) -> Self {
        ComplexFloat(self.0 - o.0)
    }
    fn mul(&self, o: &Self) -> Self {
        ComplexFloat(self.0 * o.0)
    }
    fn neg(&self) -> Self {
        ComplexFloat(-self.0)
    }
    fn conj(&self) -> Self {
        ComplexFloat(self.0.conj())
    }

    fn inv(&self) -> Result<Self> {
        let n = self.0.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::NonInvertible(format!(
                "complex float {} has no usable inverse",
                self.to_element_string()
            )));
        }
        Ok(ComplexFloat(self.0.inv()))
    }

    fn is_zero(&self) -> bool {
        self.0.re == 0.0 && self.0.im == 0.0
    }

    fn nu(&self) -> f64 {
        self.0.norm()
    }

    fn to_element_string(&self) -> String {
        let sign = if self.0.im.is_sign_negative() { '-' } else { '+' };
        format!(
            "{}{}{}*i",
            fmt_f64(self.0.re),
            sign,
            fmt_f64(self.0.im.abs())
        )
    }

    fn parse_element_string(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Validation(format!("malformed complex float: {s:?}"));
        let parse_f = |t: &str| -> Result<f64> { t.trim().parse().map_err(|_| bad()) };
        match s.strip_suffix("*i") {
            Some(body) => {
                // Last '+'/'-' that neither leads the string nor belongs to an
                // exponent ("1e-3") separates the parts.
                let bytes = body.as_bytes();
                let split = (1..bytes.len())
                    .filter(|&i| {
                        (bytes[i] == b'+' || bytes[i] == b'-')
                            && bytes[i - 1] != b'e'
                            && bytes[i - 1] != b'E'
                    })
                    .next_back();
                match split {
                    Some(pos) => {
                        let re = parse_f(&body[..pos])?;
                        let im_mag = parse_f(&body[pos + 1..])?;
                        let im = if &body[pos..pos + 1] == "-" { -im_mag } else { im_mag };
                        Ok(ComplexFloat::new(re, im))
                    }
                    None => Ok(ComplexFloat::new(0.0, parse_f(body)?)),
                }
            }
            None => Ok(ComplexFloat::new(parse_f(s)?, 0.0)),
        }
    }
}
