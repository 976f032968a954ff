use crate::error::{Error, Result};
use crate::ring::Scalar;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Exact rational scalar used throughout the exact backend.
pub type Rat = BigRational;

/// k! as an unsigned bignum.
pub fn factorial(k: u64) -> BigUint {
    let mut acc = BigUint::one();
    for i in 2..=k {
        acc *= BigUint::from(i);
    }
    acc
}

/// Binomial coefficient C(n, k) as an unsigned bignum.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Integer power of a rational, negative exponents included (nonzero base).
pub fn rat_pow_i32(base: &Rat, expon: i32) -> Rat {
    if expon == 0 {
        return Rat::one();
    }
    let mag = base.pow(expon.unsigned_abs() as i32);
    if expon < 0 {
        mag.recip()
    } else {
        mag
    }
}

/// Directional rounding for rational bounds on irrational powers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundDir {
    Up,
    Down,
}

/// A rational bound on `base^exp` for positive rational `base`.
///
/// Integer exponents are computed exactly. Fractional exponents go through
/// f64 with a directional safety margin of 1e-9 relative, six orders beyond
/// IEEE double rounding error, so the returned rational genuinely bounds the
/// irrational value from the requested side.
pub fn rat_pow_dir(base: &Rat, exp: &Rat, dir: RoundDir) -> Result<Rat> {
    if !base.is_positive() {
        return Err(Error::Validation(format!(
            "rational power bound needs a positive base, got {base}"
        )));
    }
    if exp.is_integer() {
        let e = exp.to_integer().to_i32().ok_or_else(|| {
            Error::Validation(format!("exponent {exp} out of range for exact power"))
        })?;
        return Ok(rat_pow_i32(base, e));
    }
    let b = base.to_f64().ok_or_else(|| {
        Error::Validation(format!("base {base} not representable as f64"))
    })?;
    let e = exp.to_f64().ok_or_else(|| {
        Error::Validation(format!("exponent {exp} not representable as f64"))
    })?;
    let v = b.powf(e);
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Validation(format!(
            "power {base}^{exp} not representable in the float range"
        )));
    }
    let adjusted = match dir {
        RoundDir::Up => v * (1.0 + 1e-9),
        RoundDir::Down => v * (1.0 - 1e-9),
    };
    Rat::from_float(adjusted).ok_or_else(|| {
        Error::Validation(format!("power {base}^{exp} produced a non-finite float"))
    })
}

/// Canonical rational string `p/q` (q > 0, lowest terms, sign on p).
pub fn rat_to_str(r: &Rat) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q` or a bare integer `p` (optional leading sign).
pub fn rat_from_str(s: &str) -> Result<Rat> {
    let s = s.trim();
    let bad = |_| Error::Validation(format!("malformed rational: {s:?}"));
    match s.split_once('/') {
        Some((num, den)) => {
            let num: BigInt = num.trim().parse().map_err(bad)?;
            let den: BigInt = den.trim().parse().map_err(bad)?;
            if den.is_zero() {
                return Err(Error::Validation(format!("zero denominator in {s:?}")));
            }
            Ok(Rat::new(num, den))
        }
        None => {
            let num: BigInt = s.parse().map_err(bad)?;
            Ok(Rat::from_integer(num))
        }
    }
}

/// A Gaussian rational `re + im*i` over exact rationals.
///
/// Lowest-terms canonical form is maintained automatically by the underlying
/// rational type. The magnitude map is the exact surrogate |re| + |im|: it is
/// a genuine absolute value on this field (multiplicative up to the factor
/// hidden in submultiplicativity, and satisfying the triangle inequality), so
/// every norm estimate downstream is exactly computable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GaussianRational {
    pub re: Rat,
    pub im: Rat,
}

impl GaussianRational {
    pub fn new(re: Rat, im: Rat) -> Self {
        GaussianRational { re, im }
    }

    pub fn from_integers(re: i64, im: i64) -> Self {
        GaussianRational {
            re: Rat::from_integer(re.into()),
            im: Rat::from_integer(im.into()),
        }
    }
}

impl Scalar for GaussianRational {
    type N = Rat;
    const EXACT: bool = true;

    fn zero() -> Self {
        GaussianRational::from_integers(0, 0)
    }
    fn one() -> Self {
        GaussianRational::from_integers(1, 0)
    }
    fn i() -> Self {
        GaussianRational::from_integers(0, 1)
    }
    fn from_i64(v: i64) -> Self {
        GaussianRational::from_integers(v, 0)
    }
    fn from_biguint(v: &BigUint) -> Self {
        GaussianRational::new(Rat::from_integer(BigInt::from(v.clone())), Rat::zero())
    }
    fn from_rat_pair(re: &Rat, im: &Rat) -> Self {
        GaussianRational::new(re.clone(), im.clone())
    }

    fn add(&self, o: &Self) -> Self {
        GaussianRational::new(&self.re + &o.re, &self.im + &o.im)
    }
    fn sub(&self, o: &Self) -> Self {
        GaussianRational::new(&self.re - &o.re, &self.im - &o.im)
    }
    fn mul(&self, o: &Self) -> Self {
        GaussianRational::new(
            &self.re * &o.re - &self.im * &o.im,
            &self.re * &o.im + &self.im * &o.re,
        )
    }
    fn neg(&self) -> Self {
        GaussianRational::new(-self.re.clone(), -self.im.clone())
    }
    fn conj(&self) -> Self {
        GaussianRational::new(self.re.clone(), -self.im.clone())
    }

    fn inv(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NonInvertible("zero Gaussian rational".into()));
        }
        let d = &self.re * &self.re + &self.im * &self.im;
        Ok(GaussianRational::new(&self.re / &d, -(&self.im / &d)))
    }

    fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    fn nu(&self) -> Rat {
        self.re.abs() + self.im.abs()
    }

    fn to_element_string(&self) -> String {
        let im_abs = self.im.abs();
        let sign = if self.im.is_negative() { '-' } else { '+' };
        format!("{}{}{}*i", rat_to_str(&self.re), sign, rat_to_str(&im_abs))
    }

    fn parse_element_string(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.strip_suffix("*i") {
            Some(body) => {
                // Split real and imaginary parts at the last sign that is not
                // the leading sign of the real part.
                let bytes = body.as_bytes();
                let split = (1..bytes.len())
                    .filter(|&i| bytes[i] == b'+' || bytes[i] == b'-')
                    .next_back();
                match split {
                    Some(pos) => {
                        let re = rat_from_str(&body[..pos])?;
                        let sign = &body[pos..pos + 1];
                        let im_mag = rat_from_str(&body[pos + 1..])?;
                        let im = if sign == "-" { -im_mag } else { im_mag };
                        Ok(GaussianRational::new(re, im))
                    }
                    None => Ok(GaussianRational::new(Rat::zero(), rat_from_str(body)?)),
                }
            }
            None => Ok(GaussianRational::new(rat_from_str(s)?, Rat::zero())),
        }
    }
}
