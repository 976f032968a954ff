//! Growth certificates: constructive envelopes on a symbol's coefficient
//! norms and on the operator norms its composition action induces, closed
//! under composition and Neumann inversion.
//!
//! A certificate asserts two things about a symbol p on a sample set K.
//! First, the coefficient envelope: bk_norm(p_k, K, T0/2) stays below
//! C R^k k!^{s+sigma-1}. Second, the operator envelope: the order-m piece
//! A_m of composition by p, acting between pseudonorm scales T < T1 <= T0,
//! has normalized norm f_m bounded by the stored `f_seq` prefix and, past
//! the prefix, by c1^{1+m} (or by zero when the certificate is finite).
//! All certificate arithmetic is exact rational; every irrational constant
//! in the underlying estimates enters through a rational upper bound, so
//! envelopes only ever widen.

use super::{bk_norm, fit_growth, fm_probe, rat_f64, GevreyParams, SampleSet};
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::ring::{
    factorial, rat_from_str, rat_pow_dir, rat_pow_i32, rat_to_str, NormValue, Rat, Ring, RoundDir,
};
use crate::symbol::FormalSymbol;
use num_bigint::BigInt;
use num_traits::Signed;
use serde_json::{json, Value};

/// Supplied growth constants for a symbol known to obey
/// bk_norm(p_k) <= C R^k k!^{s+sigma-1} on the sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthConstants {
    pub c: Rat,
    pub r: Rat,
}

/// How a certificate's norm bound is structured. Each constructor stores
/// the exact shape its estimate derives, so `norm_upper` reproduces that
/// estimate instead of re-majorizing through a lossier envelope.
#[derive(Debug, Clone, PartialEq)]
enum NormShape {
    /// Prefix `f_seq` plus, when not finite, the geometric tail
    /// c1^{1+m} rho^m summed past the prefix.
    Series { finite: bool },
    /// Composition of two certified operators; the bound is the product of
    /// the factors' bounds.
    Product(Box<GevreyCertificate>, Box<GevreyCertificate>),
    /// Neumann series sum_j r^j of a certified remainder; the bound is
    /// 1/(1 - nu) with nu the inner bound, required below 1/2.
    Neumann(Box<GevreyCertificate>),
}

/// A Gevrey growth certificate. Constructed by [`certificate_from_symbol`]
/// and closed under [`certificate_compose`] and [`certificate_neumann`];
/// all stored data is exact rational.
///
/// `(c, r)` are authoritative for certificates built directly from a
/// symbol, where construction inflates them until the coefficient envelope
/// provably holds on the sample set. Composition and inversion propagate
/// them as bookkeeping only; their operator content lives in `f_seq`, `c1`
/// and the norm shape.
#[derive(Debug, Clone, PartialEq)]
pub struct GevreyCertificate {
    params: GevreyParams,
    c: Rat,
    r: Rat,
    t0: Rat,
    c1: Rat,
    f_seq: Vec<Rat>,
    exponential: bool,
    shape: NormShape,
    fitted_exponent: Option<f64>,
    fit_residual: Option<f64>,
}

fn rat_u(n: u64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Rational upper bound for e: 27182818284590456 / 10^16. Exceeds e by
/// less than 6e-17, and rounding up only widens upper envelopes.
fn e_upper() -> Rat {
    Rat::new(
        BigInt::from(27182818284590456u64),
        BigInt::from(10u64).pow(16),
    )
}

/// k!^{expon} as an exact rational when the exponent is an integer, and a
/// directional rational bound otherwise.
fn factorial_pow(k: u64, expon: &Rat, dir: RoundDir) -> Result<Rat> {
    let f = Rat::from_integer(factorial(k).into());
    rat_pow_dir(&f, expon, dir)
}

/// The largest admissible T0 for the class: 2^{-(max(s, sigma) + 1)} / R.
/// The power of two is rounded up, so the window only shrinks.
fn t0_window(params: &GevreyParams, r: &Rat) -> Result<Rat> {
    let expon = std::cmp::max(params.s().clone(), params.sigma().clone()) + Rat::one();
    let two_pow = rat_pow_dir(&rat_u(2), &expon, RoundDir::Up)?;
    Ok(Rat::one() / (two_pow * r))
}

fn exponential_flag(f_seq: &[Rat], c1: &Rat) -> bool {
    f_seq
        .iter()
        .enumerate()
        .all(|(m, f)| f <= &rat_pow_i32(c1, m as i32 + 1))
}

impl GevreyCertificate {
    pub fn params(&self) -> &GevreyParams {
        &self.params
    }

    pub fn c(&self) -> &Rat {
        &self.c
    }

    pub fn r(&self) -> &Rat {
        &self.r
    }

    pub fn t0(&self) -> &Rat {
        &self.t0
    }

    pub fn c1(&self) -> &Rat {
        &self.c1
    }

    /// Stored prefix of operator-envelope bounds; [`Self::f_at`] extends it.
    pub fn f_seq(&self) -> &[Rat] {
        &self.f_seq
    }

    /// Whether every stored f_seq entry sits below c1^{1+m}.
    pub fn is_exponential(&self) -> bool {
        self.exponential
    }

    /// Finite certificates claim f_m = 0 past their prefix; products are
    /// finite exactly when both factors are.
    pub fn is_finite(&self) -> bool {
        match &self.shape {
            NormShape::Series { finite } => *finite,
            NormShape::Product(a, b) => a.is_finite() && b.is_finite(),
            NormShape::Neumann(_) => false,
        }
    }

    pub fn fitted_exponent(&self) -> Option<f64> {
        self.fitted_exponent
    }

    pub fn fit_residual(&self) -> Option<f64> {
        self.fit_residual
    }

    /// The claimed bound on f_m: the stored prefix where available, zero
    /// past a finite prefix, c1^{1+m} past an infinite one.
    pub fn f_at(&self, m: usize) -> Rat {
        if let Some(f) = self.f_seq.get(m) {
            return f.clone();
        }
        if self.is_finite() {
            Rat::zero()
        } else {
            rat_pow_i32(&self.c1, m as i32 + 1)
        }
    }

    /// The coefficient envelope C R^k k!^{s+sigma-1}, rounded up when the
    /// factorial power is irrational.
    pub fn envelope_at(&self, k: u32) -> Result<Rat> {
        let fp = factorial_pow(k as u64, &self.params.growth_exponent(), RoundDir::Up)?;
        Ok(&self.c * rat_pow_i32(&self.r, k as i32) * fp)
    }

    /// Upper bound for the certified operator's norm at composition radius
    /// rho: sum_m f_m rho^m, evaluated through the certificate's shape.
    /// Errors when the bound diverges at this radius (infinite series with
    /// rho c1 >= 1, or a Neumann inner bound reaching 1/2).
    pub fn norm_upper(&self, rho: &Rat) -> Result<Rat> {
        if !rho.is_positive() {
            return Err(Error::Validation(format!(
                "norm bounds need a positive radius, got {rho}"
            )));
        }
        match &self.shape {
            NormShape::Series { finite } => {
                let mut acc = Rat::zero();
                for (m, f) in self.f_seq.iter().enumerate() {
                    acc += f * rat_pow_i32(rho, m as i32);
                }
                if *finite {
                    return Ok(acc);
                }
                let x = rho * &self.c1;
                if x >= Rat::one() {
                    return Err(Error::Validation(format!(
                        "norm bound diverges: radius {rho} is outside 1/c1 = 1/({})",
                        self.c1
                    )));
                }
                let n1 = self.f_seq.len() as i32;
                let tail = &self.c1 * rat_pow_i32(&x, n1) / (Rat::one() - &x);
                Ok(acc + tail)
            }
            NormShape::Product(a, b) => Ok(a.norm_upper(rho)? * b.norm_upper(rho)?),
            NormShape::Neumann(inner) => {
                let nu = inner.norm_upper(rho)?;
                if nu >= Rat::new(BigInt::from(1), BigInt::from(2)) {
                    return Err(Error::Validation(format!(
                        "Neumann bound needs the remainder below 1/2 at radius {rho}, got {nu}"
                    )));
                }
                Ok(Rat::one() / (Rat::one() - nu))
            }
        }
    }

    /// Serializes to the interchange schema. Rationals are canonical `p/q`
    /// strings; the recursive `form` field preserves how the norm bound is
    /// structured so round trips keep composition and inversion exact.
    pub fn to_json(&self) -> Value {
        let form = match &self.shape {
            NormShape::Series { finite } => json!({ "kind": "series", "finite": finite }),
            NormShape::Product(a, b) => {
                json!({ "kind": "product", "left": a.to_json(), "right": b.to_json() })
            }
            NormShape::Neumann(inner) => json!({ "kind": "neumann", "inner": inner.to_json() }),
        };
        json!({
            "C": rat_to_str(&self.c),
            "R": rat_to_str(&self.r),
            "T0": rat_to_str(&self.t0),
            "s": rat_to_str(self.params.s()),
            "sigma": rat_to_str(self.params.sigma()),
            "f_seq": self.f_seq.iter().map(rat_to_str).collect::<Vec<_>>(),
            "exponent": self.fitted_exponent,
            "residual": self.fit_residual,
            "c1": rat_to_str(&self.c1),
            "exponential": self.exponential,
            "form": form,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Validation("certificate JSON must be an object".into()))?;
        let get = |key: &str| {
            obj.get(key)
                .ok_or_else(|| Error::Validation(format!("certificate JSON lacks {key:?}")))
        };
        let get_rat = |key: &str| {
            get(key)?
                .as_str()
                .ok_or_else(|| Error::Validation(format!("certificate field {key:?} must be a rational string")))
                .and_then(rat_from_str)
        };
        let params = GevreyParams::new(get_rat("s")?, get_rat("sigma")?)?;
        let f_seq = get("f_seq")?
            .as_array()
            .ok_or_else(|| Error::Validation("certificate f_seq must be an array".into()))?
            .iter()
            .map(|e| {
                e.as_str()
                    .ok_or_else(|| {
                        Error::Validation("certificate f_seq entries must be rational strings".into())
                    })
                    .and_then(rat_from_str)
            })
            .collect::<Result<Vec<_>>>()?;
        let exponential = get("exponential")?
            .as_bool()
            .ok_or_else(|| Error::Validation("certificate field \"exponential\" must be a bool".into()))?;
        let form = get("form")?;
        let kind = form
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Validation("certificate form needs a \"kind\" string".into()))?;
        let shape = match kind {
            "series" => NormShape::Series {
                finite: form.get("finite").and_then(Value::as_bool).ok_or_else(|| {
                    Error::Validation("series form needs a \"finite\" bool".into())
                })?,
            },
            "product" => {
                let left = form.get("left").ok_or_else(|| {
                    Error::Validation("product form needs \"left\"".into())
                })?;
                let right = form.get("right").ok_or_else(|| {
                    Error::Validation("product form needs \"right\"".into())
                })?;
                NormShape::Product(
                    Box::new(Self::from_json(left)?),
                    Box::new(Self::from_json(right)?),
                )
            }
            "neumann" => {
                let inner = form.get("inner").ok_or_else(|| {
                    Error::Validation("neumann form needs \"inner\"".into())
                })?;
                NormShape::Neumann(Box::new(Self::from_json(inner)?))
            }
            other => {
                return Err(Error::Validation(format!(
                    "unknown certificate form kind {other:?}"
                )))
            }
        };
        Ok(GevreyCertificate {
            params,
            c: get_rat("C")?,
            r: get_rat("R")?,
            t0: get_rat("T0")?,
            c1: get_rat("c1")?,
            f_seq,
            exponential,
            shape,
            fitted_exponent: get("exponent")?.as_f64(),
            fit_residual: get("residual")?.as_f64(),
        })
    }
}

/// Builds a certificate for a symbol on a sample set.
///
/// With `growth` supplied, (C, R) are taken as given; otherwise they are
/// fitted from the coefficient norms at a preliminary anchor (at least
/// seven orders are needed for the fit, else [`Error::MissingGrowthData`]).
/// Either way the pipeline then clamps T0 to the class window
/// 2^{-(max(s,sigma)+1)}/R, re-measures the norms at the final anchor
/// T0/2, and inflates C until bk_norm(p_k) <= C R^k k!^{s+sigma-1} holds
/// for every stored order, so the coefficient envelope is a theorem about
/// the sample set rather than a fit's opinion. The operator envelope then
/// follows the composition estimate: f_m <= c1^{1+m} with
///
/// ```text
/// c1 = max(2^{2n} C, 2^n 2^sigma e^s n^s R max(1, T0))
/// ```
///
/// except that orders below the symbol's first nonzero coefficient give
/// f_m = 0 exactly. A symbol that is a single constant collapses to a
/// finite certificate whose only bound is that constant's norm.
pub fn certificate_from_symbol<R: Ring>(
    p: &FormalSymbol<R>,
    samples: &SampleSet<R::S>,
    t0: &Rat,
    growth: Option<&GrowthConstants>,
) -> Result<GevreyCertificate> {
    if !t0.is_positive() {
        return Err(Error::Validation(format!(
            "certificate window must be positive, got T0 = {t0}"
        )));
    }
    let params = p.gevrey().clone();
    let coeffs = p.coeffs();
    let expon = params.growth_exponent();

    let tail_zero = coeffs[1..].iter().all(Jet::is_zero);
    let head_constant = coeffs[0]
        .iter_valid()
        .all(|(idx, v)| idx.order() == 0 || v.is_zero());
    if tail_zero && head_constant {
        // Constant symbol: A_0 multiplies by the constant and every higher
        // A_m vanishes, so the certificate is finite with a single bound.
        let r = growth.map(|g| g.r.clone()).unwrap_or_else(Rat::one);
        let t0_final = t0.clone().min(t0_window(&params, &r)?);
        let anchor = &t0_final / rat_u(2);
        let m0 = NormValue::to_rat(&bk_norm(&coeffs[0], samples, &anchor, &params)?);
        let c_base = growth.map(|g| g.c.clone()).unwrap_or_else(Rat::one);
        let c = c_base.max(m0.clone()).max(Rat::one());
        let c1 = m0.clone().max(Rat::one());
        let mut f_seq = vec![Rat::zero(); coeffs.len()];
        f_seq[0] = m0;
        let exponential = exponential_flag(&f_seq, &c1);
        return Ok(GevreyCertificate {
            params,
            c,
            r,
            t0: t0_final,
            c1,
            f_seq,
            exponential,
            shape: NormShape::Series { finite: true },
            fitted_exponent: None,
            fit_residual: None,
        });
    }

    let (c_growth, r_growth, fitted_exponent, fit_residual) = match growth {
        Some(g) => {
            if !g.c.is_positive() || !g.r.is_positive() {
                return Err(Error::Validation(format!(
                    "growth constants must be positive, got C = {}, R = {}",
                    g.c, g.r
                )));
            }
            (g.c.clone(), g.r.clone(), None, None)
        }
        None => {
            let prelim = t0 / rat_u(2);
            let mut norms = Vec::with_capacity(coeffs.len());
            for pk in coeffs {
                norms.push(NormValue::to_f64(&bk_norm(pk, samples, &prelim, &params)?));
            }
            let fit = fit_growth(&norms, &params).map_err(|e| {
                Error::MissingGrowthData(format!(
                    "no growth constants supplied and fitting them failed: {e}"
                ))
            })?;
            let to_rat = |x: f64, what: &str| {
                Rat::from_float(x).ok_or_else(|| {
                    Error::MissingGrowthData(format!("fitted {what} {x} is not a finite number"))
                })
            };
            (
                to_rat(fit.fitted_c, "C")?,
                to_rat(fit.fitted_r, "R")?,
                Some(fit.fitted_exponent),
                Some(fit.residual),
            )
        }
    };

    let t0_final = t0.clone().min(t0_window(&params, &r_growth)?);
    let anchor = &t0_final / rat_u(2);

    // Inflate C until the coefficient envelope holds at the anchor. The
    // factorial power rounds down here, which pushes the required C up,
    // so the published envelope (which rounds up) stays above every norm.
    let mut c_cert = c_growth;
    for (k, pk) in coeffs.iter().enumerate() {
        let mk = NormValue::to_rat(&bk_norm(pk, samples, &anchor, &params)?);
        if mk.is_zero() {
            continue;
        }
        let den =
            rat_pow_i32(&r_growth, k as i32) * factorial_pow(k as u64, &expon, RoundDir::Down)?;
        c_cert = c_cert.max(mk / den);
    }

    let n = p.split().n_x.max(1) as u64;
    let arm1 = rat_pow_i32(&rat_u(2), 2 * n as i32) * &c_cert;
    let arm2 = rat_pow_i32(&rat_u(2), n as i32)
        * rat_pow_dir(&rat_u(2), params.sigma(), RoundDir::Up)?
        * rat_pow_dir(&e_upper(), params.s(), RoundDir::Up)?
        * rat_pow_dir(&rat_u(n), params.s(), RoundDir::Up)?
        * &r_growth
        * Rat::one().max(t0_final.clone());
    let c1 = arm1.max(arm2);

    let k0 = coeffs.iter().position(|pk| !pk.is_zero()).unwrap_or(0);
    let f_seq: Vec<Rat> = (0..coeffs.len())
        .map(|m| {
            if m < k0 {
                Rat::zero()
            } else {
                rat_pow_i32(&c1, m as i32 + 1)
            }
        })
        .collect();
    let exponential = exponential_flag(&f_seq, &c1);

    Ok(GevreyCertificate {
        params,
        c: c_cert,
        r: r_growth,
        t0: t0_final,
        c1,
        f_seq,
        exponential,
        shape: NormShape::Series { finite: false },
        fitted_exponent,
        fit_residual,
    })
}

/// Certifies the composition of two certified operators at radius rho.
///
/// Both inputs must share Gevrey parameters and window, and rho must sit
/// inside both norm bounds' convergence regions; any mismatch is
/// [`Error::IncompatibleCertificates`]. The composed prefix is the exact
/// convolution of the factors' envelope-extended sequences, long enough
/// (degree N_A + N_B) that every later order is pure tail. The composed
/// c1 is chosen so that tail orders still obey f_k <= c1^{1+k}: against a
/// finite factor the other side's c1 is rescaled by the finite prefix's
/// weighted sum, which in particular leaves composition with a constant
/// certificate exactly neutral; between infinite factors it is
/// max(c1_A c1_B, 2 max(c1_A, c1_B)), absorbing the k+1 convolution terms
/// into the doubling.
pub fn certificate_compose(
    ca: &GevreyCertificate,
    cb: &GevreyCertificate,
    rho: &Rat,
) -> Result<GevreyCertificate> {
    if ca.params != cb.params {
        return Err(Error::IncompatibleCertificates(format!(
            "Gevrey parameters differ: ({}, {}) against ({}, {})",
            ca.params.s(),
            ca.params.sigma(),
            cb.params.s(),
            cb.params.sigma()
        )));
    }
    if ca.t0 != cb.t0 {
        return Err(Error::IncompatibleCertificates(format!(
            "certificate windows differ: T0 = {} against {}",
            ca.t0, cb.t0
        )));
    }
    for (side, cert) in [("left", ca), ("right", cb)] {
        cert.norm_upper(rho).map_err(|e| {
            Error::IncompatibleCertificates(format!(
                "{side} certificate does not converge at radius {rho}: {e}"
            ))
        })?;
    }

    let na = ca.f_seq.len() - 1;
    let nb = cb.f_seq.len() - 1;
    let f_seq: Vec<Rat> = (0..=na + nb)
        .map(|k| (0..=k).map(|m| ca.f_at(m) * cb.f_at(k - m)).sum())
        .collect();

    let weighted_prefix_sum = |fin: &GevreyCertificate, c1_other: &Rat| {
        let s: Rat = fin
            .f_seq
            .iter()
            .enumerate()
            .map(|(l, f)| f * rat_pow_i32(c1_other, -(l as i32)))
            .sum();
        s.max(Rat::one())
    };
    let c1 = if cb.is_finite() {
        &ca.c1 * weighted_prefix_sum(cb, &ca.c1)
    } else if ca.is_finite() {
        &cb.c1 * weighted_prefix_sum(ca, &cb.c1)
    } else {
        let prod = &ca.c1 * &cb.c1;
        let twice_max = rat_u(2) * ca.c1.clone().max(cb.c1.clone());
        prod.max(twice_max)
    };
    let exponential = exponential_flag(&f_seq, &c1);

    Ok(GevreyCertificate {
        params: ca.params.clone(),
        c: &ca.c * &cb.c,
        r: ca.r.clone().max(cb.r.clone()),
        t0: ca.t0.clone(),
        c1,
        f_seq,
        exponential,
        shape: NormShape::Product(Box::new(ca.clone()), Box::new(cb.clone())),
        fitted_exponent: None,
        fit_residual: None,
    })
}

/// Certifies the Neumann series sum_j r^j of a certified remainder at
/// radius rho. Requires the remainder's norm bound nu below 1/2 there;
/// the series then sums below 1/(1 - nu) <= 2, and each order inherits
/// f_k <= bound / rho^k because the orders of a nonnegative series cannot
/// exceed its sum.
pub fn certificate_neumann(cr: &GevreyCertificate, rho: &Rat) -> Result<GevreyCertificate> {
    let nu = cr.norm_upper(rho)?;
    let half = Rat::new(BigInt::from(1), BigInt::from(2));
    if nu >= half {
        return Err(Error::Validation(format!(
            "Neumann inversion needs the remainder norm below 1/2 at radius {rho}, got {nu}"
        )));
    }
    let bound = Rat::one() / (Rat::one() - &nu);
    let f_seq: Vec<Rat> = (0..cr.f_seq.len())
        .map(|k| &bound * rat_pow_i32(rho, -(k as i32)))
        .collect();
    let c1 = bound.clone().max(Rat::one() / rho);
    let exponential = exponential_flag(&f_seq, &c1);
    Ok(GevreyCertificate {
        params: cr.params.clone(),
        c: bound,
        r: Rat::one() / rho,
        t0: cr.t0.clone(),
        c1,
        f_seq,
        exponential,
        shape: NormShape::Neumann(Box::new(cr.clone())),
        fitted_exponent: None,
        fit_residual: None,
    })
}

/// Two-sided evidence about the operator envelope value f_m.
#[derive(Debug, Clone, Copy)]
pub struct FmEstimate {
    /// Best probe ratio: a certified lower bound.
    pub lower: f64,
    /// The certificate's claimed envelope at order m.
    pub upper: f64,
}

/// Pairs the probe lower bound for f_m with a certificate's upper bound.
/// The probe scales (T, T1) must sit inside the certificate window.
pub fn fm_estimate<R: Ring>(
    p: &FormalSymbol<R>,
    cert: &GevreyCertificate,
    m: u32,
    samples: &SampleSet<R::S>,
    t: &Rat,
    t1: &Rat,
    probes: &[Jet<R>],
) -> Result<FmEstimate> {
    if p.gevrey() != cert.params() {
        return Err(Error::Validation(
            "symbol and certificate carry different Gevrey parameters".into(),
        ));
    }
    if t1 > cert.t0() {
        return Err(Error::Validation(format!(
            "probe scale T1 = {t1} exceeds the certificate window T0 = {}",
            cert.t0()
        )));
    }
    let lower = fm_probe(p, m, samples, t, t1, probes)?;
    let upper = rat_f64(&cert.f_at(m as usize))?;
    Ok(FmEstimate { lower, upper })
}
