//! Gevrey pseudonorms, sample-set norms, inequality checks, operator-norm
//! probes, certificate arithmetic, and growth-rate fitting.
//!
//! Derivatives in the x block are weighted by `s`-type factorials and the
//! xi block by `sigma`-type ones throughout. Algebraic identities run
//! exactly on the rational backend; inequalities whose constants are
//! irrational (powers of e, fractional powers of T) run in floats with a
//! pinned relative tolerance. Compact sets are represented by finite
//! sample sets of offsets around the base point, so every sup over a
//! compact becomes a max over samples.

pub mod certificate;
pub mod fit;

pub use certificate::{
    certificate_compose, certificate_from_symbol, certificate_neumann, fm_estimate, FmEstimate,
    GevreyCertificate, GrowthConstants,
};
pub use fit::{fit_growth, linear_fit, GrowthFit, LinearFit};

use crate::error::{Error, Result};
use crate::jet::{Jet, MultiIndex};
use crate::ring::{ln_factorial, NormValue, Rat, Ring, Scalar};
use crate::symbol::FormalSymbol;
use num_traits::{Signed, ToPrimitive};

/// Norm value type underlying a coefficient ring.
pub type NormOf<R> = <<R as Ring>::S as Scalar>::N;

/// Relative slack for float-backend product comparisons; the exact backend
/// compares exactly.
pub const PRODUCT_SLACK: f64 = 1e-12;

/// Relative slack for the derivative inequality. Its constants are
/// irrational, so the comparison is float on both backends.
pub const DERIVATIVE_SLACK: f64 = 1e-9;

/// The Gevrey class exponents: `s` for x-derivatives, `sigma` for
/// xi-derivatives, both at least 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GevreyParams {
    s: Rat,
    sigma: Rat,
}

impl GevreyParams {
    pub fn new(s: Rat, sigma: Rat) -> Result<Self> {
        let one = Rat::one();
        if s < one || sigma < one {
            return Err(Error::Validation(format!(
                "Gevrey exponents must be at least 1, got s = {s}, sigma = {sigma}"
            )));
        }
        Ok(GevreyParams { s, sigma })
    }

    /// The analytic class s = sigma = 1.
    pub fn analytic() -> Self {
        GevreyParams {
            s: Rat::one(),
            sigma: Rat::one(),
        }
    }

    pub fn from_integers(s: i64, sigma: i64) -> Result<Self> {
        Self::new(
            Rat::from_integer(s.into()),
            Rat::from_integer(sigma.into()),
        )
    }

    pub fn s(&self) -> &Rat {
        &self.s
    }

    pub fn sigma(&self) -> &Rat {
        &self.sigma
    }

    /// The sequence-growth exponent s + sigma - 1 governing k!-power
    /// envelopes and resummation cutoffs.
    pub fn growth_exponent(&self) -> Rat {
        &self.s + &self.sigma - Rat::one()
    }
}

/// A finite set of offsets standing in for a compact neighborhood of a
/// jet's base point.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet<S> {
    points: Vec<Vec<S>>,
}

impl<S: Scalar> SampleSet<S> {
    pub fn new(points: Vec<Vec<S>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::Validation(
                "a sample set needs at least one offset".into(),
            ));
        };
        let arity = first.len();
        if points.iter().any(|p| p.len() != arity) {
            return Err(Error::Validation(
                "sample offsets must all have the same number of components".into(),
            ));
        }
        Ok(SampleSet { points })
    }

    /// The singleton set holding only the base point itself.
    pub fn origin(arity: usize) -> Self {
        SampleSet {
            points: vec![vec![S::zero(); arity]],
        }
    }

    pub fn points(&self) -> &[Vec<S>] {
        &self.points
    }

    pub fn arity(&self) -> usize {
        self.points[0].len()
    }
}

fn rat_f64(r: &Rat) -> Result<f64> {
    ToPrimitive::to_f64(r)
        .ok_or_else(|| Error::Validation(format!("{r} is not representable as f64")))
}

fn weight_error(params: &GevreyParams) -> Error {
    Error::Validation(format!(
        "exact pseudonorms need integer Gevrey exponents, got s = {}, sigma = {}; \
         use the float backend for fractional classes",
        params.s(),
        params.sigma()
    ))
}

/// The resummation pseudonorm
///
/// ```text
/// sum_{|gamma| <= V} nu((d^gamma a)(base+at)) T^|gamma| / (|alpha|!^s |beta|!^sigma)
/// ```
///
/// where gamma = (alpha, beta) splits into x- and xi-derivative blocks.
/// The sum is finite because coefficients beyond the valid order V carry no
/// information. Exact rational on the exact backend (which requires integer
/// s, sigma); on the float backend terms accumulate in layout order, so
/// results are reproducible.
pub fn pseudonorm<R: Ring>(
    a: &Jet<R>,
    t: &Rat,
    params: &GevreyParams,
    at: &[R::S],
) -> Result<NormOf<R>> {
    if !t.is_positive() {
        return Err(Error::Validation(format!("pseudonorm needs T > 0, got {t}")));
    }
    let split = a.split();
    let tn = <NormOf<R>>::from_rat(t);
    let vals = a.derivative_values(at)?;
    let mut acc = <NormOf<R>>::zero();
    for (p, v) in vals.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let gamma = &a.layout().indices[p];
        let weight = NormValue::gevrey_weight(
            &tn,
            gamma.order(),
            gamma.x_order(split) as u64,
            gamma.xi_order(split) as u64,
            params.s(),
            params.sigma(),
        )
        .ok_or_else(|| weight_error(params))?;
        acc = acc.add(&v.nu().mul(&weight));
    }
    Ok(acc)
}

/// Max of the pseudonorm over a sample set: the engine's stand-in for the
/// sup over a compact set.
pub fn bk_norm<R: Ring>(
    a: &Jet<R>,
    samples: &SampleSet<R::S>,
    t: &Rat,
    params: &GevreyParams,
) -> Result<NormOf<R>> {
    if samples.arity() != a.split().total() {
        return Err(Error::Validation(format!(
            "sample offsets have {} components, the jet has {} variables",
            samples.arity(),
            a.split().total()
        )));
    }
    let mut best: Option<NormOf<R>> = None;
    for pt in samples.points() {
        let v = pseudonorm(a, t, params, pt)?;
        best = Some(match best {
            Some(b) if b >= v => b,
            _ => v,
        });
    }
    Ok(best.expect("sample sets are nonempty"))
}

/// Both sides of a verified inequality, returned as evidence.
#[derive(Debug, Clone)]
pub struct InequalityEvidence<N> {
    pub lhs: N,
    pub rhs: N,
}

/// Verifies submultiplicativity of the pseudonorm under the pointwise
/// product: pseudonorm(ab, T) <= pseudonorm(a, T) * pseudonorm(b, T), with
/// ab truncated to the common valid order. Exact comparison on the exact
/// backend; [`PRODUCT_SLACK`] relative on floats. A violation means a bug,
/// not bad input.
pub fn check_product_inequality<R: Ring>(
    a: &Jet<R>,
    b: &Jet<R>,
    t: &Rat,
    params: &GevreyParams,
    at: &[R::S],
) -> Result<InequalityEvidence<NormOf<R>>> {
    let ab = a.mul(b)?;
    let lhs = pseudonorm(&ab, t, params, at)?;
    let rhs = pseudonorm(a, t, params, at)?.mul(&pseudonorm(b, t, params, at)?);
    let ok = if <NormOf<R>>::EXACT {
        lhs <= rhs
    } else {
        NormValue::to_f64(&lhs) <= NormValue::to_f64(&rhs) * (1.0 + PRODUCT_SLACK)
    };
    if !ok {
        return Err(Error::InequalityViolated(format!(
            "product inequality failed: pseudonorm(ab) = {lhs:?} exceeds {rhs:?}"
        )));
    }
    Ok(InequalityEvidence { lhs, rhs })
}

/// Verifies the derivative inequality
///
/// ```text
/// pseudonorm(d_x^gamma a, T) <= (e^s (T1^{1/s} - T^{1/s})^{-s})^{|gamma|}
///                               |gamma|!^s pseudonorm(a, T1)
/// ```
///
/// for an x-block derivative gamma and T < T1. The factor involves e and
/// fractional powers, so both sides are compared as floats within
/// [`DERIVATIVE_SLACK`] relative tolerance.
pub fn check_derivative_inequality<R: Ring>(
    a: &Jet<R>,
    gamma: &MultiIndex,
    t: &Rat,
    t1: &Rat,
    params: &GevreyParams,
    at: &[R::S],
) -> Result<InequalityEvidence<f64>> {
    if t >= t1 {
        return Err(Error::Validation(format!(
            "derivative inequality needs T < T1, got T = {t}, T1 = {t1}"
        )));
    }
    if gamma.xi_order(a.split()) != 0 {
        return Err(Error::Validation(format!(
            "derivative inequality applies to x-block derivatives, got {gamma}"
        )));
    }
    let da = a.derive(gamma)?;
    let lhs = NormValue::to_f64(&pseudonorm(&da, t, params, at)?);
    let n1 = NormValue::to_f64(&pseudonorm(a, t1, params, at)?);
    let s = rat_f64(params.s())?;
    let g = gamma.order();
    let d = rat_f64(t1)?.powf(1.0 / s) - rat_f64(t)?.powf(1.0 / s);
    let ln_factor = s * (g as f64) * (1.0 - d.ln()) + s * ln_factorial(g as u64);
    let rhs = ln_factor.exp() * n1;
    if lhs > rhs * (1.0 + DERIVATIVE_SLACK) {
        return Err(Error::InequalityViolated(format!(
            "derivative inequality failed for gamma = {gamma}: {lhs} exceeds {rhs}"
        )));
    }
    Ok(InequalityEvidence { lhs, rhs })
}

/// Result of maximizing a_k = binom(b+k, b)^s theta^{b+k} over k >= 0.
#[derive(Debug, Clone, Copy)]
pub struct AkSup {
    pub max: f64,
    pub argmax: u64,
    /// Closed-form bound e^{bs} (theta^{-1/s} - 1)^{-bs}, checked against
    /// the computed maximum.
    pub bound: f64,
}

/// Brute-force maximum of a_k = binom(b+k, b)^s theta^{b+k}.
///
/// The term ratio a_{k+1}/a_k = ((b+k+1)/(k+1))^s theta decreases in k and
/// drops below 1 for k >= b / (theta^{-1/s} - 1), so the search scans a
/// margin past that point and provably sees the maximum. Ties resolve to
/// the smallest k.
pub fn ak_sup(b: u64, theta: &Rat, s: &Rat) -> Result<AkSup> {
    if !theta.is_positive() || theta >= &Rat::one() {
        return Err(Error::Validation(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    if s < &Rat::one() {
        return Err(Error::Validation(format!("s must be at least 1, got {s}")));
    }
    let tf = rat_f64(theta)?;
    let sf = rat_f64(s)?;
    let q = tf.powf(-1.0 / sf) - 1.0;
    let l = ((b as f64) / q).floor() as u64;
    let end = l + l.max(16);
    let mut max = f64::NEG_INFINITY;
    let mut argmax = 0u64;
    for k in 0..=end {
        let ln_a = sf * (ln_factorial(b + k) - ln_factorial(b) - ln_factorial(k))
            + ((b + k) as f64) * tf.ln();
        let a = ln_a.exp();
        if a > max {
            max = a;
            argmax = k;
        }
    }
    let bound = (sf * (b as f64) * (1.0 - q.ln())).exp();
    if max > bound * (1.0 + 1e-12) {
        return Err(Error::InequalityViolated(format!(
            "sequence maximum {max} exceeds its closed-form bound {bound} at b = {b}"
        )));
    }
    Ok(AkSup { max, argmax, bound })
}

/// A certified lower estimate of the operator envelope value f_m: the best
/// probe ratio bk_norm(A_m b, K, T) / bk_norm(b, K, T1) divided by the
/// defining envelope (m^m)^{s+sigma-1} (T1^{1/s} - T^{1/s})^{-sm}.
///
/// Lower estimate only: the true value is a sup over an
/// infinite-dimensional ball that finitely many probes cannot exhaust.
/// Pair it with the constructive upper bound from a certificate via
/// [`fm_estimate`].
pub fn fm_probe<R: Ring>(
    p: &FormalSymbol<R>,
    m: u32,
    samples: &SampleSet<R::S>,
    t: &Rat,
    t1: &Rat,
    probes: &[Jet<R>],
) -> Result<f64> {
    if t >= t1 {
        return Err(Error::Validation(format!(
            "fm_probe needs T < T1, got T = {t}, T1 = {t1}"
        )));
    }
    if probes.is_empty() {
        return Err(Error::Validation("fm_probe needs at least one probe".into()));
    }
    let params = p.gevrey();
    let mut best = f64::NEG_INFINITY;
    for (i, b) in probes.iter().enumerate() {
        let den = bk_norm(b, samples, t1, params)?;
        if den.is_zero() {
            return Err(Error::DegenerateProbe(format!(
                "probe {i} has zero norm on the sample set"
            )));
        }
        let amb = p.op_apply(m, b)?;
        let num = bk_norm(&amb, samples, t, params)?;
        let ratio = NormValue::to_f64(&num) / NormValue::to_f64(&den);
        if ratio > best {
            best = ratio;
        }
    }
    if m == 0 {
        return Ok(best);
    }
    let s = rat_f64(params.s())?;
    let sigma = rat_f64(params.sigma())?;
    let d = rat_f64(t1)?.powf(1.0 / s) - rat_f64(t)?.powf(1.0 / s);
    let mf = m as f64;
    let ln_env = (s + sigma - 1.0) * mf * mf.ln() - s * mf * d.ln();
    Ok(best / ln_env.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::VarSplit;
    use crate::ring::{factorial, rat_pow_i32, GaussianRational};
    use num_bigint::BigInt;
    use proptest::prelude::*;

    type Q = GaussianRational;

    fn rat(n: i64) -> Rat {
        Rat::from_integer(BigInt::from(n))
    }

    fn rat_frac(n: i64, d: i64) -> Rat {
        Rat::new(BigInt::from(n), BigInt::from(d))
    }

    fn q(n: i64) -> Q {
        <Q as Scalar>::from_i64(n)
    }

    fn q_frac(n: i64, d: i64) -> Q {
        Q::new(rat_frac(n, d), rat(0))
    }

    fn split11() -> VarSplit {
        VarSplit::new(1, 1).unwrap()
    }

    fn jet_from_monomials(base: (i64, i64), valid: u32, monos: &[(u32, u32, Q)]) -> Jet<Q> {
        let entries = monos
            .iter()
            .map(|(a, b, c)| (MultiIndex(vec![*a, *b]), c.clone()))
            .collect();
        Jet::from_parts(
            split11(),
            vec![q(base.0), q(base.1)],
            (),
            valid,
            valid,
            entries,
        )
        .unwrap()
    }

    fn origin2() -> Vec<Q> {
        vec![q(0), q(0)]
    }

    #[test]
    fn pseudonorm_of_constant_is_nu() {
        let a = Jet::constant(split11(), vec![q(2), q(5)], 3, q_frac(-3, 2)).unwrap();
        let params = GevreyParams::from_integers(2, 1).unwrap();
        for t in [rat_frac(1, 3), rat_frac(7, 3)] {
            let n = pseudonorm(&a, &t, &params, &origin2()).unwrap();
            assert_eq!(n, rat_frac(3, 2));
        }
    }

    #[test]
    fn pseudonorm_of_coordinate_is_base_plus_t() {
        // a = x about x0 = 3: the only surviving terms are j = 0 (value 3)
        // and j = 1 (derivative 1), so the norm is 3 + T for every class.
        let a: Jet<Q> = Jet::coordinate(split11(), vec![q(3), q(1)], (), 2, 0).unwrap();
        let t = rat_frac(1, 2);
        for params in [
            GevreyParams::analytic(),
            GevreyParams::from_integers(2, 2).unwrap(),
        ] {
            let n = pseudonorm(&a, &t, &params, &origin2()).unwrap();
            assert_eq!(n, rat_frac(7, 2));
        }
    }

    #[test]
    fn pseudonorm_weights_quadratic_terms_by_factorial_powers() {
        // a = x^2 about x0 = 3, so the stored polynomial is 9 + 6u + u^2.
        // The j = 2 term contributes nu(2) T^2 / 2!^s.
        let a = jet_from_monomials((3, 0), 2, &[(0, 0, q(9)), (1, 0, q(6)), (2, 0, q(1))]);
        let t = rat_frac(1, 2);
        let s1 = pseudonorm(&a, &t, &GevreyParams::analytic(), &origin2()).unwrap();
        assert_eq!(s1, rat_frac(49, 4));
        let s2 = pseudonorm(
            &a,
            &t,
            &GevreyParams::from_integers(2, 1).unwrap(),
            &origin2(),
        )
        .unwrap();
        assert_eq!(s2, rat_frac(97, 8));
    }

    #[test]
    fn pseudonorm_distinguishes_x_and_xi_blocks() {
        // x^2 is weighted by 2!^s, xi^2 by 2!^sigma; with s = 3, sigma = 2
        // the same coefficient lands on different weights.
        let params = GevreyParams::from_integers(3, 2).unwrap();
        let t = rat(1);
        let ax = jet_from_monomials((0, 0), 2, &[(2, 0, q(1))]);
        let axi = jet_from_monomials((0, 0), 2, &[(0, 2, q(1))]);
        let nx = pseudonorm(&ax, &t, &params, &origin2()).unwrap();
        let nxi = pseudonorm(&axi, &t, &params, &origin2()).unwrap();
        assert_eq!(nx, rat_frac(1, 4)); // 2 / 2!^3
        assert_eq!(nxi, rat_frac(1, 2)); // 2 / 2!^2
    }

    #[test]
    fn pseudonorm_rejects_fractional_exponents_on_exact_backend() {
        let a = Jet::constant(split11(), vec![q(0), q(0)], 2, q(1)).unwrap();
        let params = GevreyParams::new(rat_frac(3, 2), Rat::one()).unwrap();
        let err = pseudonorm(&a, &rat_frac(1, 2), &params, &origin2()).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn pseudonorm_evaluates_at_offset() {
        // a = x about base 3 evaluated at offset 1/2: value 7/2, slope 1.
        let a: Jet<Q> = Jet::coordinate(split11(), vec![q(3), q(0)], (), 2, 0).unwrap();
        let n = pseudonorm(
            &a,
            &rat_frac(1, 4),
            &GevreyParams::analytic(),
            &[q_frac(1, 2), q(0)],
        )
        .unwrap();
        assert_eq!(n, rat_frac(15, 4)); // 7/2 + 1/4
    }

    /// Independent finite-sum oracle: recompute the pseudonorm via
    /// derive + eval and explicit rational weights.
    fn brute_pseudonorm(a: &Jet<Q>, t: &Rat, params: &GevreyParams, at: &[Q]) -> Rat {
        let split = a.split();
        let s = params.s().to_integer().to_i32().unwrap();
        let sigma = params.sigma().to_integer().to_i32().unwrap();
        let mut acc = rat(0);
        let end = a.layout().len_upto(a.valid());
        for p in 0..end {
            let gamma = a.layout().indices[p].clone();
            let v = a.derive(&gamma).unwrap().eval(at).unwrap();
            let j = gamma.order();
            let fx = Rat::from_integer(factorial(gamma.x_order(split) as u64).into());
            let fxi = Rat::from_integer(factorial(gamma.xi_order(split) as u64).into());
            let weight =
                rat_pow_i32(t, j as i32) / (rat_pow_i32(&fx, s) * rat_pow_i32(&fxi, sigma));
            acc += Scalar::nu(&v) * weight;
        }
        acc
    }

    #[test]
    fn bk_norm_over_grid_matches_brute_force() {
        let a = jet_from_monomials(
            (0, 0),
            3,
            &[
                (0, 0, q(1)),
                (1, 0, q(2)),
                (0, 1, q(-1)),
                (1, 1, q_frac(1, 2)),
                (2, 1, q(3)),
            ],
        );
        let params = GevreyParams::from_integers(2, 1).unwrap();
        let t = rat_frac(1, 3);
        let mut pts = Vec::new();
        for i in -1..=1 {
            for j in -1..=1 {
                pts.push(vec![q(i), q(j)]);
            }
        }
        let samples = SampleSet::new(pts.clone()).unwrap();
        let got = bk_norm(&a, &samples, &t, &params).unwrap();
        let brute = pts
            .iter()
            .map(|pt| brute_pseudonorm(&a, &t, &params, pt))
            .max()
            .unwrap();
        assert_eq!(got, brute);
    }

    #[test]
    fn bk_norm_is_monotone_in_the_sample_set() {
        let a = jet_from_monomials((0, 0), 2, &[(1, 0, q(5)), (0, 2, q(-2))]);
        let params = GevreyParams::analytic();
        let t = rat_frac(1, 2);
        let small = SampleSet::new(vec![origin2(), vec![q(1), q(0)]]).unwrap();
        let big = SampleSet::new(vec![
            origin2(),
            vec![q(1), q(0)],
            vec![q(1), q(1)],
            vec![q(-1), q(2)],
        ])
        .unwrap();
        let ns = bk_norm(&a, &small, &t, &params).unwrap();
        let nb = bk_norm(&a, &big, &t, &params).unwrap();
        assert!(ns <= nb);
    }

    #[test]
    fn bk_norm_of_singleton_equals_pseudonorm() {
        let a = jet_from_monomials((1, 2), 2, &[(1, 1, q(4))]);
        let params = GevreyParams::from_integers(1, 3).unwrap();
        let t = rat_frac(2, 5);
        let off = vec![q_frac(1, 2), q(-1)];
        let samples = SampleSet::new(vec![off.clone()]).unwrap();
        assert_eq!(
            bk_norm(&a, &samples, &t, &params).unwrap(),
            pseudonorm(&a, &t, &params, &off).unwrap()
        );
    }

    #[test]
    fn polynomial_pseudonorm_respects_geometric_envelope() {
        // a = 5 + x + x^2 xi^2 at the origin. Its derivative magnitudes obey
        // nu(d^gamma a) <= C R^{|gamma|} alpha! beta! with C = 5, R = 1, so
        // the pseudonorm must stay below C (1 - RT)^{-2n} for T < 1.
        let a = jet_from_monomials((0, 0), 6, &[(0, 0, q(5)), (1, 0, q(1)), (2, 2, q(1))]);
        let params = GevreyParams::analytic();
        let c = rat(5);
        for t in [rat_frac(1, 4), rat_frac(1, 2), rat_frac(3, 4)] {
            let n = pseudonorm(&a, &t, &params, &origin2()).unwrap();
            let bound = &c * rat_pow_i32(&(Rat::one() - &t), -2);
            assert!(n <= bound, "pseudonorm {n} exceeds {bound} at T = {t}");
        }
    }

    #[test]
    fn product_inequality_frozen_coordinate_case() {
        // a = b = x about x0 = 1, T = 1/2. Analytic class gives equality
        // 9/4 = 9/4; s = 2 weakens the quadratic term to 17/8 < 18/8.
        let a: Jet<Q> = Jet::coordinate(split11(), vec![q(1), q(0)], (), 2, 0).unwrap();
        let t = rat_frac(1, 2);
        let ev1 =
            check_product_inequality(&a, &a, &t, &GevreyParams::analytic(), &origin2()).unwrap();
        assert_eq!(ev1.lhs, rat_frac(9, 4));
        assert_eq!(ev1.rhs, rat_frac(9, 4));
        let ev2 = check_product_inequality(
            &a,
            &a,
            &t,
            &GevreyParams::from_integers(2, 1).unwrap(),
            &origin2(),
        )
        .unwrap();
        assert_eq!(ev2.lhs, rat_frac(17, 8));
        assert_eq!(ev2.rhs, rat_frac(9, 4));
    }

    #[test]
    fn product_inequality_with_real_constant_is_equality() {
        let c = Jet::constant(split11(), vec![q(0), q(0)], 3, q(-2)).unwrap();
        let b = jet_from_monomials((0, 0), 3, &[(1, 0, q(3)), (0, 2, q(-1)), (1, 1, q(2))]);
        let params = GevreyParams::from_integers(2, 2).unwrap();
        let ev = check_product_inequality(&c, &b, &rat_frac(1, 3), &params, &origin2()).unwrap();
        assert_eq!(ev.lhs, ev.rhs);
    }

    #[test]
    fn derivative_inequality_frozen_case() {
        // a = x^2 about 0, gamma = (1,0), s = sigma = 1, T = 1/4, T1 = 1/2:
        // lhs = 2T = 1/2 and rhs = e * (T1-T)^{-1} * pseudonorm(a, T1) = e.
        let a = jet_from_monomials((0, 0), 2, &[(2, 0, q(1))]);
        let gamma = MultiIndex(vec![1, 0]);
        let ev = check_derivative_inequality(
            &a,
            &gamma,
            &rat_frac(1, 4),
            &rat_frac(1, 2),
            &GevreyParams::analytic(),
            &origin2(),
        )
        .unwrap();
        assert!((ev.lhs - 0.5).abs() < 1e-15);
        assert!((ev.rhs - std::f64::consts::E).abs() < 1e-12);
    }

    #[test]
    fn derivative_inequality_gamma_zero_is_t_monotonicity() {
        let a = jet_from_monomials((1, -1), 3, &[(1, 0, q(2)), (0, 2, q(5)), (2, 1, q(-3))]);
        let gamma = MultiIndex(vec![0, 0]);
        let params = GevreyParams::from_integers(2, 1).unwrap();
        let ev = check_derivative_inequality(
            &a,
            &gamma,
            &rat_frac(1, 5),
            &rat_frac(1, 2),
            &params,
            &origin2(),
        )
        .unwrap();
        let n1 = pseudonorm(&a, &rat_frac(1, 2), &params, &origin2()).unwrap();
        assert!((ev.rhs - NormValue::to_f64(&n1)).abs() < 1e-12);
        assert!(ev.lhs <= ev.rhs);
    }

    #[test]
    fn derivative_inequality_across_classes() {
        let jets = [
            jet_from_monomials((0, 0), 4, &[(0, 0, q(1)), (2, 1, q(-4)), (1, 3, q(2))]),
            jet_from_monomials((2, 1), 4, &[(1, 0, q(7)), (0, 4, q(1)), (3, 1, q_frac(1, 3))]),
        ];
        let gammas = [MultiIndex(vec![1, 0]), MultiIndex(vec![2, 0])];
        for s in 1..=3 {
            let params = GevreyParams::from_integers(s, 2).unwrap();
            for a in &jets {
                for gamma in &gammas {
                    check_derivative_inequality(
                        a,
                        gamma,
                        &rat_frac(1, 5),
                        &rat_frac(1, 2),
                        &params,
                        &origin2(),
                    )
                    .unwrap();
                }
            }
        }
    }

    #[test]
    fn derivative_inequality_rejects_xi_derivatives() {
        let a = jet_from_monomials((0, 0), 2, &[(0, 2, q(1))]);
        let err = check_derivative_inequality(
            &a,
            &MultiIndex(vec![0, 1]),
            &rat_frac(1, 4),
            &rat_frac(1, 2),
            &GevreyParams::analytic(),
            &origin2(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn ak_sup_frozen_window_case() {
        // b = 3, theta = 1/2, s = 2: maximum binom(10,3)^2 / 2^10 = 14.0625
        // at k = 7, which is exactly the ratio-test window edge.
        let sup = ak_sup(3, &rat_frac(1, 2), &rat(2)).unwrap();
        assert_eq!(sup.argmax, 7);
        assert!((sup.max - 14.0625).abs() < 1e-9 * 14.0625);
        assert!(sup.max <= sup.bound);
    }

    #[test]
    fn ak_sup_b_zero_is_one_at_zero() {
        let sup = ak_sup(0, &rat_frac(1, 2), &rat(3)).unwrap();
        assert_eq!(sup.argmax, 0);
        assert_eq!(sup.max, 1.0);
    }

    #[test]
    fn ak_sup_tiny_theta_peaks_at_zero() {
        let sup = ak_sup(2, &rat_frac(1, 100), &rat(1)).unwrap();
        assert_eq!(sup.argmax, 0);
        assert!((sup.max - 1e-4).abs() < 1e-16);
    }

    #[test]
    fn ak_sup_grid_matches_brute_force_and_bound() {
        for b in 0..=10u64 {
            for theta in [rat_frac(1, 4), rat_frac(1, 2), rat_frac(3, 4)] {
                for s in 1..=3i64 {
                    let sup = ak_sup(b, &theta, &rat(s)).unwrap();
                    let tf = ToPrimitive::to_f64(&theta).unwrap();
                    let sf = s as f64;
                    let mut brute = f64::NEG_INFINITY;
                    for k in 0..=100u64 {
                        let ln_a = sf
                            * (ln_factorial(b + k) - ln_factorial(b) - ln_factorial(k))
                            + ((b + k) as f64) * tf.ln();
                        brute = brute.max(ln_a.exp());
                    }
                    assert!(
                        (sup.max - brute).abs() <= 1e-9 * brute,
                        "window search missed the brute-force maximum at b={b}, theta={theta}, s={s}"
                    );
                    assert!(sup.max <= sup.bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn fm_probe_of_identity_is_one() {
        let p = FormalSymbol::<Q>::identity(
            GevreyParams::analytic(),
            split11(),
            vec![q(0), q(0)],
            (),
            4,
            0,
        )
        .unwrap();
        let probes = vec![
            Jet::constant(split11(), vec![q(0), q(0)], 4, q(2)).unwrap(),
            Jet::coordinate(split11(), vec![q(0), q(0)], (), 4, 0).unwrap(),
        ];
        let samples = SampleSet::origin(2);
        let got = fm_probe(&p, 0, &samples, &rat_frac(1, 4), &rat_frac(1, 2), &probes).unwrap();
        assert_eq!(got, 1.0);
    }

    #[test]
    fn fm_probe_of_xi_independent_symbol_is_single_term() {
        // p = 1 + h x with base x0 = 1: A_1 b = p_1 b, so with the constant
        // probe 1 the ratio is bk(p_1, T) = 1 + T and the envelope divisor
        // is (T1 - T)^{-1}; at T = 1/4, T1 = 1/2 the estimate is 5/16.
        let base = vec![q(1), q(0)];
        let p0 = Jet::constant(split11(), base.clone(), 3, q(1)).unwrap();
        let p1 = Jet::coordinate(split11(), base.clone(), (), 3, 0).unwrap();
        let p = FormalSymbol::new(GevreyParams::analytic(), vec![p0, p1]).unwrap();
        let probes = vec![Jet::constant(split11(), base, 3, q(1)).unwrap()];
        let samples = SampleSet::origin(2);
        let got = fm_probe(&p, 1, &samples, &rat_frac(1, 4), &rat_frac(1, 2), &probes).unwrap();
        assert!((got - 0.3125).abs() < 1e-12);
    }

    #[test]
    fn fm_probe_rejects_zero_probe() {
        let p = FormalSymbol::<Q>::identity(
            GevreyParams::analytic(),
            split11(),
            vec![q(0), q(0)],
            (),
            3,
            0,
        )
        .unwrap();
        let probes = vec![Jet::zero(split11(), vec![q(0), q(0)], (), 3).unwrap()];
        let samples = SampleSet::origin(2);
        let err =
            fm_probe(&p, 0, &samples, &rat_frac(1, 4), &rat_frac(1, 2), &probes).unwrap_err();
        assert!(matches!(err, Error::DegenerateProbe(_)));
    }

    #[test]
    fn fm_probe_requires_t_below_t1() {
        let p = FormalSymbol::<Q>::identity(
            GevreyParams::analytic(),
            split11(),
            vec![q(0), q(0)],
            (),
            3,
            0,
        )
        .unwrap();
        let probes = vec![Jet::constant(split11(), vec![q(0), q(0)], 3, q(1)).unwrap()];
        let samples = SampleSet::origin(2);
        let err =
            fm_probe(&p, 0, &samples, &rat_frac(1, 2), &rat_frac(1, 2), &probes).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn sample_sets_validate_shape() {
        assert!(SampleSet::<Q>::new(vec![]).is_err());
        assert!(SampleSet::new(vec![vec![q(1)], vec![q(1), q(2)]]).is_err());
        let s = SampleSet::<Q>::origin(2);
        assert_eq!(s.arity(), 2);
        assert_eq!(s.points().len(), 1);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// Exact submultiplicativity on random rational jets across classes.
        #[test]
        fn product_inequality_holds_on_random_jets(
            a_coeffs in proptest::collection::vec(-4i64..=4, 9),
            b_coeffs in proptest::collection::vec(-4i64..=4, 9),
            s in 1i64..=3,
            sigma in 1i64..=2,
        ) {
            let monos_a: Vec<(u32, u32, Q)> = a_coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| ((i % 3) as u32, (i / 3) as u32, q(c)))
                .collect();
            let monos_b: Vec<(u32, u32, Q)> = b_coeffs
                .iter()
                .enumerate()
                .map(|(i, &c)| ((i / 3) as u32, (i % 3) as u32, q(c)))
                .collect();
            let a = jet_from_monomials((1, -1), 4, &monos_a);
            let b = jet_from_monomials((1, -1), 4, &monos_b);
            let params = GevreyParams::from_integers(s, sigma).unwrap();
            for t in [rat_frac(1, 4), rat_frac(1, 2), rat_frac(3, 4)] {
                check_product_inequality(&a, &b, &t, &params, &origin2()).unwrap();
            }
        }
    }
}
