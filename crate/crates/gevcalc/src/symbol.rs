//! Formal symbols p = sum_k h^k p_k, their composition product, infinite
//! order differential operators, parametrix construction, and truncated
//! resummation representatives.
//!
//! Every coefficient p_k is a [`Jet`] over the same base point and variable
//! split (x block and xi block of equal length). Composition follows
//!
//! ```text
//! (p # q)_k = sum_{|alpha| + a + b = k} (1/alpha!) i^{-|alpha|}
//!             (d_xi^alpha p_a) (d_x^alpha q_b)
//! ```
//!
//! with the convention D_x = i^{-1} d_x folded into the i power, and matrix
//! factors multiplied in the written order (left factor from p). Truncation
//! is tracked through jet valid orders: the valid order of a composed
//! coefficient is the minimum over contributing terms, computed by the jet
//! operations themselves. Float-mode sums follow a fixed order (k ascending,
//! then |alpha| ascending, then the p index ascending, then alpha in
//! lexicographic order), so results are identical across runs.

use crate::error::{Error, Result};
use crate::gevrey::GevreyParams;
use crate::jet::{Jet, MultiIndex, VarSplit};
use crate::ring::{Rat, Ring, Scalar};
use num_traits::ToPrimitive;

/// Tolerance for the float-mode agreement check between left and right
/// parametrices in two-sided mode (exact mode compares exactly).
pub const TWO_SIDED_TOL: f64 = 1e-10;

/// A formal symbol: the h-coefficient jets p_0 ..= p_N plus the Gevrey
/// class it is asserted to belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalSymbol<R: Ring> {
    gevrey: GevreyParams,
    coeffs: Vec<Jet<R>>,
}

/// A composed symbol together with the per-order valid orders, which callers
/// use to decide how far identities can be trusted.
#[derive(Debug, Clone)]
pub struct SharpResult<R: Ring> {
    pub symbol: FormalSymbol<R>,
    pub per_order_valid: Vec<u32>,
}

/// Which parametrix to construct. Two-sided builds both, checks they agree
/// coefficientwise, and returns the shared value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    TwoSided,
}

/// A resummed value: the truncation cutoff actually used and the evaluated
/// finite sum.
#[derive(Debug, Clone)]
pub struct ResumOutcome<R: Ring> {
    pub cutoff: u32,
    pub value: R,
}

impl<R: Ring> FormalSymbol<R> {
    /// Builds a symbol from its h-coefficients. All jets must share split,
    /// base point, and shape, and the split must pair every x variable with
    /// a xi variable (the composition differentiates across the pairing).
    pub fn new(gevrey: GevreyParams, coeffs: Vec<Jet<R>>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::Validation("a symbol needs at least p_0".into()));
        };
        if first.split().n_x != first.split().n_xi {
            return Err(Error::Validation(format!(
                "symbols need equally many x and xi variables, got {} and {}",
                first.split().n_x,
                first.split().n_xi
            )));
        }
        for (k, jet) in coeffs.iter().enumerate().skip(1) {
            if jet.split() != first.split() || jet.base() != first.base() {
                return Err(Error::BasePointMismatch(format!(
                    "coefficient {k} disagrees with p_0 on base point or split"
                )));
            }
            if jet.shape() != first.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "coefficient {k} has a different shape than p_0"
                )));
            }
        }
        Ok(FormalSymbol { gevrey, coeffs })
    }

    /// The identity symbol 1 (constant jet 1, zero higher coefficients),
    /// with every coefficient trusted to order `valid`.
    pub fn identity(
        gevrey: GevreyParams,
        split: VarSplit,
        base: Vec<R::S>,
        shape: R::Shape,
        valid: u32,
        h_order: u32,
    ) -> Result<Self> {
        let mut coeffs =
            vec![Jet::zero(split, base.clone(), shape, valid)?; h_order as usize + 1];
        coeffs[0] = Jet::constant(split, base, valid, R::one(shape))?;
        Self::new(gevrey, coeffs)
    }

    pub fn gevrey(&self) -> &GevreyParams {
        &self.gevrey
    }

    /// Truncation order in h (index of the last stored coefficient).
    pub fn h_order(&self) -> u32 {
        (self.coeffs.len() - 1) as u32
    }

    pub fn coeff(&self, k: u32) -> &Jet<R> {
        &self.coeffs[k as usize]
    }

    pub fn coeffs(&self) -> &[Jet<R>] {
        &self.coeffs
    }

    pub fn split(&self) -> VarSplit {
        self.coeffs[0].split()
    }

    pub fn base(&self) -> &[R::S] {
        self.coeffs[0].base()
    }

    pub fn shape(&self) -> R::Shape {
        self.coeffs[0].shape()
    }

    pub fn per_order_valid(&self) -> Vec<u32> {
        self.coeffs.iter().map(|j| j.valid()).collect()
    }

    /// The depth budget min_k (valid(p_k) + k). Composition preserves this
    /// quantity, and every pipeline output coefficient r_k keeps valid order
    /// at least budget - k; the parametrix fails fast when the budget cannot
    /// cover the requested h-order.
    pub fn budget(&self) -> u32 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, j)| j.valid() + k as u32)
            .min()
            .expect("symbols are nonempty")
    }

    /// Extends the coefficient list with exact zero jets up to h-order `n`.
    /// The zeros are declared data (the symbol is a polynomial in h), stored
    /// at the budget valid order so the depth budget is unchanged.
    pub fn padded(&self, n: u32) -> Result<Self> {
        if n <= self.h_order() {
            return Ok(self.clone());
        }
        let mut coeffs = self.coeffs.clone();
        let pad = Jet::zero(self.split(), self.base().to_vec(), self.shape(), self.budget())?;
        coeffs.resize(n as usize + 1, pad);
        Ok(FormalSymbol {
            gevrey: self.gevrey.clone(),
            coeffs,
        })
    }

    fn compat(&self, o: &Self) -> Result<()> {
        if self.gevrey != o.gevrey {
            return Err(Error::Validation(format!(
                "Gevrey classes differ: ({}, {}) vs ({}, {})",
                self.gevrey.s(),
                self.gevrey.sigma(),
                o.gevrey.s(),
                o.gevrey.sigma()
            )));
        }
        Ok(())
    }

    /// Coefficientwise sum up to the shorter h-order.
    pub fn add(&self, o: &Self) -> Result<Self> {
        self.compat(o)?;
        let len = self.coeffs.len().min(o.coeffs.len());
        let coeffs: Result<Vec<_>> = (0..len)
            .map(|k| self.coeffs[k].add(&o.coeffs[k]))
            .collect();
        FormalSymbol::new(self.gevrey.clone(), coeffs?)
    }

    /// Coefficientwise difference up to the shorter h-order.
    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.compat(o)?;
        let len = self.coeffs.len().min(o.coeffs.len());
        let coeffs: Result<Vec<_>> = (0..len)
            .map(|k| self.coeffs[k].sub(&o.coeffs[k]))
            .collect();
        FormalSymbol::new(self.gevrey.clone(), coeffs?)
    }

    /// Composition truncated at h-order `n`.
    pub fn sharp(&self, q: &Self, n: u32) -> Result<SharpResult<R>> {
        self.compat(q)?;
        if n > self.h_order().min(q.h_order()) {
            return Err(Error::TruncationExceedsData(format!(
                "composition to h-order {n} needs coefficients up to that order, \
                 operands store {} and {}",
                self.h_order(),
                q.h_order()
            )));
        }
        let split = self.split();
        let mut coeffs = Vec::with_capacity(n as usize + 1);
        for k in 0..=n {
            let mut acc: Option<Jet<R>> = None;
            for j in 0..=k {
                for a in 0..=(k - j) {
                    let b = k - j - a;
                    for alpha in indices_of_degree(split.n_x, j) {
                        let term = sharp_term(
                            &self.coeffs[a as usize],
                            &q.coeffs[b as usize],
                            split,
                            &alpha,
                        )?;
                        acc = Some(match acc {
                            None => term,
                            Some(prev) => prev.add(&term)?,
                        });
                    }
                }
            }
            coeffs.push(acc.expect("the alpha = 0, a = 0 term always exists"));
        }
        let symbol = FormalSymbol::new(self.gevrey.clone(), coeffs)?;
        let per_order_valid = symbol.per_order_valid();
        Ok(SharpResult {
            symbol,
            per_order_valid,
        })
    }

    /// Applies the order-m piece of the infinite-order operator attached to
    /// this symbol:
    ///
    /// ```text
    /// A_m b = sum_{k + |alpha| = m} (1/alpha!) (d_xi^alpha p_k) (D_x^alpha b)
    /// ```
    ///
    /// with D_x^alpha = i^{-|alpha|} d_x^alpha acting on the jet `b`.
    pub fn op_apply(&self, m: u32, b: &Jet<R>) -> Result<Jet<R>> {
        if m > self.h_order() {
            return Err(Error::TruncationExceedsData(format!(
                "operator order {m} exceeds stored h-order {}",
                self.h_order()
            )));
        }
        let split = self.split();
        let mut acc: Option<Jet<R>> = None;
        for k in 0..=m {
            let j = m - k;
            for alpha in indices_of_degree(split.n_x, j) {
                let term = sharp_term(&self.coeffs[k as usize], b, split, &alpha)?;
                acc = Some(match acc {
                    None => term,
                    Some(prev) => prev.add(&term)?,
                });
            }
        }
        Ok(acc.expect("the k = m, alpha = 0 term always exists"))
    }

    /// Formal inverse for the composition product, truncated at h-order `n`:
    /// a symbol q with p # q = 1 (right), q # p = 1 (left), or both checked
    /// against each other (two-sided) up to h^n within valid orders.
    ///
    /// Construction: q_0 = reciprocal(p_0); the remainder r = 1 - p # q_0
    /// starts at h^1, so the Neumann series 1 + r + r#r + ... contributes
    /// finitely to each h-power and q = q_0 # (sum of powers up to r^{#n}).
    ///
    /// Depth budget: output coefficient q_k retains valid order at least
    /// budget(p) - k, so the construction requires budget(p) >= n and fails
    /// fast otherwise.
    pub fn parametrix(&self, n: u32, side: Side) -> Result<FormalSymbol<R>> {
        let budget = self.budget();
        if budget < n {
            return Err(Error::OrderExhausted(format!(
                "parametrix to h-order {n} needs depth budget (min over k of \
                 valid(p_k) + k) at least {n}, input has {budget}"
            )));
        }
        let q0_jet = self.coeffs[0].reciprocal()?;
        let p = self.padded(n)?;
        let one = FormalSymbol::identity(
            self.gevrey.clone(),
            self.split(),
            self.base().to_vec(),
            self.shape(),
            budget,
            n,
        )?;
        let mut q0_coeffs =
            vec![Jet::zero(self.split(), self.base().to_vec(), self.shape(), budget)?; n as usize + 1];
        q0_coeffs[0] = q0_jet;
        let q0 = FormalSymbol::new(self.gevrey.clone(), q0_coeffs)?;

        let right = |p: &Self, q0: &Self| -> Result<FormalSymbol<R>> {
            let r = one.sub(&p.sharp(q0, n)?.symbol)?;
            let neumann = neumann_sum(&one, &r, n)?;
            Ok(q0.sharp(&neumann, n)?.symbol)
        };
        let left = |p: &Self, q0: &Self| -> Result<FormalSymbol<R>> {
            let r = one.sub(&q0.sharp(p, n)?.symbol)?;
            let neumann = neumann_sum(&one, &r, n)?;
            Ok(neumann.sharp(q0, n)?.symbol)
        };

        match side {
            Side::Right => right(&p, &q0),
            Side::Left => left(&p, &q0),
            Side::TwoSided => {
                let qr = right(&p, &q0)?;
                let ql = left(&p, &q0)?;
                for k in 0..=n {
                    let agree = if R::S::EXACT {
                        qr.coeff(k) == ql.coeff(k)
                    } else {
                        qr.coeff(k).approx_eq(ql.coeff(k), TWO_SIDED_TOL)
                    };
                    if !agree {
                        return Err(Error::InequalityViolated(format!(
                            "left and right parametrices differ at h-order {k}"
                        )));
                    }
                }
                Ok(qr)
            }
        }
    }

    /// Truncated resummation representative at semiclassical parameter `h`:
    /// evaluates sum_{k <= K(h)} h^k p_k(base + offset) with the cutoff
    /// K(h) = floor((R h)^{-1/(s + sigma - 1)}).
    ///
    /// The cutoff itself is computed in floating point (its exponent is
    /// irrational in general); the sum is evaluated in the coefficient ring,
    /// exactly on the rational backend.
    pub fn resum(&self, h: &Rat, big_r: &Rat, offset: &[R::S]) -> Result<ResumOutcome<R>> {
        let zero = Rat::from_integer(0.into());
        if h <= &zero || big_r <= &zero {
            return Err(Error::Validation(format!(
                "resummation needs h > 0 and R > 0, got h = {h}, R = {big_r}"
            )));
        }
        let cutoff = resum_cutoff(h, big_r, &self.gevrey);
        if cutoff > self.h_order() {
            return Err(Error::TruncationExceedsData(format!(
                "cutoff K(h) = {cutoff} exceeds stored h-order {}",
                self.h_order()
            )));
        }
        let mut acc = R::zeros(self.shape());
        let mut h_pow = Rat::from_integer(1.into());
        for k in 0..=cutoff {
            let term = self.coeffs[k as usize].eval(offset)?;
            let weight = R::S::from_rat_pair(&h_pow, &zero);
            acc = acc.add(&term.scale(&weight));
            h_pow *= h;
        }
        Ok(ResumOutcome {
            cutoff,
            value: acc,
        })
    }
}

/// The resummation cutoff floor((R h)^{-1/(s + sigma - 1)}), clamped to 0
/// when R h >= 1.
pub fn resum_cutoff(h: &Rat, big_r: &Rat, gevrey: &GevreyParams) -> u32 {
    let rh = (big_r * h).to_f64().unwrap_or(f64::INFINITY);
    if rh >= 1.0 {
        return 0;
    }
    let exponent = 1.0 / gevrey.growth_exponent().to_f64().unwrap_or(1.0);
    let raw = rh.powf(-exponent).floor();
    if raw >= u32::MAX as f64 {
        u32::MAX
    } else {
        raw as u32
    }
}

/// One composition term (1/alpha!) i^{-|alpha|} (d_xi^alpha p) (d_x^alpha q).
fn sharp_term<R: Ring>(
    p: &Jet<R>,
    q: &Jet<R>,
    split: VarSplit,
    alpha: &MultiIndex,
) -> Result<Jet<R>> {
    let d_xi = MultiIndex::from_xi_part(split, &alpha.0);
    let d_x = MultiIndex::from_x_part(split, &alpha.0);
    let p_d = p.derive(&d_xi)?;
    let q_d = q.derive(&d_x)?;
    let prod = p_d.mul(&q_d)?;
    let inv_fact = Scalar::inv(&R::S::from_biguint(&alpha.factorial()))?;
    let factor = Scalar::mul(&inv_fact, &i_pow_scalar::<R::S>(-(alpha.order() as i64)));
    Ok(prod.scale_scalar(&factor))
}

/// i^k as a scalar, with negative exponents folded mod 4.
fn i_pow_scalar<S: Scalar>(k: i64) -> S {
    match k.rem_euclid(4) {
        0 => S::one(),
        1 => S::i(),
        2 => Scalar::neg(&S::one()),
        _ => Scalar::neg(&S::i()),
    }
}

/// All multi-indices of `n` variables with total order exactly `d`, in
/// lexicographic order (the canonical alpha summation order).
fn indices_of_degree(n: usize, d: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut scratch = vec![0u32; n];
    fill_degree(d, 0, &mut scratch, &mut out);
    out
}

fn fill_degree(remaining: u32, var: usize, scratch: &mut [u32], out: &mut Vec<MultiIndex>) {
    if var + 1 == scratch.len() {
        scratch[var] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for c in 0..=remaining {
        scratch[var] = c;
        fill_degree(remaining - c, var + 1, scratch, out);
    }
}

/// 1 + r + r#r + ... + r^{#n}, truncated at h-order `n`. Because r_0 = 0
/// (within valid orders), the power r^{#m} contributes nothing below h^m and
/// the sum is h-graded: no infinite series is ever formed.
fn neumann_sum<R: Ring>(
    one: &FormalSymbol<R>,
    r: &FormalSymbol<R>,
    n: u32,
) -> Result<FormalSymbol<R>> {
    let mut acc = one.clone();
    let mut power = r.clone();
    for m in 1..=n {
        acc = acc.add(&power)?;
        if m < n {
            power = power.sharp(r, n)?.symbol;
        }
    }
    Ok(acc)
}
