//! Truncated Taylor expansions (jets) of symbol coefficients at a base point.
//!
//! A jet stores the scaled derivatives `(d^gamma a)(x0) / gamma!` for all
//! multi-indices up to a storage order, together with a possibly smaller
//! valid order: coefficients of total order beyond `valid` are present in
//! storage but carry no meaning and are masked out of every operation and
//! comparison. Operations return results whose storage order equals their
//! valid order, so validity never has to be tracked separately downstream.

mod layout;

pub use layout::{count_upto, layout, JetLayout, MultiIndex, VarSplit, MAX_ORDER, MAX_VARS};

use crate::error::{Error, Result};
use crate::ring::{NormValue, Rat, Ring, Scalar};
use num_bigint::BigUint;
use num_traits::One;
use std::sync::Arc;

/// A jet of a (scalar- or matrix-valued) function at a base point.
#[derive(Debug, Clone)]
pub struct Jet<R: Ring> {
    split: VarSplit,
    base: Vec<R::S>,
    shape: R::Shape,
    valid: u32,
    layout: Arc<JetLayout>,
    /// Dense coefficients in layout position order; `coeffs[p]` is the
    /// Taylor coefficient at `layout.indices[p]`.
    coeffs: Vec<R>,
}

impl<R: Ring> Jet<R> {
    /// The zero jet, trusted up to `valid`.
    pub fn zero(split: VarSplit, base: Vec<R::S>, shape: R::Shape, valid: u32) -> Result<Self> {
        check_base(split, &base)?;
        check_order(valid)?;
        let layout = layout(split, valid);
        let coeffs = vec![R::zeros(shape); layout.len()];
        Ok(Jet {
            split,
            base,
            shape,
            valid,
            layout,
            coeffs,
        })
    }

    /// The constant jet with value `v`, trusted up to `valid`.
    pub fn constant(split: VarSplit, base: Vec<R::S>, valid: u32, v: R) -> Result<Self> {
        let mut jet = Self::zero(split, base, v.shape(), valid)?;
        jet.coeffs[0] = v;
        Ok(jet)
    }

    /// The jet of the coordinate function for variable `var` (position in
    /// the full list, x block first). Constant term is the base coordinate
    /// times the identity; the linear term is recorded only when `valid >= 1`.
    pub fn coordinate(
        split: VarSplit,
        base: Vec<R::S>,
        shape: R::Shape,
        valid: u32,
        var: usize,
    ) -> Result<Self> {
        if var >= split.total() {
            return Err(Error::Validation(format!(
                "coordinate index {var} out of range for {} variables",
                split.total()
            )));
        }
        let value = R::from_scalar(shape, &base[var]);
        let mut jet = Self::constant(split, base, valid, value)?;
        if valid >= 1 {
            let unit = MultiIndex::unit(split.total(), var);
            let p = jet.layout.position(unit.packed()).expect("unit index stored");
            jet.coeffs[p] = R::one(shape);
        }
        Ok(jet)
    }

    /// Builds a jet from explicit (index, coefficient) pairs. Entries with
    /// order beyond `valid` but within `order` are stored untrusted; the
    /// list must not contain duplicates or indices beyond `order`.
    pub fn from_parts(
        split: VarSplit,
        base: Vec<R::S>,
        shape: R::Shape,
        order: u32,
        valid: u32,
        entries: Vec<(MultiIndex, R)>,
    ) -> Result<Self> {
        check_base(split, &base)?;
        check_order(order)?;
        if valid > order {
            return Err(Error::Validation(format!(
                "valid order {valid} exceeds storage order {order}"
            )));
        }
        let layout = layout(split, order);
        let mut coeffs = vec![R::zeros(shape); layout.len()];
        let mut seen = vec![false; layout.len()];
        for (idx, c) in entries {
            if idx.len() != split.total() {
                return Err(Error::Validation(format!(
                    "index {idx} has {} components, expected {}",
                    idx.len(),
                    split.total()
                )));
            }
            if c.shape() != shape {
                return Err(Error::ShapeMismatch(format!(
                    "entry at {idx} has shape {:?}, jet has {:?}",
                    c.shape(),
                    shape
                )));
            }
            let p = layout.position(idx.packed()).ok_or_else(|| {
                Error::Validation(format!("index {idx} exceeds storage order {order}"))
            })?;
            if seen[p] {
                return Err(Error::Validation(format!("duplicate index {idx}")));
            }
            seen[p] = true;
            coeffs[p] = c;
        }
        Ok(Jet {
            split,
            base,
            shape,
            valid,
            layout,
            coeffs,
        })
    }

    pub fn split(&self) -> VarSplit {
        self.split
    }

    pub fn base(&self) -> &[R::S] {
        &self.base
    }

    pub fn shape(&self) -> R::Shape {
        self.shape
    }

    /// Largest total order whose coefficients are meaningful.
    pub fn valid(&self) -> u32 {
        self.valid
    }

    /// Storage order (>= valid; coefficients beyond valid are masked).
    pub fn order(&self) -> u32 {
        self.layout.order
    }

    /// The index layout backing the coefficient vector; position `p` in
    /// vectors returned by [`Jet::derivative_values`] corresponds to
    /// `layout().indices[p]`.
    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    /// Coefficient at `idx`, or `None` when the index lies beyond the
    /// valid order.
    pub fn coeff(&self, idx: &MultiIndex) -> Option<&R> {
        if idx.order() > self.valid {
            return None;
        }
        self.layout.position(idx.packed()).map(|p| &self.coeffs[p])
    }

    /// Iterates (index, coefficient) over all valid positions in canonical
    /// (graded lexicographic) order.
    pub fn iter_valid(&self) -> impl Iterator<Item = (&MultiIndex, &R)> {
        let end = self.layout.len_upto(self.valid);
        self.layout.indices[..end]
            .iter()
            .zip(self.coeffs[..end].iter())
    }

    /// Restriction to a smaller valid order; storage shrinks to match.
    pub fn truncated(&self, new_valid: u32) -> Result<Self> {
        if new_valid > self.valid {
            return Err(Error::TruncationExceedsData(format!(
                "requested order {new_valid}, trusted data stops at {}",
                self.valid
            )));
        }
        let layout = layout(self.split, new_valid);
        Ok(Jet {
            split: self.split,
            base: self.base.clone(),
            shape: self.shape,
            valid: new_valid,
            layout: layout.clone(),
            coeffs: self.coeffs[..layout.len()].to_vec(),
        })
    }

    fn compat(&self, o: &Self) -> Result<()> {
        if self.split != o.split || self.base != o.base {
            return Err(Error::BasePointMismatch(
                "jets live at different base points or variable splits".into(),
            ));
        }
        if self.shape != o.shape {
            return Err(Error::ShapeMismatch(format!(
                "coefficient shapes {:?} and {:?}",
                self.shape, o.shape
            )));
        }
        Ok(())
    }

    /// Sum; valid up to the smaller of the operand valid orders.
    pub fn add(&self, o: &Self) -> Result<Self> {
        self.compat(o)?;
        self.zip_binary(o, |a, b| a.add(b))
    }

    /// Difference; valid up to the smaller of the operand valid orders.
    pub fn sub(&self, o: &Self) -> Result<Self> {
        self.compat(o)?;
        self.zip_binary(o, |a, b| a.sub(b))
    }

    fn zip_binary(&self, o: &Self, f: impl Fn(&R, &R) -> R) -> Result<Self> {
        let valid = self.valid.min(o.valid);
        let layout = layout(self.split, valid);
        let len = layout.len();
        // Prefix property: position p means the same index in all three
        // layouts, so both operands are indexed directly.
        let coeffs = (0..len).map(|p| f(&self.coeffs[p], &o.coeffs[p])).collect();
        Ok(Jet {
            split: self.split,
            base: self.base.clone(),
            shape: self.shape,
            valid,
            layout,
            coeffs,
        })
    }

    pub fn neg(&self) -> Self {
        self.map_coeffs(|c| c.neg())
    }

    /// Applies `f` to every stored coefficient, keeping orders.
    pub fn map_coeffs(&self, f: impl Fn(&R) -> R) -> Self {
        Jet {
            split: self.split,
            base: self.base.clone(),
            shape: self.shape,
            valid: self.valid,
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(f).collect(),
        }
    }

    /// Multiplies every coefficient by the scalar `s`.
    pub fn scale_scalar(&self, s: &R::S) -> Self {
        self.map_coeffs(|c| c.scale(s))
    }

    /// Multiplies every coefficient by the rational `q`.
    pub fn scale_rat(&self, q: &Rat) -> Self {
        let s = R::S::from_rat_pair(q, &Rat::from_integer(0.into()));
        self.scale_scalar(&s)
    }

    /// Entrywise adjoint of every coefficient (conjugate transpose for
    /// matrix jets). The result is the jet of the pointwise adjoint only
    /// when the base point coordinates are real, which callers check.
    pub fn adjoint_coeffs(&self) -> Self {
        self.map_coeffs(|c| c.adjoint())
    }

    /// Product jet, valid up to the smaller of the operand valid orders.
    ///
    /// Accumulation order is fixed (left positions ascending, then right
    /// positions ascending), so floating-point results are identical across
    /// runs.
    pub fn mul(&self, o: &Self) -> Result<Self> {
        self.compat(o)?;
        let valid = self.valid.min(o.valid);
        let layout = layout(self.split, valid);
        let mut coeffs = vec![R::zeros(self.shape); layout.len()];
        let a_end = self.layout.len_upto(valid);
        for pa in 0..a_end {
            let ca = &self.coeffs[pa];
            if ca.is_zero() {
                continue;
            }
            let da = self.layout.degree[pa];
            let ka = self.layout.packed[pa];
            let b_end = o.layout.len_upto(valid - da);
            for pb in 0..b_end {
                let cb = &o.coeffs[pb];
                if cb.is_zero() {
                    continue;
                }
                let p = layout
                    .position(ka + o.layout.packed[pb])
                    .expect("product index within result order");
                coeffs[p] = coeffs[p].add(&ca.mul(cb));
            }
        }
        Ok(Jet {
            split: self.split,
            base: self.base.clone(),
            shape: self.shape,
            valid,
            layout,
            coeffs,
        })
    }

    /// Jet of the derivative `d^gamma a`. Consumes `|gamma|` orders of
    /// validity; fails once the data is exhausted.
    pub fn derive(&self, gamma: &MultiIndex) -> Result<Self> {
        if gamma.len() != self.split.total() {
            return Err(Error::Validation(format!(
                "derivative index {gamma} has {} components, expected {}",
                gamma.len(),
                self.split.total()
            )));
        }
        let g = gamma.order();
        if g > self.valid {
            return Err(Error::OrderExhausted(format!(
                "derivative of order {g} requested, jet is valid to order {}",
                self.valid
            )));
        }
        let valid = self.valid - g;
        let layout = layout(self.split, valid);
        let gk = gamma.packed();
        let coeffs = (0..layout.len())
            .map(|p| {
                let delta = &layout.indices[p];
                let src = self
                    .layout
                    .position(layout.packed[p] + gk)
                    .expect("shifted index within source order");
                // Stored coefficients are d^idx a / idx!, so the derivative
                // coefficient picks up (delta+gamma)! / delta!.
                let factor = rising_product(delta, gamma);
                self.coeffs[src].scale(&R::S::from_biguint(&factor))
            })
            .collect();
        Ok(Jet {
            split: self.split,
            base: self.base.clone(),
            shape: self.shape,
            valid,
            layout,
            coeffs,
        })
    }

    /// Jet of the pointwise (multiplicative) inverse, valid to the same
    /// order. Requires the constant term to be invertible.
    pub fn reciprocal(&self) -> Result<Self> {
        let a0_inv = self.coeffs[0].inv()?;
        let layout = layout(self.split, self.valid);
        let len = layout.len();
        let mut out = vec![R::zeros(self.shape); len];
        out[0] = a0_inv.clone();
        // Graded recursion: the order-|gamma| coefficient of the inverse is
        // determined by (a * inv)_gamma = 0, i.e.
        //   inv_gamma = -a0^{-1} * sum_{0 < beta <= gamma} a_beta * inv_{gamma - beta}.
        for p in 1..len {
            let gamma = &layout.indices[p];
            let gk = layout.packed[p];
            let mut acc = R::zeros(self.shape);
            let b_end = layout.len_upto(layout.degree[p]);
            for pb in 1..b_end {
                let beta = &layout.indices[pb];
                if !beta.le_componentwise(gamma) {
                    continue;
                }
                let ca = &self.coeffs[pb];
                if ca.is_zero() {
                    continue;
                }
                let pd = layout
                    .position(gk - layout.packed[pb])
                    .expect("difference index stored");
                acc = acc.add(&ca.mul(&out[pd]));
            }
            out[p] = a0_inv.mul(&acc).neg();
        }
        Ok(Jet {
            split: self.split,
            base: self.base.clone(),
            shape: self.shape,
            valid: self.valid,
            layout,
            coeffs: out,
        })
    }

    /// Evaluates the stored polynomial at `base + offset`, using only valid
    /// coefficients. Summation follows layout order, so floating-point
    /// results are identical across runs.
    pub fn eval(&self, offset: &[R::S]) -> Result<R> {
        if offset.len() != self.split.total() {
            return Err(Error::Validation(format!(
                "offset has {} components, expected {}",
                offset.len(),
                self.split.total()
            )));
        }
        // Per-variable offset powers up to the valid order.
        let n = self.split.total();
        let mut powers: Vec<Vec<R::S>> = Vec::with_capacity(n);
        for off in offset {
            let mut row = Vec::with_capacity(self.valid as usize + 1);
            row.push(<R::S as Scalar>::one());
            for k in 1..=self.valid as usize {
                let prev = &row[k - 1];
                row.push(Scalar::mul(prev, off));
            }
            powers.push(row);
        }
        let mut acc = R::zeros(self.shape);
        for (idx, c) in self.iter_valid() {
            if c.is_zero() {
                continue;
            }
            let mut w = <R::S as Scalar>::one();
            for (v, &e) in idx.0.iter().enumerate() {
                if e > 0 {
                    w = Scalar::mul(&w, &powers[v][e as usize]);
                }
            }
            acc = acc.add(&c.scale(&w));
        }
        Ok(acc)
    }

    /// Values of every derivative `(d^gamma a)(base + offset)` with
    /// `|gamma| <= valid`, indexed by layout position. Each entry agrees
    /// exactly with `derive(gamma)` followed by `eval(offset)`; doing all of
    /// them in one pass over the stored coefficients avoids the intermediate
    /// jets. Both loops follow layout order, so each accumulator sees its
    /// terms in a fixed order and float results are reproducible.
    pub fn derivative_values(&self, offset: &[R::S]) -> Result<Vec<R>> {
        if offset.len() != self.split.total() {
            return Err(Error::Validation(format!(
                "offset has {} components, expected {}",
                offset.len(),
                self.split.total()
            )));
        }
        let n = self.split.total();
        let mut powers: Vec<Vec<R::S>> = Vec::with_capacity(n);
        for off in offset {
            let mut row = Vec::with_capacity(self.valid as usize + 1);
            row.push(<R::S as Scalar>::one());
            for k in 1..=self.valid as usize {
                let prev = &row[k - 1];
                row.push(Scalar::mul(prev, off));
            }
            powers.push(row);
        }
        let count = self.layout.len_upto(self.valid);
        let mut out = vec![R::zeros(self.shape); count];
        // (d^gamma a)(base+u) = sum_{delta >= gamma} c_delta (delta! / (delta-gamma)!) u^{delta-gamma};
        // the outer loop walks stored delta, the inner one every gamma below it.
        for pd in 0..count {
            let c = &self.coeffs[pd];
            if c.is_zero() {
                continue;
            }
            let delta = &self.layout.indices[pd];
            // Componentwise gamma <= delta forces position(gamma) <= pd.
            for pg in 0..=pd {
                let gamma = &self.layout.indices[pg];
                let Some(dmg) = delta.checked_sub(gamma) else {
                    continue;
                };
                let factor = rising_product(&dmg, gamma);
                let mut w = R::S::from_biguint(&factor);
                for (v, &e) in dmg.0.iter().enumerate() {
                    if e > 0 {
                        w = Scalar::mul(&w, &powers[v][e as usize]);
                    }
                }
                out[pg] = out[pg].add(&c.scale(&w));
            }
        }
        Ok(out)
    }

    /// Partially evaluates the xi block at `base_xi + xi_offset`, returning
    /// a jet in the x variables alone. For a zero offset this is the exact
    /// restriction; for nonzero offsets it evaluates the stored polynomial,
    /// whose xi-tail beyond the valid order is already truncated.
    pub fn restrict_xi(&self, xi_offset: &[R::S]) -> Result<Self> {
        if xi_offset.len() != self.split.n_xi {
            return Err(Error::Validation(format!(
                "xi offset has {} components, expected {}",
                xi_offset.len(),
                self.split.n_xi
            )));
        }
        let out_split = VarSplit::new(self.split.n_x, 0)?;
        let out_layout = layout(out_split, self.valid);
        let mut coeffs = vec![R::zeros(self.shape); out_layout.len()];
        let mut powers: Vec<Vec<R::S>> = Vec::with_capacity(self.split.n_xi);
        for off in xi_offset {
            let mut row = Vec::with_capacity(self.valid as usize + 1);
            row.push(<R::S as Scalar>::one());
            for k in 1..=self.valid as usize {
                let prev = &row[k - 1];
                row.push(Scalar::mul(prev, off));
            }
            powers.push(row);
        }
        for (idx, c) in self.iter_valid() {
            if c.is_zero() {
                continue;
            }
            let alpha = MultiIndex(idx.0[..self.split.n_x].to_vec());
            let mut w = <R::S as Scalar>::one();
            let mut w_trivial = true;
            for (v, &e) in idx.0[self.split.n_x..].iter().enumerate() {
                if e > 0 {
                    w = Scalar::mul(&w, &powers[v][e as usize]);
                    w_trivial = false;
                }
            }
            let p = out_layout
                .position(alpha.packed())
                .expect("x part within order");
            let term = if w_trivial { c.clone() } else { c.scale(&w) };
            coeffs[p] = coeffs[p].add(&term);
        }
        Ok(Jet {
            split: out_split,
            base: self.base[..self.split.n_x].to_vec(),
            shape: self.shape,
            valid: self.valid,
            layout: out_layout,
            coeffs,
        })
    }

    /// True when every valid coefficient is zero.
    pub fn is_zero(&self) -> bool {
        let end = self.layout.len_upto(self.valid);
        self.coeffs[..end].iter().all(|c| c.is_zero())
    }

    /// Largest coefficient seminorm over valid positions, as f64.
    pub fn max_coeff_nu(&self) -> f64 {
        let end = self.layout.len_upto(self.valid);
        self.coeffs[..end]
            .iter()
            .map(|c| c.nu().to_f64())
            .fold(0.0, f64::max)
    }

    /// Largest seminorm of a coefficient difference over the shared valid
    /// range. Errors when the jets live at different base points.
    pub fn max_coeff_diff(&self, o: &Self) -> Result<f64> {
        self.compat(o)?;
        let valid = self.valid.min(o.valid);
        let end = self.layout.len_upto(valid);
        Ok((0..end)
            .map(|p| self.coeffs[p].sub(&o.coeffs[p]).nu().to_f64())
            .fold(0.0, f64::max))
    }

    /// Equality within tolerance over the shared valid range: every
    /// coefficient difference seminorm must be at most
    /// `tol * max(1, largest coefficient seminorm of o)`.
    pub fn approx_eq(&self, o: &Self, tol: f64) -> bool {
        match self.max_coeff_diff(o) {
            Ok(d) => d <= tol * o.max_coeff_nu().max(1.0),
            Err(_) => false,
        }
    }
}

/// (delta + gamma)! / delta! as a product of rising factors.
fn rising_product(delta: &MultiIndex, gamma: &MultiIndex) -> BigUint {
    let mut acc = BigUint::one();
    for (d, g) in delta.0.iter().zip(&gamma.0) {
        for j in 1..=*g {
            acc *= BigUint::from((*d + j) as u64);
        }
    }
    acc
}

/// Jets compare equal when they share split, base, and shape and their
/// coefficients agree up to the smaller valid order. Storage beyond that is
/// masked, so a jet equals its own truncation.
impl<R: Ring> PartialEq for Jet<R> {
    fn eq(&self, other: &Self) -> bool {
        if self.split != other.split
            || self.base != other.base
            || self.shape != other.shape
        {
            return false;
        }
        let valid = self.valid.min(other.valid);
        let end = count_upto(self.split.total(), valid);
        self.coeffs[..end] == other.coeffs[..end]
    }
}

fn check_base<S: Scalar>(split: VarSplit, base: &[S]) -> Result<()> {
    if base.len() != split.total() {
        return Err(Error::Validation(format!(
            "base point has {} coordinates, expected {}",
            base.len(),
            split.total()
        )));
    }
    Ok(())
}

fn check_order(order: u32) -> Result<()> {
    if order > MAX_ORDER {
        return Err(Error::Validation(format!(
            "order {order} exceeds the supported maximum {MAX_ORDER}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{GaussianRational, Rat, SquareMatrix};
    use num_bigint::BigInt;
    use proptest::prelude::*;

    type Q = GaussianRational;

    fn rat(n: i64) -> Rat {
        Rat::from_integer(BigInt::from(n))
    }

    fn q(n: i64) -> Q {
        <Q as Scalar>::from_i64(n)
    }

    fn q_frac(n: i64, d: i64) -> Q {
        Q::new(Rat::new(BigInt::from(n), BigInt::from(d)), rat(0))
    }

    fn split11() -> VarSplit {
        VarSplit::new(1, 1).unwrap()
    }

    /// Scalar jet of a polynomial given by (x-exponent, xi-exponent, value)
    /// monomials in the offset variables u = x - x0, v = xi - xi0.
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

    #[test]
    fn coordinate_jet_squares_to_shifted_square() {
        // x at base x0 = 3 is 3 + u; its square is 9 + 6u + u^2.
        let x = Jet::<Q>::coordinate(split11(), vec![q(3), q(5)], (), 4, 0).unwrap();
        let sq = x.mul(&x).unwrap();
        assert_eq!(sq.coeff(&MultiIndex(vec![0, 0])), Some(&q(9)));
        assert_eq!(sq.coeff(&MultiIndex(vec![1, 0])), Some(&q(6)));
        assert_eq!(sq.coeff(&MultiIndex(vec![2, 0])), Some(&q(1)));
        assert_eq!(sq.coeff(&MultiIndex(vec![0, 1])), Some(&q(0)));
        assert_eq!(sq.valid(), 4);
    }

    #[test]
    fn derivative_of_square_is_twice_coordinate() {
        let x = Jet::<Q>::coordinate(split11(), vec![q(3), q(5)], (), 4, 0).unwrap();
        let sq = x.mul(&x).unwrap();
        let d = sq.derive(&MultiIndex(vec![1, 0])).unwrap();
        // d/dx (x^2) = 2x = 6 + 2u at x0 = 3 with validity dropped by one.
        assert_eq!(d.valid(), 3);
        assert_eq!(d.coeff(&MultiIndex(vec![0, 0])), Some(&q(6)));
        assert_eq!(d.coeff(&MultiIndex(vec![1, 0])), Some(&q(2)));
        let dxi = sq.derive(&MultiIndex(vec![0, 1])).unwrap();
        assert!(dxi.is_zero());
    }

    #[test]
    fn second_derivative_rescales_stored_coefficient() {
        // Coefficient at (3,0) stores f'''(x0)/3!; second x-derivative at
        // (1,0) must be 3!/1! = 6 times it.
        let jet = jet_from_monomials((0, 0), 3, &[(3, 0, q(5))]);
        let d2 = jet.derive(&MultiIndex(vec![2, 0])).unwrap();
        assert_eq!(d2.coeff(&MultiIndex(vec![1, 0])), Some(&q(30)));
    }

    #[test]
    fn derive_beyond_valid_order_is_exhausted() {
        let jet = jet_from_monomials((0, 0), 2, &[(1, 0, q(1))]);
        let err = jet.derive(&MultiIndex(vec![3, 0])).unwrap_err();
        assert!(matches!(err, Error::OrderExhausted(_)));
    }

    #[test]
    fn reciprocal_of_one_minus_u_is_geometric_series() {
        // a = 1 - u has inverse 1 + u + u^2 + ... to every stored order.
        let a = jet_from_monomials((0, 0), 5, &[(0, 0, q(1)), (1, 0, q(-1))]);
        let inv = a.reciprocal().unwrap();
        for k in 0..=5u32 {
            assert_eq!(inv.coeff(&MultiIndex(vec![k, 0])), Some(&q(1)), "order {k}");
        }
        let prod = a.mul(&inv).unwrap();
        let one = Jet::constant(split11(), vec![q(0), q(0)], 5, q(1)).unwrap();
        assert_eq!(prod, one);
    }

    #[test]
    fn reciprocal_requires_invertible_constant_term() {
        let a = jet_from_monomials((0, 0), 3, &[(1, 0, q(1))]);
        assert!(matches!(a.reciprocal(), Err(Error::NonInvertible(_))));
    }

    #[test]
    fn matrix_jet_reciprocal_is_two_sided() {
        type M = SquareMatrix<Q>;
        let split = split11();
        let base = vec![q(0), q(0)];
        // a = A + N*u with noncommuting A, N.
        let a_mat = M::from_rows(vec![vec![q(2), q(1)], vec![q(0), q(1)]]).unwrap();
        let n_mat = M::from_rows(vec![vec![q(0), q(1)], vec![q(1), q(0)]]).unwrap();
        let a = Jet::from_parts(
            split,
            base.clone(),
            2,
            4,
            4,
            vec![
                (MultiIndex(vec![0, 0]), a_mat),
                (MultiIndex(vec![1, 0]), n_mat),
            ],
        )
        .unwrap();
        let inv = a.reciprocal().unwrap();
        let one = Jet::constant(split, base, 4, M::one(2)).unwrap();
        assert_eq!(a.mul(&inv).unwrap(), one);
        assert_eq!(inv.mul(&a).unwrap(), one);
    }

    #[test]
    fn eval_ignores_untrusted_storage() {
        // Storage order 4, valid 1: the quartic junk coefficient must not
        // contribute to evaluation.
        let jet = Jet::from_parts(
            split11(),
            vec![q(0), q(0)],
            (),
            4,
            1,
            vec![
                (MultiIndex(vec![1, 0]), q(2)),
                (MultiIndex(vec![4, 0]), q(999)),
            ],
        )
        .unwrap();
        let v = jet.eval(&[q(1), q(0)]).unwrap();
        assert_eq!(v, q(2));
    }

    #[test]
    fn eval_is_multiplicative_on_degree_bounded_jets() {
        // deg a + deg b <= valid, so the product jet is the exact product
        // polynomial and evaluation must be a ring homomorphism.
        let a = jet_from_monomials((1, 2), 6, &[(0, 0, q(3)), (1, 0, q(2)), (0, 1, q(-1))]);
        let b = jet_from_monomials((1, 2), 6, &[(0, 0, q(1)), (1, 1, q(4))]);
        let ab = a.mul(&b).unwrap();
        for (du, dv) in [(0i64, 0i64), (1, 0), (2, 3), (-1, 2)] {
            let off = [q(du), q(dv)];
            let lhs = ab.eval(&off).unwrap();
            let rhs = Scalar::mul(&a.eval(&off).unwrap(), &b.eval(&off).unwrap());
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn equality_masks_beyond_min_valid() {
        let a = jet_from_monomials((0, 0), 3, &[(0, 0, q(1)), (3, 0, q(7))]);
        let b = jet_from_monomials((0, 0), 2, &[(0, 0, q(1))]);
        assert_eq!(a, b);
        let c = jet_from_monomials((0, 0), 2, &[(0, 0, q(1)), (2, 0, q(5))]);
        assert_ne!(a, c);
    }

    #[test]
    fn truncation_restricts_and_rejects_extension() {
        let a = jet_from_monomials((0, 0), 3, &[(0, 0, q(1)), (3, 0, q(7))]);
        let t = a.truncated(1).unwrap();
        assert_eq!(t.order(), 1);
        assert_eq!(t.valid(), 1);
        assert_eq!(t, a);
        assert!(matches!(
            a.truncated(4),
            Err(Error::TruncationExceedsData(_))
        ));
    }

    #[test]
    fn base_point_mismatch_is_rejected() {
        let a = jet_from_monomials((0, 0), 2, &[(0, 0, q(1))]);
        let b = jet_from_monomials((1, 0), 2, &[(0, 0, q(1))]);
        assert!(matches!(a.add(&b), Err(Error::BasePointMismatch(_))));
    }

    #[test]
    fn restrict_xi_at_zero_keeps_x_coefficients() {
        let a = jet_from_monomials(
            (2, 3),
            3,
            &[(0, 0, q(1)), (1, 0, q(4)), (0, 1, q(7)), (1, 1, q(5))],
        );
        let r = a.restrict_xi(&[q(0)]).unwrap();
        assert_eq!(r.split(), VarSplit::new(1, 0).unwrap());
        assert_eq!(r.base(), &[q(2)]);
        assert_eq!(r.coeff(&MultiIndex(vec![0])), Some(&q(1)));
        assert_eq!(r.coeff(&MultiIndex(vec![1])), Some(&q(4)));
        let r2 = a.restrict_xi(&[q(2)]).unwrap();
        // At xi offset 2: constant picks up 2*7, linear picks up 2*5.
        assert_eq!(r2.coeff(&MultiIndex(vec![0])), Some(&q(15)));
        assert_eq!(r2.coeff(&MultiIndex(vec![1])), Some(&q(14)));
    }

    #[test]
    fn scale_rat_multiplies_coefficients() {
        let a = jet_from_monomials((0, 0), 2, &[(0, 0, q(6)), (1, 1, q(-3))]);
        let h = a.scale_rat(&Rat::new(BigInt::from(1), BigInt::from(3)));
        assert_eq!(h.coeff(&MultiIndex(vec![0, 0])), Some(&q(2)));
        assert_eq!(h.coeff(&MultiIndex(vec![1, 1])), Some(&q(-1)));
    }

    #[test]
    fn derivative_values_match_derive_then_eval() {
        let a = jet_from_monomials(
            (2, -1),
            4,
            &[
                (0, 0, q(3)),
                (1, 0, q(-2)),
                (0, 2, q(5)),
                (2, 1, q_frac(1, 2)),
                (1, 3, q(7)),
            ],
        );
        let offset = vec![q_frac(1, 3), q(-2)];
        let vals = a.derivative_values(&offset).unwrap();
        assert_eq!(vals.len(), a.layout.len_upto(a.valid()));
        for (p, v) in vals.iter().enumerate() {
            let gamma = &a.layout.indices[p];
            let direct = a.derive(gamma).unwrap().eval(&offset).unwrap();
            assert_eq!(*v, direct, "mismatch at gamma = {gamma}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Leibniz rule: d(ab) = da * b + a * db for the first variable,
        /// on random scalar jets over a shared base point.
        #[test]
        fn derivative_satisfies_leibniz(
            a_coeffs in proptest::collection::vec(-5i64..=5, 6),
            b_coeffs in proptest::collection::vec(-5i64..=5, 6),
        ) {
            let order = 4u32;
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
            let a = jet_from_monomials((1, -1), order, &monos_a);
            let b = jet_from_monomials((1, -1), order, &monos_b);
            let dx = MultiIndex(vec![1, 0]);
            let lhs = a.mul(&b).unwrap().derive(&dx).unwrap();
            let rhs = a
                .derive(&dx).unwrap().mul(&b).unwrap()
                .add(&a.mul(&b.derive(&dx).unwrap()).unwrap())
                .unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        /// Product evaluation agrees with evaluated products whenever the
        /// combined degree fits inside the valid order.
        #[test]
        fn mul_matches_eval_oracle(
            ca in -4i64..=4, cb in -4i64..=4, cc in -4i64..=4,
            du in -2i64..=2, dv in -2i64..=2,
        ) {
            let a = jet_from_monomials((0, 1), 4, &[(0, 0, q(ca)), (1, 0, q(cb))]);
            let b = jet_from_monomials((0, 1), 4, &[(0, 1, q(cc)), (1, 1, q_frac(1, 2))]);
            let ab = a.mul(&b).unwrap();
            let off = [q(du), q(dv)];
            let lhs = ab.eval(&off).unwrap();
            let rhs = Scalar::mul(&a.eval(&off).unwrap(), &b.eval(&off).unwrap());
            prop_assert_eq!(lhs, rhs);
        }
    }
}
