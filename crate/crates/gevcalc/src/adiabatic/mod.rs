//! Adiabatic projector expansions for finite dimensional operator families.
//!
//! A Hermitian family P(t) with a spectral gap carries, for each order N,
//! matrix jets Pi_0(t) ... Pi_N(t) assembling a formal projector that
//! commutes with hD_t + P(t) through order h^N; the leading jet is the
//! spectral projector onto the gap window. The corrections are produced by
//! contour quadrature: at each node z of a circle through the gap, the
//! parametrix of the order zero symbol z - tau - P(t) (or z - a(tau) - P(t)
//! when a frequency window a is supplied) is built in the (t, tau) calculus,
//! each coefficient is restricted to tau = 0 keeping its t-jet, and the
//! weighted node sum approximates 1/(2 pi i) times the contour integral.
//!
//! Everything here runs on the complex float backend: quadrature nodes are
//! irrational, so exact rational coefficients cannot represent them. The
//! algebraic identities the quadrature relies on (composition, parametrix
//! products) are validated exactly on the rational backend in the calculus
//! layer; this module checks its own outputs only up to quadrature
//! residuals, which it reports rather than hides. Node sums run in a fixed
//! order, so repeated runs produce bit-identical expansions.

mod eigen;

pub use eigen::{eigh, hermitian_defect, spectral_projector, Eigh};

use crate::error::{Error, Result};
use crate::gevrey::{fit_growth, GevreyParams, GrowthFit};
use crate::jet::{Jet, MultiIndex, VarSplit};
use crate::ring::{rat_from_str, rat_to_str, ComplexFloat, Rat, Ring, Scalar, SquareMatrix};
use crate::symbol::{FormalSymbol, Side};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use serde_json::{json, Value};
use std::collections::BTreeMap;

/// Matrix coefficients over the float backend, the only ring the contour
/// pipeline works in.
pub type FloatMatrix = SquareMatrix<ComplexFloat>;

/// Tolerance for the Hermiticity of P at the base point, relative to the
/// largest entry.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Default clearance required between the spectrum of P(t0) and both gap
/// endpoints and every contour evaluation point.
pub const SPECTRUM_MARGIN: f64 = 1e-6;

/// Quadrature target: node counts double until the idempotency defect of
/// the leading projector at the base point drops below this.
pub const QUADRATURE_TOL: f64 = 1e-10;

/// Node count the gap contour starts from when no count is given.
pub const DEFAULT_NODES: u32 = 64;

/// How many times the node count may double before the quadrature gives up.
pub const MAX_DOUBLINGS: u32 = 4;

/// Truncation-tail target for comparisons at shifted tau base points; see
/// [`tau_independence_check`].
const TAU_TAIL_TARGET: f64 = 1e-9;

/// Involution tolerance for the commutator recursion's P(t)^2 = 1 check.
const INVOLUTION_TOL: f64 = 1e-10;

/// A family t -> P(t) of complex matrices as a jet in the single variable t,
/// with a spectral gap window and an asserted Gevrey regularity exponent.
///
/// Invariants established at construction: the jet has exactly one x-type
/// variable with a real base point, P(t0) is Hermitian within
/// [`HERMITIAN_TOL`], the window endpoints are ordered, and the spectrum of
/// P(t0) clears both endpoints by more than [`SPECTRUM_MARGIN`]. Higher jet
/// coefficients are not checked for Hermiticity; the residual reports of
/// the expansion diagnostics surface any drift they cause.
#[derive(Debug, Clone)]
pub struct OperatorFamily {
    t_jet: Jet<FloatMatrix>,
    gap: (f64, f64),
    gevrey_s: Rat,
}

impl OperatorFamily {
    pub fn new(t_jet: Jet<FloatMatrix>, gap: (f64, f64), gevrey_s: Rat) -> Result<Self> {
        let split = t_jet.split();
        if split.n_x != 1 || split.n_xi != 0 {
            return Err(Error::Validation(format!(
                "an operator family is a jet in one t variable, got split \
                 ({}, {})",
                split.n_x, split.n_xi
            )));
        }
        if t_jet.base()[0].im() != 0.0 {
            return Err(Error::Validation(
                "the base point t0 must be real".into(),
            ));
        }
        if !(gap.0.is_finite() && gap.1.is_finite() && gap.0 < gap.1) {
            return Err(Error::Validation(format!(
                "gap window ({}, {}) is not an ordered finite interval",
                gap.0, gap.1
            )));
        }
        if gevrey_s < Rat::from_integer(BigInt::from(1)) {
            return Err(Error::Validation(format!(
                "Gevrey exponent s must be at least 1, got {gevrey_s}"
            )));
        }
        let family = OperatorFamily {
            t_jet,
            gap,
            gevrey_s,
        };
        let eig = eigen::eigh(family.order_matrix(0), HERMITIAN_TOL)?;
        let clearance = eig
            .values
            .iter()
            .map(|l| (l - gap.0).abs().min((l - gap.1).abs()))
            .fold(f64::INFINITY, f64::min);
        if clearance <= SPECTRUM_MARGIN {
            return Err(Error::OnSpectrum(format!(
                "a gap endpoint sits {clearance:.3e} from the spectrum of \
                 P(t0), inside the margin {SPECTRUM_MARGIN:.3e}"
            )));
        }
        Ok(family)
    }

    /// Builds the jet from one matrix per t-order: `orders[k]` is the
    /// coefficient of (t - t0)^k, so the valid order is `orders.len() - 1`.
    pub fn from_orders(
        t0: f64,
        orders: Vec<FloatMatrix>,
        gap: (f64, f64),
        gevrey_s: Rat,
    ) -> Result<Self> {
        if orders.is_empty() {
            return Err(Error::Validation(
                "an operator family needs at least the order zero matrix".into(),
            ));
        }
        let valid = (orders.len() - 1) as u32;
        let dim = orders[0].dim();
        let split = VarSplit::new(1, 0)?;
        let entries = orders
            .into_iter()
            .enumerate()
            .map(|(k, m)| (MultiIndex(vec![k as u32]), m))
            .collect();
        let t_jet = Jet::from_parts(
            split,
            vec![ComplexFloat::new(t0, 0.0)],
            dim,
            valid,
            valid,
            entries,
        )?;
        Self::new(t_jet, gap, gevrey_s)
    }

    pub fn dim(&self) -> usize {
        self.t_jet.shape()
    }

    pub fn t0(&self) -> f64 {
        self.t_jet.base()[0].re()
    }

    pub fn t_jet(&self) -> &Jet<FloatMatrix> {
        &self.t_jet
    }

    pub fn gap(&self) -> (f64, f64) {
        self.gap
    }

    pub fn gevrey_s(&self) -> &Rat {
        &self.gevrey_s
    }

    /// Coefficient matrix of (t - t0)^k; `k` must be within the valid order.
    pub fn order_matrix(&self, k: u32) -> &FloatMatrix {
        self.t_jet
            .coeff(&MultiIndex(vec![k]))
            .expect("order within the valid range")
    }

    /// P(t0 + offset), evaluating the stored polynomial.
    pub fn at_offset(&self, offset: f64) -> Result<FloatMatrix> {
        self.t_jet.eval(&[ComplexFloat::new(offset, 0.0)])
    }

    pub fn to_json(&self) -> Value {
        let orders: Vec<Value> = (0..=self.t_jet.valid())
            .map(|k| self.order_matrix(k).to_json())
            .collect();
        json!({
            "dim": self.dim(),
            "t0": self.t0(),
            "t_jet": orders,
            "gap": [self.gap.0, self.gap.1],
            "s": rat_to_str(&self.gevrey_s),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Validation(format!("expected a family object, got {v}")))?;
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| Error::Validation(format!("family is missing \"{name}\"")))
        };
        let dim = field("dim")?
            .as_u64()
            .ok_or_else(|| Error::Validation("\"dim\" must be a positive integer".into()))?
            as usize;
        let t0 = field("t0")?
            .as_f64()
            .ok_or_else(|| Error::Validation("\"t0\" must be a number".into()))?;
        let jets = field("t_jet")?
            .as_array()
            .ok_or_else(|| Error::Validation("\"t_jet\" must be an array of matrices".into()))?;
        let mut orders = Vec::with_capacity(jets.len());
        for m in jets {
            let parsed = <FloatMatrix as Ring>::from_json(m)?;
            if parsed.dim() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "a t_jet matrix has dimension {}, header says {dim}",
                    parsed.dim()
                )));
            }
            orders.push(parsed);
        }
        let gap_v = field("gap")?
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Validation("\"gap\" must be a two element array".into()))?;
        let g = |i: usize| {
            gap_v[i]
                .as_f64()
                .ok_or_else(|| Error::Validation("gap endpoints must be numbers".into()))
        };
        let s_str = field("s")?
            .as_str()
            .ok_or_else(|| Error::Validation("\"s\" must be a rational string".into()))?;
        Self::from_orders(t0, orders, (g(0)?, g(1)?), rat_from_str(s_str)?)
    }
}

/// A circle in the z plane, traversed counterclockwise by `nodes` trapezoid
/// points. The weights fold in the 1/(2 pi i) normalization: with
/// z(theta) = c + r e^{i theta},
///
/// ```text
/// (1/2 pi i) contour-int f(z) dz ~ sum_i w_i f(z_i),   w_i = (r/m) e^{i theta_i}.
/// ```
#[derive(Debug, Clone)]
pub struct Contour {
    center: ComplexFloat,
    radius: f64,
    nodes: u32,
}

impl Contour {
    pub fn new(center: ComplexFloat, radius: f64, nodes: u32) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Validation(format!(
                "contour radius must be positive and finite, got {radius}"
            )));
        }
        if nodes == 0 {
            return Err(Error::Validation("a contour needs at least one node".into()));
        }
        Ok(Contour {
            center,
            radius,
            nodes,
        })
    }

    /// The circle through both gap endpoints: center at the midpoint on the
    /// real axis, radius half the gap width.
    pub fn for_gap(gap: (f64, f64), nodes: u32) -> Result<Self> {
        if !(gap.0.is_finite() && gap.1.is_finite() && gap.0 < gap.1) {
            return Err(Error::Validation(format!(
                "gap window ({}, {}) is not an ordered finite interval",
                gap.0, gap.1
            )));
        }
        Self::new(
            ComplexFloat::new(0.5 * (gap.0 + gap.1), 0.0),
            0.5 * (gap.1 - gap.0),
            nodes,
        )
    }

    pub fn center(&self) -> ComplexFloat {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes(&self) -> u32 {
        self.nodes
    }

    /// Node `i` of `m` as (evaluation point, quadrature weight).
    pub fn node(&self, i: u32, m: u32) -> (ComplexFloat, ComplexFloat) {
        let theta = std::f64::consts::TAU * (i as f64) / (m as f64);
        let e = Complex64::new(theta.cos(), theta.sin());
        let z = self.center.0 + self.radius * e;
        let w = (self.radius / (m as f64)) * e;
        (ComplexFloat(z), ComplexFloat(w))
    }
}

/// A frequency window a(tau) as a scalar jet in the single tau variable,
/// with an asserted Gevrey exponent sigma for its derivative growth.
///
/// Only jet data enters the calculus, so properties of a window function
/// that live beyond its Taylor expansion at tau0 (compact support, sign on
/// an interval) cannot be verified here and are the caller's assertion. The
/// value a(tau0) must be real; it shifts the effective spectral parameter.
#[derive(Debug, Clone)]
pub struct FilterSymbol {
    tau_jet: Jet<ComplexFloat>,
    gevrey_sigma: Rat,
}

impl FilterSymbol {
    pub fn new(tau_jet: Jet<ComplexFloat>, gevrey_sigma: Rat) -> Result<Self> {
        let split = tau_jet.split();
        if split.n_x != 0 || split.n_xi != 1 {
            return Err(Error::Validation(format!(
                "a filter is a jet in one tau variable, got split ({}, {})",
                split.n_x, split.n_xi
            )));
        }
        if tau_jet.base()[0].im() != 0.0 {
            return Err(Error::Validation(
                "the filter base point tau0 must be real".into(),
            ));
        }
        if gevrey_sigma < Rat::from_integer(BigInt::from(1)) {
            return Err(Error::Validation(format!(
                "Gevrey exponent sigma must be at least 1, got {gevrey_sigma}"
            )));
        }
        let value = tau_jet
            .coeff(&MultiIndex(vec![0]))
            .expect("order zero stored")
            .clone();
        if value.im() != 0.0 {
            return Err(Error::Validation(format!(
                "the window value at the base point must be real, got {}",
                value.to_element_string()
            )));
        }
        Ok(FilterSymbol {
            tau_jet,
            gevrey_sigma,
        })
    }

    /// The identity window a(tau) = tau, which reproduces the unfiltered
    /// pipeline exactly.
    pub fn identity(tau0: f64, valid: u32) -> Result<Self> {
        let split = VarSplit::new(0, 1)?;
        let jet = Jet::coordinate(split, vec![ComplexFloat::new(tau0, 0.0)], (), valid, 0)?;
        Self::new(jet, Rat::from_integer(BigInt::from(1)))
    }

    /// A synthetic window jet at tau0 = 0 with prescribed Gevrey-sigma
    /// derivative growth: the coefficient of tau^k is scale^k (k!)^(sigma-1)
    /// for k >= 1 and the value at the base is 0. This models the local data
    /// of a Gevrey window function; the factorial layer is what separates
    /// sigma > 1 from the analytic case in every growth diagnostic.
    pub fn synthetic(sigma: &Rat, scale: f64, valid: u32) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Validation(format!(
                "synthetic window scale must be positive and finite, got {scale}"
            )));
        }
        let sig = sigma
            .to_f64()
            .ok_or_else(|| Error::Validation("sigma does not fit in a float".into()))?;
        let split = VarSplit::new(0, 1)?;
        let mut entries = Vec::with_capacity(valid as usize);
        let mut coeff = 1.0f64;
        for k in 1..=valid {
            // coeff tracks scale^k (k!)^(sigma - 1) via one factor per step.
            coeff *= scale * (k as f64).powf(sig - 1.0);
            entries.push((MultiIndex(vec![k]), ComplexFloat::new(coeff, 0.0)));
        }
        let jet = Jet::from_parts(
            split,
            vec![ComplexFloat::new(0.0, 0.0)],
            (),
            valid,
            valid,
            entries,
        )?;
        Self::new(jet, sigma.clone())
    }

    pub fn tau0(&self) -> f64 {
        self.tau_jet.base()[0].re()
    }

    pub fn sigma(&self) -> &Rat {
        &self.gevrey_sigma
    }

    pub fn tau_jet(&self) -> &Jet<ComplexFloat> {
        &self.tau_jet
    }

    /// a(tau0), real by the construction invariant.
    pub fn value_at_base(&self) -> f64 {
        self.tau_jet
            .coeff(&MultiIndex(vec![0]))
            .expect("order zero stored")
            .re()
    }

    pub fn to_json(&self) -> Value {
        let coeffs: Vec<Value> = (0..=self.tau_jet.valid())
            .map(|k| {
                let c = self
                    .tau_jet
                    .coeff(&MultiIndex(vec![k]))
                    .expect("order within the valid range");
                Value::String(c.to_element_string())
            })
            .collect();
        json!({
            "tau0": self.tau0(),
            "sigma": rat_to_str(&self.gevrey_sigma),
            "coeffs": coeffs,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Validation(format!("expected a filter object, got {v}")))?;
        let field = |name: &str| {
            obj.get(name)
                .ok_or_else(|| Error::Validation(format!("filter is missing \"{name}\"")))
        };
        let tau0 = field("tau0")?
            .as_f64()
            .ok_or_else(|| Error::Validation("\"tau0\" must be a number".into()))?;
        let sigma = rat_from_str(
            field("sigma")?
                .as_str()
                .ok_or_else(|| Error::Validation("\"sigma\" must be a rational string".into()))?,
        )?;
        let coeffs = field("coeffs")?
            .as_array()
            .ok_or_else(|| Error::Validation("\"coeffs\" must be an array of strings".into()))?;
        if coeffs.is_empty() {
            return Err(Error::Validation(
                "a filter needs at least the order zero coefficient".into(),
            ));
        }
        let mut entries = Vec::with_capacity(coeffs.len());
        for (k, c) in coeffs.iter().enumerate() {
            let s = c
                .as_str()
                .ok_or_else(|| Error::Validation("filter coefficients must be strings".into()))?;
            entries.push((
                MultiIndex(vec![k as u32]),
                <ComplexFloat as Scalar>::parse_element_string(s)?,
            ));
        }
        let valid = (coeffs.len() - 1) as u32;
        let jet = Jet::from_parts(
            VarSplit::new(0, 1)?,
            vec![ComplexFloat::new(tau0, 0.0)],
            (),
            valid,
            valid,
            entries,
        )?;
        Self::new(jet, sigma)
    }
}

/// The expansion output: t-jets Pi_0 ... Pi_N restricted to tau = 0, the
/// node count the quadrature settled on, and a map of residual diagnostics
/// (at least "idempotency" and "hermiticity" of the leading jet at the base
/// point; check operations append their reports under their own keys).
///
/// Valid orders decrease with the correction index: Pi_j keeps the depth
/// budget of the parametrix, one order less per power of h.
#[derive(Debug, Clone)]
pub struct ProjectorExpansion {
    pi_jets: Vec<Jet<FloatMatrix>>,
    residuals: BTreeMap<String, f64>,
    nodes_used: u32,
}

impl ProjectorExpansion {
    /// Highest correction order stored.
    pub fn order(&self) -> u32 {
        (self.pi_jets.len() - 1) as u32
    }

    pub fn pi(&self, j: u32) -> &Jet<FloatMatrix> {
        &self.pi_jets[j as usize]
    }

    pub fn pi_jets(&self) -> &[Jet<FloatMatrix>] {
        &self.pi_jets
    }

    pub fn residuals(&self) -> &BTreeMap<String, f64> {
        &self.residuals
    }

    pub fn nodes_used(&self) -> u32 {
        self.nodes_used
    }

    /// Stores a diagnostic value under `key`, replacing any previous one.
    pub fn record_residual(&mut self, key: &str, value: f64) {
        self.residuals.insert(key.to_string(), value);
    }

    /// Coefficient norms ||Pi_j(t0)|| at the base point, one per order.
    pub fn norms_at_base(&self) -> Result<Vec<f64>> {
        self.pi_jets
            .iter()
            .map(|jet| Ok(jet.eval(&[ComplexFloat::new(0.0, 0.0)])?.nu()))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let pis: Vec<Value> = self
            .pi_jets
            .iter()
            .map(|jet| {
                let orders: Vec<Value> = (0..=jet.valid())
                    .map(|k| {
                        jet.coeff(&MultiIndex(vec![k]))
                            .expect("order within the valid range")
                            .to_json()
                    })
                    .collect();
                json!({ "valid": jet.valid(), "t_jet": orders })
            })
            .collect();
        json!({
            "order": self.order(),
            "nodes": self.nodes_used,
            "residuals": &self.residuals,
            "pi": pis,
        })
    }
}

/// A per-order residual vector with its maximum, the common return shape of
/// the expansion diagnostics.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    pub max_residual: f64,
    pub per_order: Vec<f64>,
}

fn report_from(per_order: Vec<f64>) -> ResidualReport {
    let max_residual = per_order.iter().copied().fold(0.0, f64::max);
    ResidualReport {
        max_residual,
        per_order,
    }
}

/// The order zero symbol q(t, tau) = z - a(tau) - P(t) as a formal symbol
/// in the (t, tau) calculus, with a(tau) = tau when no filter is given.
///
/// The tau dependence is stored exactly (the window jet enters coefficient
/// by coefficient); there are no higher h-coefficients. Errors with
/// [`Error::OnSpectrum`] when z - a(tau0) comes within [`SPECTRUM_MARGIN`]
/// of an eigenvalue of P(t0), since every later inversion degrades with
/// that distance.
pub fn resolvent_symbol(
    family: &OperatorFamily,
    z: ComplexFloat,
    filter: Option<&FilterSymbol>,
) -> Result<FormalSymbol<FloatMatrix>> {
    resolvent_symbol_with_margin(family, z, filter, SPECTRUM_MARGIN)
}

/// [`resolvent_symbol`] with an explicit clearance margin.
pub fn resolvent_symbol_with_margin(
    family: &OperatorFamily,
    z: ComplexFloat,
    filter: Option<&FilterSymbol>,
    margin: f64,
) -> Result<FormalSymbol<FloatMatrix>> {
    let owned;
    let filt = match filter {
        Some(f) => f,
        None => {
            owned = FilterSymbol::identity(0.0, family.t_jet().valid())?;
            &owned
        }
    };
    let jet = resolvent_jet(family, filt, z, margin)?;
    let params = GevreyParams::new(family.gevrey_s().clone(), filt.sigma().clone())?;
    FormalSymbol::new(params, vec![jet])
}

fn resolvent_jet(
    family: &OperatorFamily,
    filt: &FilterSymbol,
    z: ComplexFloat,
    margin: f64,
) -> Result<Jet<FloatMatrix>> {
    let dim = family.dim();
    let p0 = family.order_matrix(0);
    let eig = eigen::eigh(p0, HERMITIAN_TOL)?;
    let zeff = z.0 - Complex64::new(filt.value_at_base(), 0.0);
    let dist = eig
        .values
        .iter()
        .map(|l| (zeff - l).norm())
        .fold(f64::INFINITY, f64::min);
    if dist <= margin {
        return Err(Error::OnSpectrum(format!(
            "evaluation point {} sits {dist:.3e} from the shifted spectrum \
             of P(t0), inside the margin {margin:.3e}",
            z.to_element_string()
        )));
    }

    let valid = family.t_jet().valid().min(filt.tau_jet().valid());
    let split = VarSplit::new(1, 1)?;
    let base = vec![
        family.t_jet().base()[0].clone(),
        ComplexFloat::new(filt.tau0(), 0.0),
    ];
    let mut entries = Vec::new();
    let head = SquareMatrix::identity(dim)
        .scale(&ComplexFloat(zeff))
        .sub(p0);
    entries.push((MultiIndex(vec![0, 0]), head));
    for (idx, c) in family.t_jet().iter_valid() {
        let k = idx.0[0];
        if k == 0 || k > valid {
            continue;
        }
        entries.push((MultiIndex(vec![k, 0]), c.neg()));
    }
    for (idx, c) in filt.tau_jet().iter_valid() {
        let l = idx.0[0];
        if l == 0 || l > valid {
            continue;
        }
        let m = SquareMatrix::identity(dim).scale(c);
        entries.push((MultiIndex(vec![0, l]), m.neg()));
    }
    Jet::from_parts(split, base, dim, valid, valid, entries)
}

/// One quadrature pass at a fixed node count: parametrix per node, tau
/// restriction, weighted accumulation in ascending node order.
fn accumulate(
    family: &OperatorFamily,
    n: u32,
    contour: &Contour,
    filt: &FilterSymbol,
    m_nodes: u32,
    margin: f64,
) -> Result<Vec<Jet<FloatMatrix>>> {
    let tau_offset = [ComplexFloat::new(-filt.tau0(), 0.0)];
    let mut acc: Vec<Option<Jet<FloatMatrix>>> = (0..=n).map(|_| None).collect();
    for i in 0..m_nodes {
        let (z, w) = contour.node(i, m_nodes);
        let jet = resolvent_jet(family, filt, z, margin)?;
        let params = GevreyParams::new(family.gevrey_s().clone(), filt.sigma().clone())?;
        let symbol = FormalSymbol::new(params, vec![jet])?;
        let s = symbol.parametrix(n, Side::Right)?;
        for j in 0..=n {
            let term = s.coeff(j).restrict_xi(&tau_offset)?.scale_scalar(&w);
            acc[j as usize] = Some(match acc[j as usize].take() {
                None => term,
                Some(prev) => prev.add(&term)?,
            });
        }
    }
    Ok(acc
        .into_iter()
        .map(|j| j.expect("at least one node accumulated"))
        .collect())
}

/// Idempotency defect ||Q^2 - Q|| of the leading jet's value at the base.
fn idempotency_defect(pi0: &Jet<FloatMatrix>) -> Result<f64> {
    let q = pi0.eval(&[ComplexFloat::new(0.0, 0.0)])?;
    Ok(q.mul(&q).sub(&q).nu())
}

/// Adaptive quadrature: doubles the node count until the leading projector
/// is idempotent at the base point within [`QUADRATURE_TOL`].
fn expansion_core(
    family: &OperatorFamily,
    n: u32,
    contour: &Contour,
    filt: &FilterSymbol,
    margin: f64,
) -> Result<(Vec<Jet<FloatMatrix>>, f64, u32)> {
    let mut m_nodes = contour.nodes();
    let mut last_defect = f64::INFINITY;
    for _ in 0..=MAX_DOUBLINGS {
        let pis = accumulate(family, n, contour, filt, m_nodes, margin)?;
        let defect = idempotency_defect(&pis[0])?;
        if defect < QUADRATURE_TOL {
            return Ok((pis, defect, m_nodes));
        }
        last_defect = defect;
        m_nodes = m_nodes.saturating_mul(2);
    }
    Err(Error::QuadratureNotConverged(format!(
        "idempotency defect {last_defect:.3e} after {MAX_DOUBLINGS} doublings \
         (target {QUADRATURE_TOL:.1e}); an eigenvalue is too close to the contour"
    )))
}

/// Contour quadrature of the projector expansion through order h^N.
///
/// Per node the parametrix of [`resolvent_symbol`] is built to order N in
/// the (t, tau) calculus and each coefficient is restricted to tau = 0; the
/// weighted node sum is the expansion. Node counts start at the contour's
/// and double until the leading jet is idempotent at the base point within
/// [`QUADRATURE_TOL`], at most [`MAX_DOUBLINGS`] times.
///
/// The restriction to tau = 0 is exact for the unfiltered pipeline, whose
/// integral is independent of tau outright. A genuinely nonlinear window
/// makes the corrections tau dependent; the stored t-jets are then the
/// tau = 0 slice, which is what the growth diagnostics consume.
pub fn projector_expansion(
    family: &OperatorFamily,
    n: u32,
    contour: &Contour,
    filter: Option<&FilterSymbol>,
) -> Result<ProjectorExpansion> {
    let owned;
    let filt = match filter {
        Some(f) => f,
        None => {
            owned = FilterSymbol::identity(0.0, family.t_jet().valid())?;
            &owned
        }
    };
    let (pi_jets, defect, nodes_used) = expansion_core(family, n, contour, filt, SPECTRUM_MARGIN)?;
    let pi0_base = pi_jets[0].eval(&[ComplexFloat::new(0.0, 0.0)])?;
    let mut residuals = BTreeMap::new();
    residuals.insert("idempotency".to_string(), defect);
    residuals.insert("hermiticity".to_string(), eigen::hermitian_defect(&pi0_base));
    Ok(ProjectorExpansion {
        pi_jets,
        residuals,
        nodes_used,
    })
}

/// Residuals of the projector identity sum_{a+b=j} Pi_a Pi_b = Pi_j for
/// every j up to the expansion order, as plain t-jet products over the
/// shared valid ranges. Reports, never errors.
///
/// For a filtered expansion with a genuinely nonlinear window the stored
/// jets are tau = 0 slices and the operator identity carries extra terms in
/// the tau derivatives the slices dropped; from order two on, the residual
/// then measures that slice defect rather than quadrature error.
pub fn check_projector_identity(pi: &ProjectorExpansion) -> ResidualReport {
    let n = pi.order();
    let mut per_order = Vec::with_capacity(n as usize + 1);
    for j in 0..=n {
        let mut acc: Option<Jet<FloatMatrix>> = None;
        for a in 0..=j {
            let term = pi
                .pi(a)
                .mul(pi.pi(j - a))
                .expect("expansion jets share a base point");
            acc = Some(match acc {
                None => term,
                Some(prev) => prev.add(&term).expect("same base point"),
            });
        }
        let sum = acc.expect("the a = 0 term always exists");
        per_order.push(
            sum.max_coeff_diff(pi.pi(j))
                .expect("expansion jets share a base point"),
        );
    }
    report_from(per_order)
}

/// Residuals of the intertwining relation order by order.
///
/// Unfiltered, order j of the commutator with hD_t + P(t) is
///
/// ```text
/// [P(t), Pi_j(t)] + (1/i) Pi_{j-1}'(t)
/// ```
///
/// computed by exact jet differentiation. With a window the full symbol
/// a(tau) + P(t) is composed with the (tau independent) expansion jets
/// through the composition product in (t, tau) and the commutator's
/// h-coefficients are reported. For a window with nonconstant slope the
/// stored slices cannot carry the tau dependence of the true corrections,
/// so residuals from order two on measure that defect; the identity window
/// reproduces the unfiltered report.
///
/// Errors with [`Error::OrderExhausted`] if some needed Pi_{j-1} has no
/// valid order left to differentiate.
pub fn check_intertwining(
    pi: &ProjectorExpansion,
    family: &OperatorFamily,
    filter: Option<&FilterSymbol>,
) -> Result<ResidualReport> {
    let n = pi.order();
    match filter {
        None => {
            let minus_i = ComplexFloat::new(0.0, -1.0);
            let dt = MultiIndex(vec![1]);
            let p = family.t_jet();
            let mut per_order = Vec::with_capacity(n as usize + 1);
            for j in 0..=n {
                let comm = p.mul(pi.pi(j))?.sub(&pi.pi(j).mul(p)?)?;
                let total = if j == 0 {
                    comm
                } else {
                    comm.add(&pi.pi(j - 1).derive(&dt)?.scale_scalar(&minus_i))?
                };
                per_order.push(total.max_coeff_nu());
            }
            Ok(report_from(per_order))
        }
        Some(filt) => {
            let params = GevreyParams::new(family.gevrey_s().clone(), filt.sigma().clone())?;
            let a_jet = window_operator_jet(family, filt)?;
            let a_sym = FormalSymbol::new(params.clone(), vec![a_jet])?.padded(n)?;
            let coeffs: Result<Vec<_>> = pi
                .pi_jets()
                .iter()
                .map(|jet| embed_t_jet(jet, filt.tau0()))
                .collect();
            let pi_sym = FormalSymbol::new(params, coeffs?)?;
            let left = a_sym.sharp(&pi_sym, n)?.symbol;
            let right = pi_sym.sharp(&a_sym, n)?.symbol;
            let diff = left.sub(&right)?;
            let per_order = diff.coeffs().iter().map(|c| c.max_coeff_nu()).collect();
            Ok(report_from(per_order))
        }
    }
}

/// The jet of a(tau) + P(t) in the (t, tau) calculus.
fn window_operator_jet(family: &OperatorFamily, filt: &FilterSymbol) -> Result<Jet<FloatMatrix>> {
    let dim = family.dim();
    let valid = family.t_jet().valid().min(filt.tau_jet().valid());
    let split = VarSplit::new(1, 1)?;
    let base = vec![
        family.t_jet().base()[0].clone(),
        ComplexFloat::new(filt.tau0(), 0.0),
    ];
    let mut entries = Vec::new();
    let head = family
        .order_matrix(0)
        .add(&SquareMatrix::identity(dim).scale(&ComplexFloat::new(filt.value_at_base(), 0.0)));
    entries.push((MultiIndex(vec![0, 0]), head));
    for (idx, c) in family.t_jet().iter_valid() {
        let k = idx.0[0];
        if k == 0 || k > valid {
            continue;
        }
        entries.push((MultiIndex(vec![k, 0]), c.clone()));
    }
    for (idx, c) in filt.tau_jet().iter_valid() {
        let l = idx.0[0];
        if l == 0 || l > valid {
            continue;
        }
        entries.push((MultiIndex(vec![0, l]), SquareMatrix::identity(dim).scale(c)));
    }
    Jet::from_parts(split, base, dim, valid, valid, entries)
}

/// Re-embeds a t-jet into the (t, tau) calculus as a tau independent jet at
/// the given tau base point.
fn embed_t_jet(jet: &Jet<FloatMatrix>, tau0: f64) -> Result<Jet<FloatMatrix>> {
    let split = VarSplit::new(1, 1)?;
    let base = vec![jet.base()[0].clone(), ComplexFloat::new(tau0, 0.0)];
    let entries = jet
        .iter_valid()
        .map(|(idx, c)| (MultiIndex(vec![idx.0[0], 0]), c.clone()))
        .collect();
    Jet::from_parts(split, base, jet.shape(), jet.valid(), jet.valid(), entries)
}

/// Recomputes the unfiltered expansion with the tau variable based at each
/// given offset and reports the coefficientwise disagreement with the
/// reference run at base 0. The integral does not depend on where the tau
/// expansion is centered, so up to quadrature error and the reconstruction
/// tail the runs must agree.
///
/// A run based at delta evaluates its jets at tau offset -delta, so the
/// t-coefficient of order k is reconstructed from the tau tail of length
/// valid - k the jet still carries, with truncation error on the order of
/// delta^(valid - k + 1). Coefficients are therefore compared only through
/// the largest order whose tail bound stays below 1e-9; offsets must lie
/// strictly inside the unit disc for the tail to decay at all.
pub fn tau_independence_check(
    family: &OperatorFamily,
    n: u32,
    contour: &Contour,
    tau_offsets: &[f64],
) -> Result<ResidualReport> {
    if tau_offsets.is_empty() {
        return Err(Error::Validation(
            "tau independence needs at least one offset".into(),
        ));
    }
    for d in tau_offsets {
        if !(d.is_finite() && d.abs() < 1.0) {
            return Err(Error::Validation(format!(
                "tau offsets must lie strictly inside the unit disc, got {d}"
            )));
        }
    }
    let reference = {
        let filt = FilterSymbol::identity(0.0, family.t_jet().valid())?;
        expansion_core(family, n, contour, &filt, SPECTRUM_MARGIN)?.0
    };
    let mut per_order = vec![0.0f64; n as usize + 1];
    for d in tau_offsets {
        let filt = FilterSymbol::identity(*d, family.t_jet().valid())?;
        let shifted = expansion_core(family, n, contour, &filt, SPECTRUM_MARGIN)?.0;
        for j in 0..=n as usize {
            let common = reference[j].valid().min(shifted[j].valid());
            let cmp = comparable_order(common, d.abs());
            let a = reference[j].truncated(cmp)?;
            let b = shifted[j].truncated(cmp)?;
            per_order[j] = per_order[j].max(a.max_coeff_diff(&b)?);
        }
    }
    Ok(report_from(per_order))
}

/// Largest t-order whose tau reconstruction tail delta^(common - k + 1)
/// stays below [`TAU_TAIL_TARGET`], clamped into the valid range.
fn comparable_order(common: u32, delta: f64) -> u32 {
    if delta == 0.0 {
        return common;
    }
    // common - k + 1 >= ln(target) / ln(delta), both logs negative.
    let needed = (TAU_TAIL_TARGET.ln() / delta.ln()).ceil();
    let cmp = common as f64 + 1.0 - needed;
    if cmp <= 0.0 {
        0
    } else {
        (cmp as u32).min(common)
    }
}

/// Fits ||Pi_j(t0)|| against the envelope shape C^(j+1) j!^e and returns
/// the fitted constants; the caller compares the exponent with the expected
/// s + sigma - 1 of the pipeline that produced the expansion.
///
/// Needs the expansion order to be at least 6 so the fit has enough usable
/// points after the preasymptotic orders are dropped. A family whose
/// corrections vanish (constant spectral data) leaves too few nonzero norms
/// and surfaces as [`Error::InsufficientData`] from the fit itself.
pub fn growth_report(pi: &ProjectorExpansion, s: &Rat, sigma: &Rat) -> Result<GrowthFit> {
    if pi.order() < 6 {
        return Err(Error::InsufficientData(format!(
            "growth fits need corrections through order 6, expansion stops at {}",
            pi.order()
        )));
    }
    let norms = pi.norms_at_base()?;
    fit_growth(&norms, &GevreyParams::new(s.clone(), sigma.clone())?)
}

/// Order by order solution of the intertwining and idempotency constraints
/// for involutive families (P(t)^2 = 1 with the window selecting the +1
/// eigenvalue): an independent construction the quadrature is tested
/// against.
///
/// With Pi_0 = (1 + P)/2 and Q = (1 - P)/2, order j >= 1 is determined by
///
/// ```text
/// F = (1/i) Pi_{j-1}',            D = sum_{a+b=j, a,b >= 1} Pi_a Pi_b,
/// Pi_j = (Q F Pi_0 - Pi_0 F Q)/2 + Q D Q - Pi_0 D Pi_0,
/// ```
///
/// the off diagonal blocks from [P, Pi_j] = -F (the eigenvalue difference
/// is 2) and the diagonal blocks from the idempotency identity at order j.
pub fn projector_recursion_involutive(
    family: &OperatorFamily,
    n: u32,
) -> Result<Vec<Jet<FloatMatrix>>> {
    let gap = family.gap();
    let selects_plus = gap.0 < 1.0 && 1.0 < gap.1;
    let excludes_minus = !(gap.0 < -1.0 && -1.0 < gap.1);
    if !(selects_plus && excludes_minus) {
        return Err(Error::Validation(format!(
            "the recursion assumes the window ({}, {}) selects the +1 \
             eigenvalue of an involution and excludes -1",
            gap.0, gap.1
        )));
    }
    let t = family.t_jet();
    let identity = Jet::constant(
        t.split(),
        t.base().to_vec(),
        t.valid(),
        SquareMatrix::identity(family.dim()),
    )?;
    let sq_defect = t.mul(t)?.max_coeff_diff(&identity)?;
    if sq_defect > INVOLUTION_TOL {
        return Err(Error::Validation(format!(
            "the recursion applies to involutive families with P(t)^2 = 1; \
             defect {sq_defect:.3e}"
        )));
    }
    let half = Rat::new(BigInt::from(1), BigInt::from(2));
    let minus_i = ComplexFloat::new(0.0, -1.0);
    let dt = MultiIndex(vec![1]);
    let pi0 = identity.add(t)?.scale_rat(&half);
    let q0 = identity.sub(t)?.scale_rat(&half);
    let mut pis = vec![pi0.clone()];
    for j in 1..=n as usize {
        let f = pis[j - 1].derive(&dt)?.scale_scalar(&minus_i);
        let mut x = q0
            .mul(&f)?
            .mul(&pi0)?
            .sub(&pi0.mul(&f)?.mul(&q0)?)?
            .scale_rat(&half);
        let mut d: Option<Jet<FloatMatrix>> = None;
        for a in 1..j {
            let term = pis[a].mul(&pis[j - a])?;
            d = Some(match d {
                None => term,
                Some(prev) => prev.add(&term)?,
            });
        }
        if let Some(d) = d {
            x = x
                .add(&q0.mul(&d)?.mul(&q0)?)?
                .sub(&pi0.mul(&d)?.mul(&pi0)?)?;
        }
        pis.push(x);
    }
    Ok(pis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cf(re: f64) -> ComplexFloat {
        ComplexFloat::new(re, 0.0)
    }

    fn cmat(rows: &[&[(f64, f64)]]) -> FloatMatrix {
        let n = rows.len();
        let mut m = SquareMatrix::zero(n);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n);
            for (j, (re, im)) in row.iter().enumerate() {
                m.set(i, j, ComplexFloat::new(*re, *im));
            }
        }
        m
    }

    fn rat(n: i64) -> Rat {
        Rat::from_integer(BigInt::from(n))
    }

    /// P(t) = [[cos t, sin t], [sin t, -cos t]]: an involutive rotating
    /// two-level family with constant eigenvalues +-1.
    fn rotating_family(valid: u32) -> OperatorFamily {
        let mut orders = Vec::new();
        let mut fact = 1.0f64;
        for k in 0..=valid {
            if k > 0 {
                fact *= k as f64;
            }
            let (c, s) = match k % 4 {
                0 => (1.0 / fact, 0.0),
                1 => (0.0, 1.0 / fact),
                2 => (-1.0 / fact, 0.0),
                _ => (0.0, -1.0 / fact),
            };
            orders.push(cmat(&[&[(c, 0.0), (s, 0.0)], &[(s, 0.0), (-c, 0.0)]]));
        }
        OperatorFamily::from_orders(0.0, orders, (0.0, 2.0), rat(1)).unwrap()
    }

    fn constant_family(valid: u32) -> OperatorFamily {
        let mut orders = vec![cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]])];
        orders.resize(valid as usize + 1, SquareMatrix::zero(2));
        OperatorFamily::from_orders(0.0, orders, (0.0, 2.0), rat(1)).unwrap()
    }

    /// diag(1 + t + t^2/2, -1 - t): diagonal, t dependent spectrum, but
    /// constant eigenprojections.
    fn diagonal_family(valid: u32) -> OperatorFamily {
        let mut orders = vec![
            cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]),
            cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]),
            cmat(&[&[(0.5, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]),
        ];
        orders.resize(valid as usize + 1, SquareMatrix::zero(2));
        OperatorFamily::from_orders(0.0, orders, (0.0, 2.0), rat(1)).unwrap()
    }

    fn gap_contour(family: &OperatorFamily) -> Contour {
        Contour::for_gap(family.gap(), DEFAULT_NODES).unwrap()
    }

    #[test]
    fn gap_contour_passes_through_the_endpoints() {
        let c = Contour::for_gap((0.0, 2.0), 8).unwrap();
        assert_eq!(c.center().re(), 1.0);
        assert_eq!(c.radius(), 1.0);
        let (z0, _) = c.node(0, 8);
        assert!((z0.re() - 2.0).abs() < 1e-15 && z0.im().abs() < 1e-15);
        let (z4, _) = c.node(4, 8);
        assert!(z4.re().abs() < 1e-15 && z4.im().abs() < 1e-15);
        // The weights sum to zero: the quadrature of an entire integrand
        // (here f = 1) has no residue.
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..8 {
            acc += c.node(i, 8).1 .0;
        }
        assert!(acc.norm() < 1e-15);
    }

    #[test]
    fn resolvent_of_a_constant_family_is_affine_in_tau() {
        let family = constant_family(3);
        let sym = resolvent_symbol(&family, ComplexFloat::new(1.0, 1.0), None).unwrap();
        assert_eq!(sym.h_order(), 0);
        let q = sym.coeff(0);
        let head = q.coeff(&MultiIndex(vec![0, 0])).unwrap();
        let expect = cmat(&[&[(0.0, 1.0), (0.0, 0.0)], &[(0.0, 0.0), (2.0, 1.0)]]);
        assert!(head.sub(&expect).nu() < 1e-15);
        let lin = q.coeff(&MultiIndex(vec![0, 1])).unwrap();
        let minus_id = SquareMatrix::identity(2).neg();
        assert!(lin.sub(&minus_id).nu() == 0.0);
        for (idx, c) in q.iter_valid() {
            if idx.0 != vec![0, 0] && idx.0 != vec![0, 1] {
                assert!(c.is_zero(), "unexpected coefficient at {idx}");
            }
        }
    }

    #[test]
    fn identity_window_reproduces_the_unfiltered_resolvent() {
        let family = rotating_family(5);
        let z = ComplexFloat::new(1.0, 1.0);
        let bare = resolvent_symbol(&family, z, None).unwrap();
        let filt = FilterSymbol::identity(0.0, 5).unwrap();
        let windowed = resolvent_symbol(&family, z, Some(&filt)).unwrap();
        assert_eq!(bare.coeff(0).max_coeff_diff(windowed.coeff(0)).unwrap(), 0.0);
    }

    #[test]
    fn resolvent_rejects_points_near_the_spectrum() {
        let family = rotating_family(3);
        let hit = resolvent_symbol(&family, cf(1.0), None);
        assert!(matches!(hit, Err(Error::OnSpectrum(_))));
        // A window value shifts the effective spectrum: z = 1.25 is safe
        // bare but sits on the spectrum once a(tau0) = 0.25.
        let jet = Jet::from_parts(
            VarSplit::new(0, 1).unwrap(),
            vec![cf(0.0)],
            (),
            3,
            3,
            vec![
                (MultiIndex(vec![0]), cf(0.25)),
                (MultiIndex(vec![1]), cf(1.0)),
            ],
        )
        .unwrap();
        let filt = FilterSymbol::new(jet, rat(1)).unwrap();
        let shifted = resolvent_symbol(&family, cf(1.25), Some(&filt));
        assert!(matches!(shifted, Err(Error::OnSpectrum(_))));
        assert!(resolvent_symbol(&family, cf(1.25), None).is_ok());
    }

    #[test]
    fn family_construction_validates_its_invariants() {
        let p0 = cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]);
        // Gap endpoint on an eigenvalue.
        let hit = OperatorFamily::from_orders(0.0, vec![p0.clone()], (1.0, 3.0), rat(1));
        assert!(matches!(hit, Err(Error::OnSpectrum(_))));
        // Non-Hermitian base matrix.
        let skew = cmat(&[&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]);
        let bad = OperatorFamily::from_orders(0.0, vec![skew], (0.0, 2.0), rat(1));
        assert!(matches!(bad, Err(Error::Validation(_))));
        // Sub-analytic exponent.
        let s_half = Rat::new(BigInt::from(1), BigInt::from(2));
        let sub = OperatorFamily::from_orders(0.0, vec![p0.clone()], (0.0, 2.0), s_half);
        assert!(matches!(sub, Err(Error::Validation(_))));
        // Disordered window.
        let swapped = OperatorFamily::from_orders(0.0, vec![p0], (2.0, 0.0), rat(1));
        assert!(matches!(swapped, Err(Error::Validation(_))));
    }

    #[test]
    fn leading_inverse_matches_direct_matrix_inversion() {
        let family = rotating_family(8);
        let z = ComplexFloat::new(1.0, 1.0);
        let s0 = resolvent_symbol(&family, z, None)
            .unwrap()
            .coeff(0)
            .reciprocal()
            .unwrap();
        // The jet evaluates a Taylor polynomial of total order 8, so the
        // comparison carries a truncation tail near |offset|^9 ~ 1e-9.
        for (t_off, tau_off) in [(0.0, 0.0), (0.05, -0.02), (-0.08, 0.1)] {
            let value = s0.eval(&[cf(t_off), cf(tau_off)]).unwrap();
            let direct = SquareMatrix::identity(2)
                .scale(&ComplexFloat(z.0 - tau_off))
                .sub(&family.at_offset(t_off).unwrap())
                .inv()
                .unwrap();
            let err = value.sub(&direct).nu();
            assert!(err < 5e-8, "offset ({t_off}, {tau_off}): error {err:.3e}");
        }
    }

    #[test]
    fn constant_family_expansion_is_the_spectral_projector() {
        let family = constant_family(4);
        let pi = projector_expansion(&family, 3, &gap_contour(&family), None).unwrap();
        assert_eq!(pi.nodes_used(), DEFAULT_NODES);
        assert!(pi.residuals()["idempotency"] < QUADRATURE_TOL);
        assert!(pi.residuals()["hermiticity"] < 1e-12);
        let expect = Jet::constant(
            family.t_jet().split(),
            family.t_jet().base().to_vec(),
            4,
            cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]),
        )
        .unwrap();
        assert!(pi.pi(0).max_coeff_diff(&expect).unwrap() < 1e-12);
        for j in 1..=3 {
            assert!(pi.pi(j).max_coeff_nu() < 1e-12, "order {j} not zero");
        }
        // Cross-check against the eigendecomposition and the trace count.
        let (proj, count) = spectral_projector(family.order_matrix(0), family.gap(), 1e-12).unwrap();
        assert_eq!(count, 1);
        let at_base = pi.pi(0).eval(&[cf(0.0)]).unwrap();
        assert!(at_base.sub(&proj).nu() < 1e-9);
        let trace = at_base.trace();
        assert!((trace.re() - 1.0).abs() < 1e-9 && trace.im().abs() < 1e-12);
    }

    #[test]
    fn diagonal_family_keeps_a_constant_projector() {
        let family = diagonal_family(5);
        let pi = projector_expansion(&family, 3, &gap_contour(&family), None).unwrap();
        let expect = Jet::constant(
            family.t_jet().split(),
            family.t_jet().base().to_vec(),
            5,
            cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]]),
        )
        .unwrap();
        // The corrections vanish identically for commuting families; the
        // float pipeline leaves cancellation noise that compounds with the
        // parametrix depth, near 1e-9 at order three.
        assert!(pi.pi(0).max_coeff_diff(&expect).unwrap() < 1e-10);
        for j in 1..=3 {
            assert!(pi.pi(j).max_coeff_nu() < 5e-9, "order {j} not zero");
        }
    }

    #[test]
    fn rotating_family_matches_the_commutator_recursion() {
        let family = rotating_family(8);
        let pi = projector_expansion(&family, 4, &gap_contour(&family), None).unwrap();
        let oracle = projector_recursion_involutive(&family, 4).unwrap();
        for j in 0..=4u32 {
            let diff = pi.pi(j).max_coeff_diff(&oracle[j as usize]).unwrap();
            assert!(diff < 1e-8, "order {j}: quadrature vs recursion {diff:.3e}");
        }
        // First correction at the base point: the off diagonal block
        // solve gives [[0, i/4], [-i/4, 0]] for this family.
        let pi1 = pi.pi(1).eval(&[cf(0.0)]).unwrap();
        let expect = cmat(&[&[(0.0, 0.0), (0.0, 0.25)], &[(0.0, -0.25), (0.0, 0.0)]]);
        assert!(pi1.sub(&expect).nu() < 1e-9);
        assert!(pi.pi(1).max_coeff_nu() > 0.2);
    }

    #[test]
    fn recursion_exhausts_orders_when_the_jet_runs_out() {
        let family = rotating_family(2);
        assert!(projector_recursion_involutive(&family, 2).is_ok());
        let too_deep = projector_recursion_involutive(&family, 3);
        assert!(matches!(too_deep, Err(Error::OrderExhausted(_))));
    }

    #[test]
    fn recursion_rejects_windows_off_the_plus_level() {
        let p0 = cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (-1.0, 0.0)]]);
        let family =
            OperatorFamily::from_orders(0.0, vec![p0], (-2.0, 0.0), rat(1)).unwrap();
        let r = projector_recursion_involutive(&family, 1);
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn projector_identity_holds_on_the_rotating_family() {
        let family = rotating_family(8);
        let pi = projector_expansion(&family, 5, &gap_contour(&family), None).unwrap();
        let report = check_projector_identity(&pi);
        assert_eq!(report.per_order.len(), 6);
        assert!(report.max_residual < 1e-9, "residual {:.3e}", report.max_residual);
    }

    #[test]
    fn intertwining_residuals_vanish_order_by_order() {
        let family = rotating_family(8);
        let pi = projector_expansion(&family, 5, &gap_contour(&family), None).unwrap();
        let bare = check_intertwining(&pi, &family, None).unwrap();
        assert!(bare.max_residual < 1e-8, "residual {:.3e}", bare.max_residual);
        // The identity window routes through the composition product and
        // must reproduce the unfiltered report up to float noise.
        let filt = FilterSymbol::identity(0.0, 8).unwrap();
        let windowed = check_intertwining(&pi, &family, Some(&filt)).unwrap();
        assert!(windowed.max_residual < 1e-8);
        for (a, b) in bare.per_order.iter().zip(&windowed.per_order) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn tau_shifts_leave_the_expansion_unchanged() {
        let family = rotating_family(12);
        let contour = gap_contour(&family);
        let report = tau_independence_check(&family, 3, &contour, &[0.1, -0.1]).unwrap();
        assert!(report.max_residual < 1e-7, "residual {:.3e}", report.max_residual);
    }

    #[test]
    fn linear_window_scales_the_corrections() {
        let family = rotating_family(8);
        let contour = gap_contour(&family);
        let bare = projector_expansion(&family, 3, &contour, None).unwrap();
        // a(tau) = tau/2: still translation structure, so the slices stay
        // lossless, identities hold, and Pi_j picks up the factor (1/2)^j.
        let nu = 0.5;
        let jet = Jet::from_parts(
            VarSplit::new(0, 1).unwrap(),
            vec![cf(0.0)],
            (),
            8,
            8,
            vec![(MultiIndex(vec![1]), cf(nu))],
        )
        .unwrap();
        let filt = FilterSymbol::new(jet, rat(1)).unwrap();
        let windowed = projector_expansion(&family, 3, &contour, Some(&filt)).unwrap();
        for j in 0..=3u32 {
            let scaled = bare.pi(j).scale_scalar(&cf(nu.powi(j as i32)));
            let diff = windowed.pi(j).max_coeff_diff(&scaled).unwrap();
            assert!(diff < 1e-9, "order {j}: scaling defect {diff:.3e}");
        }
        let identity = check_projector_identity(&windowed);
        assert!(identity.max_residual < 1e-9);
        let inter = check_intertwining(&windowed, &family, Some(&filt)).unwrap();
        assert!(inter.max_residual < 1e-8);
    }

    #[test]
    fn nonlinear_window_keeps_the_leading_projector() {
        let family = rotating_family(6);
        let contour = gap_contour(&family);
        let bare = projector_expansion(&family, 2, &contour, None).unwrap();
        let filt = FilterSymbol::synthetic(&rat(2), 0.25, 6).unwrap();
        let windowed = projector_expansion(&family, 2, &contour, Some(&filt)).unwrap();
        // The leading jet is the spectral projector regardless of window.
        assert!(windowed.pi(0).max_coeff_diff(bare.pi(0)).unwrap() < 1e-9);
        // The corrections differ: a'(0) = 1/4 rescales the first one.
        let scaled = bare.pi(1).scale_scalar(&cf(0.25));
        assert!(windowed.pi(1).max_coeff_diff(&scaled).unwrap() < 1e-9);
        // Order zero of the windowed intertwining vanishes outright. From
        // order one on, the commutator keeps tau coefficients proportional
        // to the higher window derivatives, which the tau = 0 slices cannot
        // cancel: the report must show a bounded, order-one defect there,
        // not quadrature noise.
        let inter = check_intertwining(&windowed, &family, Some(&filt)).unwrap();
        assert!(inter.per_order[0] < 1e-10);
        assert!(
            inter.per_order[1] > 1e-2 && inter.per_order[1] < 10.0,
            "slice defect {:.3e}",
            inter.per_order[1]
        );
    }

    #[test]
    fn quadrature_gives_up_when_an_eigenvalue_hugs_the_contour() {
        // Second eigenvalue 2.001: off the window endpoints, but so close
        // to the circle that trapezoid sums cannot settle within the
        // doubling budget.
        let p0 = cmat(&[&[(1.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (2.001, 0.0)]]);
        let mut orders = vec![p0];
        orders.resize(3, SquareMatrix::zero(2));
        let family = OperatorFamily::from_orders(0.0, orders, (0.0, 2.0), rat(1)).unwrap();
        let r = projector_expansion(&family, 1, &gap_contour(&family), None);
        assert!(matches!(r, Err(Error::QuadratureNotConverged(_))));
    }

    #[test]
    fn growth_report_needs_enough_orders_and_nonzero_norms() {
        let family = rotating_family(6);
        let pi = projector_expansion(&family, 3, &gap_contour(&family), None).unwrap();
        let short = growth_report(&pi, &rat(1), &rat(1));
        assert!(matches!(short, Err(Error::InsufficientData(_))));
        // Constant families have vanishing corrections: every fit point is
        // skipped as a zero and the fit reports the shortage.
        let flat = constant_family(7);
        let pi = projector_expansion(&flat, 7, &gap_contour(&flat), None).unwrap();
        let degenerate = growth_report(&pi, &rat(1), &rat(1));
        assert!(matches!(degenerate, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn family_json_round_trips() {
        let family = rotating_family(4);
        let v = family.to_json();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["gap"][1], 2.0);
        let back = OperatorFamily::from_json(&v).unwrap();
        assert_eq!(back.t_jet().max_coeff_diff(family.t_jet()).unwrap(), 0.0);
        assert_eq!(back.gap(), family.gap());
        assert_eq!(back.gevrey_s(), family.gevrey_s());
    }

    #[test]
    fn filter_json_round_trips() {
        let filt = FilterSymbol::synthetic(&rat(2), 0.25, 5).unwrap();
        let back = FilterSymbol::from_json(&filt.to_json()).unwrap();
        assert_eq!(back.tau0(), filt.tau0());
        assert_eq!(back.sigma(), filt.sigma());
        assert_eq!(back.tau_jet().max_coeff_diff(filt.tau_jet()).unwrap(), 0.0);
    }

    #[test]
    fn expansion_json_carries_norms_and_residuals() {
        let family = constant_family(2);
        let pi = projector_expansion(&family, 1, &gap_contour(&family), None).unwrap();
        let v = pi.to_json();
        assert_eq!(v["order"], 1);
        assert_eq!(v["nodes"], DEFAULT_NODES);
        assert!(v["residuals"]["idempotency"].as_f64().unwrap() < QUADRATURE_TOL);
        assert_eq!(v["pi"].as_array().unwrap().len(), 2);
    }
}
