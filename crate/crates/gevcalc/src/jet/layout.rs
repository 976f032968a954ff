use crate::error::{Error, Result};
use num_bigint::BigUint;
use num_traits::One;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Hard ceiling on the total order of any jet. Keeps packed multi-index
/// arithmetic overflow-free (8 bits per component, sums of two indices stay
/// below 256) and bounds layout cache growth.
pub const MAX_ORDER: u32 = 60;

/// Hard ceiling on the number of variables (x and xi blocks combined).
pub const MAX_VARS: usize = 8;

/// Split of the variable list into x-type and xi-type blocks.
///
/// Derivatives in the first block cost `s`-type factorials in pseudonorms,
/// the second block `sigma`-type; the composition product differentiates the
/// left factor in xi and the right factor in x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarSplit {
    pub n_x: usize,
    pub n_xi: usize,
}

impl VarSplit {
    pub fn new(n_x: usize, n_xi: usize) -> Result<Self> {
        if n_x + n_xi == 0 || n_x + n_xi > MAX_VARS {
            return Err(Error::Validation(format!(
                "variable count {} out of range 1..={MAX_VARS}",
                n_x + n_xi
            )));
        }
        Ok(VarSplit { n_x, n_xi })
    }

    pub fn total(&self) -> usize {
        self.n_x + self.n_xi
    }
}

/// A multi-index over the full variable list (x block first, then xi block).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(len: usize) -> Self {
        MultiIndex(vec![0; len])
    }

    /// Unit index for variable `var`.
    pub fn unit(len: usize, var: usize) -> Self {
        let mut v = vec![0; len];
        v[var] = 1;
        MultiIndex(v)
    }

    /// An x-block index extended by zeros on the xi block.
    pub fn from_x_part(split: VarSplit, alpha: &[u32]) -> Self {
        let mut v = vec![0; split.total()];
        v[..split.n_x].copy_from_slice(alpha);
        MultiIndex(v)
    }

    /// A xi-block index extended by zeros on the x block.
    pub fn from_xi_part(split: VarSplit, beta: &[u32]) -> Self {
        let mut v = vec![0; split.total()];
        v[split.n_x..].copy_from_slice(beta);
        MultiIndex(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Total order |gamma|.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Order of the x block.
    pub fn x_order(&self, split: VarSplit) -> u32 {
        self.0[..split.n_x].iter().sum()
    }

    /// Order of the xi block.
    pub fn xi_order(&self, split: VarSplit) -> u32 {
        self.0[split.n_x..].iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.len(), o.len());
        MultiIndex(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference, `None` on underflow.
    pub fn checked_sub(&self, o: &Self) -> Option<Self> {
        debug_assert_eq!(self.len(), o.len());
        self.0
            .iter()
            .zip(&o.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<u32>>>()
            .map(MultiIndex)
    }

    /// True when every component of `self` is <= the matching one of `o`.
    pub fn le_componentwise(&self, o: &Self) -> bool {
        self.0.iter().zip(&o.0).all(|(a, b)| a <= b)
    }

    /// gamma! = product of component factorials.
    pub fn factorial(&self) -> BigUint {
        let mut acc = BigUint::one();
        for &c in &self.0 {
            acc *= crate::ring::factorial(c as u64);
        }
        acc
    }

    /// Packed key: 8 bits per component. Addition of packed keys equals
    /// packing of the componentwise sum as long as both orders stay within
    /// [`MAX_ORDER`], which every constructor enforces.
    pub fn packed(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &c)| acc | ((c as u64) << (8 * i)))
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Number of multi-indices of `n` variables with total order <= `d`,
/// i.e. C(d + n, n).
pub fn count_upto(n_vars: usize, d: u32) -> usize {
    let mut acc: usize = 1;
    for i in 1..=n_vars {
        acc = acc * (d as usize + i) / i;
    }
    acc
}

/// Shared enumeration of all multi-indices with total order <= `order`,
/// sorted by total order then lexicographically ascending.
///
/// The enumeration has the prefix property: the layout of order `V` is a
/// prefix of the layout of any order `M >= V` over the same split. Jet
/// operations exploit this to index operand coefficient vectors directly.
#[derive(Debug)]
pub struct JetLayout {
    pub split: VarSplit,
    pub order: u32,
    pub indices: Vec<MultiIndex>,
    pub degree: Vec<u32>,
    pub packed: Vec<u64>,
    pos: HashMap<u64, u32>,
    /// Positions with total order `d` occupy `degree_start[d]..degree_start[d+1]`.
    pub degree_start: Vec<usize>,
}

impl JetLayout {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of positions with total order <= `d`.
    pub fn len_upto(&self, d: u32) -> usize {
        self.degree_start[(d.min(self.order) + 1) as usize]
    }

    /// Position of a packed index, if stored.
    pub fn position(&self, packed: u64) -> Option<usize> {
        self.pos.get(&packed).map(|&p| p as usize)
    }
}

fn build_layout(split: VarSplit, order: u32) -> JetLayout {
    let n = split.total();
    let mut indices = Vec::with_capacity(count_upto(n, order));
    let mut degree_start = Vec::with_capacity(order as usize + 2);
    let mut scratch = vec![0u32; n];
    for d in 0..=order {
        degree_start.push(indices.len());
        enumerate_degree(d, 0, &mut scratch, &mut indices);
    }
    degree_start.push(indices.len());

    let degree: Vec<u32> = indices.iter().map(|i| i.order()).collect();
    let packed: Vec<u64> = indices.iter().map(|i| i.packed()).collect();
    let pos = packed
        .iter()
        .enumerate()
        .map(|(p, &k)| (k, p as u32))
        .collect();
    JetLayout {
        split,
        order,
        indices,
        degree,
        packed,
        pos,
        degree_start,
    }
}

fn enumerate_degree(remaining: u32, var: usize, scratch: &mut [u32], out: &mut Vec<MultiIndex>) {
    if var + 1 == scratch.len() {
        scratch[var] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for c in 0..=remaining {
        scratch[var] = c;
        enumerate_degree(remaining - c, var + 1, scratch, out);
    }
}

type LayoutCache = Mutex<HashMap<(VarSplit, u32), Arc<JetLayout>>>;

static CACHE: OnceLock<LayoutCache> = OnceLock::new();

/// Fetches (building on first use) the shared layout for a split and order.
///
/// Panics if the order or variable count violates the module ceilings;
/// public constructors validate before calling.
pub fn layout(split: VarSplit, order: u32) -> Arc<JetLayout> {
    assert!(order <= MAX_ORDER, "jet order {order} exceeds {MAX_ORDER}");
    assert!(
        (1..=MAX_VARS).contains(&split.total()),
        "variable count {} out of range",
        split.total()
    );
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("layout cache poisoned");
    guard
        .entry((split, order))
        .or_insert_with(|| Arc::new(build_layout(split, order)))
        .clone()
}
