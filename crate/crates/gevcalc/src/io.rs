//! JSON interchange for jets and formal symbols, plus small file helpers.
//!
//! The schemas are documented in `docs/schemas.md` and shared by the
//! command line, the fixtures, and external tooling. Scalars travel as the
//! canonical element strings of their backend (`"3/4+1/2*i"` exact,
//! `"0.75+0.5*i"` float), so a file states unambiguously which backend
//! wrote it and reloads bit-identically on that backend. Matrix
//! coefficients are nested row-major arrays of element strings.
//!
//! Emission order is deterministic: jet entries are sorted by the storage
//! layout (graded, then lexicographic), and zero coefficients are omitted.

use crate::error::{Error, Result};
use crate::gevrey::GevreyParams;
use crate::jet::{Jet, MultiIndex, VarSplit};
use crate::ring::{rat_from_str, rat_to_str, Ring, Scalar};
use crate::symbol::FormalSymbol;
use serde_json::{json, Map, Value};
use std::path::Path;

/// Coefficient shapes a schema can name: `()` for scalars (JSON `null`)
/// and the dimension for square matrices.
pub trait ShapeCode: Sized {
    fn shape_to_json(&self) -> Value;
    fn shape_from_json(v: &Value) -> Result<Self>;
}

impl ShapeCode for () {
    fn shape_to_json(&self) -> Value {
        Value::Null
    }

    fn shape_from_json(v: &Value) -> Result<Self> {
        if v.is_null() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "scalar jets use null shape, got {v}"
            )))
        }
    }
}

impl ShapeCode for usize {
    fn shape_to_json(&self) -> Value {
        json!(self)
    }

    fn shape_from_json(v: &Value) -> Result<Self> {
        v.as_u64()
            .filter(|d| *d > 0)
            .map(|d| d as usize)
            .ok_or_else(|| {
                Error::Validation(format!(
                    "matrix jets use a positive integer shape, got {v}"
                ))
            })
    }
}

/// Serializes a jet: base point, variable split, storage and valid orders,
/// and the nonzero coefficients in layout order.
pub fn jet_to_json<R: Ring>(jet: &Jet<R>) -> Value
where
    R::Shape: ShapeCode,
{
    let entries: Vec<Value> = jet
        .iter_valid()
        .filter(|(_, c)| !c.is_zero())
        .map(|(idx, c)| json!([idx.0, c.to_json()]))
        .collect();
    json!({
        "split": [jet.split().n_x, jet.split().n_xi],
        "base": jet
            .base()
            .iter()
            .map(|b| Value::String(b.to_element_string()))
            .collect::<Vec<_>>(),
        "shape": jet.shape().shape_to_json(),
        "order": jet.order(),
        "valid": jet.valid(),
        "entries": entries,
    })
}

pub fn jet_from_json<R: Ring>(v: &Value) -> Result<Jet<R>>
where
    R::Shape: ShapeCode,
{
    let obj = as_object(v, "jet")?;
    let split_v = field(obj, "split", "jet")?
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| Error::Validation("\"split\" must be a pair [n_x, n_xi]".into()))?;
    let part = |i: usize| {
        split_v[i]
            .as_u64()
            .ok_or_else(|| Error::Validation("split entries must be nonnegative integers".into()))
    };
    let split = VarSplit::new(part(0)? as usize, part(1)? as usize)?;
    let base_v = field(obj, "base", "jet")?
        .as_array()
        .ok_or_else(|| Error::Validation("\"base\" must be an array of element strings".into()))?;
    let mut base = Vec::with_capacity(base_v.len());
    for b in base_v {
        let s = b
            .as_str()
            .ok_or_else(|| Error::Validation("base entries must be element strings".into()))?;
        base.push(R::S::parse_element_string(s)?);
    }
    let shape = R::Shape::shape_from_json(field(obj, "shape", "jet")?)?;
    let order = u32_field(obj, "order", "jet")?;
    let valid = u32_field(obj, "valid", "jet")?;
    let entries_v = field(obj, "entries", "jet")?
        .as_array()
        .ok_or_else(|| Error::Validation("\"entries\" must be an array".into()))?;
    let mut entries = Vec::with_capacity(entries_v.len());
    for e in entries_v {
        let pair = e
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Validation("each entry must be [index, coefficient]".into()))?;
        let idx_v = pair[0]
            .as_array()
            .ok_or_else(|| Error::Validation("entry indices must be arrays".into()))?;
        let mut idx = Vec::with_capacity(idx_v.len());
        for d in idx_v {
            idx.push(d.as_u64().ok_or_else(|| {
                Error::Validation("index components must be nonnegative integers".into())
            })? as u32);
        }
        entries.push((MultiIndex(idx), R::from_json(&pair[1])?));
    }
    Jet::from_parts(split, base, shape, order, valid, entries)
}

/// Serializes a formal symbol: Gevrey parameters, highest h-order, and one
/// jet per h-coefficient.
pub fn symbol_to_json<R: Ring>(sym: &FormalSymbol<R>) -> Value
where
    R::Shape: ShapeCode,
{
    json!({
        "gevrey": {
            "s": rat_to_str(sym.gevrey().s()),
            "sigma": rat_to_str(sym.gevrey().sigma()),
        },
        "N": sym.h_order(),
        "coeffs": sym.coeffs().iter().map(jet_to_json).collect::<Vec<_>>(),
    })
}

pub fn symbol_from_json<R: Ring>(v: &Value) -> Result<FormalSymbol<R>>
where
    R::Shape: ShapeCode,
{
    let obj = as_object(v, "symbol")?;
    let gevrey_v = as_object(field(obj, "gevrey", "symbol")?, "gevrey")?;
    let rat_of = |key: &str| {
        gevrey_v
            .get(key)
            .and_then(Value::as_str)
            .ok_or_else(|| {
                Error::Validation(format!("\"gevrey\" needs a rational string {key:?}"))
            })
            .and_then(rat_from_str)
    };
    let params = GevreyParams::new(rat_of("s")?, rat_of("sigma")?)?;
    let n = u32_field(obj, "N", "symbol")?;
    let coeffs_v = field(obj, "coeffs", "symbol")?
        .as_array()
        .ok_or_else(|| Error::Validation("\"coeffs\" must be an array of jets".into()))?;
    let mut coeffs = Vec::with_capacity(coeffs_v.len());
    for c in coeffs_v {
        coeffs.push(jet_from_json(c)?);
    }
    if coeffs.len() != n as usize + 1 {
        return Err(Error::Validation(format!(
            "symbol declares N = {n} but carries {} coefficients",
            coeffs.len()
        )));
    }
    FormalSymbol::new(params, coeffs)
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes pretty-printed JSON with a trailing newline, the byte-stable
/// format every emitter in the crate uses.
pub fn write_json(path: &Path, v: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    Ok(std::fs::write(path, text)?)
}

fn as_object<'v>(v: &'v Value, what: &str) -> Result<&'v Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::Validation(format!("expected a {what} object, got {v}")))
}

fn field<'v>(obj: &'v Map<String, Value>, name: &str, what: &str) -> Result<&'v Value> {
    obj.get(name)
        .ok_or_else(|| Error::Validation(format!("{what} is missing \"{name}\"")))
}

fn u32_field(obj: &Map<String, Value>, name: &str, what: &str) -> Result<u32> {
    field(obj, name, what)?
        .as_u64()
        .filter(|n| *n <= u32::MAX as u64)
        .map(|n| n as u32)
        .ok_or_else(|| Error::Validation(format!("{what} field \"{name}\" must be a small nonnegative integer")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{ComplexFloat, GaussianRational, SquareMatrix};

    type Q = GaussianRational;

    fn q(n: i64) -> Q {
        <Q as Scalar>::from_i64(n)
    }

    #[test]
    fn scalar_jet_round_trips_exactly() {
        let split = VarSplit::new(1, 1).unwrap();
        let x: Jet<Q> = Jet::coordinate(split, vec![q(0), q(0)], (), 3, 0).unwrap();
        let xi = Jet::coordinate(split, vec![q(0), q(0)], (), 3, 1).unwrap();
        let jet = x.mul(&xi).unwrap().add(&x).unwrap();
        let v = jet_to_json(&jet);
        let back: Jet<Q> = jet_from_json(&v).unwrap();
        assert_eq!(back.max_coeff_diff(&jet).unwrap(), 0.0);
        assert_eq!(back.valid(), jet.valid());
        assert_eq!(back.order(), jet.order());
    }

    #[test]
    fn zero_coefficients_are_omitted() {
        let split = VarSplit::new(1, 1).unwrap();
        let x: Jet<Q> = Jet::coordinate(split, vec![q(0), q(0)], (), 4, 0).unwrap();
        let v = jet_to_json(&x);
        let entries = v["entries"].as_array().unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0][0], json!([1, 0]));
    }

    #[test]
    fn matrix_jet_round_trips_on_the_float_backend() {
        let split = VarSplit::new(1, 0).unwrap();
        let mut m = SquareMatrix::zero(2);
        m.set(0, 1, ComplexFloat::new(0.5, -1.25));
        let jet = Jet::from_parts(
            split,
            vec![ComplexFloat::new(0.0, 0.0)],
            2,
            2,
            2,
            vec![(MultiIndex(vec![1]), m)],
        )
        .unwrap();
        let v = jet_to_json(&jet);
        assert_eq!(v["shape"], 2);
        let back: Jet<SquareMatrix<ComplexFloat>> = jet_from_json(&v).unwrap();
        assert_eq!(back.max_coeff_diff(&jet).unwrap(), 0.0);
    }

    #[test]
    fn symbol_round_trips_with_gevrey_parameters() {
        let split = VarSplit::new(1, 1).unwrap();
        let x: Jet<Q> = Jet::coordinate(split, vec![q(0), q(0)], (), 3, 0).unwrap();
        let one = Jet::constant(split, vec![q(0), q(0)], 3, q(1)).unwrap();
        let sym = FormalSymbol::new(
            GevreyParams::from_integers(2, 1).unwrap(),
            vec![one.add(&x).unwrap(), x],
        )
        .unwrap();
        let v = symbol_to_json(&sym);
        assert_eq!(v["N"], 1);
        let back: FormalSymbol<Q> = symbol_from_json(&v).unwrap();
        assert_eq!(back.gevrey(), sym.gevrey());
        assert_eq!(back.h_order(), 1);
        for k in 0..=1 {
            assert_eq!(
                back.coeff(k).max_coeff_diff(sym.coeff(k)).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn malformed_documents_name_the_violation() {
        let missing: Result<Jet<Q>> = jet_from_json(&json!({"split": [1, 1]}));
        assert!(matches!(missing, Err(Error::Validation(_))));
        let bad_n = json!({
            "gevrey": {"s": "1", "sigma": "1"},
            "N": 3,
            "coeffs": [],
        });
        let short: Result<FormalSymbol<Q>> = symbol_from_json(&bad_n);
        assert!(matches!(short, Err(Error::Validation(_))));
    }

    #[test]
    fn files_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("jet.json");
        let split = VarSplit::new(0, 1).unwrap();
        let xi: Jet<Q> = Jet::coordinate(split, vec![q(0)], (), 2, 0).unwrap();
        write_json(&path, &jet_to_json(&xi)).unwrap();
        let v = read_json(&path).unwrap();
        let back: Jet<Q> = jet_from_json(&v).unwrap();
        assert_eq!(back.max_coeff_diff(&xi).unwrap(), 0.0);
    }
}
