//! C ABI over the symbol calculus engine.
//!
//! Symbols cross the boundary as JSON documents in the engine's schemas
//! (see docs/schemas.md in the repository root) and live behind opaque
//! handles afterwards; every function returns a [`GcStatus`] and reports
//! details through a thread-local message retrieved with [`gc_last_error`].
//! Symbol handles use the exact backend, so algebraic identities hold
//! bit-for-bit; operator families and projector expansions are
//! double-precision by construction.
//!
//! Ownership is strict: `*_free` releases handles, [`gc_string_free`]
//! releases every `char*` the library hands out. Handles are not
//! thread-safe; share them across threads only behind a caller-side lock.
//! A panic anywhere inside the library is caught at the boundary and
//! surfaced as [`GcStatus::Panic`] instead of unwinding into C.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gevcalc::adiabatic::{
    check_projector_identity, projector_expansion, Contour, OperatorFamily, ProjectorExpansion,
    DEFAULT_NODES,
};
use gevcalc::io::{symbol_from_json, symbol_to_json};
use gevcalc::ring::{rat_from_str, GaussianRational, Scalar};
use gevcalc::symbol::{FormalSymbol, Side};
use gevcalc::Error;

/// Result classification every entry point returns. The numeric values
/// match the engine's process exit codes where one exists.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GcStatus {
    /// The call succeeded.
    Ok = 0,
    /// Inputs violated a documented precondition (bad JSON, null pointer,
    /// non-elliptic symbol, malformed rational, ...).
    Validation = 2,
    /// A numerical method gave up: spectrum on the contour or quadrature
    /// refusing to converge.
    Numerical = 3,
    /// The request needs more jet or h orders than the data stores.
    Exhausted = 4,
    /// An internal panic was caught at the boundary; state is consistent
    /// but the operation did not happen.
    Panic = 5,
}

/// Which inverse [`gc_symbol_parametrix`] constructs.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GcSide {
    Left = 0,
    Right = 1,
    /// Build both, check they agree, return the shared value.
    TwoSided = 2,
}

/// A formal symbol with exact coefficients.
pub struct GcSymbol(FormalSymbol<GaussianRational>);

/// A finite-dimensional Hermitian operator family.
pub struct GcFamily(OperatorFamily);

/// A spectral projector expansion produced from a family.
pub struct GcExpansion(ProjectorExpansion);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized = msg.replace('\0', " ");
    LAST_ERROR.with(|cell| {
        *cell.borrow_mut() = CString::new(sanitized).expect("NULs were stripped");
    });
}

fn status_of(e: &Error) -> GcStatus {
    match e.exit_code() {
        3 => GcStatus::Numerical,
        4 => GcStatus::Exhausted,
        _ => GcStatus::Validation,
    }
}

/// Runs a fallible body under a panic guard and stores the outcome in
/// `out`. A null `out` is itself a validation failure.
fn guarded<T>(out: *mut T, body: impl FnOnce() -> gevcalc::Result<T>) -> GcStatus {
    if out.is_null() {
        set_error("output pointer is null");
        return GcStatus::Validation;
    }
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(value)) => {
            // Safety: null was rejected above; the caller promised a live
            // destination for exactly one T.
            unsafe { out.write(value) };
            GcStatus::Ok
        }
        Ok(Err(e)) => {
            set_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic caught at the library boundary");
            GcStatus::Panic
        }
    }
}

/// # Safety
/// `ptr` must be null or a NUL-terminated string valid for the call.
unsafe fn cstr<'a>(ptr: *const c_char, what: &str) -> gevcalc::Result<&'a str> {
    if ptr.is_null() {
        return Err(Error::Validation(format!("{what} pointer is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Error::Validation(format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `ptr` must be null or a handle previously returned by this library and
/// not yet freed.
unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> gevcalc::Result<&'a T> {
    ptr.as_ref()
        .ok_or_else(|| Error::Validation(format!("{what} handle is null")))
}

fn export_string(s: String) -> gevcalc::Result<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Error::Validation("serialized text contained a NUL byte".into()))
}

/// The engine version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn gc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn gc_last_error() -> *const c_char {
    LAST_ERROR.with(|cell| cell.borrow().as_ptr())
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a pointer obtained from a `char**` output of this
/// library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn gc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a symbol document (exact backend) into a fresh handle.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_symbol_from_json(
    json: *const c_char,
    out: *mut *mut GcSymbol,
) -> GcStatus {
    guarded(out, || {
        let text = cstr(json, "symbol JSON")?;
        let value: serde_json::Value = serde_json::from_str(text)?;
        let symbol = symbol_from_json::<GaussianRational>(&value)?;
        Ok(Box::into_raw(Box::new(GcSymbol(symbol))))
    })
}

/// Serializes a symbol handle back to its JSON document. The caller owns
/// the returned string and frees it with [`gc_string_free`].
///
/// # Safety
/// `sym` must be a live symbol handle; `out` must point to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_symbol_to_json(
    sym: *const GcSymbol,
    out: *mut *mut c_char,
) -> GcStatus {
    guarded(out, || {
        let sym = handle(sym, "symbol")?;
        let mut text = serde_json::to_string_pretty(&symbol_to_json(&sym.0))?;
        text.push('\n');
        export_string(text)
    })
}

/// Highest h-order the symbol stores.
///
/// # Safety
/// `sym` must be a live symbol handle; `out` must point to writable storage
/// for one u32.
#[no_mangle]
pub unsafe extern "C" fn gc_symbol_h_order(sym: *const GcSymbol, out: *mut u32) -> GcStatus {
    guarded(out, || Ok(handle(sym, "symbol")?.0.h_order()))
}

/// Composes `p` then `q` to the requested h-order.
///
/// # Safety
/// `p` and `q` must be live symbol handles; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_symbol_sharp(
    p: *const GcSymbol,
    q: *const GcSymbol,
    order: u32,
    out: *mut *mut GcSymbol,
) -> GcStatus {
    guarded(out, || {
        let p = handle(p, "left symbol")?;
        let q = handle(q, "right symbol")?;
        let composed = p.0.sharp(&q.0, order)?.symbol;
        Ok(Box::into_raw(Box::new(GcSymbol(composed))))
    })
}

/// Inverts an elliptic symbol order by order.
///
/// # Safety
/// `p` must be a live symbol handle; `out` must point to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_symbol_parametrix(
    p: *const GcSymbol,
    order: u32,
    side: GcSide,
    out: *mut *mut GcSymbol,
) -> GcStatus {
    guarded(out, || {
        let p = handle(p, "symbol")?;
        let side = match side {
            GcSide::Left => Side::Left,
            GcSide::Right => Side::Right,
            GcSide::TwoSided => Side::TwoSided,
        };
        let q = p.0.parametrix(order, side)?;
        Ok(Box::into_raw(Box::new(GcSymbol(q))))
    })
}

/// Evaluates the truncated sum at semiclassical parameter `h` (rational
/// string) with growth radius `radius`, at the symbol's base point. Writes
/// the exact value as an element string to `value_out` (caller frees) and
/// the truncation cutoff actually used to `cutoff_out` (may be null).
///
/// # Safety
/// `p` must be a live symbol handle; `h` and `radius` must be
/// NUL-terminated strings; `value_out` must point to writable storage for
/// one pointer; `cutoff_out` must be null or point to one u32.
#[no_mangle]
pub unsafe extern "C" fn gc_symbol_resum(
    p: *const GcSymbol,
    h: *const c_char,
    radius: *const c_char,
    value_out: *mut *mut c_char,
    cutoff_out: *mut u32,
) -> GcStatus {
    guarded(value_out, || {
        let p = handle(p, "symbol")?;
        let h = rat_from_str(cstr(h, "h")?)?;
        let radius = rat_from_str(cstr(radius, "radius")?)?;
        let origin = vec![<GaussianRational as Scalar>::zero(); p.0.split().total()];
        let outcome = p.0.resum(&h, &radius, &origin)?;
        if !cutoff_out.is_null() {
            cutoff_out.write(outcome.cutoff);
        }
        export_string(outcome.value.to_element_string())
    })
}

/// Releases a symbol handle.
///
/// # Safety
/// `sym` must be null or a live symbol handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn gc_symbol_free(sym: *mut GcSymbol) {
    if !sym.is_null() {
        drop(Box::from_raw(sym));
    }
}

/// Parses an operator family document into a fresh handle.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_family_from_json(
    json: *const c_char,
    out: *mut *mut GcFamily,
) -> GcStatus {
    guarded(out, || {
        let text = cstr(json, "family JSON")?;
        let value: serde_json::Value = serde_json::from_str(text)?;
        Ok(Box::into_raw(Box::new(GcFamily(OperatorFamily::from_json(
            &value,
        )?))))
    })
}

/// Matrix dimension of the family.
///
/// # Safety
/// `family` must be a live family handle; `out` must point to one usize.
#[no_mangle]
pub unsafe extern "C" fn gc_family_dim(family: *const GcFamily, out: *mut usize) -> GcStatus {
    guarded(out, || Ok(handle(family, "family")?.0.dim()))
}

/// Expands the spectral projector of the tracked eigenvalue group to the
/// requested h-order. `nodes` is the initial contour node count; pass 0 for
/// the default. No spectral filter is applied through this interface.
///
/// # Safety
/// `family` must be a live family handle; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_family_expand(
    family: *const GcFamily,
    order: u32,
    nodes: u32,
    out: *mut *mut GcExpansion,
) -> GcStatus {
    guarded(out, || {
        let family = handle(family, "family")?;
        let nodes = if nodes == 0 { DEFAULT_NODES } else { nodes };
        let contour = Contour::for_gap(family.0.gap(), nodes)?;
        let pi = projector_expansion(&family.0, order, &contour, None)?;
        Ok(Box::into_raw(Box::new(GcExpansion(pi))))
    })
}

/// Serializes an expansion to its JSON document. The caller owns the
/// returned string and frees it with [`gc_string_free`].
///
/// # Safety
/// `pi` must be a live expansion handle; `out` must point to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gc_expansion_to_json(
    pi: *const GcExpansion,
    out: *mut *mut c_char,
) -> GcStatus {
    guarded(out, || {
        let pi = handle(pi, "expansion")?;
        let mut text = serde_json::to_string_pretty(&pi.0.to_json())?;
        text.push('\n');
        export_string(text)
    })
}

/// Number of projector corrections the expansion holds (its h-order).
///
/// # Safety
/// `pi` must be a live expansion handle; `out` must point to one u32.
#[no_mangle]
pub unsafe extern "C" fn gc_expansion_order(pi: *const GcExpansion, out: *mut u32) -> GcStatus {
    guarded(out, || Ok(handle(pi, "expansion")?.0.order()))
}

/// Worst residual of the order-by-order projector identity, the headline
/// consistency diagnostic for an expansion.
///
/// # Safety
/// `pi` must be a live expansion handle; `out` must point to one double.
#[no_mangle]
pub unsafe extern "C" fn gc_expansion_identity_residual(
    pi: *const GcExpansion,
    out: *mut f64,
) -> GcStatus {
    guarded(out, || {
        let pi = handle(pi, "expansion")?;
        Ok(check_projector_identity(&pi.0).max_residual)
    })
}

/// Releases a family handle.
///
/// # Safety
/// `family` must be null or a live family handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn gc_family_free(family: *mut GcFamily) {
    if !family.is_null() {
        drop(Box::from_raw(family));
    }
}

/// Releases an expansion handle.
///
/// # Safety
/// `pi` must be null or a live expansion handle, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn gc_expansion_free(pi: *mut GcExpansion) {
    if !pi.is_null() {
        drop(Box::from_raw(pi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CString;
    use std::ptr;

    fn cstring(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take_string(ptr: *mut c_char) -> String {
        let text = CStr::from_ptr(ptr).to_str().unwrap().to_string();
        gc_string_free(ptr);
        text
    }

    fn constant_symbol_json() -> CString {
        let split = gevcalc::jet::VarSplit::new(1, 1).unwrap();
        let base = vec![
            <GaussianRational as Scalar>::zero(),
            <GaussianRational as Scalar>::zero(),
        ];
        let params = gevcalc::gevrey::GevreyParams::from_integers(1, 1).unwrap();
        let zero_jet = gevcalc::jet::Jet::constant(
            split,
            base.clone(),
            6,
            <GaussianRational as Scalar>::zero(),
        )
        .unwrap();
        let coeffs = vec![
            gevcalc::jet::Jet::constant(split, base, 6, <GaussianRational as Scalar>::from_i64(2))
                .unwrap(),
            zero_jet.clone(),
            zero_jet,
        ];
        let sym = FormalSymbol::new(params, coeffs).unwrap();
        cstring(&serde_json::to_string(&symbol_to_json(&sym)).unwrap())
    }

    fn rotating_family_json() -> CString {
        let json = serde_json::json!({
            "dim": 2,
            "t0": 0.0,
            "t_jet": [
                [["1", "0"], ["0", "-1"]],
                [["0", "1"], ["1", "0"]],
                [["-0.5", "0"], ["0", "0.5"]],
                [["0", "-0.16666666666666666"], ["-0.16666666666666666", "0"]],
            ],
            "gap": [0.0, 2.0],
            "s": "1",
        });
        cstring(&serde_json::to_string(&json).unwrap())
    }

    #[test]
    fn symbols_round_trip_and_invert_through_the_boundary() {
        unsafe {
            let mut sym: *mut GcSymbol = ptr::null_mut();
            let status = gc_symbol_from_json(constant_symbol_json().as_ptr(), &mut sym);
            assert_eq!(status, GcStatus::Ok);

            let mut h_order = 99u32;
            assert_eq!(gc_symbol_h_order(sym, &mut h_order), GcStatus::Ok);
            assert_eq!(h_order, 2);

            let mut inv: *mut GcSymbol = ptr::null_mut();
            assert_eq!(
                gc_symbol_parametrix(sym, 3, GcSide::TwoSided, &mut inv),
                GcStatus::Ok
            );

            let mut text: *mut c_char = ptr::null_mut();
            assert_eq!(gc_symbol_to_json(inv, &mut text), GcStatus::Ok);
            let doc = take_string(text);
            let parsed: FormalSymbol<GaussianRational> =
                symbol_from_json(&serde_json::from_str(&doc).unwrap()).unwrap();
            let origin = [
                <GaussianRational as Scalar>::zero(),
                <GaussianRational as Scalar>::zero(),
            ];
            let half = Scalar::inv(&<GaussianRational as Scalar>::from_i64(2)).unwrap();
            assert_eq!(parsed.coeff(0).eval(&origin).unwrap(), half);

            let mut value: *mut c_char = ptr::null_mut();
            let mut cutoff = 0u32;
            let h = cstring("1/4");
            let radius = cstring("2");
            assert_eq!(
                gc_symbol_resum(sym, h.as_ptr(), radius.as_ptr(), &mut value, &mut cutoff),
                GcStatus::Ok
            );
            let value = take_string(value);
            assert_eq!(value, "2/1+0/1*i");
            assert_eq!(cutoff, 2, "Rh = 1/2 admits exactly two orders");

            gc_symbol_free(inv);
            gc_symbol_free(sym);
        }
    }

    #[test]
    fn families_expand_and_report_their_residual() {
        unsafe {
            let mut family: *mut GcFamily = ptr::null_mut();
            assert_eq!(
                gc_family_from_json(rotating_family_json().as_ptr(), &mut family),
                GcStatus::Ok
            );
            let mut dim = 0usize;
            assert_eq!(gc_family_dim(family, &mut dim), GcStatus::Ok);
            assert_eq!(dim, 2);

            let mut pi: *mut GcExpansion = ptr::null_mut();
            assert_eq!(gc_family_expand(family, 1, 0, &mut pi), GcStatus::Ok);
            let mut order = 0u32;
            assert_eq!(gc_expansion_order(pi, &mut order), GcStatus::Ok);
            assert_eq!(order, 1);

            let mut residual = f64::NAN;
            assert_eq!(
                gc_expansion_identity_residual(pi, &mut residual),
                GcStatus::Ok
            );
            assert!(residual < 1e-9, "projector identity residual {residual}");

            let mut text: *mut c_char = ptr::null_mut();
            assert_eq!(gc_expansion_to_json(pi, &mut text), GcStatus::Ok);
            let doc = take_string(text);
            let value: serde_json::Value = serde_json::from_str(&doc).unwrap();
            assert_eq!(value["order"], 1);

            gc_expansion_free(pi);
            gc_family_free(family);
        }
    }

    #[test]
    fn failures_classify_and_leave_a_message() {
        unsafe {
            let mut sym: *mut GcSymbol = ptr::null_mut();
            let bad = cstring("{\"not\": \"a symbol\"}");
            assert_eq!(
                gc_symbol_from_json(bad.as_ptr(), &mut sym),
                GcStatus::Validation
            );
            let msg = CStr::from_ptr(gc_last_error()).to_str().unwrap();
            assert!(!msg.is_empty());

            assert_eq!(
                gc_symbol_from_json(ptr::null(), &mut sym),
                GcStatus::Validation
            );
            assert_eq!(
                gc_symbol_h_order(ptr::null(), &mut 0u32),
                GcStatus::Validation
            );

            // Asking a 1-order symbol for a depth-20 inverse exhausts data.
            let mut ok_sym: *mut GcSymbol = ptr::null_mut();
            assert_eq!(
                gc_symbol_from_json(constant_symbol_json().as_ptr(), &mut ok_sym),
                GcStatus::Ok
            );
            let mut inv: *mut GcSymbol = ptr::null_mut();
            assert_eq!(
                gc_symbol_parametrix(ok_sym, 20, GcSide::Right, &mut inv),
                GcStatus::Exhausted
            );
            gc_symbol_free(ok_sym);
        }
    }
}
