//! Engine for formal Gevrey semiclassical symbol calculus on jets.
//!
//! The crate composes truncated formal symbols (Moyal-type `#` product),
//! constructs elliptic parametrices order by order in the semiclassical
//! parameter, evaluates Gevrey pseudonorms and growth certificates with
//! exact rational arithmetic, and expands adiabatic spectral projectors of
//! finite-dimensional operator families via contour quadrature.
//!
//! Two scalar backends share every code path: exact Gaussian rationals
//! (bit-reproducible algebra, exact identity checks) and complex doubles
//! (analytic estimates involving irrational constants). Matrix-valued
//! coefficients are supported over either backend.

pub mod adiabatic;
pub mod cli;
pub mod error;
pub mod gevrey;
pub mod io;
pub mod jet;
pub mod ring;
pub mod symbol;

pub use error::{Error, Result};
