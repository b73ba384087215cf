//! Exact symbol calculus for covariant Weyl quantization on vector bundles
//! over pseudo-Riemannian manifolds.
//!
//! The crate is built around canonicalized tensor expressions with exact
//! rational coefficients. On top of those it provides horizontal and
//! vertical derivatives on phase-space symbols, the star-product expansion
//! through third order with its middle-bundle curvature insertions,
//! quantization-scheme shifts, formal adjoints, and the dictionary between
//! polynomial symbols and second-order differential operators.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod coeff;
pub mod expr;
pub mod factor;
pub mod head;
pub mod identities;
pub mod index;
pub mod lang;
pub mod quantize;
pub mod star;
pub mod symbol;

pub use coeff::{Coefficient, GammaPoly, Rational};
pub use expr::{ExprError, TensorExpr, Term};
pub use factor::TensorFactor;
pub use head::{GenericHead, Head, SlotSig};
pub use index::{BundleId, IndexKind, IndexSlot, Label, Variance, COTANGENT};
pub use lang::{parse, parse_expr, parse_symbol, print_expr, print_symbol, Format, LangError, Parsed};
pub use quantize::{
    catalog, dequantize, quantize, verify_catalog, verify_catalog_entry,
    verify_catalog_entry_at, CatalogEntry, CatalogParams, CatalogReport, QuantizeError,
    RouteReport, SecondOrderOperator,
};
pub use star::{moyal_bracket, star, star_order, tau_shift, GammaValue, StarError, StarOptions};
pub use symbol::{GradedSymbol, Signature, Wiring};
