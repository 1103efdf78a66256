//! Coherent-state machinery and numerical Weyl-law checks for the Dirichlet
//! Laplacian and the operator `H = -∂²₁ - e^{2x₁} Δ_x̃` on grid domains.
//!
//! The pipeline is:
//!
//! * [`window`] builds the mollifier `g` and its scaled copies `g^ε`, and
//!   evaluates the constants `c₁, c₂, c₃` that enter the symbol of `H`;
//! * [`domain`] represents a bounded domain as a masked uniform grid, with
//!   erosion, dilation and measure;
//! * [`operators`] assembles sparse symmetric finite-difference operators;
//! * [`eigen`] computes dense spectra and inertia-certified partial spectra;
//! * [`frame`] is a discrete coherent-state transform that is an exact
//!   Parseval frame, with symbol evaluation and the trace formula;
//! * [`weyl`] evaluates Riesz means, phase-space leading terms and remainder
//!   exponents;
//! * [`cli`] drives the experiments from the `cweyl` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod domain;
pub mod eigen;
pub mod error;
pub mod frame;
pub mod operators;
pub mod quadrature;
pub mod weyl;
pub mod window;

pub use domain::GridDomain;
pub use eigen::Spectrum;
pub use error::{Error, Result};
pub use frame::{CoherentFrame, PhaseSpaceFunction};
pub use operators::{DiscreteOperator, OperatorKind, SparseSymmetricMatrix};
pub use weyl::{ExponentFit, RieszCurve};
pub use window::{CConstants, Window};

/// Library version embedded in every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Formats a float with 17 significant digits, enough to round-trip an `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}
