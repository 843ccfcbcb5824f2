//! Finite truncations of infinite matrices with off-diagonal decay.
//!
//! The crate builds operators on finite windows of a lattice `Λ = G·Z^d`, inverts them with
//! the Neumann series of `Id − AA*/‖A‖²`, evaluates explicit inverse-decay bounds
//! (Demko band bound, Jaffard bound with explicit constants, and the φ-growth bound) and checks
//! those bounds entrywise against computed inverses.
//!
//! Module map:
//! - [`lattice`]: lattices, index windows, distances and the summability constant `m_ε`.
//! - [`phi`]: admissible rate functions φ and their inverses.
//! - [`envelope`]: decay envelopes, membership constants and log-linear rate fits.
//! - [`operator`]: dense complex operators, norms, Neumann and direct inversion.
//! - [`bounds`]: closed-form inverse-decay bounds.
//! - [`workbench`]: generators, end-to-end experiments and truncation studies.
//! - [`matrix_io`]: CSV and binary matrix files.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod envelope;
pub mod error;
pub mod lattice;
pub mod matrix_io;
pub mod operator;
pub mod phi;
pub mod workbench;

pub use error::{Error, Result};
pub use num_complex::Complex64;
