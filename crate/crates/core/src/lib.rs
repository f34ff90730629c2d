//! Deterministic preparation of squeezed vacuum in a qubit-coupled oscillator
//! from sequences of Rabi interactions `exp(iu P⊗σ_x)` and `exp(iv X⊗σ_y)`.
//!
//! The crate simulates the protocol in a truncated Fock space, optimizes the
//! interaction strengths, propagates the protocol through Lindblad noise and
//! evaluates the figures of merit: squeezing in dB, fidelity to squeezed
//! vacuum and the homodyne Fisher information.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod cli;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod lindblad;
pub mod metrics;
pub mod optimizer;
pub mod protocol;

pub use error::{Error, Result};
