//! Noisy quantum-circuit simulation and analytics for algorithmic cooling.
//!
//! The crate models the cumulative effect of local two-qubit gate noise in a
//! deep circuit as one global depolarizing channel, `(1 - eta) U(rho) + eta I/d`
//! with `eta = p * n_tg * (1 - q)`, and applies that approximation to two
//! cooling protocols:
//!
//! - iterative two-sort algorithmic cooling (TSAC), whose noisy steady state
//!   is available in closed form ([`tsac`]);
//! - single-shot dynamic cooling with the mirror unitary ([`dc`]).
//!
//! Both are cross-checked against an exact gate-level density-matrix
//! simulator ([`sim`]) that applies Kraus noise after every CX.
//!
//! Qubit ordering is big-endian throughout: qubit 0 is the most significant
//! bit of a computational-basis index.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channels;
pub mod circuits;
pub mod dc;
pub mod error;
pub mod experiments;
pub mod gda;
pub mod linalg;
pub mod par;
pub mod sim;
pub mod tsac;

pub use error::{Error, Result};
pub use num_complex::Complex64;
