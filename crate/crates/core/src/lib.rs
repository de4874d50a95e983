//! Simulation of automatic atom-mediated feedback protecting Schrödinger-cat
//! states of a lossy microwave cavity.
//!
//! Layering, bottom up: [`fock`] and [`tensor`] (truncated Fock-space algebra
//! and labelled product spaces), [`channel`] (Kraus/superoperator maps),
//! [`dynamics`] (damping, Ramsey, dispersive, Jaynes–Cummings, C′ swap,
//! injection), [`protocol`] (probe/feedback cycle and runners), [`wigner`]
//! and [`metrics`] (diagnostics), [`persist`] (state files).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod dynamics;
pub mod error;
pub mod fock;
pub mod metrics;
pub mod persist;
pub mod protocol;
pub mod tensor;
pub mod wigner;

pub use error::{Error, Result};
