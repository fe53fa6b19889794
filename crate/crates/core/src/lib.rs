//! Semiclassical simulation of an all-optical control and readout chain for
//! superconducting qubits: optical downlink, qubit plant, Brillouin
//! microwave-to-optical uplink, detection and the experiment suite.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clifford;
pub mod detection;
pub mod downlink;
pub mod error;
pub mod experiments;
pub mod qubit;
pub mod signal;
pub mod transducer;

pub use error::{Error, Result};
