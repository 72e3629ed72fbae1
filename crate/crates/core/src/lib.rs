//! Ground-state Fisher-information metrology for a one-dimensional spin-1/2
//! chain with nearest-neighbour hopping, power-law ZZ interactions and a
//! linear (Stark) field, restricted to a fixed number of excitations.
//!
//! The crate is organised bottom-up:
//!
//! - [`basis`]: fixed-excitation sector enumeration and combinadic ranking.
//! - [`hamiltonian`]: matrix-free sector Hamiltonian.
//! - [`eigensolve`]: Lanczos / dense lowest eigenpairs and spectral gap.
//! - [`metrology`]: fidelity susceptibility, QFI and computational-basis CFI.
//! - [`criticality`]: peak search, power-law fits, finite-size-scaling collapse.
//! - [`oracle`]: brute-force Pauli-product reference implementations.
//! - [`experiment`]: configured sweeps, CSV records and the analysis pipeline.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod criticality;
pub mod eigensolve;
pub mod error;
pub mod experiment;
pub mod hamiltonian;
pub mod metrology;
pub mod oracle;

pub use basis::SectorBasis;
pub use error::{Error, Result};
pub use hamiltonian::{Eta, ProbeParams, SectorOperator};
