//! Perfect state transfer of few-excitation states on small lattices:
//! Fock-basis enumeration, permutation targets, spectral synthesis of
//! Hamiltonians, a lattice model, time evolution and inverse design.

pub mod dynamics;
pub mod error;
pub mod fock_basis;
pub mod inverse_design;
pub mod lattice_model;
pub mod linalg;
pub mod permutation_targets;
pub mod presets;
pub mod spectral_synthesis;

pub use error::{PstError, Result};
