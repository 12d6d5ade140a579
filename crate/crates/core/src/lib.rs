#![doc = include_str!("../README.md")]

pub mod error;
pub mod estimators;
pub mod geig;
pub mod hamiltonian;
pub mod linalg;
pub mod models;
pub mod oracle;
pub mod statevec;
pub mod subspace;
pub mod workflows;

pub use error::{Error, Result};
pub use faer::c64;
pub use hamiltonian::{commutes, Pauli, PauliString, PauliSumHamiltonian, SymmetryOperator};
pub use statevec::{SpectralPropagator, StateVector};
