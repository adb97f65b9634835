//! Exact-numerics toolkit for symmetry-protected logical qubits encoded in
//! the degenerate ground space of small spin lattices.
//!
//! The crate builds the protection Hamiltonian and its row/column symmetry
//! operators as dense matrices, extracts the protected two-state basis with
//! a fixed phase convention, propagates states through time-dependent
//! interpolations and drive pulses, and classifies Pauli strings against
//! the symmetry sectors to predict which logical operation (and which noise
//! scaling) a perturbation induces.

pub mod build;
pub mod classifier;
pub mod dense;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod lattice;
pub mod protocols;
pub mod spectrum;

pub use build::{
    build_collective_field, build_pauli_string, build_protection_hamiltonian,
    build_protection_hamiltonian_scaled, build_symmetry_operators, SymmetryOperators,
};
pub use dense::{algebra_relation, AlgebraRelation, DenseOperator};
pub use dynamics::{
    default_dt, evolve_block, evolve_state, fidelity, AccuracyBudget, Envelope, EvolveOptions,
    PulseSpec, Schedule, StateVector,
};
pub use error::{Error, Result};
pub use lattice::{Axis, LatticeSpec, PauliString};
pub use spectrum::{
    diagonalize, extract_logical_basis, ground_splitting_scan, instantaneous_spectrum,
    LogicalBasis, SpectralData, SplittingScan,
};

use std::sync::Once;

static INIT: Once = Once::new();

/// Pin the BLAS backend to one thread.
///
/// Outer loops parallelize with rayon; a threaded BLAS underneath would
/// oversubscribe the cores and make results depend on its thread count.
/// Call before the first linear-algebra operation.
pub fn init_runtime() {
    INIT.call_once(|| {
        std::env::set_var("OPENBLAS_NUM_THREADS", "1");
        std::env::set_var("OMP_NUM_THREADS", "1");
    });
}
