//! Nonlinear topological zero modes on a hybrid nonlinear/linear SSH chain.
//!
//! Modules follow the workflow: build the chain ([`lattice`]), solve the
//! nonlinear eigenproblem ([`nl_eigen`]) or construct zero modes exactly
//! ([`zeromode`]), shape plateaus ([`designer`]), certify topology
//! ([`localizer`]) and excite modes in a driven-dissipative setting
//! ([`dynamics`]).

pub mod designer;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod localizer;
pub mod nl_eigen;
pub mod zeromode;

pub use error::{Error, Result};
pub use lattice::{
    build_hamiltonian, intensity, position_operator, Couplings, HamiltonianMatrix, LatticeSpec, SiteTag, StateVector,
    Sublattice, C64,
};
pub use nl_eigen::{solve_self_consistent, sweep_spectrum, Eigenpair, ModeSelect, SolverOptions, SpectrumSweep};
pub use zeromode::{construct_tzm, find_i2, plateau_height, RecurrenceProfile, Regime};
