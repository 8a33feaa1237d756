//! Galerkin discretisation and solution of the coupled Robin systems.

mod assembly;
mod forward;
mod linsolve;
mod sparse;

pub use assembly::{apply_nodal, assemble_rhs, assemble_system, assemble_terms, nodal_pairings, FluxField};
pub use forward::{
    solve_emission, solve_excitation, ForwardModel, ForwardOperators, ForwardState, SourceTerm, Trace,
};
pub use linsolve::{solve_linear, BandLu, LinearSolveReport, LinearSystem, MethodChoice, SolveMethod, SolverConfig};
pub use sparse::BlockCsr;

pub(crate) use sparse::{dot, norm};
