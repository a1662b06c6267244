//! Exterior Dirichlet problem on the electrode surfaces.

pub mod coupling;
pub mod kernel;
pub mod operator;
pub mod solution;

pub use coupling::{
    patch_coupling_direct, patch_couplings_adjoint, patch_couplings_adjoint_many, patch_couplings_direct,
    patch_couplings_direct_along, CouplingMethod, PatchCouplings,
};
pub use operator::{assemble, BemOperator, SolverConfig};
pub use solution::{solve_dirichlet, DirichletSolution};
