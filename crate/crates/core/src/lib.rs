//! Random block Jacobi operators from the anisotropic XY chain in a random
//! transversal field.
//!
//! The crate assembles finite block Jacobi truncations, computes spectra,
//! densities of states and periodic (Floquet) band structure, propagates
//! modified transfer matrices and matrix Green functions, estimates full
//! Lyapunov spectra, checks the generalized Thouless formula, computes Lie
//! algebra ranks for the Fürstenberg group, estimates eigenfunction
//! correlators, and cross-checks everything against an exact many-body
//! diagonalization of the spin chain.

pub mod cli;
pub mod error;
pub mod furstenberg;
pub mod localization;
pub mod lyapunov;
pub mod model;
pub mod spectral;
pub mod transfer;
pub mod xy_oracle;

pub use error::{Error, Result};
pub use model::{
    assemble_block_jacobi, assemble_general, assemble_hat_form, sample_disorder, BlockEnsemble,
    BlockJacobiMatrix, DisorderRealization, HatBlockMatrix, ModelParams, RandomBlockEnsemble,
    SingleSiteDistribution, XyEnsemble,
};
pub use num_complex::Complex64;
