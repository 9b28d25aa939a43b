//! Spectral side of the operator: eigendecompositions, Bloch bands, the
//! transfer-matrix oracle, gap bounds and spectral calculus.

mod bands;
mod calculus;
mod cutoff;
mod decompose;
mod gap;
mod interpolation;
mod secular;

pub use bands::{band_sweep, theta_grid, BandStructure};
pub use calculus::{
    check_norm_inequalities, energy_norm_sq, fractional_apply, split_norms, NormReport, SplitNorms,
    SplitParameters,
};
pub use cutoff::{cutoff_test_functions, CutoffSample};
pub use decompose::{
    decompose, eigenvalues, EigenRequest, SpectralDecomposition, DENSE_LIMIT, RESIDUAL_TOL,
};
pub use gap::{sup_potential, verify_gap, GapReport, TOL_H_FLOOR};
pub use interpolation::{
    brute_force_minimality, c_theta, interpolation_identity_check, k_functional, scalar_brute_force,
    scalar_k, scalar_split_cost, InterpolationReport, LogGrid, MinimalityReport,
};
pub use secular::{edge_transfer, secular_bands, secular_determinant, SecularOptions, SecularRoots};
