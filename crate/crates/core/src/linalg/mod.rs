//! Numerical kernels: sparse storage and direct solvers, dense factorizations,
//! symmetric eigendecomposition and condition numbers.

mod dense;
mod factor;
mod sparse;

pub use dense::{
    cond2, dense_residual, dense_solve, sym_eig, sym_eig_jacobi, DenseLu, DenseMatrix, EigResult,
    JACOBI_MAX_ORDER,
};
pub use factor::{sparse_solve, BandLu, EnvelopeCholesky, Factorization};
pub use sparse::{dot, norm2, weighted_norm, SparseMatrix, TripletBuilder};
