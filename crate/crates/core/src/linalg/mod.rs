//! Dense matrix kernels shared by every solver.

mod decomp;
mod matrix;
pub mod mtx;

pub use decomp::{
    default_rtol, jacobi_svd, null_space, pinv, qr_thin, singular_values, solve_shifted_gram,
    solve_spd_shifted, spectral_norm, svd_full, CholeskyFactor, SvdTriple, ThinQr, SVD_MAX_ITER,
};
pub use matrix::{add, axpy, dist, dot, norm2, scale, sub, DenseMatrix};
