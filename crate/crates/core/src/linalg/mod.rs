//! Small dense real linear algebra: exactly the factorizations the
//! constructions and weight projections need.

mod decomp;
mod lu;
mod matrix;

pub use decomp::{
    matrix_rank, orthonormal_complete, polar_orthogonal_projection, singular_value_clip, spectral_norm,
    svd, symmetric_eigen, symmetric_psd_sqrt, SvdFactors, SymmetricEigen,
};
pub(crate) use lu::complex_solve;
pub use lu::{determinant, inverse, solve, ComplexMatrix};
pub use matrix::{dot, norm2, Matrix};
