//! Dense linear algebra over labelled registers and scalar special functions.
//!
//! All entropic quantities are in bits.

mod distribution;
mod linalg;
mod special;

pub use distribution::{bsc_cond_entropy, cond_entropy, JointDistribution, Normalization};
pub use linalg::{
    basis, dagger, eye, herm_eig, hermitian_deviation, hermitian_part, kron, max_abs, outer,
    partial_trace, perturbed_log, rel_entropy, require_hermitian, spectrum_entropy, to_complex,
    trace_product_re, trace_re, ComplexMatrix, HermEig, RegisterShape, Scalar, HERMITIAN_TOL,
    PSD_TOL,
};
pub use special::{
    beta_quantile, beta_quantile_upper, binary_entropy, poisson_pmf, reg_inc_beta,
};
