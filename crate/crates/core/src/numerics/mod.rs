//! Numerical foundation: special functions, SPD matrices, quadrature and
//! the deterministic random-number contract.

pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod special;

pub use linalg::SpdMatrix;
pub use rng::RngStream;
pub use special::{
    chisq_upper_tail, chisq_upper_tail_ln, ln_normal_cdf, log_gamma, normal_cdf, normal_quantile,
};
