//! Kernels, Nyström trace norms and rate-of-convergence experiments for the
//! determinantal point processes of the Gaussian, Laguerre and Jacobi unitary
//! ensembles and their sine, Airy and Bessel limits.

pub mod approx;
pub mod cli;
pub mod error;
pub mod factor;
pub mod harness;
pub mod kernels;
pub mod nystrom;
pub mod pointcount;
pub mod quadrature;
pub mod specfun;

pub use error::{Error, Result};
