//! Special functions: orthonormal polynomial families, Bessel `J_a`, Airy `Ai`.

mod airy;
mod bessel;
mod orthopoly;

pub use airy::{airy, airy_value, AIRY_DOMAIN};
pub use bessel::{bessel_j, bessel_j_pair, bessel_j_prime, bessel_j_value};
pub use orthopoly::{hermite_psi, jacobi, laguerre, OrthoFamily, OrthoValues};

/// A computed value with an absolute error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionValue {
    pub value: f64,
    pub abs_error: f64,
}

impl FunctionValue {
    pub fn new(value: f64, abs_error: f64) -> Self {
        Self { value, abs_error }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, abs_error: 0.0 }
    }
}
