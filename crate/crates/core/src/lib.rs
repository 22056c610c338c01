//! Numerical laboratory for active scalar transport on the periodic 2D torus.
//!
//! The crate is organized around a pseudospectral substrate ([`spectral`]),
//! the norms and functionals used to quantify regularity ([`norms`]),
//! dyadic decomposition machinery ([`harmonic`]), Fourier-multiplier
//! velocity laws ([`velocity`]), time integrators for the two model
//! classes ([`solver`]) and twin-solution stability experiments
//! ([`stability`]).

pub mod error;
pub mod harmonic;
pub mod initial;
pub mod norms;
pub mod solver;
pub mod spectral;
pub mod stability;
pub mod velocity;

pub use error::{Error, Result};
pub use spectral::{ScalarField, SpectralField, TorusGrid, VectorField};
