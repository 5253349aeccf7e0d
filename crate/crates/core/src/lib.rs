//! Spectral realization of the conformal Q-curvature increment operator on
//! the round sphere `S^n`, with the machinery around it: exact eigenvalue
//! identities, Kazdan–Warner integrals, the local Fredholm reduction and its
//! defect map.

pub mod basis;
pub mod error;
pub mod kw;
pub mod qops;
pub mod quadrature;
pub mod random;
pub mod solver;
pub mod spectra;
pub mod sphere2;

pub use basis::{first_harmonic, ZonalBasis, ZonalField};
pub use error::{Error, Result};
pub use spectra::{ExactRational, SphereParams};
